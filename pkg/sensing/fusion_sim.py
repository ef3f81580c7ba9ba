"""Monte Carlo engine for the fusion center.

Trials are cut into fixed-size chunks; chunk ``i`` draws from the ``i``-th
child of ``SeedSequence(seed)``, so results depend on the seed and the chunk
size but never on how many worker processes run the chunks.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .bs_thresholds import block_map_decisions, common_law, sequential_decisions
from .dp_policy import DEFAULT_GRID_SIZE, CostMode, CostModel, policy_decisions, solve_backward, solve_one_threshold
from .exceptions import ContractViolation
from .fading_link import effective_config, sample_participants
from .order_stats import SensorEnsemble
from .scenario import Hypothesis, draw_slots

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 10_000


class DetectorKind(str, Enum):
    BS = "bs"
    BS_GENERALIZED = "bs-generalized"
    DP = "dp"
    ONE_THRESHOLD = "one-threshold"
    BLOCK_MAP = "block-map"
    GENIE = "genie"
    PRIOR_ONLY = "prior-only"


class SweepAxis(str, Enum):
    M = "M"
    K = "K"
    C = "c"
    SIGMA2_S = "sigma2_s"
    OMEGA = "omega"


class OrderedThresholdDetector:
    def __init__(self, config, generalized=False):
        self.config = config
        self.law = common_law(config)
        self.generalized = generalized
        self.kind = DetectorKind.BS_GENERALIZED if generalized else DetectorKind.BS

    def decide_batch(self, values, truth):
        return sequential_decisions(values, self.config, self.law, generalized=self.generalized)


class BlockMapDetector:
    kind = DetectorKind.BLOCK_MAP

    def __init__(self, config):
        self.config = config
        self.law = common_law(config)

    def decide_batch(self, values, truth):
        declared = block_map_decisions(values, self.config, self.law)
        return declared, np.full(len(declared), self.config.K)


class PolicyDetector:
    def __init__(self, config, policy, kind=DetectorKind.DP):
        if policy.K != config.K:
            raise ContractViolation(f"policy horizon {policy.K} does not match K={config.K}")
        self.config = config
        self.policy = policy
        self.ensemble = SensorEnsemble.from_config(config)
        self.kind = kind

    def decide_batch(self, values, truth):
        return policy_decisions(values, self.policy, self.ensemble, self.config.pi0)


class GenieDetector:
    kind = DetectorKind.GENIE

    def decide_batch(self, values, truth):
        return np.asarray(truth, dtype=np.int8), np.ones(len(truth), dtype=np.int64)


class PriorOnlyDetector:
    """MAP on the prior alone; an even prior declares H1."""

    kind = DetectorKind.PRIOR_ONLY

    def __init__(self, config):
        self.declared = Hypothesis.H0 if config.pi0 > 0.5 else Hypothesis.H1

    def decide_batch(self, values, truth):
        count = len(truth)
        return np.full(count, self.declared, dtype=np.int8), np.zeros(count, dtype=np.int64)


def build_detector(kind, config, cost_model=None, policy=None, grid_size=DEFAULT_GRID_SIZE):
    kind = DetectorKind(kind)
    if kind in (DetectorKind.BS, DetectorKind.BS_GENERALIZED):
        return OrderedThresholdDetector(config, generalized=kind is DetectorKind.BS_GENERALIZED)
    if kind is DetectorKind.BLOCK_MAP:
        return BlockMapDetector(config)
    if kind is DetectorKind.GENIE:
        return GenieDetector()
    if kind is DetectorKind.PRIOR_ONLY:
        return PriorOnlyDetector(config)
    cost_model = cost_model or CostModel()
    if policy is None:
        if kind is DetectorKind.ONE_THRESHOLD:
            policy = solve_one_threshold(config, cost_model, grid_size=grid_size)
        else:
            policy = solve_backward(config, cost_model, grid_size=grid_size)
    return PolicyDetector(config, policy, kind=kind)


@dataclass
class DetectorFactory:
    """Builds detectors for reduced scenarios, once per distinct scenario."""

    kind: DetectorKind
    cost_model: CostModel = None
    grid_size: int = DEFAULT_GRID_SIZE
    cache: dict = field(default_factory=dict, repr=False)

    def __call__(self, config):
        if config not in self.cache:
            self.cache[config] = build_detector(self.kind, config, self.cost_model, grid_size=self.grid_size)
        return self.cache[config]

    def __getstate__(self):
        state = dict(self.__dict__)
        state["cache"] = {}
        return state


@dataclass
class SimMetrics:
    K: int
    trials: int = 0
    stage_histogram: np.ndarray = None
    decision_confusion: np.ndarray = None  # [declared, true]
    secondary_sum: float = 0.0
    secondary_sq: float = 0.0
    primary_sum: float = 0.0
    primary_sq: float = 0.0
    sensing_time_sum: float = 0.0

    def __post_init__(self):
        if self.stage_histogram is None:
            self.stage_histogram = np.zeros(self.K + 1, dtype=np.int64)
        if self.decision_confusion is None:
            self.decision_confusion = np.zeros((2, 2), dtype=np.int64)

    def record(self, declared, stages, truth, config, cost_model, rng):
        declared = np.asarray(declared)
        stages = np.asarray(stages)
        truth = np.asarray(truth)
        count = len(truth)
        transmit = declared == Hypothesis.H0
        free = truth == Hypothesis.H0
        draw_secondary = rng.random(count)
        draw_primary = rng.random(count)
        secondary_ok = transmit & np.where(free, draw_secondary < cost_model.eta_s, draw_secondary < cost_model.delta_s)
        primary_ok = ~free & np.where(transmit, draw_primary < cost_model.delta_p, draw_primary < cost_model.eta_p)
        remaining = (config.tau_s - config.tau_N - stages * config.tau) / config.tau_s
        secondary = np.where(secondary_ok, cost_model.R_s * remaining, 0.0)
        primary = np.where(primary_ok, cost_model.R_p, 0.0)

        self.trials += count
        self.stage_histogram += np.bincount(stages, minlength=self.K + 1)[: self.K + 1]
        np.add.at(self.decision_confusion, (declared.astype(np.int64), truth.astype(np.int64)), 1)
        self.secondary_sum += float(secondary.sum())
        self.secondary_sq += float(np.dot(secondary, secondary))
        self.primary_sum += float(primary.sum())
        self.primary_sq += float(np.dot(primary, primary))
        self.sensing_time_sum += float(np.sum(config.tau_N + stages * config.tau))

    def merge(self, other):
        if other.K != self.K:
            raise ContractViolation("cannot merge metrics with different horizons")
        return SimMetrics(
            K=self.K,
            trials=self.trials + other.trials,
            stage_histogram=self.stage_histogram + other.stage_histogram,
            decision_confusion=self.decision_confusion + other.decision_confusion,
            secondary_sum=self.secondary_sum + other.secondary_sum,
            secondary_sq=self.secondary_sq + other.secondary_sq,
            primary_sum=self.primary_sum + other.primary_sum,
            primary_sq=self.primary_sq + other.primary_sq,
            sensing_time_sum=self.sensing_time_sum + other.sensing_time_sum,
        )

    @property
    def errors(self):
        return int(self.decision_confusion[0, 1] + self.decision_confusion[1, 0])

    @property
    def p_error(self):
        return self.errors / self.trials if self.trials else math.nan

    @property
    def stderr_p_error(self):
        p = self.p_error
        return math.sqrt(p * (1.0 - p) / self.trials) if self.trials else math.nan

    @property
    def avg_stage(self):
        stages = np.arange(self.K + 1)
        return float(stages @ self.stage_histogram) / self.trials if self.trials else math.nan

    @property
    def stderr_avg_stage(self):
        stages = np.arange(self.K + 1)
        second = float((stages * stages) @ self.stage_histogram) / self.trials
        return math.sqrt(max(second - self.avg_stage ** 2, 0.0) / self.trials)

    @property
    def avg_sensing_time(self):
        return self.sensing_time_sum / self.trials if self.trials else math.nan

    @property
    def norm_throughput_secondary(self):
        return self.secondary_sum / self.trials if self.trials else math.nan

    @property
    def norm_throughput_primary(self):
        return self.primary_sum / self.trials if self.trials else math.nan

    def _stderr(self, total, squares):
        mean = total / self.trials
        return math.sqrt(max(squares / self.trials - mean * mean, 0.0) / self.trials)

    @property
    def stderr_throughput_secondary(self):
        return self._stderr(self.secondary_sum, self.secondary_sq)

    @property
    def stderr_throughput_primary(self):
        return self._stderr(self.primary_sum, self.primary_sq)

    def weighted_throughput(self, omega):
        return omega * self.norm_throughput_primary + (1.0 - omega) * self.norm_throughput_secondary

    def as_row(self, prefix=""):
        return {
            f"{prefix}trials": self.trials,
            f"{prefix}p_error": self.p_error,
            f"{prefix}stderr_p_error": self.stderr_p_error,
            f"{prefix}avg_stage": self.avg_stage,
            f"{prefix}stderr_avg_stage": self.stderr_avg_stage,
            f"{prefix}avg_sensing_time": self.avg_sensing_time,
            f"{prefix}throughput_secondary": self.norm_throughput_secondary,
            f"{prefix}throughput_primary": self.norm_throughput_primary,
        }


@dataclass
class _ChunkTask:
    config: object
    detector: object
    cost_model: CostModel
    fading: object
    trials: int
    seed: np.random.SeedSequence


def _prior_only(config, count):
    declared = Hypothesis.H0 if config.pi0 > 0.5 else Hypothesis.H1
    return np.full(count, declared, dtype=np.int8), np.zeros(count, dtype=np.int64)


def _run_chunk(task):
    config = task.config
    slot_seed, link_seed = task.seed.spawn(2)
    rng = np.random.default_rng(slot_seed)
    batch = draw_slots(config, rng, task.trials)
    if task.fading is None:
        _, ordered = batch.ordered()
        declared, stages = task.detector.decide_batch(ordered, batch.truth)
    else:
        declared = np.empty(task.trials, dtype=np.int8)
        stages = np.empty(task.trials, dtype=np.int64)
        link_rng = np.random.default_rng(link_seed)
        for start in range(0, task.trials, task.fading.T_c):
            period = slice(start, min(start + task.fading.T_c, task.trials))
            participants = sample_participants(task.fading, config.M, link_rng)
            reduced = effective_config(config, participants)
            size = period.stop - period.start
            if reduced is None:
                declared[period], stages[period] = _prior_only(config, size)
                continue
            part = batch.llr[period][:, sorted(participants)]
            order = np.argsort(-np.abs(part), axis=1, kind="stable")
            ordered = np.take_along_axis(part, order, axis=1)
            declared[period], stages[period] = task.detector(reduced).decide_batch(ordered, batch.truth[period])
    metrics = SimMetrics(K=config.K)
    metrics.record(declared, stages, batch.truth, config, task.cost_model, rng)
    return metrics


def _chunk_sizes(trials, chunk_size, fading):
    if fading is not None:
        # chunks hold whole coherence periods
        chunk_size = max(fading.T_c, (chunk_size // fading.T_c) * fading.T_c)
    full, rest = divmod(trials, chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])


def _map_chunks(tasks, workers):
    if workers and workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(_run_chunk, tasks))
    return [_run_chunk(task) for task in tasks]


def run_monte_carlo(
    config,
    detector,
    trials,
    seed,
    cost_model=None,
    fading=None,
    workers=1,
    chunk_size=DEFAULT_CHUNK_SIZE,
    grid_size=DEFAULT_GRID_SIZE,
):
    """Simulate ``trials`` slots and return the merged metrics.

    ``detector`` is a DetectorKind (or its name) or a ready detector object.
    Under fading each coherence period runs on its reduced scenario, so only a
    kind (or a DetectorFactory) is accepted there.
    """
    if trials < 1:
        raise ContractViolation("trials must be at least 1")
    cost_model = cost_model or CostModel()
    if fading is not None:
        fading.check_sensor_count(config.M)
        if hasattr(detector, "decide_batch"):
            raise ContractViolation(
                "a fading run rebuilds its detector per reduced scenario; pass a DetectorKind, not a built detector"
            )
        if not isinstance(detector, DetectorFactory):
            detector = DetectorFactory(DetectorKind(detector), cost_model, grid_size)
    elif not hasattr(detector, "decide_batch"):
        detector = build_detector(detector, config, cost_model, grid_size=grid_size)
    sizes = _chunk_sizes(trials, chunk_size, fading)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    tasks = [_ChunkTask(config, detector, cost_model, fading, size, child) for size, child in zip(sizes, seeds)]
    metrics = SimMetrics(K=config.K)
    for index, part in enumerate(_map_chunks(tasks, workers)):
        logger.debug("chunk %d/%d merged (%d slots)", index + 1, len(tasks), part.trials)
        metrics = metrics.merge(part)
    logger.info(
        "simulated %d slots with %s: p_error=%.5f avg_stage=%.3f",
        metrics.trials, getattr(detector, "kind", detector), metrics.p_error, metrics.avg_stage,
    )
    return metrics


@dataclass
class AgreementReport:
    trials: int
    agreements: int
    first_disagreement: dict = None

    @property
    def fraction(self):
        return self.agreements / self.trials if self.trials else math.nan


def compare_with_block_oracle(config, trials, seed, generalized=False, chunk_size=DEFAULT_CHUNK_SIZE):
    """Per-slot agreement between the sequential detector and the block MAP rule."""
    law = common_law(config)
    sizes = _chunk_sizes(trials, chunk_size, None)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    agreements = 0
    first = None
    offset = 0
    for size, child in zip(sizes, seeds):
        slot_seed, _ = child.spawn(2)
        batch = draw_slots(config, np.random.default_rng(slot_seed), size)
        _, ordered = batch.ordered()
        sequential, stages = sequential_decisions(ordered, config, law, generalized=generalized)
        block = block_map_decisions(ordered, config, law)
        same = sequential == block
        agreements += int(same.sum())
        if first is None and not np.all(same):
            q = int(np.argmin(same))
            first = {
                "slot": offset + q,
                "truth": int(batch.truth[q]),
                "ordered_llr": ordered[q, : config.K].tolist(),
                "sequential": int(sequential[q]),
                "stage": int(stages[q]),
                "block": int(block[q]),
            }
            logger.warning("sequential and block decisions differ at slot %d", offset + q)
        offset += size
    return AgreementReport(trials=trials, agreements=agreements, first_disagreement=first)


def apply_axis(axis, value, config, cost_model):
    axis = SweepAxis(axis)
    if axis is SweepAxis.M:
        return config.with_sensor_count(int(value)), cost_model
    if axis is SweepAxis.K:
        return replace(config, K=int(value)), cost_model
    if axis is SweepAxis.SIGMA2_S:
        return replace(config, sigma2_s=(float(value),)), cost_model
    if axis is SweepAxis.C:
        return config, replace(cost_model, c=float(value))
    return config, replace(cost_model, omega=float(value))


def sweep(
    axis,
    values,
    base_config,
    detector,
    trials,
    seed,
    cost_model=None,
    fading=None,
    workers=1,
    chunk_size=DEFAULT_CHUNK_SIZE,
    grid_size=DEFAULT_GRID_SIZE,
):
    """One SimMetrics per value; every point reuses ``seed`` for common random numbers."""
    values = list(values)
    if not values:
        raise ContractViolation("sweep needs at least one value")
    cost_model = cost_model or CostModel()
    rows = []
    for value in values:
        config, cost = apply_axis(axis, value, base_config, cost_model)
        metrics = run_monte_carlo(
            config, detector, trials, seed, cost_model=cost, fading=fading,
            workers=workers, chunk_size=chunk_size, grid_size=grid_size,
        )
        rows.append((value, metrics))
    return rows


def throughput_cost(cost_model, one_threshold=False):
    """Throughput cost model derived from ``cost_model``; zero overheads for one threshold."""
    cost = replace(cost_model, mode=CostMode.WEIGHTED_THROUGHPUT)
    if one_threshold:
        cost = replace(cost, c=0.0, e_pt=0.0, e_st=0.0, P_col=0.0, L_f=0.0, L_b=0.0)
    return cost

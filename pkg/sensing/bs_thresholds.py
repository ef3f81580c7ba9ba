"""Sequential detector on ordered LLR reports with data-dependent thresholds.

At stage k the fusion center holds the partial sum S_k of the k largest
reports.  Every later report is bounded by |y_k|, and the M - K reports
that are never sent are summarized by the correction term rho, so the
thresholds below stop only when the block MAP rule on the K best reports
is already decided.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import ContractViolation
from .llr_distributions import LlrLaw, llr_log_ratio, llr_log_ratio_extrema, rho, rho_envelope
from .scenario import Hypothesis

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DecisionOutcome:
    declared: Hypothesis
    stage: int
    sensing_time: float
    prior_only: bool = False

    @classmethod
    def at_stage(cls, declared, stage, config, prior_only=False):
        return cls(Hypothesis(int(declared)), int(stage), config.sensing_time(stage), prior_only)


def common_law(config):
    if not config.identical_sensors:
        raise ContractViolation("the ordered-threshold detector needs identical sensors")
    return LlrLaw.for_sensor(config, 0)


def ordered_values(ordered):
    """Values from a ranked list of (index, value) pairs or from bare values."""
    ordered = list(ordered)
    if ordered and isinstance(ordered[0], (tuple, list)):
        return np.array([value for _, value in ordered], dtype=float)
    return np.asarray(ordered, dtype=float)


def _top_block(values, K):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[1] < K:
        raise ContractViolation(f"need at least K={K} ordered LLRs, got {values.shape[1]}")
    return values[:, :K]


def thresholds_at_stage(k, y_k, config, law):
    if not 1 <= k <= config.K:
        raise ContractViolation(f"stage {k} outside 1..{config.K}")
    log_prior = config.log_prior_ratio()
    a = abs(float(y_k))
    unreported = config.M - config.K
    if k == config.K:
        t = log_prior - unreported * rho(a, law) if unreported else log_prior
        return t, t
    low, high = (float(v) for v in rho_envelope(law).extrema(a))
    remaining = config.K - k
    return (
        log_prior - remaining * a - unreported * high,
        log_prior + remaining * a - unreported * low,
    )


def stage_thresholds(values, config, law, generalized=False):
    """Per-stage (t_low, t_high) for a block of ordered rows, shape (n, K) each."""
    block = _top_block(values, config.K)
    K, M = config.K, config.M
    a = np.abs(block)
    log_prior = config.log_prior_ratio()
    remaining = (K - np.arange(1, K + 1))[None, :]
    unreported = M - K
    if unreported:
        rho_low, rho_high = rho_envelope(law).extrema(a)
    else:
        rho_low = rho_high = np.zeros_like(a)
    if generalized:
        g_low, g_high = llr_log_ratio_extrema(a, law)
        t_low = log_prior - (unreported * rho_high + remaining * g_high)
        t_high = log_prior - (unreported * rho_low + remaining * g_low)
    else:
        t_low = log_prior - remaining * a - unreported * rho_high
        t_high = log_prior + remaining * a - unreported * rho_low
    final = log_prior - unreported * rho(a[:, -1], law) if unreported else np.full(len(a), log_prior)
    t_low[:, -1] = final
    t_high[:, -1] = final
    return t_low, t_high


def sequential_decisions(values, config, law, generalized=False):
    """Declared hypotheses and stopping stages for a block of ordered rows."""
    block = _top_block(values, config.K)
    metric = llr_log_ratio(block, law) if generalized else block
    sums = np.cumsum(metric, axis=1)
    t_low, t_high = stage_thresholds(block, config, law, generalized=generalized)
    stop_h0 = sums < t_low
    stop_h1 = sums > t_high
    # forced stop at K, ties resolve to H1
    stop_h1[:, -1] = sums[:, -1] >= t_high[:, -1]
    stop_h0[:, -1] = ~stop_h1[:, -1]
    first = np.argmax(stop_h0 | stop_h1, axis=1)
    rows = np.arange(len(block))
    declared = np.where(stop_h1[rows, first], Hypothesis.H1, Hypothesis.H0).astype(np.int8)
    return declared, first + 1


def block_map_decisions(values, config, law):
    block = _top_block(values, config.K)
    statistic = np.cumsum(llr_log_ratio(block, law), axis=1)[:, -1]
    unreported = config.M - config.K
    if unreported:
        statistic = statistic + unreported * rho(np.abs(block[:, -1]), law)
    return np.where(statistic >= config.log_prior_ratio(), Hypothesis.H1, Hypothesis.H0).astype(np.int8)


def run_detector(ordered, config, law):
    declared, stage = sequential_decisions(ordered_values(ordered)[None, :], config, law)
    return DecisionOutcome.at_stage(declared[0], stage[0], config)


def run_detector_generalized(ordered, config, law):
    declared, stage = sequential_decisions(ordered_values(ordered)[None, :], config, law, generalized=True)
    return DecisionOutcome.at_stage(declared[0], stage[0], config)


def map_block_decision(ordered_topK, config, law):
    values = ordered_values(ordered_topK)
    if values.size != config.K:
        raise ContractViolation(f"the block MAP rule takes exactly K={config.K} values, got {values.size}")
    return Hypothesis(int(block_map_decisions(values[None, :], config, law)[0]))

"""Backward induction over a belief grid.

The belief pi_k is the posterior probability that the channel is free after
k ordered reports.  At every stage the fusion center may declare H0, declare
H1 or pay ``c`` for one more report; the last stage K forces a declaration.
The production recursion uses the unconditional ranked densities of the next
report; the exact recursion conditions on the previous report and is kept
for validation.
"""

import json
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from pathlib import Path

import numpy as np
from scipy import special

from .bs_thresholds import DecisionOutcome, ordered_values
from .exceptions import ContractViolation, SolverError, UndefinedUpdateError
from .llr_distributions import TAIL_MASS
from .order_stats import SensorEnsemble, conditional_pdf, ranked_logpdf, ranked_pdf
from .scenario import Hypothesis, draw_slots

logger = logging.getLogger(__name__)

POLICY_FORMAT = "ordfuse-policy"
POLICY_FORMAT_VERSION = 1
DEFAULT_GRID_SIZE = 1001
MIN_GRID_SIZE = 101
TIE_TOLERANCE = 1e-12
CONCAVITY_TOLERANCE = 1e-9
MASS_TOLERANCE = 1e-6
PANEL_TOLERANCE = 1e-12
PANEL_MAX_DEPTH = 30

_PANEL_LOW = np.polynomial.legendre.leggauss(16)
_PANEL_HIGH = np.polynomial.legendre.leggauss(32)
_QUANTILE_LEVELS = (1e-3, 1e-2, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 0.999)


class CostMode(str, Enum):
    ERROR_MIN = "error-min"
    WEIGHTED_THROUGHPUT = "throughput"


class Action(IntEnum):
    DECLARE_H0 = 0
    DECLARE_H1 = 1
    CONTINUE = 2


@dataclass(frozen=True)
class CostModel:
    mode: CostMode = CostMode.ERROR_MIN
    omega: float = 0.5
    R_p: float = 1.0
    R_s: float = 1.0
    eta_p: float = 1.0
    eta_s: float = 1.0
    delta_p: float = 0.0
    delta_s: float = 0.0
    e_pt: float = 0.0
    e_st: float = 0.0
    P_col: float = 0.0
    L_f: float = 0.0
    L_b: float = 0.0
    c: float = 1e-4

    def __post_init__(self):
        object.__setattr__(self, "mode", CostMode(self.mode))
        numbers = {name: getattr(self, name) for name in self.__dataclass_fields__ if name != "mode"}
        for name, value in numbers.items():
            if not math.isfinite(value):
                raise ContractViolation(f"cost parameter {name} must be finite")
        for name in ("omega", "eta_p", "eta_s", "delta_p", "delta_s"):
            if not 0.0 <= numbers[name] <= 1.0:
                raise ContractViolation(f"{name} must lie in [0, 1]")
        for name in ("e_pt", "e_st", "P_col", "L_f", "L_b", "c", "R_p", "R_s"):
            if numbers[name] < 0:
                raise ContractViolation(f"{name} must be nonnegative")

    @property
    def zero_overheads(self):
        return self.c == 0 and not any((self.e_pt, self.e_st, self.P_col, self.L_f, self.L_b))

    def weighted_throughput(self, primary, secondary):
        return self.omega * primary + (1.0 - self.omega) * secondary

    def as_dict(self):
        data = {name: getattr(self, name) for name in self.__dataclass_fields__}
        data["mode"] = self.mode.value
        return data


def decision_cost(k, i, j, cost, config):
    """Cost of declaring ``i`` at stage ``k`` when ``j`` is true."""
    if not 0 <= k <= config.K:
        raise ContractViolation(f"stage {k} outside 0..{config.K}")
    i, j = Hypothesis(i), Hypothesis(j)
    if cost.mode is CostMode.ERROR_MIN:
        return 0.0 if i == j else 1.0
    remaining = config.remaining_fraction(k)
    r_s = (1.0 - cost.omega) * cost.R_s
    r_p = cost.omega * cost.R_p
    if i == Hypothesis.H0 and j == Hypothesis.H0:
        return -r_s * cost.eta_s * remaining + cost.e_st * remaining
    if i == Hypothesis.H0:
        return -r_p * cost.delta_p - r_s * cost.delta_s * remaining + cost.e_pt + cost.e_st * remaining + cost.P_col
    if j == Hypothesis.H0:
        return cost.L_f
    return -r_p * cost.eta_p + cost.e_pt + cost.L_b


def stopping_costs(k, cost, config):
    return np.array([[decision_cost(k, i, j, cost, config) for j in Hypothesis] for i in Hypothesis])


@dataclass
class RankQuadrature:
    """Nodes and weights for expectations over one rank's density.

    ``f0`` and ``f1`` are rescaled so that ``weights @ f`` is exactly one.
    """

    rank: int
    nodes: np.ndarray
    weights: np.ndarray
    f0: np.ndarray
    f1: np.ndarray
    raw_mass: tuple = (1.0, 1.0)


def _breakpoints(ensemble):
    points = set()
    cap = TAIL_MASS / ensemble.M
    for law in set(ensemble.laws):
        points.update((law.support_floor(cap), law.support_cap(cap)))
        for H in Hypothesis:
            points.update(float(law.quantile(q, H)) for q in _QUANTILE_LEVELS)
        if law.is_energy:
            points.update((-law.shift, law.shift))
            # graded toward the lower support edge where the density may be singular
            width = min(law.scale0, law.shift)
            points.update(-law.shift + width * 0.25 ** j for j in range(1, 25))
    lo = min(law.support_floor(cap) for law in ensemble.laws)
    hi = max(law.support_cap(cap) for law in ensemble.laws)
    points.add(0.0)
    return np.array(sorted(p for p in points if lo <= p <= hi))


def _panel(a, b, rule):
    nodes, weights = rule
    half = 0.5 * (b - a)
    return half * nodes + 0.5 * (a + b), half * weights


def rank_quadrature(m, ensemble):
    """Adaptive Gauss-Legendre panels for the rank-``m`` density under both hypotheses."""
    edges = _breakpoints(ensemble)
    pending = deque((a, b, 0) for a, b in zip(edges[:-1], edges[1:]) if b > a)
    nodes, weights = [], []
    unconverged = 0
    while pending:
        a, b, depth = pending.popleft()
        x_low, w_low = _panel(a, b, _PANEL_LOW)
        x_high, w_high = _panel(a, b, _PANEL_HIGH)
        coarse = [w_low @ ranked_pdf(m, x_low, H, ensemble) for H in Hypothesis]
        fine = [w_high @ ranked_pdf(m, x_high, H, ensemble) for H in Hypothesis]
        error = max(abs(c - f) for c, f in zip(coarse, fine))
        if error <= PANEL_TOLERANCE or depth >= PANEL_MAX_DEPTH:
            unconverged += error > PANEL_TOLERANCE
            nodes.append(x_high)
            weights.append(w_high)
            continue
        middle = 0.5 * (a + b)
        pending.append((a, middle, depth + 1))
        pending.append((middle, b, depth + 1))
    nodes = np.concatenate(nodes)
    weights = np.concatenate(weights)
    order = np.argsort(nodes)
    nodes, weights = nodes[order], weights[order]
    f0 = ranked_pdf(m, nodes, Hypothesis.H0, ensemble)
    f1 = ranked_pdf(m, nodes, Hypothesis.H1, ensemble)
    mass0, mass1 = float(weights @ f0), float(weights @ f1)
    diagnostics = {
        "rank": m,
        "mass_h0": mass0,
        "mass_h1": mass1,
        "nodes": nodes.size,
        "unconverged_panels": unconverged,
    }
    if abs(mass0 - 1.0) > MASS_TOLERANCE or abs(mass1 - 1.0) > MASS_TOLERANCE:
        raise SolverError("ranked density quadrature did not converge", diagnostics)
    keep = (f0 > 0) | (f1 > 0)
    logger.debug("rank %d quadrature: %s", m, diagnostics)
    return RankQuadrature(
        rank=m,
        nodes=nodes[keep],
        weights=weights[keep],
        f0=f0[keep] / mass0,
        f1=f1[keep] / mass1,
        raw_mass=(mass0, mass1),
    )


def continuation_value(grid, next_values, quadrature):
    """Psi(pi) = E[J_{k+1}(pi')] under the pi-mixture of the next rank's density."""
    pi = np.asarray(grid, dtype=float)[:, None]
    f0 = quadrature.f0[None, :]
    f1 = quadrature.f1[None, :]
    mixture = pi * f0 + (1.0 - pi) * f1
    posterior = np.divide(pi * f0, mixture, out=np.broadcast_to(pi, mixture.shape).copy(), where=mixture > 0)
    future = np.interp(posterior, grid, next_values)
    return (future * mixture) @ quadrature.weights


@dataclass
class PolicyTable:
    grid: np.ndarray
    values: np.ndarray  # row k - 1 holds J_k on the grid
    actions: np.ndarray
    pi_low: np.ndarray
    pi_high: np.ndarray
    mode: CostMode
    one_threshold: bool = False
    scenario: dict = field(default_factory=dict)
    cost: dict = field(default_factory=dict)

    @property
    def K(self):
        return self.values.shape[0]

    @property
    def grid_size(self):
        return self.grid.size

    def action(self, pi, k):
        if pi < self.pi_low[k - 1]:
            return Action.DECLARE_H1
        if pi >= self.pi_high[k - 1]:
            return Action.DECLARE_H0
        return Action.CONTINUE

    def value(self, pi, k):
        return float(np.interp(pi, self.grid, self.values[k - 1]))

    def log_prior_ratio(self):
        pi0 = self.scenario.get("pi0", 0.5)
        return float(special.logit(pi0))

    def llr_thresholds(self):
        """Accumulated-LLR equivalents (low, high) of the belief thresholds at the prior."""
        log_prior = self.log_prior_ratio()
        with np.errstate(divide="ignore", invalid="ignore"):
            low = log_prior - _logit(self.pi_high)
            high = log_prior - _logit(self.pi_low)
        return low, high

    def regions_are_intervals(self):
        for row in self.actions:
            h1_run = _leading_run(row == Action.DECLARE_H1)
            h0_run = _leading_run((row == Action.DECLARE_H0)[::-1])
            if np.any(row[h1_run : row.size - h0_run] != Action.CONTINUE):
                return False
        return True

    def to_dict(self):
        return {
            "format": POLICY_FORMAT,
            "version": POLICY_FORMAT_VERSION,
            "mode": self.mode.value,
            "one_threshold": self.one_threshold,
            "scenario": self.scenario,
            "cost": self.cost,
            "grid": self.grid.tolist(),
            "stages": [
                {
                    "k": k + 1,
                    "pi_low": float(self.pi_low[k]),
                    "pi_high": float(self.pi_high[k]),
                    "values": self.values[k].tolist(),
                    "actions": self.actions[k].tolist(),
                }
                for k in range(self.K)
            ],
        }

    @classmethod
    def from_dict(cls, data):
        if data.get("format") != POLICY_FORMAT:
            raise ContractViolation("not a policy table file")
        if data.get("version") != POLICY_FORMAT_VERSION:
            raise ContractViolation(f"unsupported policy file version {data.get('version')}")
        stages = sorted(data["stages"], key=lambda stage: stage["k"])
        return cls(
            grid=np.array(data["grid"], dtype=float),
            values=np.array([stage["values"] for stage in stages], dtype=float),
            actions=np.array([stage["actions"] for stage in stages], dtype=np.int8),
            pi_low=np.array([stage["pi_low"] for stage in stages], dtype=float),
            pi_high=np.array([stage["pi_high"] for stage in stages], dtype=float),
            mode=CostMode(data["mode"]),
            one_threshold=bool(data.get("one_threshold", False)),
            scenario=data.get("scenario", {}),
            cost=data.get("cost", {}),
        )

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=1))
        return path

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def _logit(pi):
    pi = np.asarray(pi, dtype=float)
    return np.where(pi > 1.0, np.inf, special.logit(np.clip(pi, 0.0, 1.0)))


def _choose(stop_h0, stop_h1, cont, tolerance):
    """Action and cost per grid point; H0 wins ties, then continuing, then H1."""
    candidates = [stop_h0] + [c for c in (stop_h1, cont) if c is not None]
    best = np.min(np.stack(candidates), axis=0)
    take_h0 = stop_h0 <= best + tolerance
    take_cont = np.zeros_like(take_h0) if cont is None else (cont <= best + tolerance) & ~take_h0
    actions = np.full(stop_h0.shape, Action.DECLARE_H1, dtype=np.int8)
    actions[take_cont] = Action.CONTINUE
    actions[take_h0] = Action.DECLARE_H0
    values = np.where(take_h0, stop_h0, stop_h1 if stop_h1 is not None else stop_h0)
    if cont is not None:
        values = np.where(take_cont, cont, values)
    return values, actions


def _root(grid, left, right, diff):
    """Zero of the linear interpolation of ``diff`` between two grid points."""
    d_left, d_right = diff[left], diff[right]
    if d_right == d_left:
        return float(grid[right])
    t = d_left / (d_left - d_right)
    return float(grid[left] + min(max(t, 0.0), 1.0) * (grid[right] - grid[left]))


def _leading_run(mask):
    """Length of the run of True values at the start of ``mask``."""
    if np.all(mask):
        return mask.size
    return int(np.argmin(mask))


def _thresholds(grid, actions, costs):
    """Belief thresholds of one stage; ``costs`` maps each action to its cost curve."""
    size = grid.size
    h1_run = _leading_run(actions == Action.DECLARE_H1)
    h0_run = _leading_run((actions == Action.DECLARE_H0)[::-1])
    if h1_run == 0:
        pi_low = 0.0
    elif h1_run == size:
        pi_low = math.inf
    else:
        neighbour = costs[Action(int(actions[h1_run]))]
        pi_low = _root(grid, h1_run - 1, h1_run, neighbour - costs[Action.DECLARE_H1])
    if h0_run == 0:
        pi_high = math.inf
    elif h0_run == size:
        pi_high = 0.0
    else:
        start = size - h0_run
        neighbour = costs[Action(int(actions[start - 1]))]
        pi_high = _root(grid, start - 1, start, neighbour - costs[Action.DECLARE_H0])
    return pi_low, pi_high


def _check_inputs(config, ensemble, grid_size):
    if grid_size < MIN_GRID_SIZE:
        raise ContractViolation(f"grid_size must be at least {MIN_GRID_SIZE}")
    ensemble = ensemble or SensorEnsemble.from_config(config)
    if ensemble.M != config.M:
        raise ContractViolation(f"ensemble has {ensemble.M} sensors, scenario has {config.M}")
    return ensemble


def solve_backward(config, cost_model, ensemble=None, grid_size=DEFAULT_GRID_SIZE, one_threshold=False):
    ensemble = _check_inputs(config, ensemble, grid_size)
    grid = np.linspace(0.0, 1.0, grid_size)
    K = config.K
    values = np.empty((K, grid_size))
    actions = np.empty((K, grid_size), dtype=np.int8)
    pi_low = np.empty(K)
    pi_high = np.empty(K)
    for k in range(K, 0, -1):
        lam = stopping_costs(k, cost_model, config)
        stop_h0 = lam[0, 0] * grid + lam[0, 1] * (1.0 - grid)
        stop_h1 = lam[1, 0] * grid + lam[1, 1] * (1.0 - grid)
        tolerance = TIE_TOLERANCE * max(1.0, float(np.max(np.abs(lam))), cost_model.c)
        costs = {Action.DECLARE_H0: stop_h0, Action.DECLARE_H1: stop_h1}
        if k == K:
            values[k - 1], actions[k - 1] = _choose(stop_h0, stop_h1, None, tolerance)
        else:
            quadrature = rank_quadrature(k + 1, ensemble)
            cont = cost_model.c + continuation_value(grid, values[k], quadrature)
            costs[Action.CONTINUE] = cont
            allowed_h1 = None if one_threshold else stop_h1
            values[k - 1], actions[k - 1] = _choose(stop_h0, allowed_h1, cont, tolerance)
        pi_low[k - 1], pi_high[k - 1] = _thresholds(grid, actions[k - 1], costs)
        logger.debug("stage %d: pi_low=%.6f pi_high=%.6f", k, pi_low[k - 1], pi_high[k - 1])
    table = PolicyTable(
        grid=grid,
        values=values,
        actions=actions,
        pi_low=pi_low,
        pi_high=pi_high,
        mode=cost_model.mode,
        one_threshold=one_threshold,
        scenario=config.as_dict(),
        cost=cost_model.as_dict(),
    )
    if not table.regions_are_intervals():
        logger.warning("action regions are not intervals for %s", cost_model.mode.value)
    logger.info(
        "solved %s policy: M=%d K=%d grid=%d one_threshold=%s",
        cost_model.mode.value, config.M, K, grid_size, one_threshold,
    )
    return table


def solve_one_threshold(config, cost_model, ensemble=None, grid_size=DEFAULT_GRID_SIZE):
    if cost_model.mode is not CostMode.WEIGHTED_THROUGHPUT or not cost_model.zero_overheads:
        raise ContractViolation("the one-threshold policy needs a throughput cost model with c = e = L = P = 0")
    return solve_backward(config, cost_model, ensemble=ensemble, grid_size=grid_size, one_threshold=True)


def posterior_update(pi_k, y, k, ensemble):
    """Belief after the rank-(k+1) report ``y`` using the unconditional ranked densities."""
    if pi_k <= 0.0 or pi_k >= 1.0:
        return float(pi_k)
    f0 = float(ranked_pdf(k + 1, y, Hypothesis.H0, ensemble))
    f1 = float(ranked_pdf(k + 1, y, Hypothesis.H1, ensemble))
    return _bayes(pi_k, f0, f1, y)


def posterior_update_exact(pi_k, y_prev, y, k, ensemble):
    """Belief after the rank-(k+1) report ``y`` given the rank-k report ``y_prev``.

    ``k = 0`` is the first report, where there is nothing to condition on.
    """
    if k == 0:
        return posterior_update(pi_k, y, 0, ensemble)
    if pi_k <= 0.0 or pi_k >= 1.0:
        return float(pi_k)
    f0 = float(conditional_pdf(k + 1, y, y_prev, Hypothesis.H0, ensemble))
    f1 = float(conditional_pdf(k + 1, y, y_prev, Hypothesis.H1, ensemble))
    return _bayes(pi_k, f0, f1, y)


def _bayes(pi_k, f0, f1, y):
    if f0 == 0.0 and f1 == 0.0:
        raise UndefinedUpdateError(f"both ranked densities vanish at y={y}")
    return pi_k * f0 / (pi_k * f0 + (1.0 - pi_k) * f1)


def policy_decisions(values, policy, ensemble, pi0):
    """Declared hypotheses and stages for a block of ordered rows, beliefs in log-odds."""
    K = policy.K
    block = np.atleast_2d(np.asarray(values, dtype=float))
    if block.shape[1] < K:
        raise ContractViolation(f"need at least K={K} ordered LLRs, got {block.shape[1]}")
    if ensemble.M < K:
        raise ContractViolation("policy horizon exceeds the ensemble size")
    count = block.shape[0]
    log_odds = np.full(count, float(special.logit(pi0)))
    declared = np.zeros(count, dtype=np.int8)
    stages = np.zeros(count, dtype=np.int64)
    active = np.ones(count, dtype=bool)
    low_cut = _logit(policy.pi_low)
    high_cut = _logit(policy.pi_high)
    for k in range(1, K + 1):
        y = block[:, k - 1]
        movable = active & np.isfinite(log_odds)
        if np.any(movable):
            step = ranked_logpdf(k, y[movable], Hypothesis.H0, ensemble) - ranked_logpdf(
                k, y[movable], Hypothesis.H1, ensemble
            )
            if np.any(np.isnan(step)):
                raise UndefinedUpdateError(f"both rank-{k} densities vanish at a reported value")
            log_odds[movable] += step
        if k == K:
            take_h0 = active & (log_odds >= high_cut[k - 1])
            take_h1 = active & ~take_h0
        else:
            take_h1 = active & (log_odds < low_cut[k - 1])
            take_h0 = active & (log_odds >= high_cut[k - 1]) & ~take_h1
        declared[take_h1] = Hypothesis.H1
        declared[take_h0] = Hypothesis.H0
        stages[take_h0 | take_h1] = k
        active &= ~(take_h0 | take_h1)
        if not np.any(active):
            break
    return declared, stages


def run_policy(ordered, policy, ensemble, pi0):
    values = ordered_values(ordered)
    declared, stages = policy_decisions(values[None, :], policy, ensemble, pi0)
    stage = int(stages[0])
    scenario = policy.scenario
    sensing_time = scenario.get("tau_N", 0.0) + stage * scenario.get("tau", 0.0)
    return DecisionOutcome(Hypothesis(int(declared[0])), stage, sensing_time)


def concavity_check(policy):
    for stage_values in policy.values:
        spread = float(np.max(stage_values) - np.min(stage_values))
        tolerance = CONCAVITY_TOLERANCE * spread
        midpoint_gap = 0.5 * (stage_values[:-2] + stage_values[2:]) - stage_values[1:-1]
        if np.any(midpoint_gap > tolerance):
            return False
    return True


def _bayes_rows(pi, f0, f1):
    if np.any((f0 == 0) & (f1 == 0) & (pi > 0) & (pi < 1)):
        raise UndefinedUpdateError("both densities vanish at a reported value")
    mixture = pi * f0 + (1.0 - pi) * f1
    return np.divide(pi * f0, mixture, out=pi.copy(), where=(pi > 0) & (pi < 1))


def posterior_chains(values, ensemble, pi0):
    """Approximate and exact belief chains for ordered rows, shape (n, K) each."""
    block = np.atleast_2d(np.asarray(values, dtype=float))
    count, K = block.shape
    approx = np.empty((count, K))
    exact = np.empty((count, K))
    pi_approx = np.full(count, float(pi0))
    pi_exact = np.full(count, float(pi0))
    for k in range(K):
        y = block[:, k]
        f = [ranked_pdf(k + 1, y, H, ensemble) for H in Hypothesis]
        pi_approx = _bayes_rows(pi_approx, *f)
        if k:
            f = [conditional_pdf(k + 1, y, block[:, k - 1], H, ensemble) for H in Hypothesis]
        pi_exact = _bayes_rows(pi_exact, *f)
        approx[:, k] = pi_approx
        exact[:, k] = pi_exact
    return approx, exact


def approximation_gap(config, trials, seed):
    """How far the unconditional belief chain drifts from the exact one."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    batch = draw_slots(config, rng, trials)
    _, ordered = batch.ordered()
    ensemble = SensorEnsemble.from_config(config)
    approx, exact = posterior_chains(ordered[:, : config.K], ensemble, config.pi0)
    gap = np.abs(approx - exact)
    return {
        "trials": trials,
        "mean_abs_gap": gap.mean(axis=0).tolist(),
        "max_abs_gap": gap.max(axis=0).tolist(),
    }

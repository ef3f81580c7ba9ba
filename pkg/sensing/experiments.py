"""Experiment presets: each one builds the table behind one result figure."""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum

import pandas as pd

from .dp_policy import DEFAULT_GRID_SIZE, CostMode, solve_backward, solve_one_threshold
from .exceptions import ContractViolation
from .fading_link import FadingConfig, participation_probs
from .fusion_sim import DEFAULT_CHUNK_SIZE, DetectorKind, SweepAxis, run_monte_carlo, sweep, throughput_cost
from .scenario import MeasurementModel

logger = logging.getLogger(__name__)

MAX_SEED = 2 ** 64 - 1


class Preset(str, Enum):
    THROUGHPUT_VS_M = "fig-throughput-vs-M"
    PERROR_VS_M = "fig-perror-vs-M"
    PROBED_VS_M = "fig-probed-vs-M"
    THROUGHPUT_COMPARE = "fig-throughput-compare"
    PROBED_VS_K = "fig-probed-vs-K"
    FADING_PROBED = "fig-fading-probed"
    THRESHOLDS_VS_STAGE = "fig-thresholds-vs-stage"
    SENSING_VS_C = "fig-sensing-vs-c"
    THROUGHPUT_VS_C = "fig-throughput-vs-c"
    CUSTOM = "custom"


M_VALUES = (10, 20, 30, 40, 50, 60)
K_VALUES = (2, 4, 6, 8, 10, 12, 14, 16)
C_VALUES = (0.0, 1e-5, 5e-5, 1e-4, 5e-4, 1e-3, 5e-3, 1e-2)

DEFAULT_VALUES = {
    Preset.THROUGHPUT_VS_M: M_VALUES,
    Preset.PERROR_VS_M: M_VALUES,
    Preset.PROBED_VS_M: M_VALUES,
    Preset.THROUGHPUT_COMPARE: M_VALUES,
    Preset.PROBED_VS_K: K_VALUES,
    Preset.FADING_PROBED: M_VALUES,
    Preset.THRESHOLDS_VS_STAGE: (0.0, 1e-4, 1e-3),
    Preset.SENSING_VS_C: C_VALUES,
    Preset.THROUGHPUT_VS_C: C_VALUES,
}

AXIS_VALUES = {
    SweepAxis.M: M_VALUES,
    SweepAxis.K: (2, 4, 6, 8),
    SweepAxis.C: C_VALUES,
    SweepAxis.SIGMA2_S: (0.5, 1.0, 2.0, 5.0, 10.0, 50.0),
    SweepAxis.OMEGA: (0.5, 0.9, 0.99, 0.999),
}

THROUGHPUT_WEIGHTS = (0.5, 0.999)
PROBED_VS_K_SENSORS = 100
PROBED_VS_K_TAU = 0.05
PROBED_VS_K_SERIES = (
    (MeasurementModel.ENERGY, 2.0),
    (MeasurementModel.ENERGY, 50.0),
    (MeasurementModel.SHIFT_IN_MEAN, 2.0),
)


@dataclass(frozen=True)
class ExperimentSpec:
    preset: Preset = Preset.CUSTOM
    trials: int = 10_000
    seed: int = 0
    output_path: str = ""
    detector: DetectorKind = DetectorKind.BS
    axis: SweepAxis = SweepAxis.M
    values: tuple = ()
    overrides: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "preset", Preset(self.preset))
        object.__setattr__(self, "detector", DetectorKind(self.detector))
        object.__setattr__(self, "axis", SweepAxis(self.axis))
        object.__setattr__(self, "values", tuple(self.values))
        if self.trials < 1:
            raise ContractViolation("trials must be at least 1")
        if not 0 <= self.seed <= MAX_SEED:
            raise ContractViolation("seed must be an unsigned 64-bit integer")

    def sweep_values(self):
        if self.values:
            return self.values
        if self.preset is Preset.CUSTOM:
            return AXIS_VALUES[self.axis]
        return DEFAULT_VALUES[self.preset]

    def as_dict(self):
        return {
            "preset": self.preset.value,
            "trials": self.trials,
            "seed": self.seed,
            "output_path": self.output_path,
            "detector": self.detector.value,
            "axis": self.axis.value,
            "values": list(self.sweep_values()),
            "overrides": dict(self.overrides),
        }


@dataclass(frozen=True)
class RunSettings:
    workers: int = 1
    chunk_size: int = DEFAULT_CHUNK_SIZE
    grid_size: int = DEFAULT_GRID_SIZE

    def as_dict(self):
        return {"workers": self.workers, "chunk_size": self.chunk_size, "grid_size": self.grid_size}


@dataclass
class ExperimentContext:
    spec: ExperimentSpec
    scenario: object
    cost: object
    fading: object = None
    settings: RunSettings = field(default_factory=RunSettings)
    fixed: dict = field(default_factory=dict)

    def simulate(self, config, detector, cost=None, fading=None):
        return run_monte_carlo(
            config,
            detector,
            self.spec.trials,
            self.spec.seed,
            cost_model=cost or self.cost,
            fading=fading,
            workers=self.settings.workers,
            chunk_size=self.settings.chunk_size,
            grid_size=self.settings.grid_size,
        )

    def error_cost(self, c=None):
        cost = replace(self.cost, mode=CostMode.ERROR_MIN)
        return cost if c is None else replace(cost, c=float(c))

    def throughput_cost(self, **changes):
        return replace(throughput_cost(self.cost), **changes)

    def stamp(self, row):
        row["trials"] = self.spec.trials
        row["seed"] = self.spec.seed
        return row


PRESETS = {}


def preset(name):
    def register(builder):
        PRESETS[name] = builder
        return builder

    return register


def _sensors(context, M):
    return context.scenario.with_sensor_count(int(M))


def _preset_network(context, M, K=None, tau=None):
    """The preset's own M, K and tau unless the config file set them under [scenario].

    A file K larger than the preset M (or a file M smaller than the preset K)
    is rejected by the scenario invariants.
    """
    given = context.spec.overrides
    config = context.scenario if "scenario.M" in given else _sensors(context, M)
    if K is not None:
        config = replace(config, K=context.scenario.K if "scenario.K" in given else K)
    if tau is not None and "scenario.tau" not in given:
        config = replace(config, tau=tau)
    return config


@preset(Preset.THROUGHPUT_VS_M)
def throughput_vs_sensors(context):
    rows = []
    for M in context.spec.sweep_values():
        config = _sensors(context, M)
        for omega in THROUGHPUT_WEIGHTS:
            cost = context.throughput_cost(omega=omega)
            metrics = context.simulate(config, DetectorKind.DP, cost=cost)
            rows.append(context.stamp({
                "M": config.M,
                "omega": omega,
                "throughput_secondary": metrics.norm_throughput_secondary,
                "stderr_secondary": metrics.stderr_throughput_secondary,
                "throughput_primary": metrics.norm_throughput_primary,
                "stderr_primary": metrics.stderr_throughput_primary,
                "weighted_throughput": metrics.weighted_throughput(omega),
            }))
    context.fixed.update(detector=DetectorKind.DP.value, mode=CostMode.WEIGHTED_THROUGHPUT.value, omega=list(THROUGHPUT_WEIGHTS))
    return rows


@preset(Preset.PERROR_VS_M)
def error_vs_sensors(context):
    rows = []
    for M in context.spec.sweep_values():
        config = _sensors(context, M)
        bs = context.simulate(config, DetectorKind.BS)
        dp = context.simulate(config, DetectorKind.DP, cost=context.error_cost())
        rows.append(context.stamp({
            "M": config.M,
            "p_error_bs": bs.p_error,
            "p_error_dp": dp.p_error,
            "stderr_bs": bs.stderr_p_error,
            "stderr_dp": dp.stderr_p_error,
        }))
    context.fixed.update(mode=CostMode.ERROR_MIN.value)
    return rows


def _three_schemes(context, config):
    return {
        "bs": context.simulate(config, DetectorKind.BS, cost=context.throughput_cost()),
        "dp_error": context.simulate(config, DetectorKind.DP, cost=context.error_cost()),
        "dp_throughput": context.simulate(config, DetectorKind.DP, cost=context.throughput_cost()),
    }


@preset(Preset.PROBED_VS_M)
def probed_vs_sensors(context):
    rows = []
    for M in context.spec.sweep_values():
        config = _sensors(context, M)
        row = {"M": config.M}
        schemes = _three_schemes(context, config)
        for name, metrics in schemes.items():
            row[f"probed_{name}"] = metrics.avg_stage
        for name, metrics in schemes.items():
            row[f"stderr_{name}"] = metrics.stderr_avg_stage
        rows.append(context.stamp(row))
    return rows


@preset(Preset.THROUGHPUT_COMPARE)
def throughput_compare(context):
    rows = []
    omega = context.cost.omega
    for M in context.spec.sweep_values():
        config = _sensors(context, M)
        row = {"M": config.M, "omega": omega}
        schemes = _three_schemes(context, config)
        for name, metrics in schemes.items():
            row[f"weighted_{name}"] = metrics.weighted_throughput(omega)
        for name, metrics in schemes.items():
            row[f"secondary_{name}"] = metrics.norm_throughput_secondary
        rows.append(context.stamp(row))
    return rows


@preset(Preset.PROBED_VS_K)
def probed_vs_horizon(context):
    base = _preset_network(context, PROBED_VS_K_SENSORS, tau=PROBED_VS_K_TAU)
    rows = []
    for model, sigma2_s in PROBED_VS_K_SERIES:
        series = replace(base, measurement_model=model, sigma2_s=(sigma2_s,), shift_means=())
        for K in context.spec.sweep_values():
            config = replace(series, K=int(K))
            metrics = context.simulate(config, DetectorKind.BS)
            rows.append(context.stamp({
                "K": config.K,
                "model": model.value,
                "sigma2_s": sigma2_s,
                "avg_probed": metrics.avg_stage,
                "stderr_probed": metrics.stderr_avg_stage,
                "p_error": metrics.p_error,
            }))
    context.fixed.update(M=base.M, tau=base.tau, detector=DetectorKind.BS.value)
    return rows


@preset(Preset.FADING_PROBED)
def fading_probed(context):
    fading = context.fading or FadingConfig()
    cost = context.error_cost()
    rows = []
    for M in context.spec.sweep_values():
        config = _sensors(context, M)
        static = context.simulate(config, DetectorKind.DP, cost=cost)
        faded = context.simulate(config, DetectorKind.DP, cost=cost, fading=fading)
        rows.append(context.stamp({
            "M": config.M,
            "expected_participants": float(participation_probs(fading, config.M).sum()),
            "avg_probed_static": static.avg_stage,
            "avg_probed_fading": faded.avg_stage,
            "avg_sensing_time_static": static.avg_sensing_time,
            "avg_sensing_time_fading": faded.avg_sensing_time,
            "p_error_static": static.p_error,
            "p_error_fading": faded.p_error,
        }))
    context.fixed.update(fading=fading.as_dict(), detector=DetectorKind.DP.value, mode=CostMode.ERROR_MIN.value)
    return rows


def _threshold_rows(policy, scheme, c):
    llr_low, llr_high = policy.llr_thresholds()
    return [
        {
            "scheme": scheme,
            "c": c,
            "k": k + 1,
            "pi_low": float(policy.pi_low[k]),
            "pi_high": float(policy.pi_high[k]),
            "llr_low": float(llr_low[k]),
            "llr_high": float(llr_high[k]),
        }
        for k in range(policy.K)
    ]


@preset(Preset.THRESHOLDS_VS_STAGE)
def thresholds_vs_stage(context):
    config = _preset_network(context, 10, K=8)
    grid_size = context.settings.grid_size
    rows = []
    for c in context.spec.sweep_values():
        policy = solve_backward(config, context.throughput_cost(c=float(c)), grid_size=grid_size)
        rows.extend(_threshold_rows(policy, "two-threshold", float(c)))
    one = solve_one_threshold(config, throughput_cost(context.cost, one_threshold=True), grid_size=grid_size)
    rows.extend(_threshold_rows(one, "one-threshold", 0.0))
    context.fixed.update(M=config.M, K=config.K, mode=CostMode.WEIGHTED_THROUGHPUT.value)
    return rows


def _cost_sweep(context):
    config = _preset_network(context, 8, K=8)
    context.fixed.update(M=config.M, K=config.K, detector=DetectorKind.DP.value, mode=CostMode.ERROR_MIN.value)
    for c in context.spec.sweep_values():
        yield float(c), config, context.simulate(config, DetectorKind.DP, cost=context.error_cost(c))


@preset(Preset.SENSING_VS_C)
def sensing_vs_cost(context):
    rows = []
    for c, config, metrics in _cost_sweep(context):
        rows.append(context.stamp({
            "c": c,
            "avg_sensing_time": metrics.avg_sensing_time,
            "stderr_sensing_time": config.tau * metrics.stderr_avg_stage,
            "avg_probed": metrics.avg_stage,
            "p_error": metrics.p_error,
        }))
    return rows


@preset(Preset.THROUGHPUT_VS_C)
def throughput_vs_cost(context):
    rows = []
    for c, _, metrics in _cost_sweep(context):
        rows.append(context.stamp({
            "c": c,
            "throughput_secondary": metrics.norm_throughput_secondary,
            "stderr_secondary": metrics.stderr_throughput_secondary,
            "throughput_primary": metrics.norm_throughput_primary,
            "stderr_primary": metrics.stderr_throughput_primary,
            "p_error": metrics.p_error,
        }))
    return rows


@preset(Preset.CUSTOM)
def custom_sweep(context):
    spec = context.spec
    cost = context.cost
    if spec.detector is DetectorKind.ONE_THRESHOLD:
        cost = throughput_cost(cost, one_threshold=True)
    points = sweep(
        spec.axis,
        spec.sweep_values(),
        context.scenario,
        spec.detector,
        spec.trials,
        spec.seed,
        cost_model=cost,
        fading=context.fading,
        workers=context.settings.workers,
        chunk_size=context.settings.chunk_size,
        grid_size=context.settings.grid_size,
    )
    rows = []
    for value, metrics in points:
        omega = value if spec.axis is SweepAxis.OMEGA else cost.omega
        row = {spec.axis.value: value, **metrics.as_row(), "weighted_throughput": metrics.weighted_throughput(omega)}
        rows.append(context.stamp(row))
    return rows


def build_table(spec, scenario, cost, fading=None, settings=None):
    """Run the preset of ``spec`` and return (table, resolved parameters)."""
    context = ExperimentContext(spec, scenario, cost, fading, settings or RunSettings())
    logger.info("running preset %s with %d trials per point, seed %d", spec.preset.value, spec.trials, spec.seed)
    rows = PRESETS[spec.preset](context)
    table = pd.DataFrame.from_records(rows)
    parameters = {
        "experiment": spec.as_dict(),
        "scenario": scenario.as_dict(),
        "cost": cost.as_dict(),
        "fading": fading.as_dict() if fading is not None else None,
        "preset_fixed": context.fixed,
        "runtime": context.settings.as_dict(),
        "columns": list(table.columns),
    }
    return table, parameters

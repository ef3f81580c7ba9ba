"""Slot-level sensing model: scenario parameters, measurements, local LLRs and
magnitude ordering of the reports sent to the fusion center."""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum

import numpy as np

from .exceptions import ContractViolation, InvalidScenario

logger = logging.getLogger(__name__)

# slack for the slot-timing inequality, 1 - 0.2 - 8 * 0.1 is not exactly zero in binary
TIMING_SLACK = 1e-12


class Hypothesis(IntEnum):
    H0 = 0  # channel free
    H1 = 1  # channel busy


class MeasurementModel(str, Enum):
    ENERGY = "energy"
    SHIFT_IN_MEAN = "shift-in-mean"


def _as_tuple(values):
    if values is None:
        return ()
    if np.isscalar(values):
        return (float(values),)
    return tuple(float(v) for v in values)


def _broadcast(values, count, name):
    if len(values) == count:
        return values
    if len(values) == 1:
        return values * count
    raise InvalidScenario(
        f"len({name}) in (1, M)",
        f"{name} has {len(values)} entries, expected 1 or {count}",
    )


@dataclass(frozen=True)
class ScenarioConfig:
    """Slot timing, prior, SNR and sensor counts of one sensing scenario.

    ``sigma2_s`` and ``shift_means`` accept a single value, broadcast to all
    ``M`` sensors.  When ``shift_means`` is empty the shift-in-mean model
    places the two hypothesis means at ``c_i - mu_i`` and ``c_i + mu_i`` with
    ``(2 mu_i)^2 = sigma2_s[i]``, so the same SNR knob drives both models.
    ``shift_center`` holds the midpoints ``c_i`` (zero when empty); any pair of
    means ``mu_0 < mu_1`` is ``c = (mu_0 + mu_1) / 2``, ``mu = (mu_1 - mu_0) / 2``.
    The LLR law depends on ``mu_i`` only.
    """

    M: int = 10
    N: int = 3
    K: int = 8
    tau_s: float = 1.0
    tau_N: float = 0.2
    tau: float = 0.1
    pi0: float = 0.5
    sigma2: float = 1.0
    sigma2_s: tuple = (2.0,)
    measurement_model: MeasurementModel = MeasurementModel.ENERGY
    shift_means: tuple = field(default=())
    shift_center: tuple = field(default=())
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "K", int(self.K))
        object.__setattr__(self, "measurement_model", MeasurementModel(self.measurement_model))
        if self.M < 1:
            raise InvalidScenario("M >= 1")
        sigma2_s = _broadcast(_as_tuple(self.sigma2_s), self.M, "sigma2_s")
        object.__setattr__(self, "sigma2_s", sigma2_s)
        shift_means = _as_tuple(self.shift_means)
        if shift_means:
            shift_means = _broadcast(shift_means, self.M, "shift_means")
        object.__setattr__(self, "shift_means", shift_means)
        shift_center = _as_tuple(self.shift_center)
        if shift_center:
            shift_center = _broadcast(shift_center, self.M, "shift_center")
        object.__setattr__(self, "shift_center", shift_center)
        self.validate()

    def validate(self):
        if not self.M >= self.K >= 1:
            raise InvalidScenario("M >= K >= 1", f"M={self.M}, K={self.K}")
        if self.N < 1:
            raise InvalidScenario("N >= 1", f"N={self.N}")
        if not 0.0 <= self.pi0 <= 1.0:
            raise InvalidScenario("0 <= pi0 <= 1", f"pi0={self.pi0}")
        if self.tau_s <= 0 or self.tau <= 0 or self.tau_N < 0:
            raise InvalidScenario("tau_s > 0, tau > 0, tau_N >= 0")
        if self.tau_s - self.tau_N - self.K * self.tau < -TIMING_SLACK:
            raise InvalidScenario(
                "tau_s - tau_N - K*tau >= 0",
                f"tau_s - tau_N - K*tau = {self.tau_s - self.tau_N - self.K * self.tau:.6g} < 0",
            )
        if self.sigma2 <= 0 or any(v <= 0 for v in self.sigma2_s):
            raise InvalidScenario("all variances > 0")
        if any(mu <= 0 for mu in self.shift_means):
            raise InvalidScenario("shift means > 0")

    def snr(self, sensor):
        return self.sigma2_s[sensor] / self.sigma2

    def mean_offset(self, sensor):
        """Half distance between the hypothesis means of the shift-in-mean model."""
        if self.shift_means:
            return self.shift_means[sensor]
        return 0.5 * math.sqrt(self.sigma2_s[sensor])

    def mean_center(self, sensor):
        return self.shift_center[sensor] if self.shift_center else 0.0

    @property
    def identical_sensors(self):
        return (
            len(set(self.sigma2_s)) == 1
            and len(set(self.shift_means)) <= 1
            and len(set(self.shift_center)) <= 1
        )

    def log_prior_ratio(self):
        """log(pi0 / (1 - pi0)), infinite at the degenerate priors."""
        if self.pi0 <= 0.0:
            return -math.inf
        if self.pi0 >= 1.0:
            return math.inf
        return math.log(self.pi0) - math.log1p(-self.pi0)

    def sensing_time(self, k):
        return self.tau_N + k * self.tau

    def remaining_fraction(self, k):
        return (self.tau_s - self.tau_N - k * self.tau) / self.tau_s

    def with_sensor_count(self, M):
        """Same scenario with ``M`` identical sensors, clipping K to M."""
        if not self.identical_sensors:
            raise ContractViolation("changing M requires identical sensors")
        return replace(
            self,
            M=M,
            K=min(self.K, M),
            sigma2_s=self.sigma2_s[:1],
            shift_means=self.shift_means[:1],
            shift_center=self.shift_center[:1],
        )

    def subset(self, sensors):
        sensors = sorted(sensors)
        shift = tuple(self.shift_means[i] for i in sensors) if self.shift_means else ()
        center = tuple(self.shift_center[i] for i in sensors) if self.shift_center else ()
        return replace(
            self,
            M=len(sensors),
            K=min(self.K, len(sensors)),
            sigma2_s=tuple(self.sigma2_s[i] for i in sensors),
            shift_means=shift,
            shift_center=center,
        )

    def as_dict(self):
        return {
            "M": self.M,
            "N": self.N,
            "K": self.K,
            "tau_s": self.tau_s,
            "tau_N": self.tau_N,
            "tau": self.tau,
            "pi0": self.pi0,
            "sigma2": self.sigma2,
            "sigma2_s": list(self.sigma2_s),
            "measurement_model": self.measurement_model.value,
            "shift_means": list(self.shift_means),
            "shift_center": list(self.shift_center),
            "rng_seed": self.rng_seed,
        }


@dataclass(frozen=True)
class SlotRealization:
    true_hypothesis: Hypothesis
    llr: tuple
    ordered: tuple

    @property
    def ordered_values(self):
        return np.array([value for _, value in self.ordered])


@dataclass
class SlotBatch:
    """Many slots drawn at once; row ``q`` is one slot."""

    truth: np.ndarray  # int8, Hypothesis values
    llr: np.ndarray  # (count, M)

    def __len__(self):
        return len(self.truth)

    def ordered(self):
        order = magnitude_order(self.llr)
        return order, np.take_along_axis(self.llr, order, axis=1)

    def restrict(self, sensors):
        return SlotBatch(self.truth, self.llr[:, sorted(sensors)])


def _sample_block(config, truth, rng):
    count = len(truth)
    busy = (truth == Hypothesis.H1)[:, None, None]
    noise = rng.standard_normal((count, config.M, config.N))
    sigma = math.sqrt(config.sigma2)
    if config.measurement_model is MeasurementModel.ENERGY:
        signal = np.sqrt(np.asarray(config.sigma2_s) + config.sigma2)[None, :, None]
        return np.where(busy, noise * signal, noise * sigma)
    mu = np.array([config.mean_offset(i) for i in range(config.M)])[None, :, None]
    center = np.array([config.mean_center(i) for i in range(config.M)])[None, :, None]
    return center + noise * sigma + np.where(busy, mu, -mu)


def llr_from_block(samples, config):
    """LLRs of a ``(..., M, N)`` sample block, one per sensor."""
    samples = np.asarray(samples, dtype=float)
    if samples.shape[-1] != config.N:
        raise ContractViolation(f"expected {config.N} samples per sensor, got {samples.shape[-1]}")
    if config.measurement_model is MeasurementModel.ENERGY:
        gamma = np.asarray(config.sigma2_s) / config.sigma2
        energy = np.sum(samples ** 2, axis=-1)
        return energy * gamma / (2.0 * config.sigma2 * (gamma + 1.0)) - 0.5 * config.N * np.log1p(gamma)
    mu = np.array([config.mean_offset(i) for i in range(config.M)])
    center = np.array([config.mean_center(i) for i in range(config.M)])
    # sum((x - c + mu)^2 - (x - c - mu)^2) / (2 sigma^2)
    return 2.0 * mu * (np.sum(samples, axis=-1) - config.N * center) / config.sigma2


def llr_from_samples(samples, sensor, config):
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size != config.N:
        raise ContractViolation(f"expected {config.N} samples, got {samples.size}")
    if not 0 <= sensor < config.M:
        raise ContractViolation(f"sensor index {sensor} out of range 0..{config.M - 1}")
    if config.measurement_model is MeasurementModel.ENERGY:
        gamma = config.snr(sensor)
        energy = float(np.dot(samples, samples))
        return energy * gamma / (2.0 * config.sigma2 * (gamma + 1.0)) - 0.5 * config.N * math.log1p(gamma)
    mu = config.mean_offset(sensor)
    centered = float(samples.sum()) - config.N * config.mean_center(sensor)
    return 2.0 * mu * centered / config.sigma2


def draw_truth(config, rng, count):
    return (rng.random(count) >= config.pi0).astype(np.int8)


def draw_slots(config, rng, count):
    truth = draw_truth(config, rng, count)
    samples = _sample_block(config, truth, rng)
    return SlotBatch(truth=truth, llr=llr_from_block(samples, config))


def draw_slot(config, rng):
    batch = draw_slots(config, rng, 1)
    llr = tuple(float(v) for v in batch.llr[0])
    return SlotRealization(
        true_hypothesis=Hypothesis(int(batch.truth[0])),
        llr=llr,
        ordered=tuple(rank_by_magnitude(llr)),
    )


def magnitude_order(llr):
    """Column order of each row by descending |llr|, ties to the lower index."""
    return np.argsort(-np.abs(np.asarray(llr, dtype=float)), axis=-1, kind="stable")


def rank_by_magnitude(llr):
    values = np.asarray(llr, dtype=float)
    if values.ndim != 1 or values.size == 0:
        raise ContractViolation("rank_by_magnitude needs a non-empty list of LLRs")
    return [(int(i), float(values[i])) for i in magnitude_order(values)]

"""Which sensors can report over a faded control channel.

A sensor's report of ``b`` bits must fit into ``tau_b`` seconds at a rate
``W log2(1 + P g / (Gamma sigma_f^2))``.  That holds when the channel gain
``g`` exceeds a threshold, and the sensor takes part in sensing for the
whole coherence period in which it does.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ContractViolation, InvalidScenario
from .order_stats import subset_polynomial

logger = logging.getLogger(__name__)


class ExponentialGain:
    """Rayleigh fading power gain: exponential with the given mean."""

    name = "exponential"

    def __init__(self, mean):
        if mean <= 0:
            raise ContractViolation("gain mean must be positive")
        self.mean = mean

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, np.exp(-x / self.mean) / self.mean, 0.0)

    def survival(self, x):
        return float(np.exp(-max(x, 0.0) / self.mean))

    def sample(self, rng, size=None):
        return rng.exponential(self.mean, size)


GAIN_LAWS = {ExponentialGain.name: ExponentialGain}


def _per_sensor(values, i):
    return values[i] if len(values) > 1 else values[0]


@dataclass(frozen=True)
class FadingConfig:
    W: float = 50e3
    bits: float = 20.0
    tau_b: float = 0.5e-3
    tau_seconds: float = 1e-3  # mini-slot duration in seconds
    P_over_sigma: tuple = (5.0,)
    gap: tuple = (2.0,)
    gain_law: str = ExponentialGain.name
    gain_mean: tuple = (1.0,)
    T_c: int = 10

    def __post_init__(self):
        for name in ("P_over_sigma", "gap", "gain_mean"):
            value = getattr(self, name)
            value = (float(value),) if np.isscalar(value) else tuple(float(v) for v in value)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "T_c", int(self.T_c))
        if not self.tau_b < self.tau_seconds:
            raise InvalidScenario("tau_b < tau", f"tau_b={self.tau_b} s is not below the mini-slot {self.tau_seconds} s")
        if self.W <= 0 or self.tau_b <= 0 or self.bits < 0:
            raise InvalidScenario("W > 0, tau_b > 0, b >= 0")
        if any(g <= 1 for g in self.gap):
            raise InvalidScenario("Gamma_i > 1")
        if any(m <= 0 for m in self.gain_mean) or any(p <= 0 for p in self.P_over_sigma):
            raise InvalidScenario("means > 0")
        if self.T_c < 1:
            raise InvalidScenario("T_c >= 1")

    def check_sensor_count(self, M):
        for name in ("P_over_sigma", "gap", "gain_mean"):
            if len(getattr(self, name)) not in (1, M):
                raise InvalidScenario(f"len({name}) in (1, M)", f"{name} needs 1 or {M} entries")

    def gain(self, i):
        try:
            law = GAIN_LAWS[self.gain_law]
        except KeyError:
            raise ContractViolation(f"unsupported gain law {self.gain_law!r}") from None
        return law(_per_sensor(self.gain_mean, i))

    def as_dict(self):
        return {
            "W": self.W,
            "bits": self.bits,
            "tau_b": self.tau_b,
            "tau_seconds": self.tau_seconds,
            "P_over_sigma": list(self.P_over_sigma),
            "gap": list(self.gap),
            "gain_law": self.gain_law,
            "gain_mean": list(self.gain_mean),
            "T_c": self.T_c,
        }


def gain_threshold(i, fading):
    """Smallest gain at which sensor ``i`` delivers its report within tau_b."""
    spectral_load = fading.bits / (fading.W * fading.tau_b)
    snr_needed = math.expm1(spectral_load * math.log(2.0))
    return _per_sensor(fading.gap, i) / _per_sensor(fading.P_over_sigma, i) * snr_needed


def participation_prob(i, fading):
    return fading.gain(i).survival(gain_threshold(i, fading))


def participation_probs(fading, M):
    return np.array([participation_prob(i, fading) for i in range(M)])


def participation_pmf(M_bar, fading, M):
    """Probability that exactly ``M_bar`` of the ``M`` sensors take part."""
    if not 0 <= M_bar <= M:
        raise ContractViolation(f"M_bar={M_bar} outside 0..{M}")
    delta = participation_probs(fading, M)
    return float(subset_polynomial(delta, 1.0 - delta)[M_bar])


def sample_participants(fading, M, rng):
    delta = participation_probs(fading, M)
    return frozenset(int(i) for i in np.nonzero(rng.random(M) < delta)[0])


def effective_config(config, participants):
    """Scenario restricted to the participants; None when nobody reports."""
    participants = sorted(participants)
    if any(not 0 <= i < config.M for i in participants):
        raise ContractViolation("participant index out of range")
    if not participants:
        return None
    if len(participants) == config.M:
        return config
    return config.subset(participants)

"""Conditional laws of a sensor's LLR.

Energy detection gives ``Y = s_H * X - b`` with ``X ~ chi-square(N)``,
``s_0 = gamma / (2 (gamma + 1))``, ``s_1 = gamma / 2`` and
``b = (N / 2) log(1 + gamma)``.  The shift-in-mean model gives
``Y ~ Normal(-d/2, d)`` under H0 and ``Normal(d/2, d)`` under H1 with
``d = 4 N mu^2 / sigma^2``.  In both cases log f(y|H1)/f(y|H0) = y.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import optimize, special

from .exceptions import ContractViolation
from .scenario import Hypothesis, MeasurementModel

logger = logging.getLogger(__name__)

RHO_GRID_POINTS = 512
ENVELOPE_GRID_POINTS = 4096
# upper-tail probability left out when truncating the support
TAIL_MASS = 1e-13

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


@dataclass(frozen=True)
class LlrLaw:
    model: MeasurementModel
    dof: int
    scale0: float = 0.0
    scale1: float = 0.0
    shift: float = 0.0
    separation: float = 0.0

    @classmethod
    def energy(cls, N, gamma):
        if gamma <= 0:
            raise ContractViolation("energy LLR law needs gamma > 0")
        return cls(
            model=MeasurementModel.ENERGY,
            dof=int(N),
            scale0=gamma / (2.0 * (gamma + 1.0)),
            scale1=gamma / 2.0,
            shift=0.5 * N * math.log1p(gamma),
        )

    @classmethod
    def shift_in_mean(cls, N, mu, sigma2):
        return cls(
            model=MeasurementModel.SHIFT_IN_MEAN,
            dof=int(N),
            separation=4.0 * N * mu * mu / sigma2,
        )

    @classmethod
    def for_sensor(cls, config, sensor):
        if config.measurement_model is MeasurementModel.ENERGY:
            return cls.energy(config.N, config.snr(sensor))
        return cls.shift_in_mean(config.N, config.mean_offset(sensor), config.sigma2)

    @property
    def is_energy(self):
        return self.model is MeasurementModel.ENERGY

    def scale(self, H):
        return self.scale1 if H == Hypothesis.H1 else self.scale0

    def mean(self, H):
        sign = 1.0 if H == Hypothesis.H1 else -1.0
        if self.is_energy:
            return self.scale(H) * self.dof - self.shift
        return sign * 0.5 * self.separation

    @property
    def support_low(self):
        return -self.shift if self.is_energy else -math.inf

    def quantile(self, q, H):
        if self.is_energy:
            return 2.0 * self.scale(H) * special.gammaincinv(0.5 * self.dof, q) - self.shift
        return self.mean(H) + math.sqrt(self.separation) * special.ndtri(q)

    def upper_quantile(self, tail, H):
        if self.is_energy:
            return 2.0 * self.scale(H) * special.gammainccinv(0.5 * self.dof, tail) - self.shift
        return self.mean(H) - math.sqrt(self.separation) * special.ndtri(tail)

    def support_cap(self, tail=TAIL_MASS):
        """Point beyond which both hypotheses leave less than ``tail`` mass."""
        return max(self.upper_quantile(tail, Hypothesis.H0), self.upper_quantile(tail, Hypothesis.H1))

    def support_floor(self, tail=TAIL_MASS):
        if self.is_energy:
            return -self.shift
        return min(self.quantile(tail, Hypothesis.H0), self.quantile(tail, Hypothesis.H1))


def _chi2_arg(y, H, law):
    return (np.asarray(y, dtype=float) + law.shift) / law.scale(H)


def llr_logpdf(y, H, law):
    y = np.asarray(y, dtype=float)
    if law.is_energy:
        x = _chi2_arg(y, H, law)
        half = 0.5 * law.dof
        with np.errstate(divide="ignore", invalid="ignore"):
            logpdf = (
                special.xlogy(half - 1.0, x) - 0.5 * x - half * math.log(2.0) - special.gammaln(half)
                - math.log(law.scale(H))
            )
        inside = x > 0 if law.dof < 2 else x >= 0
        return np.where(inside, logpdf, -np.inf)
    d = law.separation
    z = y - law.mean(H)
    return -0.5 * z * z / d - 0.5 * math.log(2.0 * math.pi * d)


def llr_pdf(y, H, law):
    return np.exp(llr_logpdf(y, H, law))


def llr_cdf(y, H, law):
    y = np.asarray(y, dtype=float)
    if law.is_energy:
        x = np.maximum(_chi2_arg(y, H, law), 0.0)
        return special.gammainc(0.5 * law.dof, 0.5 * x)
    return special.ndtr((y - law.mean(H)) / math.sqrt(law.separation))


def llr_sf(y, H, law):
    y = np.asarray(y, dtype=float)
    if law.is_energy:
        x = np.maximum(_chi2_arg(y, H, law), 0.0)
        return special.gammaincc(0.5 * law.dof, 0.5 * x)
    return special.ndtr((law.mean(H) - y) / math.sqrt(law.separation))


def beta(b, H, law):
    """Pr(|Y| > |b| | H), summed from the two tails without cancellation."""
    a = np.abs(np.asarray(b, dtype=float))
    return llr_sf(a, H, law) + llr_cdf(-a, H, law)


def _central_mass_quadrature(y, H, law):
    y = np.atleast_1d(np.asarray(y, dtype=float))
    t = y[:, None] * _GL_NODES[None, :]
    dens = llr_pdf(t, H, law)
    return y * (dens @ _GL_WEIGHTS)


def _quadrature_cutoff(law):
    # Gauss-Legendre on [-y, y] stays exact while the interval keeps clear of -shift
    if law.is_energy:
        return 0.5 * law.shift
    return 0.5 * math.sqrt(law.separation)


def log_central_mass(y, H, law):
    """log Pr(|Y| <= y | H) for y >= 0."""
    y = np.asarray(y, dtype=float)
    scalar = y.ndim == 0
    y = np.atleast_1d(y)
    out = np.empty_like(y)
    small = y <= _quadrature_cutoff(law)
    if np.any(small):
        with np.errstate(divide="ignore"):
            out[small] = np.log(_central_mass_quadrature(y[small], H, law))
    if np.any(~small):
        out[~small] = np.log1p(-beta(y[~small], H, law))
    return out[0] if scalar else out


def central_mass(y, H, law):
    return np.exp(log_central_mass(y, H, law))


def rho(y, law):
    """Correction term log Pr(|Y| <= y | H1) - log Pr(|Y| <= y | H0)."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ContractViolation("rho is defined for y >= 0")
    scalar = y.ndim == 0
    y = np.atleast_1d(y)
    out = np.zeros_like(y)
    live = (y > 0) & np.isfinite(y)
    if np.any(live):
        out[live] = log_central_mass(y[live], Hypothesis.H1, law) - log_central_mass(y[live], Hypothesis.H0, law)
    return float(out[0]) if scalar else out


def _refine(law, lo, hi, sign):
    if hi <= lo:
        return None
    result = optimize.minimize_scalar(
        lambda v: sign * rho(v, law), bounds=(lo, hi), method="bounded", options={"xatol": 1e-10}
    )
    return sign * float(result.fun)


@lru_cache(maxsize=4096)
def rho_extrema(y_max, law):
    """(min, max) of rho over [0, y_max]: dense grid then bounded refinement."""
    if y_max < 0:
        raise ContractViolation("rho_extrema needs y_max >= 0")
    if y_max == 0:
        return 0.0, 0.0
    grid = np.linspace(0.0, y_max, RHO_GRID_POINTS)
    values = rho(grid, law)
    extrema = []
    for sign, index in ((1.0, int(np.argmin(values))), (-1.0, int(np.argmax(values)))):
        lo = grid[max(index - 1, 0)]
        hi = grid[min(index + 1, len(grid) - 1)]
        refined = _refine(law, lo, hi, sign)
        best = values[index]
        if refined is not None:
            best = min(best, refined) if sign > 0 else max(best, refined)
        extrema.append(float(best))
    return extrema[0], extrema[1]


class RhoEnvelope:
    """Extrema of rho over [0, a] for arrays of ``a``.

    The stationary points of rho on [0, cap] are located once; the extrema
    over [0, a] are then the prefix extrema of those points together with
    rho(0) = 0 and rho(a).
    """

    def __init__(self, law, grid_points=ENVELOPE_GRID_POINTS):
        self.law = law
        self.cap = max(law.support_cap(), abs(law.support_floor()))
        grid = np.linspace(0.0, self.cap, grid_points)
        values = rho(grid, law)
        slope = np.sign(np.diff(values))
        turns = np.nonzero(slope[1:] * slope[:-1] < 0)[0] + 1
        # sub-1e-14 wiggles in the far tail are rounding, not extrema
        turns = turns[np.abs(values[turns]) > 1e-14]
        points, levels = [], []
        for index in turns:
            sign = 1.0 if slope[index - 1] < 0 else -1.0  # valley when falling into it
            lo, hi = grid[index - 1], grid[index + 1]
            result = optimize.minimize_scalar(
                lambda v: sign * rho(v, law), bounds=(lo, hi), method="bounded", options={"xatol": 1e-12}
            )
            point = float(result.x)
            level = float(rho(point, law))
            if sign * level > sign * values[index]:
                point, level = float(grid[index]), float(values[index])
            points.append(point)
            levels.append(level)
        self.points = np.array(points)
        self.prefix_min = np.minimum.accumulate(np.array(levels)) if levels else np.array([])
        self.prefix_max = np.maximum.accumulate(np.array(levels)) if levels else np.array([])
        logger.debug("rho envelope for %s: %d stationary points below %.3f", law, len(points), self.cap)

    def extrema(self, a):
        a = np.abs(np.asarray(a, dtype=float))
        at_a = rho(a, self.law)
        low = np.minimum(at_a, 0.0)
        high = np.maximum(at_a, 0.0)
        if self.points.size:
            count = np.searchsorted(self.points, a, side="right")
            seen = count > 0
            idx = np.maximum(count - 1, 0)
            low = np.where(seen, np.minimum(low, self.prefix_min[idx]), low)
            high = np.where(seen, np.maximum(high, self.prefix_max[idx]), high)
        return low, high


@lru_cache(maxsize=256)
def rho_envelope(law):
    return RhoEnvelope(law)


def llr_log_ratio(y, law):
    """log f(y|H1)/f(y|H0) of a reported value; the identity for both models."""
    return np.array(y, dtype=float)


def llr_log_ratio_extrema(a, law):
    """Extrema of the log-ratio over [-|a|, |a|]; both supported maps are monotone."""
    a = np.abs(np.asarray(a, dtype=float))
    left, right = llr_log_ratio(-a, law), llr_log_ratio(a, law)
    return np.minimum(left, right), np.maximum(left, right)


def rho_bar(y, k, config, law):
    """(M - K) rho(|y|) + (K - k) log f(y|H1)/f(y|H0)."""
    if not 1 <= k <= config.K:
        raise ContractViolation(f"stage {k} outside 1..{config.K}")
    y = np.asarray(y, dtype=float)
    unreported = config.M - config.K
    value = (config.K - k) * llr_log_ratio(y, law)
    if unreported:
        value = value + unreported * rho(np.abs(y), law)
    return value

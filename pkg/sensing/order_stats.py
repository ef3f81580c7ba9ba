"""Densities of magnitude-ranked LLRs.

Rank 1 is the largest |Y|.  Sums over subsets of sensors are taken as
coefficients of products of linear polynomials ``beta_v x + (1 - beta_v)``,
so no routine here enumerates subsets.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import special

from .exceptions import ContractViolation, UndefinedConditionalError
from .llr_distributions import LlrLaw, beta, central_mass, llr_logpdf, llr_pdf, log_central_mass
from .scenario import Hypothesis

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SensorEnsemble:
    laws: tuple

    def __post_init__(self):
        object.__setattr__(self, "laws", tuple(self.laws))
        if not self.laws:
            raise ContractViolation("an ensemble needs at least one sensor")

    @classmethod
    def from_config(cls, config):
        return cls(tuple(LlrLaw.for_sensor(config, i) for i in range(config.M)))

    @classmethod
    def identical(cls, law, M):
        return cls((law,) * M)

    @property
    def M(self):
        return len(self.laws)

    @cached_property
    def is_identical(self):
        return len(set(self.laws)) == 1

    @property
    def law(self):
        """The common law of an identical ensemble."""
        if not self.is_identical:
            raise ContractViolation("ensemble sensors are not identical")
        return self.laws[0]


def subset_polynomial(success, failure, degree=None):
    """Coefficients of prod_v (success_v x + failure_v), lowest power first.

    ``success`` and ``failure`` have shape (V, ...) and the trailing axes are
    carried through, so many evaluation points are handled at once.  Powers
    above ``degree`` are dropped.
    """
    success = np.asarray(success, dtype=float)
    failure = np.asarray(failure, dtype=float)
    count = success.shape[0]
    degree = count if degree is None else min(degree, count)
    coeffs = np.zeros((degree + 1,) + success.shape[1:])
    coeffs[0] = 1.0
    for v in range(count):
        top = min(v + 1, degree)
        # update high powers first so each sensor enters once
        coeffs[1 : top + 1] = coeffs[1 : top + 1] * failure[v] + coeffs[0:top] * success[v]
        coeffs[0] = coeffs[0] * failure[v]
    return coeffs


def _betas(laws, arg, H):
    return np.stack([beta(arg, H, law) for law in laws])


def subset_weight_sum(m_sub, H, hi_arg, lo_arg, excluded, ensemble):
    """Sum over subsets S of size ``m_sub`` of the included sensors of
    prod_{v in S} beta_v(hi_arg) * prod_{v not in S} (1 - beta_v(lo_arg))."""
    excluded = set(excluded)
    included = [law for i, law in enumerate(ensemble.laws) if i not in excluded]
    if not 0 <= m_sub <= len(included):
        raise ContractViolation(f"subset size {m_sub} outside 0..{len(included)}")
    hi_arg = np.asarray(hi_arg, dtype=float)
    lo_arg = np.asarray(lo_arg, dtype=float)
    if not included:
        return np.ones(np.broadcast(hi_arg, lo_arg).shape)
    success = _betas(included, hi_arg, H)
    failure = 1.0 - _betas(included, lo_arg, H)
    success, failure = np.broadcast_arrays(success, failure)
    return subset_polynomial(success, failure, degree=m_sub)[m_sub]


def _log_binom(n, k):
    return special.gammaln(n + 1) - special.gammaln(k + 1) - special.gammaln(n - k + 1)


def _check_rank(m, ensemble, low=1):
    if not low <= m <= ensemble.M:
        raise ContractViolation(f"rank {m} outside {low}..{ensemble.M}")


def _leave_one_out(success, failure, index):
    """Coefficient ``index`` of the product with each sensor left out in turn."""
    count = success.shape[0]
    prefix = [np.zeros((index + 1,) + success.shape[1:])]
    prefix[0][0] = 1.0
    for v in range(count - 1):
        prefix.append(_multiply_linear(prefix[-1], success[v], failure[v]))
    suffix = [None] * count
    suffix[count - 1] = np.zeros_like(prefix[0])
    suffix[count - 1][0] = 1.0
    for v in range(count - 1, 0, -1):
        suffix[v - 1] = _multiply_linear(suffix[v], success[v], failure[v])
    out = np.zeros((count,) + success.shape[1:])
    for k in range(count):
        out[k] = np.sum(prefix[k] * suffix[k][::-1], axis=0)
    return out


def _multiply_linear(coeffs, success, failure):
    result = coeffs * failure
    result[1:] += coeffs[:-1] * success
    return result


def ranked_logpdf(m, y, H, ensemble):
    """log density of the rank-``m`` LLR under ``H``."""
    _check_rank(m, ensemble)
    y = np.asarray(y, dtype=float)
    M = ensemble.M
    if ensemble.is_identical:
        law = ensemble.law
        tail = beta(y, H, law)
        with np.errstate(divide="ignore"):
            log_tail = np.log(tail)
        out = math.log(M) + _log_binom(M - 1, m - 1) + llr_logpdf(y, H, law)
        if m > 1:
            out = out + (m - 1) * log_tail
        if M > m:
            out = out + (M - m) * log_central_mass(np.abs(y), H, law)
        return out
    with np.errstate(divide="ignore"):
        return np.log(ranked_pdf(m, y, H, ensemble))


def ranked_pdf(m, y, H, ensemble):
    """Marginal density of the rank-``m`` LLR under ``H``."""
    _check_rank(m, ensemble)
    y = np.asarray(y, dtype=float)
    if ensemble.is_identical:
        return np.exp(ranked_logpdf(m, y, H, ensemble))
    laws = ensemble.laws
    dens = np.stack([llr_pdf(y, H, law) for law in laws])
    success = _betas(laws, y, H)
    failure = 1.0 - success
    # sensor k sits at y, exactly m - 1 of the others lie above |y|
    weights = _leave_one_out(success, failure, m - 1)
    return np.sum(dens * weights, axis=0)


def joint_consecutive_pdf(m, alpha, gamma, H, ensemble):
    """Joint density of (Y^[m], Y^[m-1]) at (alpha, gamma)."""
    if m < 2:
        raise ContractViolation("the consecutive joint needs m >= 2")
    _check_rank(m, ensemble, low=2)
    alpha = np.asarray(alpha, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    ordered = np.abs(alpha) <= np.abs(gamma)
    M = ensemble.M
    if ensemble.is_identical:
        law = ensemble.law
        value = (
            M * (M - 1) * math.comb(M - 2, m - 2)
            * llr_pdf(gamma, H, law) * llr_pdf(alpha, H, law)
            * beta(gamma, H, law) ** (m - 2)
            * central_mass(np.abs(alpha), H, law) ** (M - m)
        )
        return np.where(ordered, value, 0.0)
    laws = ensemble.laws
    total = np.zeros(np.broadcast(alpha, gamma).shape)
    for k in range(M):
        upper = llr_pdf(gamma, H, laws[k])
        for l in range(M):
            if l == k:
                continue
            lower = llr_pdf(alpha, H, laws[l])
            # m - 2 sensors above |gamma|, the rest below |alpha|
            inner = subset_weight_sum(m - 2, H, gamma, alpha, {k, l}, ensemble)
            total = total + upper * lower * inner
    return np.where(ordered, total, 0.0)


def conditional_pdf(m, alpha, gamma, H, ensemble):
    """Density of Y^[m] at ``alpha`` given Y^[m-1] = ``gamma``."""
    marginal = ranked_pdf(m - 1, gamma, H, ensemble)
    if np.any(np.asarray(marginal) <= 0):
        raise UndefinedConditionalError(f"rank-{m - 1} density vanishes at gamma={gamma}")
    return joint_consecutive_pdf(m, alpha, gamma, H, ensemble) / marginal


def conditional_pdf_identical(m, alpha, gamma, H, law, M):
    """Closed form (M + 1 - m) f(alpha) C(|alpha|)^(M-m) / C(|gamma|)^(M-m+1)."""
    alpha = np.asarray(alpha, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    log_value = (
        math.log(M + 1 - m) + llr_logpdf(alpha, H, law)
        + (M - m) * log_central_mass(np.abs(alpha), H, law)
        - (M - m + 1) * log_central_mass(np.abs(gamma), H, law)
    )
    return np.where(np.abs(alpha) <= np.abs(gamma), np.exp(log_value), 0.0)


def block_joint_logpdf(values, H, ensemble):
    """log joint density of the K largest-magnitude LLRs, identical sensors."""
    values = np.asarray(values, dtype=float)
    K = values.shape[-1]
    M = ensemble.M
    if not 1 <= K <= M:
        raise ContractViolation(f"block of {K} values for {M} sensors")
    law = ensemble.law
    magnitudes = np.abs(values)
    if np.any(np.diff(magnitudes, axis=-1) > 0):
        raise ContractViolation("block values must be ordered by descending magnitude")
    out = special.gammaln(M + 1) - special.gammaln(M - K + 1) + np.sum(llr_logpdf(values, H, law), axis=-1)
    if M > K:
        out = out + (M - K) * log_central_mass(magnitudes[..., -1], H, law)
    return out

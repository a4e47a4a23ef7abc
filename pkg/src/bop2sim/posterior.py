"""Exact probability computations on independent Beta random variables.

When every competitor has integer shape parameters its CDF is a binomial
upper tail, ``F(t) = P(Bin(a + b - 1, t) >= a)``, i.e. a polynomial in
Bernstein form. Products of such CDFs stay in Bernstein form, and
integrating a Bernstein basis element against a Beta density gives a
Beta-binomial probability. ``P(X >= max(Y_1, ..., Y_m))`` is therefore a finite
sum of Beta-function ratios, which are evaluated here in log space so that
parameters in the hundreds do not overflow.

Non-integer competitors fall back to adaptive quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import integrate, special

MAX_ARMS = 4


class UnsupportedArityError(ValueError):
    """Raised when more arms are compared than the exact kernel supports."""


@dataclass(frozen=True)
class BetaParams:
    """Shape parameters of a Beta distribution."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValueError(f"non-finite Beta parameters ({self.alpha}, {self.beta})")
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError(f"Beta parameters must be positive, got ({self.alpha}, {self.beta})")

    @property
    def is_integer(self) -> bool:
        return float(self.alpha).is_integer() and float(self.beta).is_integer()

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)


UNIFORM = BetaParams(1, 1)


def update_posterior(prior: BetaParams, successes: int, failures: int) -> BetaParams:
    """Conjugate Beta-binomial update."""
    if successes < 0 or failures < 0:
        raise ValueError("counts must be non-negative")
    return BetaParams(prior.alpha + successes, prior.beta + failures)


def _as_params(x) -> BetaParams:
    if isinstance(x, BetaParams):
        return x
    return BetaParams(*x)


# -- exact kernel -------------------------------------------------------------


def _log_cdf_coefficients(a: int, b: int) -> np.ndarray:
    """log of C(n, k) * 1[k >= a] for k = 0..n, n = a + b - 1 (-inf where zero)."""
    n = a + b - 1
    k = np.arange(n + 1)
    out = special.gammaln(n + 1) - special.gammaln(k + 1) - special.gammaln(n - k + 1)
    out[:a] = -np.inf
    return out


def _exact_prob_exceeds_all(target: tuple[float, float], others: tuple[tuple[int, int], ...]) -> float:
    # Product of the competitors' CDFs as a polynomial sum_m c_m t^m (1-t)^(M-m);
    # each c_m is kept as exp(shift) * conv[m].
    shift = 0.0
    conv = np.ones(1)
    for a, b in others:
        logc = _log_cdf_coefficients(a, b)
        top = logc.max()
        shift += top
        conv = np.convolve(conv, np.exp(logc - top))
    M = conv.size - 1
    a0, b0 = target
    m = np.nonzero(conv > 0)[0]
    log_terms = (
        np.log(conv[m])
        + shift
        + special.betaln(a0 + m, b0 + M - m)
        - special.betaln(a0, b0)
    )
    return float(np.clip(np.exp(log_terms).sum(), 0.0, 1.0))


@lru_cache(maxsize=2**20)
def _cached_exact(target: tuple[float, float], others: tuple[tuple[int, int], ...]) -> float:
    return _exact_prob_exceeds_all(target, others)


def _quad_prob_exceeds_all(target: BetaParams, others: Sequence[BetaParams]) -> float:
    def integrand(t):
        val = math.exp(
            (target.alpha - 1) * math.log(t)
            + (target.beta - 1) * math.log1p(-t)
            - special.betaln(target.alpha, target.beta)
        )
        for o in others:
            val *= special.betainc(o.alpha, o.beta, t)
        return val

    # Peak hint keeps quad from stepping over narrow posteriors.
    mode = min(max(target.mean, 1e-9), 1 - 1e-9)
    val, _ = integrate.quad(integrand, 0.0, 1.0, points=[mode], epsabs=1e-10, epsrel=1e-10, limit=500)
    return float(np.clip(val, 0.0, 1.0))


def _prob_exceeds_all(target: BetaParams, others: Sequence[BetaParams]) -> float:
    if all(o.is_integer for o in others):
        key_others = tuple(sorted((int(o.alpha), int(o.beta)) for o in others))
        return _cached_exact((float(target.alpha), float(target.beta)), key_others)
    return _quad_prob_exceeds_all(target, others)


# -- public surface -------------------------------------------------------------


def prob_greater(x, y) -> float:
    """P(X > Y) for independent X ~ Beta(x), Y ~ Beta(y).

    Exact whenever either argument has integer parameters; otherwise the
    integral of f_X * F_Y is evaluated by adaptive quadrature.
    """
    x, y = _as_params(x), _as_params(y)
    if y.is_integer:
        return _prob_exceeds_all(x, [y])
    if x.is_integer:
        return 1.0 - _prob_exceeds_all(y, [x])
    return _quad_prob_exceeds_all(x, [y])


def prob_max(i: int, arms: Sequence) -> float:
    """Probability that arm ``i`` has the largest success rate among ``arms``.

    Supports 2 to 4 arms; larger comparisons raise UnsupportedArityError.
    """
    arms = [_as_params(a) for a in arms]
    if len(arms) > MAX_ARMS:
        raise UnsupportedArityError(f"prob_max supports at most {MAX_ARMS} arms, got {len(arms)}")
    if len(arms) < 2:
        raise ValueError("prob_max needs at least two arms")
    if not 0 <= i < len(arms):
        raise IndexError(f"arm index {i} out of range")
    return _prob_exceeds_all(arms[i], arms[:i] + arms[i + 1:])


def prob_max_vector(arms: Sequence) -> np.ndarray:
    """``prob_max`` for every arm."""
    return np.array([prob_max(i, arms) for i in range(len(arms))])


def prob_exceeds_threshold(x, threshold: float) -> float:
    """P(X > threshold) via the regularized incomplete beta function."""
    x = _as_params(x)
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    return float(special.betaincc(x.alpha, x.beta, threshold))


def prob_below_threshold(x, threshold: float) -> float:
    """P(X < threshold); complement of :func:`prob_exceeds_threshold`."""
    x = _as_params(x)
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    return float(special.betainc(x.alpha, x.beta, threshold))


# -- count-based helpers used by the trial engines ------------------------------


def greater_from_counts(s1: int, n1: int, s0: int, n0: int) -> float:
    """P(theta_1 > theta_0) under uniform priors given successes/trials per arm."""
    return _cached_exact((float(s1 + 1), float(n1 - s1 + 1)), ((s0 + 1, n0 - s0 + 1),))


def max_from_counts(i: int, successes: Sequence[int], trials: Sequence[int]) -> float:
    """``prob_max`` under uniform priors, keyed on integer counts."""
    others = tuple(sorted(
        (s + 1, n - s + 1) for j, (s, n) in enumerate(zip(successes, trials)) if j != i
    ))
    if len(others) + 1 > MAX_ARMS:
        raise UnsupportedArityError(f"prob_max supports at most {MAX_ARMS} arms")
    s, n = successes[i], trials[i]
    return _cached_exact((float(s + 1), float(n - s + 1)), others)


@lru_cache(maxsize=2**18)
def exceeds_from_counts(s: int, n: int, threshold: float) -> float:
    """P(theta > threshold) under a uniform prior."""
    return float(special.betaincc(s + 1, n - s + 1, threshold))


@lru_cache(maxsize=2**18)
def below_from_counts(s: int, n: int, threshold: float) -> float:
    """P(theta < threshold) under a uniform prior."""
    return float(special.betainc(s + 1, n - s + 1, threshold))

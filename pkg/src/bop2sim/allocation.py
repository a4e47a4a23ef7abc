"""Randomisation schemes and permuted-block assignment.

Allocation vectors are plain float arrays indexed by arm (control first in
controlled designs); arms that are closed carry probability zero.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .posterior import MAX_ARMS, UnsupportedArityError, prob_max

SCHEMES = ("equal", "brar2", "trippa", "maximum")


def _normalise(w: np.ndarray, eligible: np.ndarray) -> np.ndarray:
    w = np.where(eligible, w, 0.0)
    total = w.sum()
    if not np.isfinite(total) or total <= 0:
        return equal_allocation(eligible)
    return w / total


def check_allocation(p, atol: float = 1e-12) -> None:
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError(f"allocation probabilities outside [0, 1]: {p}")
    if abs(p.sum() - 1.0) > atol:
        raise ValueError(f"allocation probabilities sum to {p.sum()}")


def equal_allocation(active) -> np.ndarray:
    """Uniform over the arms flagged in the boolean mask ``active``."""
    active = np.asarray(active, dtype=bool)
    k = active.sum()
    if k == 0:
        raise ValueError("equal allocation needs at least one active arm")
    return active / k


def tuning_exponent(n: int, N: int) -> float:
    """c = n / (2N): adaptation strengthens as information accrues."""
    if N <= 0 or not 0 <= n <= N:
        raise ValueError(f"tuning exponent needs 0 <= n <= N, N > 0 (n={n}, N={N})")
    return n / (2 * N)


def clip_allocation(p: np.ndarray, lower: float, upper: float) -> np.ndarray:
    """Bound non-zero entries to [lower, upper] and renormalise (disabled by default)."""
    mask = p > 0
    q = np.where(mask, np.clip(p, lower, upper), 0.0)
    return q / q.sum()


def brar_two_arm(p_better: float, c: float) -> np.ndarray:
    """Tuned two-arm BRAR; returns ``(p_control, p_treatment)``.

    ``0 ** 0`` is taken as one, so ``c = 0`` always gives equal allocation.
    """
    if not 0.0 <= p_better <= 1.0:
        raise ValueError(f"p_better must lie in [0, 1], got {p_better}")
    if c < 0:
        raise ValueError("tuning exponent must be non-negative")
    hi = p_better ** c
    lo = (1.0 - p_better) ** c
    p1 = hi / (hi + lo)
    return np.array([1.0 - p1, p1])


def trippa_weights(
    counts: Sequence[int],
    exceed_probs: Sequence[float],
    c: float,
    eligible,
    controlled: bool = True,
    control_weight: str = "unit",
) -> np.ndarray:
    """Unnormalised Trippa weights.

    Treatment ``i`` gets ``P(theta_i > Theta)^c``. The control (index 0 when
    ``controlled``) gets ``exp(c * (max_i n_i - n_0))``, using only the
    sample-size imbalance against open treatment arms and never the control's
    posterior. ``control_weight="inverse_n"`` multiplies the control weight by
    ``1/n`` as in the literal display of the rule.
    """
    counts = np.asarray(counts, dtype=float)
    eligible = np.asarray(eligible, dtype=bool)
    w = np.power(np.asarray(exceed_probs, dtype=float), c)
    if controlled:
        treat = eligible.copy()
        treat[0] = False
        gap = counts[treat].max() - counts[0] if treat.any() else 0.0
        w0 = np.exp(c * gap)
        if control_weight == "inverse_n":
            w0 /= max(counts.sum(), 1.0)
        elif control_weight != "unit":
            raise ValueError(f"unknown Trippa control weight {control_weight!r}")
        w[0] = w0
    return np.where(eligible, w, 0.0)


def trippa_allocation(counts, exceed_probs, c, eligible, controlled=True, control_weight="unit") -> np.ndarray:
    eligible = np.asarray(eligible, dtype=bool)
    return _normalise(trippa_weights(counts, exceed_probs, c, eligible, controlled, control_weight), eligible)


def maximum_allocation(posteriors: Sequence, c: float, eligible=None) -> np.ndarray:
    """p_i proportional to P(arm i is best)^c among the eligible arms."""
    k = len(posteriors)
    eligible = np.ones(k, bool) if eligible is None else np.asarray(eligible, dtype=bool)
    idx = np.flatnonzero(eligible)
    if idx.size > MAX_ARMS:
        raise UnsupportedArityError(f"maximum allocation supports at most {MAX_ARMS} arms")
    pm = np.zeros(k)
    if idx.size == 1:
        pm[idx] = 1.0
    else:
        sub = [posteriors[j] for j in idx]
        for pos, j in enumerate(idx):
            pm[j] = prob_max(pos, sub)
    return maximum_from_probs(pm, c, eligible)


def maximum_from_probs(pm: np.ndarray, c: float, eligible) -> np.ndarray:
    return _normalise(np.power(pm, c), np.asarray(eligible, dtype=bool))


# -- permuted blocks -------------------------------------------------------------

_EPS = 1e-9


def apportion(targets: np.ndarray, sizes: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Per-arm counts for blocks of ``sizes`` patients (row-wise).

    Each arm gets ``floor(B p)`` places; the leftover places go to arms
    chosen by systematic sampling on the fractional remainders, so every arm's
    expected count is exactly ``B p``.
    """
    targets = np.atleast_2d(targets)
    sizes = np.asarray(sizes, dtype=float).reshape(-1)
    exact = targets * sizes[:, None]
    base = np.floor(exact + _EPS)
    rem = np.clip(exact - base, 0.0, None)
    left = sizes - base.sum(axis=1)
    tot = rem.sum(axis=1)
    scale = np.divide(left, tot, out=np.zeros_like(tot), where=tot > 0)
    cum = np.cumsum(rem * scale[:, None], axis=1)
    cum[:, -1] = left
    u = np.asarray(u, dtype=float).reshape(-1, 1)
    edges = np.ceil(np.concatenate([np.zeros_like(u), cum], axis=1) - u)
    edges[:, 0] = 0.0
    picks = np.diff(edges, axis=1)
    return (base + picks).astype(np.int64)


def make_blocks(targets: np.ndarray, sizes, u, keys: np.ndarray) -> np.ndarray:
    """Shuffled blocks, one row per target; padded with -1 beyond each size."""
    targets = np.atleast_2d(targets)
    keys = np.atleast_2d(keys)
    sizes = np.asarray(sizes, dtype=np.int64).reshape(-1)
    counts = apportion(targets, sizes, u)
    width = keys.shape[1]
    pos = np.arange(width)
    cum = np.cumsum(counts, axis=1)
    ordered = (pos[None, :, None] >= cum[:, None, :]).sum(axis=2)
    ordered = np.where(pos[None, :] < sizes[:, None], ordered, -1)
    k = np.where(pos[None, :] < sizes[:, None], keys, 2.0)
    perm = np.argsort(k, axis=1, kind="stable")
    return np.take_along_axis(ordered, perm, axis=1)


def default_block_size(n_eligible: int) -> int:
    return 2 * n_eligible


class BlockRandomizer:
    """Permuted-block assignment tracking a (possibly changing) target.

    A new block is built whenever the pending one is exhausted or
    :meth:`flush` was called. Randomness comes either from ``rng`` or from
    explicit ``(u, keys)`` passed to :meth:`draw`.
    """

    def __init__(self, block_size: int | None = None, rng: np.random.Generator | None = None):
        self.block_size = block_size
        self.rng = rng
        self.pending: list[int] = []

    def flush(self) -> None:
        self.pending = []

    def size_for(self, target) -> int:
        if self.block_size is not None:
            return self.block_size
        return default_block_size(int(np.count_nonzero(np.asarray(target) > 0)))

    def draw(self, target, u: float | None = None, keys=None) -> int:
        if not self.pending:
            size = self.size_for(target)
            if u is None:
                u = self.rng.random()
                keys = self.rng.random(size)
            block = make_blocks(np.asarray(target, float), [size], [u], np.asarray(keys)[None, :size])[0]
            self.pending = block[:size].tolist()
        return self.pending.pop(0)

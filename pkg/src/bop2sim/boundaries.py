"""BOP2 stopping thresholds and the interim/final decision rule.

All thresholds are expressed on the scale of ``P(treatment better | D)``:
an arm stops for futility when that probability falls *below* the futility
threshold and for efficacy when it rises *above* the efficacy threshold.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import special


class DegenerateBoundaryError(ValueError):
    """The efficacy boundary is undefined at lambda = 1."""


@dataclass(frozen=True)
class BoundaryParams:
    lam: float
    gamma: float

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")


def _fraction(n, N):
    n = np.asarray(n, dtype=float)
    if np.any(n <= 0) or np.any(n > N) or N <= 0:
        raise ValueError(f"information fraction requires 0 < n <= N (n={n}, N={N})")
    return n / N


def futility_threshold(p: BoundaryParams, n, N):
    """lambda * (n/N)^gamma; stop for futility when P(better) is below it."""
    out = p.lam * _fraction(n, N) ** p.gamma
    return float(out) if np.ndim(out) == 0 else out


EFFICACY_SCALES = ("sqrt", "linear")


def efficacy_threshold(p: BoundaryParams, n, N, scale: str = "sqrt"):
    """2 Phi(Z_{(1+lambda)/2} / g(n/N)) - 1; stop for efficacy when P(better) exceeds it.

    ``scale="sqrt"`` uses g(t) = sqrt(t) (O'Brien-Fleming shape, the default);
    ``scale="linear"`` uses g(t) = t. Both equal lambda at n = N. Written as
    ``erf(erfinv(lambda) / g)``, which avoids the cancellation in
    ``2 Phi(x) - 1`` as the threshold approaches one.
    """
    if p.lam >= 1.0:
        raise DegenerateBoundaryError("efficacy boundary undefined for lambda = 1")
    f = _fraction(n, N)
    if scale == "sqrt":
        g = np.sqrt(f)
    elif scale == "linear":
        g = f
    else:
        raise ValueError(f"unknown efficacy scale {scale!r}")
    out = special.erf(special.erfinv(p.lam) / g)
    return float(out) if np.ndim(out) == 0 else out


def multiarm_futility_threshold(p: BoundaryParams, n, N, K: int, a: int):
    """Right-hand side of the multi-arm rule ``P(worse) > 1 - ((K+1-a-lambda)/(K+1-a)) (n/N)^gamma``.

    Note the returned value is on the P(worse) scale; an arm stops when
    ``1 - P(better)`` exceeds it, i.e. when P(better) < 1 - threshold.
    """
    if not 1 <= a <= K:
        raise ValueError(f"active-arm count must satisfy 1 <= a <= K, got a={a}, K={K}")
    m = K + 1 - a
    out = 1.0 - ((m - p.lam) / m) * _fraction(n, N) ** p.gamma
    return float(out) if np.ndim(out) == 0 else out


class Decision(str, enum.Enum):
    CONTINUE = "continue"
    STOP_FUTILITY = "stop_futility"
    STOP_EFFICACY = "stop_efficacy"
    REJECT_NULL = "reject_null"
    ACCEPT_NULL = "accept_null"


def decide(
    statistic: float,
    p: BoundaryParams,
    n: int,
    N: int,
    final: bool = False,
    efficacy_stopping: bool = True,
    futility: float | None = None,
    scale: str = "sqrt",
) -> Decision:
    """Apply the BOP2 rule to ``statistic = P(theta_i > theta_ref | D)``.

    ``futility`` overrides the standard futility threshold (used by the
    multi-arm variant). Ties continue at interims and reject at the final
    analysis.
    """
    if final:
        return Decision.REJECT_NULL if statistic >= p.lam else Decision.ACCEPT_NULL
    fut = futility_threshold(p, n, N) if futility is None else futility
    if statistic < fut:
        return Decision.STOP_FUTILITY
    if efficacy_stopping and p.lam < 1.0 and statistic > efficacy_threshold(p, n, N, scale):
        return Decision.STOP_EFFICACY
    return Decision.CONTINUE


def boundary_table(p: BoundaryParams, N: int, schedule: Iterable[int], scale: str = "sqrt") -> list[dict]:
    """Thresholds at every analysis in ``schedule`` plus the final analysis at N."""
    points = sorted(set(int(n) for n in schedule if 0 < n < N)) + [N]
    rows = []
    for n in points:
        eff = efficacy_threshold(p, n, N, scale) if p.lam < 1.0 else 1.0
        rows.append({"n": n, "futility_threshold": futility_threshold(p, n, N), "efficacy_threshold": eff})
    return rows


BOUNDARY_COLUMNS = ("n", "futility_threshold", "efficacy_threshold")


def boundary_table_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BOUNDARY_COLUMNS)
    for r in rows:
        w.writerow([r["n"], f"{r['futility_threshold']:.12g}", f"{r['efficacy_threshold']:.12g}"])
    return buf.getvalue()

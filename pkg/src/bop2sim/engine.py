"""Single-trial simulation.

Randomness is laid out per replicate so that a trial is a deterministic
function of ``(design, scenario, master_seed, replicate)``:

* ``succ[a, k]`` / ``tox[a, k]`` decide the outcome of the k-th patient on
  arm ``a`` (success iff ``u < theta_a``), so the same patient stream is
  shared by every design evaluated on a scenario;
* ``block_u[j]`` / ``block_keys[j]`` randomise a permuted block whose first
  patient is the j-th enrolled overall.

:func:`run_trial` is the patient-by-patient reference implementation; the
vectorised engine in :mod:`bop2sim.batch` must reproduce it exactly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .allocation import BlockRandomizer
from .boundaries import efficacy_threshold, multiarm_futility_threshold
from .design import Scenario, TrialDesign
from .posterior import (
    below_from_counts,
    exceeds_from_counts,
    greater_from_counts,
    max_from_counts,
)


class ArmStatus(enum.IntEnum):
    ACTIVE = 0
    DROPPED_FUTILITY = 1
    STOPPED_EFFICACY = 2
    STOPPED_TOXICITY = 3


# -- randomness ------------------------------------------------------------------


@dataclass
class ReplicateStreams:
    succ: np.ndarray  # (R, A, N)
    tox: np.ndarray  # (R, A, N)
    block_u: np.ndarray  # (R, N)
    block_keys: np.ndarray  # (R, N, B)

    def __len__(self):
        return self.succ.shape[0]

    def take(self, rows) -> "ReplicateStreams":
        return ReplicateStreams(self.succ[rows], self.tox[rows], self.block_u[rows], self.block_keys[rows])


def replicate_generator(master_seed: int, replicate: int) -> np.random.Generator:
    """Counter-style child stream for one replicate."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(master_seed, spawn_key=(replicate,))))


def replicate_streams(master_seed: int, replicates: Sequence[int], n_arms: int, N: int, block_width: int) -> ReplicateStreams:
    R = len(replicates)
    succ = np.empty((R, n_arms, N))
    tox = np.empty((R, n_arms, N))
    bu = np.empty((R, N))
    bk = np.empty((R, N, block_width))
    for i, r in enumerate(replicates):
        g = replicate_generator(master_seed, int(r))
        succ[i] = g.random((n_arms, N))
        tox[i] = g.random((n_arms, N))
        bu[i] = g.random(N)
        bk[i] = g.random((N, block_width))
    return ReplicateStreams(succ, tox, bu, bk)


def streams_for(design: TrialDesign, master_seed: int, replicates: Sequence[int]) -> ReplicateStreams:
    return replicate_streams(master_seed, replicates, design.n_arms, design.N, design.max_block)


# -- numerics shared by both engines ------------------------------------------------


def normalise_rows(w: np.ndarray, eligible: np.ndarray) -> np.ndarray:
    w = np.where(eligible, w, 0.0)
    tot = w.sum(axis=1)
    ok = np.isfinite(tot) & (tot > 0)
    eq = eligible / np.maximum(eligible.sum(axis=1), 1)[:, None]
    return np.where(ok[:, None], w / np.where(ok, tot, 1.0)[:, None], eq)


def efficacy_stat(design: TrialDesign, s, n, i: int) -> float:
    """P(theta_i > reference | D) for arm ``i`` from count vectors."""
    if design.controlled:
        return greater_from_counts(int(s[i]), int(n[i]), int(s[0]), int(n[0]))
    return exceeds_from_counts(int(s[i]), int(n[i]), design.theta_ref)


def toxicity_stat(design: TrialDesign, t, n, i: int) -> float:
    """P(phi_i < reference | D): probability the arm is *less* toxic."""
    if design.controlled:
        return greater_from_counts(int(t[0]), int(n[0]), int(t[i]), int(n[i]))
    return below_from_counts(int(t[i]), int(n[i]), design.phi_ref)


def interim_thresholds(design: TrialDesign, j: int, n_active: int) -> tuple[float, float]:
    """(futility, efficacy) thresholds on the P(better) scale after ``j`` patients."""
    f = j / design.N
    if design.futility_rule == "multiarm_adjusted":
        fut = 1.0 - multiarm_futility_threshold(design.boundary, j, design.N, design.K, n_active)
    else:
        fut = design.lam * f ** design.gamma
    if design.efficacy_on and design.lam < 1.0:
        eff = efficacy_threshold(design.boundary, j, design.N, design.efficacy_scale)
    else:
        eff = np.inf
    return fut, eff


def interim_status(design: TrialDesign, eff: float, tox: Optional[float], fut_thr: float, eff_thr: float) -> ArmStatus:
    if eff < fut_thr:
        return ArmStatus.DROPPED_FUTILITY
    if tox is not None and tox < fut_thr:
        return ArmStatus.STOPPED_TOXICITY
    if eff > eff_thr and (tox is None or tox > eff_thr):
        return ArmStatus.STOPPED_EFFICACY
    return ArmStatus.ACTIVE


def final_reject(design: TrialDesign, eff: float, tox: Optional[float]) -> bool:
    return eff >= design.lam and (tox is None or tox >= design.lam)


def allocation_rows(design: TrialDesign, j: int, n: np.ndarray, s: np.ndarray, eligible: np.ndarray) -> np.ndarray:
    """Target allocation after an interim at total enrolment ``j`` (row-wise)."""
    R, A = n.shape
    if design.scheme == "equal" or j < design.burn_in_count:
        return normalise_rows(np.ones((R, A)), eligible)
    c = j / (2 * design.N)
    if design.scheme == "brar2":
        pb = np.array([greater_from_counts(int(s[r, 1]), int(n[r, 1]), int(s[r, 0]), int(n[r, 0])) for r in range(R)])
        hi = np.power(pb, c)
        lo = np.power(1.0 - pb, c)
        p1 = hi / (hi + lo)
        w = np.stack([1.0 - p1, p1], axis=1)
    elif design.scheme == "trippa":
        w = np.zeros((R, A))
        for r in range(R):
            for i in design.experimental:
                if eligible[r, i]:
                    w[r, i] = exceeds_from_counts(int(s[r, i]), int(n[r, i]), design.theta_ref)
        w = np.power(w, c)
        if design.controlled:
            treat = eligible.copy()
            treat[:, 0] = False
            top = np.where(treat, n, -1).max(axis=1)
            gap = np.where(top >= 0, top - n[:, 0], 0).astype(float)
            w0 = np.exp(c * gap)
            if design.trippa_control_weight == "inverse_n":
                w0 = w0 / max(j, 1)
            w[:, 0] = w0
    else:  # maximum
        w = np.zeros((R, A))
        for r in range(R):
            idx = np.flatnonzero(eligible[r])
            if idx.size == 1:
                w[r, idx[0]] = 1.0
                continue
            ss = [int(s[r, i]) for i in idx]
            nn = [int(n[r, i]) for i in idx]
            for pos, i in enumerate(idx):
                w[r, i] = max_from_counts(pos, ss, nn)
        w = np.power(w, c)
    p = normalise_rows(w, eligible)
    if design.clip is not None:
        lo_, hi_ = design.clip
        q = np.where(p > 0, np.clip(p, lo_, hi_), 0.0)
        p = normalise_rows(q, eligible)
    return p


def apply_reallocation(policy: str, dropped: int, caps: np.ndarray, n: np.ndarray, active: np.ndarray) -> np.ndarray:
    """Recruitment caps after closing arm ``dropped``.

    ``shrink`` removes the arm's unfilled quota from the trial;
    ``redistribute`` splits it evenly across the remaining open arms, the
    remainder going one patient each to the lowest-indexed arms. Unlimited
    caps are ``inf``.
    """
    caps = np.array(caps, dtype=float)
    unfilled = caps[dropped] - n[dropped]
    caps[dropped] = n[dropped]
    if policy == "redistribute" and np.isfinite(unfilled) and unfilled > 0:
        others = [i for i in np.flatnonzero(active) if i != dropped]
        if others:
            base, extra = divmod(int(unfilled), len(others))
            for k, i in enumerate(others):
                caps[i] += base + (1 if k < extra else 0)
    elif policy not in ("shrink", "redistribute"):
        raise ValueError(f"unknown reallocation policy {policy!r}")
    return caps


def effective_max(design: TrialDesign, caps: np.ndarray) -> int:
    total = caps.sum()
    return int(min(design.N, total)) if np.isfinite(total) else design.N


# -- results ------------------------------------------------------------------------


@dataclass(frozen=True)
class ArmState:
    n: int
    successes: int
    toxicities: int
    status: ArmStatus


@dataclass(frozen=True)
class TrialResult:
    arms: tuple
    reject: tuple
    stop_stage: object  # interim index (1-based) or "final"
    total_enrolled: int
    trace: Optional[dict] = field(default=None, compare=False)

    @property
    def n(self) -> tuple:
        return tuple(a.n for a in self.arms)


# -- reference engine ----------------------------------------------------------------


def run_trial(
    design: TrialDesign,
    scenario: Scenario,
    seed: int,
    replicate: int = 0,
    trace: bool = False,
    streams: Optional[ReplicateStreams] = None,
) -> TrialResult:
    """Simulate one trial patient by patient."""
    design.check_scenario(scenario)
    if streams is None:
        streams = streams_for(design, seed, [replicate])
    succ_u, tox_u, bu, bk = streams.succ[0], streams.tox[0], streams.block_u[0], streams.block_keys[0]

    A = design.n_arms
    theta = np.array(scenario.theta)
    phi = np.array(scenario.toxicity())
    n = np.zeros(A, dtype=np.int64)
    s = np.zeros(A, dtype=np.int64)
    t = np.zeros(A, dtype=np.int64)
    status = np.full(A, ArmStatus.ACTIVE, dtype=np.int64)
    reject = np.zeros(A, dtype=bool)
    cap = np.full(A, float(design.per_arm_cap) if design.per_arm_cap is not None else np.inf)
    n_max = effective_max(design, cap)
    exp_arms = list(design.experimental)
    tox_on = design.toxicity_monitoring

    def eligible_mask():
        return (status == ArmStatus.ACTIVE) & (n < cap)

    alloc = normalise_rows(np.ones((1, A)), eligible_mask()[None])[0]
    rnd = BlockRandomizer(design.block_size)
    j = 0
    stage = 0
    stop_stage = "final"
    patients, analyses, allocations = [], [], []
    if trace:
        allocations.extend(_alloc_rows(0, 0, alloc))

    while True:
        upcoming = [c for c in design.ia_schedule if j < c < n_max]
        stop_at = upcoming[0] if upcoming else n_max
        while j < stop_at and eligible_mask().any():
            arm = rnd.draw(alloc, u=bu[j], keys=bk[j])
            k = n[arm]
            ok = bool(succ_u[arm, k] < theta[arm])
            bad = bool(tox_u[arm, k] < phi[arm])
            n[arm] += 1
            s[arm] += ok
            t[arm] += bad
            if trace:
                patients.append({"index": j, "arm": int(arm), "success": int(ok), "toxicity": int(bad)})
            j += 1
            if n[arm] >= cap[arm]:
                alloc = normalise_rows(alloc[None], eligible_mask()[None])[0]
                rnd.flush()

        elig = eligible_mask()
        if j >= n_max or not elig.any():
            for i in exp_arms:
                if status[i] == ArmStatus.ACTIVE:
                    eff = efficacy_stat(design, s, n, i)
                    tox = toxicity_stat(design, t, n, i) if tox_on else None
                    reject[i] = final_reject(design, eff, tox)
                    if trace:
                        analyses.append(_trace_row("final", j, i, eff, tox, design.lam, design.lam,
                                                   "reject_null" if reject[i] else "accept_null"))
            break

        # interim analysis at j
        stage += 1
        n_active = int(sum(status[i] == ArmStatus.ACTIVE for i in exp_arms))
        fut_thr, eff_thr = interim_thresholds(design, j, n_active)
        closed = []
        for i in exp_arms:
            if status[i] != ArmStatus.ACTIVE:
                continue
            eff = efficacy_stat(design, s, n, i)
            tox = toxicity_stat(design, t, n, i) if tox_on else None
            new = interim_status(design, eff, tox, fut_thr, eff_thr)
            if trace:
                analyses.append(_trace_row(stage, j, i, eff, tox, fut_thr, eff_thr, new.name.lower()))
            if new != ArmStatus.ACTIVE:
                closed.append((i, new))
        for i, new in closed:
            status[i] = new
            reject[i] = new == ArmStatus.STOPPED_EFFICACY
        for i, _ in closed:
            cap = apply_reallocation(design.reallocation, i, cap, n, status == ArmStatus.ACTIVE)
        n_max = effective_max(design, cap)

        if not any(status[i] == ArmStatus.ACTIVE for i in exp_arms):
            stop_stage = stage
            break

        elig = eligible_mask()
        new_alloc = allocation_rows(design, j, n[None], s[None], elig[None])[0] if elig.any() else alloc
        if not np.array_equal(new_alloc, alloc):
            alloc = new_alloc
            rnd.flush()
        if trace:
            allocations.extend(_alloc_rows(stage, j, alloc))

    arms = tuple(ArmState(int(n[a]), int(s[a]), int(t[a]), ArmStatus(int(status[a]))) for a in range(A))
    tr = {"patients": patients, "analyses": analyses, "allocations": allocations} if trace else None
    return TrialResult(arms, tuple(bool(x) for x in reject), stop_stage, int(n.sum()), tr)


def _alloc_rows(stage, j, alloc):
    return [{"stage": stage, "n": j, "arm": a, "probability": float(p)} for a, p in enumerate(alloc)]


def _trace_row(stage, j, arm, eff, tox, fut, effthr, decision):
    return {
        "stage": stage,
        "n": j,
        "arm": arm,
        "efficacy_stat": eff,
        "toxicity_stat": "" if tox is None else tox,
        "futility_threshold": fut,
        "efficacy_threshold": effthr,
        "decision": decision,
    }

"""Vectorised lockstep trial engine.

Every live replicate enrols exactly one patient per step, so all replicates
reach the (shared) interim counts together. Decisions, reallocation and
allocation updates reuse the helpers in :mod:`bop2sim.engine`, which keeps
results identical to :func:`bop2sim.engine.run_trial` replicate by replicate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .allocation import make_blocks
from .design import Scenario, TrialDesign
from .engine import (
    ArmStatus,
    ReplicateStreams,
    allocation_rows,
    apply_reallocation,
    efficacy_stat,
    final_reject,
    interim_status,
    interim_thresholds,
    normalise_rows,
    toxicity_stat,
)


@dataclass
class BatchResult:
    n: np.ndarray  # (R, A) patients per arm
    successes: np.ndarray
    toxicities: np.ndarray
    status: np.ndarray  # (R, A) ArmStatus codes
    reject: np.ndarray  # (R, A) bool
    stop_stage: np.ndarray  # (R,) interim index that ended the trial, 0 = reached final

    @property
    def enrolled(self) -> np.ndarray:
        return self.n.sum(axis=1)

    @staticmethod
    def concat(parts) -> "BatchResult":
        return BatchResult(*(np.concatenate([getattr(p, f) for p in parts]) for f in
                             ("n", "successes", "toxicities", "status", "reject", "stop_stage")))


@dataclass
class PathRecord:
    """Boundary-free trial paths of a single-experimental-arm design.

    ``counts[k]`` is the total enrolment at analysis ``k`` (interims then
    final); ``n`` holds per-arm counts and ``eff``/``tox`` the statistics used
    by the decision rule at each analysis.
    """

    counts: np.ndarray  # (S,)
    n: np.ndarray  # (R, S, A)
    eff: np.ndarray  # (R, S)
    tox: Optional[np.ndarray]  # (R, S) or None
    N: int


def simulate_batch(design: TrialDesign, scenario: Scenario, streams: ReplicateStreams,
                   record: bool = False):
    """Run ``len(streams)`` trials in lockstep.

    With ``record=True`` no stopping rule is applied and a :class:`PathRecord`
    is returned instead; only valid for designs with one experimental arm,
    where the path up to any stop cannot depend on the boundaries.
    """
    design.check_scenario(scenario)
    if record and design.K != 1:
        raise ValueError("path recording needs a single experimental arm")
    R = len(streams)
    A = design.n_arms
    N = design.N
    theta = np.array(scenario.theta)
    phi = np.array(scenario.toxicity())
    exp_arms = list(design.experimental)
    tox_on = design.toxicity_monitoring
    rows_all = np.arange(R)

    n = np.zeros((R, A), dtype=np.int64)
    s = np.zeros((R, A), dtype=np.int64)
    t = np.zeros((R, A), dtype=np.int64)
    status = np.zeros((R, A), dtype=np.int64)
    reject = np.zeros((R, A), dtype=bool)
    cap = np.full((R, A), float(design.per_arm_cap) if design.per_arm_cap is not None else np.inf)
    tot = cap.sum(axis=1)
    n_max = np.where(np.isfinite(tot), np.minimum(N, tot), N).astype(np.int64)
    stage = np.zeros(R, dtype=np.int64)
    stop_stage = np.zeros(R, dtype=np.int64)
    done = np.zeros(R, dtype=bool)

    width = design.max_block
    blk = np.full((R, width), -1, dtype=np.int64)
    blk_len = np.zeros(R, dtype=np.int64)
    blk_pos = np.zeros(R, dtype=np.int64)

    def eligible(rows):
        return (status[rows] == ArmStatus.ACTIVE) & (n[rows] < cap[rows])

    alloc = normalise_rows(np.ones((R, A)), eligible(rows_all))
    schedule = set(design.ia_schedule)

    rec_counts = sorted(c for c in design.ia_schedule) + [N]
    if record:
        S = len(rec_counts)
        rec_n = np.zeros((R, S, A), dtype=np.int64)
        rec_eff = np.zeros((R, S))
        rec_tox = np.zeros((R, S)) if tox_on else None

    for j in range(N + 1):
        live = np.flatnonzero(~done)
        if live.size == 0:
            break
        if j > 0:
            # final analyses
            fin = live[(j >= n_max[live]) | ~eligible(live).any(axis=1)]
            if fin.size:
                if record:
                    _record(design, rec_counts.index(j), fin, n, s, t, rec_n, rec_eff, rec_tox)
                else:
                    _final(design, fin, n, s, t, status, reject)
                done[fin] = True
            # interim analyses
            if j in schedule:
                ia = live[~done[live]]
                ia = ia[j < n_max[ia]]
                if ia.size:
                    stage[ia] += 1
                    if record:
                        _record(design, rec_counts.index(j), ia, n, s, t, rec_n, rec_eff, rec_tox)
                    else:
                        _interim(design, j, ia, n, s, t, status, reject, cap, n_max)
                        gone = ia[(status[ia][:, exp_arms] != ArmStatus.ACTIVE).all(axis=1)]
                        stop_stage[gone] = stage[gone]
                        done[gone] = True
                        ia = ia[~done[ia]]
                        fin = ia[(j >= n_max[ia]) | ~eligible(ia).any(axis=1)]
                        if fin.size:
                            _final(design, fin, n, s, t, status, reject)
                            done[fin] = True
                            ia = ia[~done[ia]]
                    if ia.size:
                        new = allocation_rows(design, j, n[ia], s[ia], eligible(ia))
                        changed = (new != alloc[ia]).any(axis=1)
                        alloc[ia] = new
                        blk_pos[ia[changed]] = blk_len[ia[changed]]
            live = np.flatnonzero(~done)
            if live.size == 0 or j == N:
                break

        # enrol patient j
        need = live[blk_pos[live] >= blk_len[live]]
        if need.size:
            if design.block_size is not None:
                sizes = np.full(need.size, design.block_size)
            else:
                sizes = 2 * (alloc[need] > 0).sum(axis=1)
            blk[need] = make_blocks(alloc[need], sizes, streams.block_u[need, j], streams.block_keys[need, j])
            blk_len[need] = sizes
            blk_pos[need] = 0
        arm = blk[live, blk_pos[live]]
        blk_pos[live] += 1
        k = n[live, arm]
        ok = streams.succ[live, arm, k] < theta[arm]
        bad = streams.tox[live, arm, k] < phi[arm]
        n[live, arm] += 1
        s[live, arm] += ok
        t[live, arm] += bad
        full = live[n[live, arm] >= cap[live, arm]]
        if full.size:
            alloc[full] = normalise_rows(alloc[full], eligible(full))
            blk_pos[full] = blk_len[full]

    if record:
        return PathRecord(np.array(rec_counts), rec_n, rec_eff, rec_tox, N)
    return BatchResult(n, s, t, status, reject, stop_stage)


def _stat_rows(design, rows, n, s, t, arm):
    eff = np.array([efficacy_stat(design, s[r], n[r], arm) for r in rows])
    tox = np.array([toxicity_stat(design, t[r], n[r], arm) for r in rows]) if design.toxicity_monitoring else None
    return eff, tox


def _record(design, k, rows, n, s, t, rec_n, rec_eff, rec_tox):
    arm = design.experimental[0]
    eff, tox = _stat_rows(design, rows, n, s, t, arm)
    rec_n[rows, k] = n[rows]
    rec_eff[rows, k] = eff
    if rec_tox is not None:
        rec_tox[rows, k] = tox


def _final(design, rows, n, s, t, status, reject):
    for i in design.experimental:
        act = rows[status[rows, i] == ArmStatus.ACTIVE]
        if not act.size:
            continue
        eff, tox = _stat_rows(design, act, n, s, t, i)
        for m, r in enumerate(act):
            reject[r, i] = final_reject(design, eff[m], None if tox is None else tox[m])


def _interim(design, j, rows, n, s, t, status, reject, cap, n_max):
    exp_arms = list(design.experimental)
    n_active = (status[rows][:, exp_arms] == ArmStatus.ACTIVE).sum(axis=1)
    thresholds = {a: interim_thresholds(design, j, int(a)) for a in np.unique(n_active)}
    new_status = status[rows].copy()
    for i in exp_arms:
        act = np.flatnonzero(status[rows, i] == ArmStatus.ACTIVE)
        if not act.size:
            continue
        eff, tox = _stat_rows(design, rows[act], n, s, t, i)
        for m, q in enumerate(act):
            fut_thr, eff_thr = thresholds[n_active[q]]
            new_status[q, i] = interim_status(design, eff[m], None if tox is None else tox[m], fut_thr, eff_thr)
    changed = np.flatnonzero((new_status != status[rows]).any(axis=1))
    for q in changed:
        r = rows[q]
        closed = [i for i in exp_arms if new_status[q, i] != status[r, i]]
        for i in closed:
            status[r, i] = new_status[q, i]
            reject[r, i] = new_status[q, i] == ArmStatus.STOPPED_EFFICACY
        for i in closed:
            cap[r] = apply_reallocation(design.reallocation, i, cap[r], n[r], status[r] == ArmStatus.ACTIVE)
        tot = cap[r].sum()
        n_max[r] = int(min(design.N, tot)) if np.isfinite(tot) else design.N

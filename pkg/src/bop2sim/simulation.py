"""Monte Carlo operating characteristics."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy import special

from .batch import BatchResult, PathRecord, simulate_batch
from .design import Scenario, TrialDesign
from .engine import ArmStatus, streams_for

CHUNK = 2000


def _run_chunk(args) -> BatchResult:
    design, scenario, master_seed, lo, hi = args
    streams = streams_for(design, master_seed, range(lo, hi))
    return simulate_batch(design, scenario, streams)


def _chunks(n_sims: int, size: int = CHUNK):
    return [(lo, min(lo + size, n_sims)) for lo in range(0, n_sims, size)]


def simulate_replicates(design: TrialDesign, scenario: Scenario, n_sims: int, master_seed: int,
                        workers: int = 1) -> BatchResult:
    """Per-replicate outcomes for replicates ``0..n_sims-1``.

    Replicate ``r`` depends only on ``(master_seed, r)``, so the worker count
    and chunking never change the result.
    """
    design.check_scenario(scenario)
    if n_sims < 1:
        raise ValueError("n_sims must be at least 1")
    jobs = [(design, scenario, master_seed, lo, hi) for lo, hi in _chunks(n_sims)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(j) for j in jobs]
    return BatchResult.concat(parts)


def record_paths(design: TrialDesign, scenario: Scenario, n_sims: int, master_seed: int,
                 streams=None) -> PathRecord:
    """Boundary-free paths for a single-experimental-arm design."""
    if streams is None:
        parts = [simulate_batch(design, scenario, streams_for(design, master_seed, range(lo, hi)), record=True)
                 for lo, hi in _chunks(n_sims)]
        return PathRecord(
            parts[0].counts,
            np.concatenate([p.n for p in parts]),
            np.concatenate([p.eff for p in parts]),
            None if parts[0].tox is None else np.concatenate([p.tox for p in parts]),
            design.N,
        )
    return simulate_batch(design, scenario, streams, record=True)


# -- confidence intervals ---------------------------------------------------------


def normal_ci_power(p_hat: float, n_sims: int, level: float = 0.95, var_bound: float = 0.25) -> tuple:
    """Normal-approximation interval using a worst-case Bernoulli variance."""
    z = special.ndtri(0.5 + level / 2)
    half = z * math.sqrt(var_bound / n_sims)
    return (max(0.0, p_hat - half), min(1.0, p_hat + half))


def bootstrap_ci_ess(sizes, batch_count: int, level: float = 0.95) -> tuple:
    """Quantile interval of contiguous batch means of per-replicate sample sizes."""
    sizes = np.asarray(sizes, dtype=float)
    if batch_count < 2 or sizes.size // batch_count < 30:
        raise ValueError(
            f"{sizes.size} replicates cannot form {batch_count} batches of at least 30"
        )
    per = sizes.size // batch_count
    means = sizes[: per * batch_count].reshape(batch_count, per).mean(axis=1)
    tail = (1 - level) / 2
    lo, hi = np.quantile(means, [tail, 1 - tail])
    return (float(lo), float(hi))


def default_batches(n_sims: int) -> Optional[int]:
    b = min(100, n_sims // 30)
    return b if b >= 2 else None


# -- aggregation ------------------------------------------------------------------------


@dataclass
class OperatingCharacteristics:
    n_sims: int
    reject_rate_per_arm: list
    least_power: float
    fwer: float
    ess_total: float
    ess_per_arm: list
    prop_per_arm: list
    early_stop_rate_per_arm: list
    best_arm: int
    power_ci: Optional[tuple]
    ess_ci: Optional[tuple]

    @property
    def power(self) -> float:
        return self.least_power

    @property
    def prop_best(self) -> float:
        return self.prop_per_arm[self.best_arm]

    @property
    def ess_best(self) -> float:
        return self.ess_per_arm[self.best_arm]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["power_ci"] = list(self.power_ci) if self.power_ci else None
        d["ess_ci"] = list(self.ess_ci) if self.ess_ci else None
        return d


def best_arm(design: TrialDesign, scenario: Scenario) -> int:
    exp = list(design.experimental)
    return exp[int(np.argmax([scenario.theta[i] for i in exp]))]


def summarise(design: TrialDesign, scenario: Scenario, res: BatchResult) -> OperatingCharacteristics:
    R = res.n.shape[0]
    enrolled = res.enrolled
    reject = res.reject.mean(axis=0)
    early = np.isin(res.status, (ArmStatus.DROPPED_FUTILITY, ArmStatus.STOPPED_TOXICITY)).mean(axis=0)
    prop = (res.n / enrolled[:, None]).mean(axis=0)
    best = best_arm(design, scenario)
    lp = float(reject[best])
    nb = default_batches(R)
    return OperatingCharacteristics(
        n_sims=R,
        reject_rate_per_arm=[float(x) for x in reject],
        least_power=lp,
        fwer=float(res.reject.any(axis=1).mean()),
        ess_total=float(enrolled.mean()),
        ess_per_arm=[float(x) for x in res.n.mean(axis=0)],
        prop_per_arm=[float(x) for x in prop],
        early_stop_rate_per_arm=[float(x) for x in early],
        best_arm=best,
        power_ci=normal_ci_power(lp, R) if R >= 30 else None,
        ess_ci=bootstrap_ci_ess(enrolled, nb) if nb else None,
    )


def estimate_oc(design: TrialDesign, scenario: Scenario, n_sims: int, master_seed: int,
                workers: int = 1) -> OperatingCharacteristics:
    """Operating characteristics from ``n_sims`` independent replicates."""
    res = simulate_replicates(design, scenario, n_sims, master_seed, workers)
    return summarise(design, scenario, res)

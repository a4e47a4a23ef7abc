"""Calibration of (lambda, gamma) and search over interim-analysis schedules.

Designs with a single experimental arm are evaluated by *path replay*: the
trial is simulated once with no stopping rule, recording the decision
statistics at every candidate analysis, and any boundary or schedule is then
applied to the stored paths. Because stopping ends a one-arm trial, the
replayed outcome is exactly what the engine would have produced. Designs with
several experimental arms fall back to direct simulation at every point.

All points share the master seed (common random numbers), which keeps the
argmin/argmax stable under Monte Carlo noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from .batch import PathRecord
from .boundaries import BoundaryParams
from .design import Scenario, TrialDesign
from .engine import interim_thresholds, streams_for
from .errors import BudgetExceededError, ConfigError, InfeasibleGridError
from .simulation import (
    best_arm,
    bootstrap_ci_ess,
    default_batches,
    estimate_oc,
    normal_ci_power,
    record_paths,
)

OBJECTIVES = ("min_ess", "max_prop_best", "max_power")
STRATEGIES = ("equal", "equal_after_waiting")


@dataclass(frozen=True)
class CalibrationSpec:
    """Grid-search settings.

    ``lam_grid``/``gamma_grid`` override the regular ``grid_step`` grid, which
    is useful for multi-arm designs where each point costs a full simulation.
    ``search="bisect"`` relies on the null rejection rate decreasing in lambda:
    for each gamma it bisects the lambda grid for the smallest feasible value
    instead of evaluating every point.
    """

    null_scenario: Scenario
    alt_scenario: Scenario
    alpha_target: float = 0.1
    grid_step: float = 0.01
    n_sims_per_point: int = 10_000
    lam_grid: Optional[tuple] = None
    gamma_grid: Optional[tuple] = None
    search: str = "full"

    def __post_init__(self):
        if self.search not in ("full", "bisect"):
            raise ConfigError(f"unknown search {self.search!r}")
        if not 0.0 < self.alpha_target < 1.0:
            raise ConfigError("alpha_target must lie in (0, 1)")
        if not 0.0 < self.grid_step <= 0.5:
            raise ConfigError("grid_step must lie in (0, 0.5]")
        if self.n_sims_per_point < 1:
            raise ConfigError("n_sims_per_point must be positive")
        for g in (self.lam_grid, self.gamma_grid):
            if g is not None and (len(g) == 0 or any(not 0.0 <= v <= 1.0 for v in g)):
                raise ConfigError("explicit grids must be non-empty and inside [0, 1]")

    def grid(self, which: str) -> np.ndarray:
        explicit = self.lam_grid if which == "lam" else self.gamma_grid
        if explicit is not None:
            return np.array(sorted(set(float(v) for v in explicit)))
        k = int(round(1.0 / self.grid_step))
        return np.round(np.linspace(0.0, 1.0, k + 1), 10)


@dataclass(frozen=True)
class IASearchSpec:
    """IA-schedule search settings; ``step=None`` means the design's block size."""

    num_ias: int = 1
    objective: str = "min_ess"
    step: Optional[int] = None
    waiting_fraction: float = 0.3
    n_sims: int = 10_000

    def __post_init__(self):
        if self.num_ias < 0:
            raise ConfigError("num_ias must be non-negative")
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"unknown objective {self.objective!r}")
        if self.step is not None and self.step < 1:
            raise ConfigError("step must be at least 1")
        if not 0.0 <= self.waiting_fraction < 1.0:
            raise ConfigError("waiting_fraction must lie in [0, 1)")
        if self.n_sims < 1:
            raise ConfigError("n_sims must be positive")

    def step_for(self, design: TrialDesign) -> int:
        return self.step if self.step is not None else design.max_block


# -- path replay ----------------------------------------------------------------------


@dataclass
class ReplayOutcome:
    """Per-replicate result of applying a design to recorded paths."""

    total: np.ndarray  # (R,)
    n: np.ndarray  # (R, A)
    reject: np.ndarray  # (R,) bool
    early_stop: np.ndarray  # (R,) futility or toxicity stop


def replay_paths(rec: PathRecord, design: TrialDesign, schedule: Optional[Sequence[int]] = None) -> ReplayOutcome:
    """Apply ``design``'s stopping rule at ``schedule`` to boundary-free paths.

    ``schedule`` (default ``design.ia_schedule``) must be a subset of the
    recorded analysis counts. The result matches running the engine with that
    schedule replicate by replicate, provided the recorded paths themselves do
    not depend on the schedule (equal allocation) or were recorded with it.
    """
    schedule = tuple(design.ia_schedule if schedule is None else schedule)
    where = {int(c): k for k, c in enumerate(rec.counts)}
    try:
        idx = [where[int(c)] for c in schedule] + [len(rec.counts) - 1]
    except KeyError as e:
        raise ValueError(f"analysis at {e.args[0]} was not recorded") from None
    R = rec.eff.shape[0]
    eff = rec.eff[:, idx]
    tox = rec.tox[:, idx] if rec.tox is not None else None
    m = len(schedule)
    # 0 continue, 1 futility, 2 efficacy, 3 toxicity, 4 final
    code = np.zeros((R, m + 1), dtype=np.int8)
    for k, c in enumerate(schedule):
        fut, eff_thr = interim_thresholds(design, int(c), 1)
        e = eff[:, k]
        stop_f = e < fut
        if tox is not None:
            stop_t = ~stop_f & (tox[:, k] < fut)
            stop_e = ~stop_f & ~stop_t & (e > eff_thr) & (tox[:, k] > eff_thr)
        else:
            stop_t = np.zeros(R, dtype=bool)
            stop_e = ~stop_f & (e > eff_thr)
        code[:, k] = np.select([stop_f, stop_t, stop_e], [1, 3, 2], 0)
    code[:, m] = 4
    stop = np.argmax(code != 0, axis=1)
    rows = np.arange(R)
    final_eff = eff[:, m] >= design.lam
    if tox is not None:
        final_eff &= tox[:, m] >= design.lam
    kind = code[rows, stop]
    reject = (kind == 2) | ((kind == 4) & final_eff)
    counts = rec.counts[idx]
    n = rec.n[:, idx][rows, stop]
    return ReplayOutcome(counts[stop], n, reject, (kind == 1) | (kind == 3))


def _replayable(design: TrialDesign) -> bool:
    return design.K == 1 and design.per_arm_cap is None


# -- calibration --------------------------------------------------------------------------


@dataclass
class CalibrationReport:
    best: BoundaryParams
    null_reject: float
    power: float
    surface: list  # dicts with lam, gamma, null_reject, power, ess_null, ess_alt, feasible
    replicates: int

    SURFACE_COLUMNS = ("lam", "gamma", "null_reject", "power", "ess_null", "ess_alt", "feasible")


def calibration_cost(template: TrialDesign, spec: CalibrationSpec) -> int:
    """Number of simulated trials the grid search will run."""
    if _replayable(template):
        return 2 * spec.n_sims_per_point
    n_lam, n_gamma = len(spec.grid("lam")), len(spec.grid("gamma"))
    if spec.search == "bisect":
        # bisection probes plus one alternative run per gamma
        per_gamma = math.ceil(math.log2(n_lam)) + 2
        return spec.n_sims_per_point * n_gamma * per_gamma
    return 2 * spec.n_sims_per_point * n_lam * n_gamma


def grid_search_lambda_gamma(
    template: TrialDesign,
    spec: CalibrationSpec,
    master_seed: int,
    workers: int = 1,
    budget: Optional[int] = None,
) -> tuple[BoundaryParams, CalibrationReport]:
    """Most powerful (lambda, gamma) whose null rejection rate is within ``alpha_target``.

    For multi-arm designs the null rate is the FWER and power is least power.
    Ties in power go to the smaller null rate, then larger lambda, then larger
    gamma.

    Raises:
        BudgetExceededError: the search needs more than ``budget`` replicates.
        InfeasibleGridError: no grid point controls the null rejection rate.
    """
    required = calibration_cost(template, spec)
    if budget is not None and required > budget:
        raise BudgetExceededError(required, budget)
    lams, gammas = spec.grid("lam"), spec.grid("gamma")
    R = spec.n_sims_per_point
    surface = []
    if _replayable(template):
        rec0 = record_paths(template, spec.null_scenario, R, master_seed)
        rec1 = record_paths(template, spec.alt_scenario, R, master_seed)
        for lam in lams:
            for gamma in gammas:
                d = template.with_(lam=float(lam), gamma=float(gamma))
                o0, o1 = replay_paths(rec0, d), replay_paths(rec1, d)
                surface.append(_surface_row(lam, gamma, o0.reject.mean(), o1.reject.mean(),
                                            o0.total.mean(), o1.total.mean(), spec.alpha_target))
    else:
        def null_oc(lam, gamma):
            d = template.with_(lam=float(lam), gamma=float(gamma))
            return estimate_oc(d, spec.null_scenario, R, master_seed, workers)

        def add(lam, gamma, oc0):
            d = template.with_(lam=float(lam), gamma=float(gamma))
            oc1 = estimate_oc(d, spec.alt_scenario, R, master_seed, workers)
            surface.append(_surface_row(lam, gamma, oc0.fwer, oc1.least_power,
                                        oc0.ess_total, oc1.ess_total, spec.alpha_target))

        for gamma in gammas:
            if spec.search == "full":
                for lam in lams:
                    add(lam, gamma, null_oc(lam, gamma))
                continue
            lo, hi, found = 0, len(lams) - 1, None
            while lo <= hi:
                mid = (lo + hi) // 2
                oc0 = null_oc(lams[mid], gamma)
                if oc0.fwer <= spec.alpha_target + 1e-12:
                    found, hi = (mid, oc0), mid - 1
                else:
                    lo = mid + 1
            if found is None:
                oc0 = null_oc(lams[-1], gamma)
                surface.append(_surface_row(lams[-1], gamma, oc0.fwer, float("nan"),
                                            oc0.ess_total, float("nan"), spec.alpha_target))
            else:
                add(lams[found[0]], gamma, found[1])
    feasible = [r for r in surface if r["feasible"]]
    if not feasible:
        lo = min(r["null_reject"] for r in surface)
        raise InfeasibleGridError(
            f"no grid point has null rejection <= {spec.alpha_target} (smallest was {lo:.4f})"
        )
    top = min(feasible, key=lambda r: (-r["power"], r["null_reject"], -r["lam"], -r["gamma"]))
    best = BoundaryParams(top["lam"], top["gamma"])
    return best, CalibrationReport(best, top["null_reject"], top["power"], surface, required)


def _surface_row(lam, gamma, null, power, ess0, ess1, alpha):
    return {
        "lam": float(lam),
        "gamma": float(gamma),
        "null_reject": float(null),
        "power": float(power),
        "ess_null": float(ess0),
        "ess_alt": float(ess1),
        "feasible": bool(null <= alpha + 1e-12),
    }


# -- schedule evaluation --------------------------------------------------------------------


def candidate_positions(N: int, step: int) -> list[int]:
    return list(range(step, N, step))


def enumeration_size(N: int, step: int, num_ias: int) -> int:
    return math.comb(len(candidate_positions(N, step)), num_ias)


def heuristic_schedule(strategy: str, N: int, num_ias: int, waiting_fraction: float = 0.3) -> tuple:
    """Equally spaced IAs over (0, N), or over (waiting_fraction * N, N).

    Positions are rounded half up to whole patients.
    """
    if strategy not in STRATEGIES:
        raise ConfigError(f"unknown strategy {strategy!r}")
    if num_ias < 1:
        raise ConfigError("heuristic schedules need at least one IA")
    start = waiting_fraction * N if strategy == "equal_after_waiting" else 0.0
    gap = (N - start) / (num_ias + 1)
    return tuple(int(math.floor(start + k * gap + 0.5)) for k in range(1, num_ias + 1))


class ScheduleEvaluator:
    """Operating characteristics of one design under many IA schedules.

    Three modes, chosen from the design:

    * ``dense``: one arm, equal allocation. Paths are recorded once at every
      count 1..N-1 and replayed for any schedule.
    * ``replay``: one arm, adaptive allocation. The allocation updates at the
      IAs, so each schedule is recorded separately and then replayed.
    * ``direct``: several experimental arms; full simulation per schedule.
    """

    def __init__(self, template: TrialDesign, scenario: Scenario, n_sims: int, master_seed: int,
                 workers: int = 1):
        template.check_scenario(scenario)
        self.template = template
        self.scenario = scenario
        self.n_sims = n_sims
        self.master_seed = master_seed
        self.workers = workers
        if _replayable(template):
            self.mode = "dense" if template.scheme == "equal" else "replay"
        else:
            self.mode = "direct"
        self.best = best_arm(template, scenario)
        self._dense: Optional[PathRecord] = None
        self._streams = None
        self._memo: dict = {}

    def cost(self, n_schedules: int) -> int:
        if self.mode == "dense":
            return self.n_sims
        return self.n_sims * n_schedules

    def _dense_record(self) -> PathRecord:
        if self._dense is None:
            d = self.template.with_(ia_schedule=tuple(range(1, self.template.N)))
            self._dense = record_paths(d, self.scenario, self.n_sims, self.master_seed)
        return self._dense

    def evaluate(self, schedule: Sequence[int]) -> dict:
        schedule = tuple(int(c) for c in schedule)
        if schedule not in self._memo:
            self._memo[schedule] = self._evaluate(schedule)
        return dict(self._memo[schedule])

    def _evaluate(self, schedule: tuple) -> dict:
        design = self.template.with_(ia_schedule=schedule)
        if self.mode == "direct":
            oc = estimate_oc(design, self.scenario, self.n_sims, self.master_seed, self.workers)
            return self._row(schedule, oc.ess_total, oc.ess_ci, oc.least_power, oc.prop_best, None,
                             oc.ess_per_arm)
        if self.mode == "dense":
            out = replay_paths(self._dense_record(), design, schedule)
        else:
            if self._streams is None:
                # the random streams do not depend on the schedule
                self._streams = streams_for(self.template, self.master_seed, range(self.n_sims))
            rec = record_paths(design, self.scenario, self.n_sims, self.master_seed, streams=self._streams)
            out = replay_paths(rec, design)
        prop = out.n[:, self.best] / out.total
        nb = default_batches(out.total.size)
        ci = bootstrap_ci_ess(out.total, nb) if nb else None
        return self._row(schedule, float(out.total.mean()), ci, float(out.reject.mean()),
                         float(prop.mean()), prop, [float(x) for x in out.n.mean(axis=0)])

    def _row(self, schedule, ess, ess_ci, power, prop_best, props, ess_arms) -> dict:
        pci = normal_ci_power(power, self.n_sims) if self.n_sims >= 30 else None
        if props is not None:
            plo, phi = (float(x) for x in np.quantile(props, [0.025, 0.975]))
        else:
            plo = phi = float("nan")
        nan = float("nan")
        return {
            "schedule": schedule,
            "ess": ess,
            "ess_lo": ess_ci[0] if ess_ci else nan,
            "ess_hi": ess_ci[1] if ess_ci else nan,
            "power": power,
            "power_lo": pci[0] if pci else nan,
            "power_hi": pci[1] if pci else nan,
            "prop_best": prop_best,
            "prop_lo": plo,
            "prop_hi": phi,
            "ess_arms": tuple(ess_arms),
        }


def objective_value(row: dict, objective: str) -> float:
    if objective == "min_ess":
        return row["ess"]
    if objective == "max_prop_best":
        return row["prop_best"]
    if objective == "max_power":
        return row["power"]
    raise ConfigError(f"unknown objective {objective!r}")


def _rank_key(row: dict, objective: str):
    v = round(objective_value(row, objective), 12)
    primary = v if objective == "min_ess" else -v
    first = row["schedule"][0] if row["schedule"] else 0
    return (primary, -round(row["power"], 12), first, row["schedule"])


@dataclass
class IASearchResult:
    best: tuple
    table: list  # rows from ScheduleEvaluator.evaluate plus "objective"
    enumeration_size: int
    objective: str

    @property
    def best_row(self) -> dict:
        return next(r for r in self.table if r["schedule"] == self.best)


def enumerate_ia_placements(
    template: TrialDesign,
    scenario: Scenario,
    spec: IASearchSpec,
    master_seed: int,
    workers: int = 1,
    budget: Optional[int] = None,
    evaluator: Optional[ScheduleEvaluator] = None,
    log=None,
) -> IASearchResult:
    """Evaluate every schedule of ``num_ias`` strictly increasing multiples of the step below N.

    The enumeration size is computed (and passed to ``log`` if given) before
    anything is simulated. Ties on the objective go to higher power, then the
    earlier first IA.

    Raises:
        BudgetExceededError: the enumeration needs more than ``budget`` replicates.
    """
    ev = evaluator or ScheduleEvaluator(template, scenario, spec.n_sims, master_seed, workers)
    step = spec.step_for(template)
    schedules = list(combinations(candidate_positions(template.N, step), spec.num_ias))
    size = len(schedules)
    if log is not None:
        log(f"enumerating {size} schedules of {spec.num_ias} IA(s) at step {step}")
    required = ev.cost(size)
    if budget is not None and required > budget:
        raise BudgetExceededError(required, budget)
    table = []
    for sch in schedules:
        row = ev.evaluate(sch)
        row["objective"] = objective_value(row, spec.objective)
        table.append(row)
    best = min(table, key=lambda r: _rank_key(r, spec.objective))
    return IASearchResult(best["schedule"], table, size, spec.objective)


@dataclass
class StrategyRow:
    num_ias: int
    optimal: float
    equal: float
    equal_after_waiting: float
    optimal_schedule: tuple
    equal_schedule: tuple
    waiting_schedule: tuple
    details: dict = field(default_factory=dict)


def compare_ia_strategies(
    template: TrialDesign,
    scenario: Scenario,
    spec: IASearchSpec,
    master_seed: int,
    max_ias: int = 3,
    workers: int = 1,
    budget: Optional[int] = None,
    log=None,
    evaluator: Optional[ScheduleEvaluator] = None,
) -> list[StrategyRow]:
    """Optimal versus heuristic IA placement for 1..max_ias IAs (objective from ``spec``)."""
    ev = evaluator or ScheduleEvaluator(template, scenario, spec.n_sims, master_seed, workers)
    step = spec.step_for(template)
    total = sum(enumeration_size(template.N, step, m) + 2 for m in range(1, max_ias + 1))
    required = ev.cost(total)
    if budget is not None and required > budget:
        raise BudgetExceededError(required, budget)
    rows = []
    for m in range(1, max_ias + 1):
        sub = IASearchSpec(m, spec.objective, spec.step, spec.waiting_fraction, spec.n_sims)
        opt = enumerate_ia_placements(template, scenario, sub, master_seed, evaluator=ev, log=log)
        eq = heuristic_schedule("equal", template.N, m)
        wt = heuristic_schedule("equal_after_waiting", template.N, m, spec.waiting_fraction)
        r_eq, r_wt = ev.evaluate(eq), ev.evaluate(wt)
        rows.append(StrategyRow(
            num_ias=m,
            optimal=objective_value(opt.best_row, spec.objective),
            equal=objective_value(r_eq, spec.objective),
            equal_after_waiting=objective_value(r_wt, spec.objective),
            optimal_schedule=opt.best,
            equal_schedule=eq,
            waiting_schedule=wt,
            details={"optimal": opt.best_row, "equal": r_eq, "equal_after_waiting": r_wt},
        ))
    return rows

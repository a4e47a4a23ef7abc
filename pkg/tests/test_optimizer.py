import numpy as np
import pytest

from bop2sim.boundaries import BoundaryParams
from bop2sim.design import Scenario, TrialDesign
from bop2sim.errors import BudgetExceededError, ConfigError, InfeasibleGridError
from bop2sim.optimizer import (
    CalibrationSpec,
    IASearchSpec,
    ScheduleEvaluator,
    compare_ia_strategies,
    enumerate_ia_placements,
    enumeration_size,
    grid_search_lambda_gamma,
    heuristic_schedule,
    replay_paths,
)
from bop2sim.simulation import estimate_oc, record_paths, simulate_replicates

NULL, ALT = Scenario((0.2, 0.2)), Scenario((0.2, 0.4))
EQUAL = TrialDesign(K=1, N=40, lam=0.9, gamma=0.9, ia_schedule=(10, 20, 30))
BRAR = EQUAL.with_(scheme="brar2")


def test_replay_matches_engine():
    dense = EQUAL.with_(ia_schedule=tuple(range(1, 40)))
    rec = record_paths(dense, ALT, 600, 5)
    for schedule, lam, gamma in [((10, 20, 30), 0.9, 0.9), ((7,), 0.8, 0.5), ((), 0.95, 1.0), ((4, 33), 0.6, 0.0)]:
        d = EQUAL.with_(ia_schedule=schedule, lam=lam, gamma=gamma)
        out = replay_paths(rec, d)
        ref = simulate_replicates(d, ALT, 600, 5)
        assert np.array_equal(out.total, ref.enrolled)
        assert np.array_equal(out.n, ref.n)
        assert np.array_equal(out.reject, ref.reject[:, 1])


def test_replay_matches_engine_for_brar_recorded_on_schedule():
    rec = record_paths(BRAR, ALT, 600, 5)
    for lam, gamma in [(0.9, 0.86), (0.7, 0.2)]:
        d = BRAR.with_(lam=lam, gamma=gamma)
        out = replay_paths(rec, d)
        ref = simulate_replicates(d, ALT, 600, 5)
        assert np.array_equal(out.total, ref.enrolled)
        assert np.array_equal(out.reject, ref.reject[:, 1])


def test_heuristic_schedules():
    assert heuristic_schedule("equal", 80, 3) == (20, 40, 60)
    assert heuristic_schedule("equal", 80, 1) == (40,)
    assert heuristic_schedule("equal_after_waiting", 80, 1, 0.3) == (52,)
    assert heuristic_schedule("equal_after_waiting", 80, 3, 0.3) == (38, 52, 66)
    with pytest.raises(ConfigError):
        heuristic_schedule("random", 80, 1)


def test_enumeration_size():
    assert enumeration_size(80, 1, 1) == 79
    assert enumeration_size(80, 4, 2) == 171
    assert enumeration_size(80, 1, 0) == 1


def _spec(**kw):
    base = dict(null_scenario=NULL, alt_scenario=ALT, n_sims_per_point=800, grid_step=0.1)
    base.update(kw)
    return CalibrationSpec(**base)


def test_single_point_grid_is_passthrough():
    best, rep = grid_search_lambda_gamma(EQUAL, _spec(lam_grid=(0.9,), gamma_grid=(0.9,)), 1)
    assert best == BoundaryParams(0.9, 0.9)
    assert len(rep.surface) == 1


def test_infeasible_grid():
    with pytest.raises(InfeasibleGridError):
        grid_search_lambda_gamma(EQUAL, _spec(alpha_target=1e-6, lam_grid=(0.0, 0.1), gamma_grid=(0.5,)), 1)


def test_budget_refused_before_running():
    with pytest.raises(BudgetExceededError) as e:
        grid_search_lambda_gamma(EQUAL, _spec(), 1, budget=10)
    assert e.value.required > 10


def test_calibration_is_exhaustive_optimum():
    spec = _spec()
    best, rep = grid_search_lambda_gamma(EQUAL, spec, 2)
    feasible = [r for r in rep.surface if r["null_reject"] <= spec.alpha_target]
    assert len(rep.surface) == 121
    assert all(r["power"] <= rep.power for r in feasible)
    assert rep.null_reject <= spec.alpha_target
    # the chosen point re-evaluated by the engine agrees with the surface
    d = EQUAL.with_(lam=best.lam, gamma=best.gamma)
    assert estimate_oc(d, ALT, 800, 2).least_power == pytest.approx(rep.power)
    assert estimate_oc(d, NULL, 800, 2).least_power == pytest.approx(rep.null_reject)


def test_bisect_agrees_with_full_search_on_multiarm():
    template = TrialDesign(K=2, controlled=False, N=60, ia_schedule=(30,), per_arm_cap=30, theta_ref=0.3)
    null, alt = Scenario((0.3, 0.3)), Scenario((0.3, 0.55))
    grids = dict(lam_grid=(0.8, 0.85, 0.9, 0.93, 0.96, 0.99), gamma_grid=(0.5, 1.0))
    full = grid_search_lambda_gamma(template, _spec(null_scenario=null, alt_scenario=alt, n_sims_per_point=400, **grids), 3)
    bis = grid_search_lambda_gamma(template, _spec(null_scenario=null, alt_scenario=alt, n_sims_per_point=400,
                                                   search="bisect", **grids), 3)
    assert full[0] == bis[0]


def test_ia_search_exhaustive_and_tie_break():
    spec = IASearchSpec(num_ias=1, objective="min_ess", step=2, n_sims=1500)
    res = enumerate_ia_placements(EQUAL, ALT, spec, 4)
    assert res.enumeration_size == 19 == len(res.table)
    best_ess = min(r["ess"] for r in res.table)
    assert res.best_row["ess"] == best_ess
    ties = [r for r in res.table if r["ess"] == best_ess]
    assert res.best_row["power"] == max(r["power"] for r in ties)


def test_ia_search_zero_ias_single_row():
    res = enumerate_ia_placements(EQUAL, ALT, IASearchSpec(num_ias=0, step=2, n_sims=500), 4)
    assert res.best == () and len(res.table) == 1


def test_ia_search_budget():
    msgs = []
    with pytest.raises(BudgetExceededError):
        enumerate_ia_placements(EQUAL, ALT, IASearchSpec(num_ias=2, step=1, n_sims=1000), 4, budget=100, log=msgs.append)
    assert msgs and "741" in msgs[0]


def test_evaluator_matches_direct_simulation():
    for design in (EQUAL, BRAR, TrialDesign(K=2, controlled=False, N=40, theta_ref=0.3, per_arm_cap=20)):
        sc = ALT if design.K == 1 else Scenario((0.3, 0.5))
        ev = ScheduleEvaluator(design, sc, 700, 6)
        row = ev.evaluate((12, 24))
        oc = estimate_oc(design.with_(ia_schedule=(12, 24)), sc, 700, 6)
        assert row["ess"] == pytest.approx(oc.ess_total, abs=1e-12)
        assert row["power"] == pytest.approx(oc.least_power, abs=1e-12)
        assert row["prop_best"] == pytest.approx(oc.prop_best, abs=1e-12)


def test_compare_strategies_optimal_dominates():
    spec = IASearchSpec(objective="min_ess", step=2, n_sims=1000)
    rows = compare_ia_strategies(EQUAL, ALT, spec, 9, max_ias=2)
    for r in rows:
        assert r.optimal <= r.equal + 1e-12
        assert r.optimal_schedule is not None and len(r.optimal_schedule) == r.num_ias

import pytest

from bop2sim.config import load_study
from bop2sim.optimizer import grid_search_lambda_gamma


def test_every_recipe_loads(recipes_dir):
    paths = sorted(recipes_dir.glob("*.json"))
    assert len(paths) >= 10
    for p in paths:
        cfg = load_study(p)
        assert cfg.n_sims > 0
        for nd, sc, design in cfg.pairs():
            design.check_scenario(sc)


@pytest.fixture(scope="module")
def two_arm_calibration(recipes_dir):
    cfg = load_study(recipes_dir / "two_arm_equal_vs_brar.json")
    design = cfg.designs[0].for_scenario(cfg.scenario("treatment_0.4"))
    return grid_search_lambda_gamma(design, cfg.calibration_spec(), cfg.master_seed)


def test_two_arm_calibration_reaches_reference_plateau(two_arm_calibration):
    best, report = two_arm_calibration
    assert best.lam == pytest.approx(0.91)
    ref = next(r for r in report.surface if r["lam"] == pytest.approx(0.91) and r["gamma"] == pytest.approx(0.93))
    assert ref["feasible"]
    # the reference point sits on the same power plateau as the optimum
    assert report.power - ref["power"] < 0.001


@pytest.mark.xfail(strict=True, reason="power is flat in gamma on [0.93, 1]; the largest-gamma tie-break picks 1.0")
def test_two_arm_calibration_within_one_step_of_reference(two_arm_calibration):
    best, _ = two_arm_calibration
    assert abs(best.lam - 0.91) <= 0.01 + 1e-9 and abs(best.gamma - 0.93) <= 0.01 + 1e-9

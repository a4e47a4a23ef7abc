import csv
import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from bop2sim.boundaries import (
    BoundaryParams,
    Decision,
    DegenerateBoundaryError,
    boundary_table,
    boundary_table_csv,
    decide,
    efficacy_threshold,
    futility_threshold,
    multiarm_futility_threshold,
)

lams = st.floats(0.0, 0.999)
gammas = st.floats(0.0, 1.0)


def test_futility_examples():
    p = BoundaryParams(0.91, 0.94)
    assert futility_threshold(p, 60, 80) == pytest.approx(0.91 * 0.75 ** 0.94, rel=1e-14)
    assert futility_threshold(p, 60, 80) == pytest.approx(0.6944, abs=5e-5)
    assert futility_threshold(p, 80, 80) == pytest.approx(0.91, abs=1e-15)
    assert futility_threshold(BoundaryParams(0.7, 0.0), 3, 90) == pytest.approx(0.7)


def test_efficacy_sqrt_scale_matches_normal_cdf():
    p = BoundaryParams(0.9, 1.0)
    z = norm.ppf(0.95)
    for n in (8, 20, 40, 60, 80):
        expected = 2 * norm.cdf(z / np.sqrt(n / 80)) - 1
        assert efficacy_threshold(p, n, 80) == pytest.approx(expected, abs=1e-13)
    assert efficacy_threshold(p, 80, 80) == pytest.approx(0.9, abs=1e-14)


def test_efficacy_linear_scale_examples():
    p = BoundaryParams(0.9, 1.0)
    assert efficacy_threshold(p, 40, 80, "linear") == pytest.approx(2 * norm.cdf(2 * norm.ppf(0.95)) - 1, abs=1e-13)
    assert efficacy_threshold(p, 40, 80, "linear") == pytest.approx(0.99900, abs=5e-6)
    assert abs(efficacy_threshold(p, 8, 80, "linear") - 1.0) < 1e-9


def test_efficacy_rejects_bad_inputs():
    with pytest.raises(DegenerateBoundaryError):
        efficacy_threshold(BoundaryParams(1.0, 0.5), 10, 80)
    with pytest.raises(ValueError):
        efficacy_threshold(BoundaryParams(0.9, 0.5), 10, 80, "cubic")
    with pytest.raises(ValueError):
        futility_threshold(BoundaryParams(0.9, 0.5), 0, 80)
    with pytest.raises(ValueError):
        futility_threshold(BoundaryParams(0.9, 0.5), 81, 80)
    with pytest.raises(ValueError):
        BoundaryParams(1.2, 0.5)


def test_multiarm_futility_examples():
    p = BoundaryParams(0.8, 1.0)
    assert multiarm_futility_threshold(p, 240, 240, K=3, a=3) == pytest.approx(0.8)
    assert multiarm_futility_threshold(p, 240, 240, K=3, a=1) == pytest.approx(1 - 2.2 / 3)
    assert multiarm_futility_threshold(p, 1e-9, 240, K=3, a=2) == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(ValueError):
        multiarm_futility_threshold(p, 10, 240, K=3, a=4)


def test_decide_examples():
    p = BoundaryParams(0.91, 0.94)
    assert decide(0.5, p, 60, 80) is Decision.STOP_FUTILITY
    assert decide(0.95, BoundaryParams(0.9, 1.0), 80, 80, final=True) is Decision.REJECT_NULL
    assert decide(0.9999, BoundaryParams(0.9, 1.0), 40, 80, scale="linear") is Decision.STOP_EFFICACY
    assert decide(0.9999, BoundaryParams(0.9, 1.0), 40, 80) is Decision.STOP_EFFICACY
    assert decide(0.9999, BoundaryParams(0.9, 1.0), 40, 80, efficacy_stopping=False) is Decision.CONTINUE


def test_ties_continue_at_interim_and_reject_at_final():
    p = BoundaryParams(0.8, 1.0)
    fut = futility_threshold(p, 40, 80)
    assert decide(fut, p, 40, 80) is Decision.CONTINUE
    eff = efficacy_threshold(p, 40, 80)
    assert decide(eff, p, 40, 80) is Decision.CONTINUE
    assert decide(0.8, p, 80, 80, final=True) is Decision.REJECT_NULL


@settings(max_examples=200, deadline=None)
@given(lams, gammas, st.integers(1, 300))
def test_thresholds_meet_at_final(lam, gamma, N):
    p = BoundaryParams(lam, gamma)
    assert futility_threshold(p, N, N) == pytest.approx(lam, abs=1e-12)
    for scale in ("sqrt", "linear"):
        assert efficacy_threshold(p, N, N, scale) == pytest.approx(lam, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(lams, gammas, st.integers(2, 300), st.sampled_from(["sqrt", "linear"]))
def test_monotone_and_bracketing(lam, gamma, N, scale):
    p = BoundaryParams(lam, gamma)
    n = np.arange(1, N + 1)
    fut = futility_threshold(p, n, N)
    eff = efficacy_threshold(p, n, N, scale)
    assert np.all(np.diff(fut) >= -1e-15)
    assert np.all(np.diff(eff) <= 1e-15)
    assert np.all(eff >= lam - 1e-12)
    assert np.all(fut <= lam + 1e-12)


@settings(max_examples=100, deadline=None)
@given(lams, st.integers(2, 300))
def test_gamma_zero_is_constant(lam, N):
    fut = futility_threshold(BoundaryParams(lam, 0.0), np.arange(1, N + 1), N)
    assert np.allclose(fut, lam, atol=1e-15)


@settings(max_examples=300, deadline=None)
@given(st.floats(0.0, 1.0), lams, gammas)
def test_final_always_decisive(stat, lam, gamma):
    d = decide(stat, BoundaryParams(lam, gamma), 80, 80, final=True)
    assert d in (Decision.REJECT_NULL, Decision.ACCEPT_NULL)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.01, 1.0), st.floats(0.05, 0.95))
def test_continuity_in_parameters(lam, gamma, t):
    N = 1000
    n = max(1, int(t * N))
    a = BoundaryParams(lam, gamma)
    b = BoundaryParams(min(lam + 1e-7, 0.999), min(gamma + 1e-7, 1.0))
    assert abs(futility_threshold(a, n, N) - futility_threshold(b, n, N)) < 1e-5
    assert abs(efficacy_threshold(a, n, N) - efficacy_threshold(b, n, N)) < 1e-4


def test_boundary_table_example():
    rows = boundary_table(BoundaryParams(0.9, 1.0), 80, [20, 40, 60])
    assert [r["n"] for r in rows] == [20, 40, 60, 80]
    fut = [r["futility_threshold"] for r in rows]
    eff = [r["efficacy_threshold"] for r in rows]
    assert fut == sorted(fut) and eff == sorted(eff, reverse=True)
    assert fut[-1] == pytest.approx(0.9) and eff[-1] == pytest.approx(0.9)
    assert fut[0] == pytest.approx(0.225)
    flat = boundary_table(BoundaryParams(0.9, 0.0), 80, [20, 40, 60])
    assert all(r["futility_threshold"] == pytest.approx(0.9) for r in flat)


def test_boundary_table_csv_roundtrip():
    rows = boundary_table(BoundaryParams(0.85, 0.7), 60, [15, 30, 45])
    parsed = list(csv.DictReader(io.StringIO(boundary_table_csv(rows))))
    assert [int(r["n"]) for r in parsed] == [15, 30, 45, 60]
    assert float(parsed[1]["futility_threshold"]) == pytest.approx(rows[1]["futility_threshold"], rel=1e-11)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bop2sim.allocation import (
    BlockRandomizer,
    apportion,
    brar_two_arm,
    check_allocation,
    clip_allocation,
    equal_allocation,
    make_blocks,
    maximum_allocation,
    trippa_allocation,
    trippa_weights,
    tuning_exponent,
)
from bop2sim.posterior import UnsupportedArityError, prob_exceeds_threshold, prob_max_vector

probs = st.floats(0.0, 1.0)
tunings = st.floats(0.0, 0.5)


def test_equal_allocation():
    assert np.allclose(equal_allocation([True, True]), [0.5, 0.5])
    assert np.allclose(equal_allocation([True, True, True]), [1 / 3] * 3)
    assert np.allclose(equal_allocation([True]), [1.0])
    assert np.allclose(equal_allocation([True, False, True]), [0.5, 0.0, 0.5])
    with pytest.raises(ValueError):
        equal_allocation([False, False])


def test_tuning_exponent():
    assert tuning_exponent(0, 80) == 0
    assert tuning_exponent(40, 80) == 0.25
    assert tuning_exponent(80, 80) == 0.5
    with pytest.raises(ValueError):
        tuning_exponent(81, 80)


def test_brar_examples():
    assert np.allclose(brar_two_arm(0.8, 0.0), [0.5, 0.5])
    assert np.allclose(brar_two_arm(0.8, 1.0), [0.2, 0.8])
    assert brar_two_arm(0.8, 0.5)[1] == pytest.approx(2 / 3, abs=1e-14)
    assert np.allclose(brar_two_arm(1.0, 0.0), [0.5, 0.5])
    assert np.allclose(brar_two_arm(0.0, 0.0), [0.5, 0.5])
    with pytest.raises(ValueError):
        brar_two_arm(1.1, 0.3)


@settings(max_examples=200, deadline=None)
@given(probs, tunings)
def test_brar_symmetry_and_validity(p, c):
    q = 1.0 - p
    a = brar_two_arm(1.0 - q, c)  # exact complement pair
    b = brar_two_arm(q, c)
    check_allocation(a)
    assert a[1] == pytest.approx(b[0], abs=1e-12)


def test_trippa_control_weight_examples():
    counts = [10, 10, 10, 10]
    eligible = [True] * 4
    w = trippa_weights(counts, [0.3, 0.6, 0.6, 0.6], 0.25, eligible, control_weight="inverse_n")
    assert w[0] == pytest.approx(1 / 40)
    w = trippa_weights(counts, [0.3, 0.6, 0.6, 0.6], 0.25, eligible)
    assert w[0] == pytest.approx(1.0)
    p = trippa_allocation(counts, [0.3, 0.6, 0.6, 0.6], 0.25, eligible)
    assert p[1] == pytest.approx(p[2]) == pytest.approx(p[3])


def test_trippa_fig8_setting_protects_control():
    # 30 patients per arm; treatments at 30/30, control at 13/30.
    theta_ref = 0.45
    counts = [30, 30, 30, 30]
    exceed = [prob_exceeds_threshold((14, 18), theta_ref)] + [prob_exceeds_threshold((31, 1), theta_ref)] * 3
    for c in (0.0, 60 / 480, 120 / 480, 0.5):
        p = trippa_allocation(counts, exceed, c, [True] * 4)
        check_allocation(p)
        assert p[1:].max() <= p[0] + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 60), st.integers(0, 60), tunings, st.lists(probs, min_size=3, max_size=3))
def test_trippa_control_weight_ignores_control_posterior(n0, s0, c, treat):
    counts = [n0, 40, 30, 20]
    a = trippa_weights(counts, [0.1] + treat, c, [True] * 4)
    b = trippa_weights(counts, [0.9] + treat, c, [True] * 4)
    assert a[0] == b[0]


def test_maximum_examples():
    assert np.allclose(maximum_allocation([(3, 3)] * 3, 0.3), [1 / 3] * 3)
    post = [(31, 1), (14, 18), (14, 18)]
    assert np.allclose(maximum_allocation(post, 0.0), [1 / 3] * 3)
    p = maximum_allocation(post, 0.25)
    assert p[0] > p[1] and p[0] > p[2]
    with pytest.raises(UnsupportedArityError):
        maximum_allocation([(1, 1)] * 5, 0.2)


def test_maximum_respects_eligibility():
    p = maximum_allocation([(5, 5), (8, 2), (2, 8)], 0.4, eligible=[True, False, True])
    assert p[1] == 0.0
    check_allocation(p)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 60), st.integers(1, 60)), min_size=2, max_size=4), st.floats(0.01, 0.5))
def test_maximum_preserves_argmax(post, c):
    pm = prob_max_vector(post)
    p = maximum_allocation(post, c)
    check_allocation(p)
    assert p[np.argmax(pm)] == pytest.approx(p.max(), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 60), st.integers(1, 60)), min_size=4, max_size=4),
       st.lists(st.booleans(), min_size=4, max_size=4))
def test_c_zero_reduces_to_equal(post, mask):
    mask[0] = True
    eligible = np.array(mask)
    assert np.allclose(maximum_allocation(post, 0.0, eligible), equal_allocation(eligible))
    assert np.allclose(trippa_allocation([5, 7, 9, 3], [0.2, 0.4, 0.6, 0.8], 0.0, eligible),
                       equal_allocation(eligible))


def test_clipping_hook():
    p = clip_allocation(np.array([0.02, 0.98]), 0.1, 0.9)
    check_allocation(p)
    assert p[0] > 0.02


def test_apportion_exact_targets():
    u = np.linspace(0, 0.999, 50)
    for target, expected in (((0.5, 0.5), (2, 2)), ((0.25, 0.75), (1, 3))):
        counts = apportion(np.tile(target, (50, 1)), np.full(50, 4), u)
        assert np.all(counts == expected)


def test_apportion_long_run_share():
    rng = np.random.default_rng(7)
    n = 100_000
    counts = apportion(np.tile([0.6, 0.4], (n, 1)), np.full(n, 4), rng.random(n))
    assert set(map(tuple, counts)) <= {(2, 2), (3, 1)}
    share = counts[:, 0].sum() / (4 * n)
    assert abs(share - 0.6) < 0.01


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=4), st.integers(1, 12), st.floats(0.0, 0.999))
def test_apportion_is_largest_remainder(w, size, u):
    w = np.array(w)
    if w.sum() == 0:
        w[0] = 1.0
    w = w / w.sum()
    counts = apportion(w[None, :], [size], [u])[0]
    assert counts.sum() == size
    assert np.all(counts >= np.floor(size * w - 1e-9))
    assert np.all(counts <= np.ceil(size * w + 1e-9))
    assert np.all(counts[w == 0] == 0)


def test_make_blocks_is_permutation():
    rng = np.random.default_rng(3)
    blocks = make_blocks(np.tile([0.25, 0.75], (1000, 1)), np.full(1000, 4), rng.random(1000), rng.random((1000, 4)))
    assert np.all((blocks == 0).sum(axis=1) == 1)
    orders = {tuple(b) for b in blocks}
    assert len(orders) == 4  # every position of the single arm-0 slot occurs


def test_block_randomizer_completes_blocks():
    r = BlockRandomizer(rng=np.random.default_rng(11))
    arms = [r.draw([0.5, 0.5]) for _ in range(400)]
    for i in range(0, 400, 4):
        assert sorted(arms[i:i + 4]) == [0, 0, 1, 1]
        assert len(r.pending) < 4
    r = BlockRandomizer(block_size=6, rng=np.random.default_rng(2))
    arms = [r.draw([1 / 3, 1 / 3, 1 / 3]) for _ in range(60)]
    assert np.bincount(arms).tolist() == [20, 20, 20]


def test_block_randomizer_flush():
    r = BlockRandomizer(rng=np.random.default_rng(0))
    r.draw([0.5, 0.5])
    assert len(r.pending) == 3
    r.flush()
    assert r.draw([0.0, 1.0]) == 1

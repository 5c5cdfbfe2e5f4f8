import time

import numpy as np
import pytest

from nonlocality.behavior import (
    BehaviorTable,
    Dims,
    deterministic_behavior,
    l1_distance,
    mix,
    pr_box,
    random_behavior,
    signaling_deficit,
    uniform_behavior,
)
from nonlocality.bell import i3_signed
from nonlocality.exceptions import TooLarge
from nonlocality.polytope import (
    distance_to_local_polytope,
    enumerate_local_vertices,
    is_local,
    nonsignaling_residual,
    project_nonsignaling,
)
from nonlocality.quantum import QutritModel, born_behavior

QUTRIT = Dims(2, 2, 3, 3)
CHSH = Dims(2, 2, 2, 2)


def test_vertex_counts_and_order():
    assert len(enumerate_local_vertices(CHSH)) == 16
    vs = enumerate_local_vertices(QUTRIT)
    assert len(vs) == 81
    first = enumerate_local_vertices(CHSH).vertices[0].p
    expected = np.zeros(CHSH.shape)
    expected[:, :, 0, 0] = 1.0
    np.testing.assert_array_equal(first, expected)
    assert vs.matrix.shape == (36, 81)
    np.testing.assert_array_equal(vs.matrix.sum(axis=0), 4.0)


def test_vertex_limit():
    with pytest.raises(TooLarge):
        enumerate_local_vertices(Dims(6, 6, 10, 10))


def test_every_vertex_is_at_distance_zero():
    for v in enumerate_local_vertices(QUTRIT).vertices:
        assert distance_to_local_polytope(v).distance <= 1e-9


def test_distance_examples():
    assert distance_to_local_polytope(uniform_behavior(QUTRIT)).distance <= 1e-9
    assert distance_to_local_polytope(pr_box()).distance == pytest.approx(2.0, abs=1e-8)
    half = mix(pr_box(), uniform_behavior(CHSH), 0.5)
    assert distance_to_local_polytope(half).distance <= 1e-9


def test_nearest_point_is_local_and_weights_are_convex():
    res = distance_to_local_polytope(born_behavior(QutritModel(1.0)))
    assert res.weights.min() >= 0 and res.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert l1_distance(born_behavior(QutritModel(1.0)), res.nearest) == pytest.approx(res.distance, abs=1e-9)
    assert distance_to_local_polytope(res.nearest).distance <= 1e-9


def test_bell_lower_bound():
    rng = np.random.default_rng(17)
    cases = [born_behavior(QutritModel(g, lam)) for g in np.linspace(0, 2, 9) for lam in (0.7, 0.9, 1.0)]
    cases += [random_behavior(QUTRIT, rng, concentration=0.2) for _ in range(30)]
    for p in cases:
        s = i3_signed(p)
        if s > 2:
            assert distance_to_local_polytope(p).distance >= s - 2 - 1e-8


@pytest.mark.parametrize("p", [pr_box(), born_behavior(QutritModel(1.0))], ids=["pr", "born"])
def test_distance_non_increasing_under_noise(p):
    u = uniform_behavior(p.dims)
    dists = [distance_to_local_polytope(mix(p, u, mu)).distance for mu in np.linspace(1, 0, 11)]
    assert all(b <= a + 1e-9 for a, b in zip(dists, dists[1:]))


def test_is_local_examples():
    noisy = project_nonsignaling(born_behavior(QutritModel(0.1, 0.807))).nearest
    assert is_local(noisy)
    assert not is_local(born_behavior(QutritModel(1.0)))
    assert is_local(uniform_behavior(QUTRIT))
    with pytest.raises(ValueError):
        is_local(uniform_behavior(QUTRIT), tol=-1)


# non-signaling projection


def _alice_leaky():
    # only the first Alice setting leaks Bob's input
    p = np.full(CHSH.shape, 0.25)
    p[0, 0] = np.outer([0.6, 0.4], [0.5, 0.5])
    return BehaviorTable(CHSH, p)


def test_projection_fixes_non_signaling_inputs():
    for p in (uniform_behavior(QUTRIT), pr_box(), born_behavior(QutritModel(0.6, 0.9))):
        res = project_nonsignaling(p)
        assert res.distance == 0.0
        np.testing.assert_array_equal(res.nearest.p, p.p)


def test_projection_symmetric_averaging_example():
    res = project_nonsignaling(_alice_leaky())
    assert res.distance == pytest.approx(0.2, abs=1e-9)
    alice = res.nearest.alice_marginals()
    np.testing.assert_allclose(alice[0], [[0.55, 0.45], [0.55, 0.45]], atol=1e-9)
    np.testing.assert_allclose(alice[1], 0.5, atol=1e-9)
    assert signaling_deficit(res.nearest) <= 1e-12


def test_projection_is_idempotent_and_feasible():
    rng = np.random.default_rng(99)
    for _ in range(100):
        p = random_behavior(QUTRIT, rng)
        once = project_nonsignaling(p)
        twice = project_nonsignaling(once.nearest)
        assert nonsignaling_residual(once.nearest.ravel(), QUTRIT) <= 1e-12
        assert once.nearest.p.min() >= 0
        assert np.abs(twice.nearest.p - once.nearest.p).max() <= 1e-9


def test_projection_distance_is_l1_optimal():
    # any non-signaling point, here the uniform one, bounds the projection distance
    rng = np.random.default_rng(4)
    for _ in range(50):
        p = random_behavior(QUTRIT, rng)
        d = project_nonsignaling(p).distance
        assert d <= l1_distance(p, uniform_behavior(QUTRIT)) + 1e-12
        assert d >= signaling_deficit(p) - 1e-12


def test_vertex_lp_speed():
    t0 = time.perf_counter()
    for v in enumerate_local_vertices(QUTRIT).vertices:
        distance_to_local_polytope(v)
    assert time.perf_counter() - t0 < 10

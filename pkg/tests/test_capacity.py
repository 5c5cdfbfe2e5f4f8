import time

import numpy as np
import pytest

from oracles import binary_entropy, mutual_information_bits, two_input_capacity_grid

from nonlocality.behavior import BehaviorTable, Dims, deterministic_behavior, mix, pr_box, random_behavior, uniform_behavior
from nonlocality.capacity import (
    ExtendedDistribution,
    build_v_polytope,
    channel_capacity,
    dual_bound,
    is_product,
    mutual_information,
    nonlocal_capacity_asym,
    product_extension,
    zero_communication_feasible,
)
from nonlocality.exceptions import InvalidParameter, SignalingInput
from nonlocality.polytope import enumerate_local_vertices, project_nonsignaling
from nonlocality.quantum import QutritModel, born_behavior

QUTRIT = Dims(2, 2, 3, 3)
CHSH = Dims(2, 2, 2, 2)


def bsc(flip):
    return np.array([[1 - flip, flip], [flip, 1 - flip]])


def pr_one_bit_point():
    # b1 = a, b2 = a xor x: the channel reveals x exactly
    rho = np.zeros((2, 2, 2, 2))
    for x in range(2):
        for a in range(2):
            rho[x, a, a, a ^ x] = 0.5
    return ExtendedDistribution(CHSH, rho)


def capacity_of(ext):
    return channel_capacity(ext.channel(), tol=1e-10)[0]


def random_local_mixture(rng, n_terms=5):
    verts = enumerate_local_vertices(QUTRIT).vertices
    w = rng.dirichlet(np.ones(n_terms))
    idx = rng.choice(len(verts), n_terms, replace=False)
    return BehaviorTable.from_array(sum(wi * verts[i].p for wi, i in zip(w, idx)), renormalize=True)


# V polytope


def test_v_counts():
    V = build_v_polytope(born_behavior(QutritModel(1.0)))
    assert V.n_vars == 54
    assert V.A_eq.shape == (36, 54)


def test_product_extension_is_feasible():
    rng = np.random.default_rng(1)
    pa = rng.dirichlet(np.ones(3), size=2)
    pb = rng.dirichlet(np.ones(3), size=2)
    p = BehaviorTable(QUTRIT, pa[:, None, :, None] * pb[None, :, None, :])
    assert is_product(p)
    V = build_v_polytope(p)
    assert V.residual(product_extension(p).flat()) <= 1e-15


def test_pr_one_bit_point_is_feasible():
    V = build_v_polytope(pr_box())
    ext = pr_one_bit_point()
    assert V.residual(ext.flat()) == 0.0
    for m in range(2):
        np.testing.assert_array_equal(ext.marginal(m), pr_box().p[:, m])


def test_signaling_input_is_rejected():
    p = np.full(CHSH.shape, 0.25)
    p[0, 0] = np.outer([0.6, 0.4], [0.5, 0.5])
    with pytest.raises(SignalingInput):
        build_v_polytope(BehaviorTable(CHSH, p))
    with pytest.raises(SignalingInput):
        nonlocal_capacity_asym(BehaviorTable(CHSH, p))


# channel capacity


def test_channel_examples():
    assert channel_capacity(np.eye(2))[0] == pytest.approx(1.0, abs=1e-9)
    assert channel_capacity(bsc(0.5))[0] == pytest.approx(0.0, abs=1e-9)
    assert channel_capacity(bsc(0.11))[0] == pytest.approx(1 - binary_entropy(0.11), abs=1e-9)
    assert 1 - binary_entropy(0.11) == pytest.approx(0.5001, abs=1e-4)


def test_channel_validation():
    with pytest.raises(InvalidParameter):
        channel_capacity(np.array([[0.5, 0.6], [0.5, 0.5]]))
    with pytest.raises(InvalidParameter):
        channel_capacity(np.ones(3))
    with pytest.raises(InvalidParameter):
        channel_capacity(np.eye(2), tol=0)


def test_channel_capacity_against_grid_search():
    rng = np.random.default_rng(12)
    for _ in range(20):
        W = rng.dirichlet(np.full(5, 0.5), size=2)
        cap, pi = channel_capacity(W, tol=1e-10)
        assert cap == pytest.approx(two_input_capacity_grid(W), abs=1e-7)
        assert mutual_information(pi, W) == pytest.approx(mutual_information_bits(pi, W), abs=1e-12)


# non-local capacity


def test_local_behaviors_need_no_communication():
    for v in enumerate_local_vertices(QUTRIT).vertices:
        assert nonlocal_capacity_asym(v).value <= 1e-6
    assert nonlocal_capacity_asym(uniform_behavior(QUTRIT)).value <= 1e-6


def test_random_local_mixtures_need_no_communication():
    rng = np.random.default_rng(21)
    for _ in range(100):
        assert nonlocal_capacity_asym(random_local_mixture(rng)).value <= 1e-6


def test_pr_box_capacity():
    cert = nonlocal_capacity_asym(pr_box())
    assert 0 < cert.value <= 1.0 + 1e-6
    assert cert.value <= capacity_of(pr_one_bit_point()) + 1e-9
    assert cert.gap <= 1e-6
    assert cert.value == pytest.approx(1.0, abs=1e-6)


def test_certificate_fields_and_feasibility():
    p = born_behavior(QutritModel(1.0))
    cert = nonlocal_capacity_asym(p)
    V = build_v_polytope(p)
    assert V.residual(cert.rho.flat()) <= 1e-8
    assert cert.rho.flat().min() >= 0
    assert cert.lower <= cert.value <= cert.upper
    assert cert.gap == pytest.approx(cert.upper - max(cert.lower, 0.0), abs=1e-15)
    assert cert.input_dist.sum() == pytest.approx(1.0)
    assert cert.converged


def test_non_monotonic_in_entanglement():
    best = nonlocal_capacity_asym(born_behavior(QutritModel(0.792)), tol=1e-4)
    maxent = nonlocal_capacity_asym(born_behavior(QutritModel(1.0)), tol=1e-4)
    assert best.value - maxent.value > 2 * (best.gap + maxent.gap)


def test_noise_monotonicity():
    p, u = born_behavior(QutritModel(1.0)), uniform_behavior(QUTRIT)
    values = [nonlocal_capacity_asym(mix(p, u, mu)).value for mu in np.linspace(1, 0, 11)]
    assert all(b <= a + 1e-6 for a, b in zip(values, values[1:]))


def _random_feasible(V, rng):
    # random vertex of V from a random linear objective
    from scipy.optimize import linprog

    res = linprog(rng.normal(size=V.n_vars), A_eq=V.A_eq, b_eq=V.b_eq, bounds=(0, None), method="highs")
    return res.x


def test_capacity_is_convex_along_v():
    p = born_behavior(QutritModel(0.6, 0.95))
    V = build_v_polytope(p)
    rng = np.random.default_rng(31)
    for _ in range(20):
        r1, r2 = _random_feasible(V, rng), _random_feasible(V, rng)
        mu = rng.uniform(0.05, 0.95)
        c = lambda r: channel_capacity(V.channel(r), tol=1e-11)[0]  # noqa: E731
        assert c(mu * r1 + (1 - mu) * r2) <= mu * c(r1) + (1 - mu) * c(r2) + 1e-8


def test_value_below_every_feasible_point():
    rng = np.random.default_rng(32)
    p = born_behavior(QutritModel(0.8, 0.9))
    V = build_v_polytope(p)
    cert = nonlocal_capacity_asym(p)
    for _ in range(20):
        r = _random_feasible(V, rng)
        assert cert.value <= channel_capacity(V.channel(r), tol=1e-11)[0] + 1e-6


def test_product_point_upper_bound():
    rng = np.random.default_rng(5)
    pa = rng.dirichlet(np.ones(3), size=2)
    pb = rng.dirichlet(np.ones(3), size=2)
    p = BehaviorTable(QUTRIT, pa[:, None, :, None] * pb[None, :, None, :])
    cert = nonlocal_capacity_asym(p)
    assert cert.value <= capacity_of(product_extension(p)) + 1e-9


def test_frank_wolfe_method_agrees():
    for p in (pr_box(), born_behavior(QutritModel(1.0))):
        conic = nonlocal_capacity_asym(p, tol=1e-5)
        fw = nonlocal_capacity_asym(p, tol=1e-5, method="frank-wolfe", max_iter=2000, strict=False)
        assert fw.value == pytest.approx(conic.value, abs=1e-4)
    with pytest.raises(InvalidParameter):
        nonlocal_capacity_asym(pr_box(), method="newton")


def test_zero_set_agrees_with_locality():
    from nonlocality.polytope import is_local

    rng = np.random.default_rng(40)
    cases = [project_nonsignaling(born_behavior(QutritModel(g, 0.807))).nearest for g in (0.1, 0.2, 0.5, 1.0)]
    cases += [random_local_mixture(rng) for _ in range(5)]
    cases += [mix(born_behavior(QutritModel(1.0)), uniform_behavior(QUTRIT), mu) for mu in (0.5, 0.8)]
    for p in cases:
        assert zero_communication_feasible(p) == is_local(p)


def test_speed():
    t0 = time.perf_counter()
    nonlocal_capacity_asym(born_behavior(QutritModel(0.792)))
    assert time.perf_counter() - t0 < 5


def test_dual_bound_never_exceeds_the_optimum():
    rng = np.random.default_rng(50)
    for g in (0.3, 0.792, 1.0):
        p = born_behavior(QutritModel(g, 0.9))
        V = build_v_polytope(p)
        cert = nonlocal_capacity_asym(p)
        for _ in range(200):
            pi = rng.dirichlet(np.ones(2))
            nu = rng.normal(scale=rng.uniform(0.01, 3), size=V.A_eq.shape[0])
            assert dual_bound(V, pi, nu) <= cert.value + 1e-9
        assert cert.lower <= cert.value + 1e-12


def test_exact_zero_sets_coincide_near_local_boundary():
    # capacity grows quadratically past the boundary, so only the exact zero test is sharp
    from nonlocality.polytope import distance_to_local_polytope

    for g in np.round(np.arange(0.15, 0.31, 0.01), 2):
        q = project_nonsignaling(born_behavior(QutritModel(g, 0.807))).nearest
        local = distance_to_local_polytope(q).distance <= 1e-9
        assert zero_communication_feasible(q) == local
        if not local:
            assert nonlocal_capacity_asym(q).value > 1e-8

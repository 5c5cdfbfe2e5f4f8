import itertools
import time
import warnings

import numpy as np
import pytest

from oracles import born_oracle, i2_oracle, i3_oracle

from nonlocality.behavior import BehaviorTable, Dims, deterministic_behavior, mix, pr_box, random_behavior, uniform_behavior
from nonlocality.bell import (
    BellValue,
    fit_mixing_parameter,
    i2,
    i2_signed,
    i3,
    i3_signed,
    i3_signed_batch,
    i3_theory,
)
from nonlocality.exceptions import DegenerateFit, EmptyInput, InvalidParameter, ShapeMismatch
from nonlocality.quantum import QutritModel, born_behavior

QUTRIT = Dims(2, 2, 3, 3)
CHSH = Dims(2, 2, 2, 2)
I3_GAMMA_1 = 2.8729340511723374


def test_i2_examples():
    assert i2(uniform_behavior(CHSH)).value == 0.0
    assert i2(deterministic_behavior(CHSH, (0, 0), (0, 0))).value == 2.0
    assert i2(pr_box(anticorrelated=(1, 0))).value == 4.0


def test_i2_of_standard_pr_box_follows_sign_pattern():
    # with the (A2, B1) term flipped, the x*y-anticorrelated box cancels
    assert i2(pr_box()).value == pytest.approx(i2_oracle(pr_box().p), abs=1e-15)
    assert i2(pr_box()).value == 0.0


def test_i3_examples():
    assert i3(uniform_behavior(QUTRIT)).value == pytest.approx(0.0, abs=1e-15)
    assert i3(deterministic_behavior(QUTRIT, (0, 0), (0, 0))).value == 2.0
    assert i3(born_behavior(QutritModel(1.0))).value == pytest.approx(I3_GAMMA_1, abs=1e-10)


def test_bell_value_fields():
    v = i3(born_behavior(QutritModel(1.0, 0.5)))
    assert isinstance(v, BellValue)
    assert v.functional == "I3" and v.local_bound == 2.0
    assert v.violation == pytest.approx(v.value - 2.0)


def test_dims_are_checked():
    with pytest.raises(ShapeMismatch):
        i3(uniform_behavior(CHSH))
    with pytest.raises(ShapeMismatch):
        i2(uniform_behavior(QUTRIT))


def test_functionals_match_term_by_term_oracles():
    rng = np.random.default_rng(11)
    for _ in range(100):
        p = random_behavior(QUTRIT, rng)
        assert i3_signed(p) == pytest.approx(i3_oracle(p.p), abs=1e-13)
        q = random_behavior(CHSH, rng)
        assert i2_signed(q) == pytest.approx(i2_oracle(q.p), abs=1e-13)


def _strategies(n_in, n_out):
    return list(itertools.product(range(n_out), repeat=n_in))


def test_local_bound_over_all_deterministic_pairs():
    t0 = time.perf_counter()
    best3 = max(
        i3(deterministic_behavior(QUTRIT, f, g)).value
        for f in _strategies(2, 3)
        for g in _strategies(2, 3)
    )
    best2 = max(
        i2(deterministic_behavior(CHSH, f, g)).value
        for f in _strategies(2, 2)
        for g in _strategies(2, 2)
    )
    assert time.perf_counter() - t0 < 1.0
    assert best2 == 2.0
    assert best3 == 2.0


def test_signed_ranges_over_deterministic_pairs():
    s3 = [i3_signed(deterministic_behavior(QUTRIT, f, g)) for f in _strategies(2, 3) for g in _strategies(2, 3)]
    s2 = [i2_signed(deterministic_behavior(CHSH, f, g)) for f in _strategies(2, 2) for g in _strategies(2, 2)]
    assert max(s3) == 2.0 and min(s3) == -4.0
    assert max(s2) == 2.0 and min(s2) == -2.0
    # a=(2,0), b=(0,1) hits the negative extreme: every negative event occurs
    assert i3_signed(deterministic_behavior(QUTRIT, (2, 0), (0, 1))) == -4.0


def test_i3_invariant_under_joint_outcome_shift():
    rng = np.random.default_rng(5)
    for _ in range(50):
        p = random_behavior(QUTRIT, rng)
        shifted = np.roll(np.roll(p.p, 1, axis=2), 1, axis=3)
        assert i3(BehaviorTable(QUTRIT, shifted)).value == pytest.approx(i3(p).value, abs=1e-14)


def test_signed_functional_is_linear():
    rng = np.random.default_rng(6)
    for mu in np.linspace(0, 1, 7):
        p, q = random_behavior(QUTRIT, rng), random_behavior(QUTRIT, rng)
        lhs = i3_signed(mix(p, q, mu))
        assert lhs == pytest.approx(mu * i3_signed(p) + (1 - mu) * i3_signed(q), abs=1e-14)


def test_batch_matches_scalar():
    rng = np.random.default_rng(8)
    ps = [random_behavior(QUTRIT, rng) for _ in range(20)]
    batch = i3_signed_batch(np.stack([p.p for p in ps]))
    np.testing.assert_allclose(batch, [i3_signed(p) for p in ps], atol=1e-14)


def test_theory_matches_oracle():
    for gamma in (0.0, 0.4, 0.792, 1.0):
        assert i3_theory(gamma) == pytest.approx(i3_oracle(born_oracle(gamma)), abs=1e-12)


# fit_mixing_parameter


def test_fit_recovers_exact_generator():
    gammas = np.linspace(0.2, 1.0, 9)
    lam, stderr = fit_mixing_parameter([(g, 0.8 * i3_theory(g), 1.0) for g in gammas])
    assert lam == pytest.approx(0.8, abs=1e-12)
    assert stderr > 0


def test_fit_single_point_ratio():
    lam, _ = fit_mixing_parameter([(1.0, 2.3184, 1.0)])
    assert lam == pytest.approx(2.3184 / I3_GAMMA_1, abs=1e-12)
    assert lam == pytest.approx(0.807, abs=5e-4)


def test_fit_errors_and_clipping():
    with pytest.raises(EmptyInput):
        fit_mixing_parameter([])
    with pytest.raises(InvalidParameter):
        fit_mixing_parameter([(1.0, 2.0, 0.0)])
    with pytest.raises(DegenerateFit):
        _fit_with_flat_theory()
    with pytest.warns(RuntimeWarning):
        lam, _ = fit_mixing_parameter([(1.0, 3.5, 1.0)])
    assert lam == 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        lam, _ = fit_mixing_parameter([(1.0, 3.5, 1.0)], clip=False)
    assert lam > 1.0


def _fit_with_flat_theory():
    # the default settings never give a vanishing theory value, so patch the lookup
    import nonlocality.bell as bell

    original = bell.i3_theory
    bell.i3_theory = lambda gamma: 0.0
    try:
        fit_mixing_parameter([(0.5, 1.0, 1.0), (1.0, 1.0, 1.0)])
    finally:
        bell.i3_theory = original


def test_fit_monte_carlo_coverage():
    rng = np.random.default_rng(2024)
    gammas = np.linspace(0.1, 1.0, 10)
    theory = np.array([i3_theory(g) for g in gammas])
    sigma = 0.05
    hits = 0
    trials = 1000
    for _ in range(trials):
        measured = 0.807 * theory + rng.normal(0, sigma, gammas.size)
        lam, se = fit_mixing_parameter(zip(gammas, measured, np.full(10, 1 / sigma**2)))
        hits += abs(lam - 0.807) <= 2 * se
    assert hits / trials >= 0.95

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sipm.checks import random_small_cone, weighted_lsq_multiplier
from sipm.cones import Orthant, PSD, SecondOrder
from sipm.errors import DataError, EstimatedStationary, IllPosedConstraintsError
from sipm.kkt import AffineConstraints, search_direction, solve_dual


def test_hand_example():
    cons = AffineConstraints(np.array([[1.0, -1.0]]), np.zeros(1))
    res = solve_dual(cons, Orthant(2), np.ones(2), np.array([2.0, 0.0]))
    np.testing.assert_allclose(res.lam, [-1.0])
    np.testing.assert_allclose(res.residual, [1.0, 1.0])
    assert res.residual_dual_norm == pytest.approx(np.sqrt(2.0))
    d = search_direction(Orthant(2), np.ones(2), res)
    np.testing.assert_allclose(d, -np.ones(2) / np.sqrt(2.0))
    assert Orthant(2).local_norm(np.ones(2), d) == pytest.approx(1.0)
    assert cons.A @ d == pytest.approx(0.0, abs=1e-15)


def test_zero_estimate():
    cons = AffineConstraints(np.array([[1.0, -1.0]]), np.zeros(1))
    res = solve_dual(cons, Orthant(2), np.ones(2), np.zeros(2))
    np.testing.assert_allclose(res.lam, 0.0)
    np.testing.assert_allclose(res.residual, 0.0)
    with pytest.raises(EstimatedStationary):
        search_direction(Orthant(2), np.ones(2), res)


def test_no_constraints():
    cons = AffineConstraints.empty(2)
    m = np.array([1.0, 0.0])
    res = solve_dual(cons, Orthant(2), np.ones(2), m)
    assert res.lam.shape == (0,)
    np.testing.assert_array_equal(res.residual, m)
    np.testing.assert_allclose(search_direction(Orthant(2), np.ones(2), res), [-1.0, 0.0])


def test_rank_deficient_rows_rejected():
    A = np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 0.0]])
    with pytest.raises(IllPosedConstraintsError):
        AffineConstraints(A, np.array([1.0, 2.0]))


def test_deflation_keeps_consistent_rows():
    A = np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 0.0], [0.0, 0.0, 1.0]])
    cons = AffineConstraints.deflated(A, np.array([1.0, 2.0, 3.0]))
    assert cons.m == 2
    with pytest.raises(DataError):
        AffineConstraints.deflated(A, np.array([1.0, 5.0, 3.0]))


def test_mismatched_rhs():
    with pytest.raises(DataError):
        AffineConstraints(np.ones((2, 3)), np.ones(3))


def test_drift():
    cons = AffineConstraints(np.array([[1.0, 1.0]]), np.array([2.0]))
    assert cons.drift(np.array([1.0, 1.5])) == pytest.approx(0.5)
    assert cons.drift_tolerance() == pytest.approx(3e-8)


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_dual_solve_against_dense_oracle(seed):
    rng = np.random.default_rng(seed)
    cone = random_small_cone(rng)
    n = cone.dim
    m_rows = int(rng.integers(1, min(5, n) + 1)) if n > 1 else 1
    m_rows = min(m_rows, n)
    A = rng.standard_normal((m_rows, n))
    cons = AffineConstraints(A, np.zeros(m_rows))
    x = cone.sample_interior(rng, spread=0.5)
    g = rng.standard_normal(n)
    res = solve_dual(cons, cone, x, g)
    lam = weighted_lsq_multiplier(A, cone.hessian_matrix(x), g)
    np.testing.assert_allclose(res.lam, lam, rtol=1e-7, atol=1e-8 * max(1.0, np.linalg.norm(lam)))
    # the residual is H-orthogonal to the row space
    assert np.linalg.norm(A @ res.h_residual) <= 1e-8 * np.linalg.norm(A) * (np.linalg.norm(res.h_residual) + 1)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_direction_has_unit_local_norm_and_keeps_feasibility(seed):
    rng = np.random.default_rng(seed)
    cone = random_small_cone(rng)
    if cone.dim < 2:
        return
    A = rng.standard_normal((1, cone.dim))
    cons = AffineConstraints(A, np.zeros(1))
    x = cone.sample_interior(rng, spread=0.5)
    d = search_direction(cone, x, solve_dual(cons, cone, x, rng.standard_normal(cone.dim)))
    assert cone.local_norm(x, d) == pytest.approx(1.0, rel=1e-9)
    assert abs(A @ d)[0] <= 1e-9 * np.linalg.norm(A) * np.linalg.norm(d)


def test_ill_conditioned_system_is_reported():
    # two nearly parallel rows pass the rank test but make A H A^T singular in practice
    cone = SecondOrder(2)
    A = np.array([[1.0, 0.0, 0.0], [1.0, 1e-9, 0.0]])
    cons = AffineConstraints(A, np.zeros(2))
    with pytest.raises(IllPosedConstraintsError):
        solve_dual(cons, cone, cone.identity() * 2, np.ones(3))


def test_psd_trace_constraint_direction():
    c = PSD(3)
    cons = AffineConstraints(c.vec(np.eye(3))[None, :], np.array([1.0]))
    x = c.vec(np.diag([0.2, 0.3, 0.5]))
    d = search_direction(c, x, solve_dual(cons, c, x, c.vec(np.diag([1.0, -1.0, 0.0]))))
    assert np.trace(c.mat(d)) == pytest.approx(0.0, abs=1e-14)

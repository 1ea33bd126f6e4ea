import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sipm.cones import (
    PSD,
    Free,
    InteriorPoint,
    Orthant,
    Product,
    SecondOrder,
    barrier_gradient,
    barrier_value,
    complexity_parameter,
    contains_interior,
    dual_local_norm,
    hessian_apply,
    inverse_hessian_apply,
    local_norm,
)
from sipm.checks import fd_gradient
from sipm.errors import DomainError, InternalConsistencyError

psd2 = PSD(2)


def sv(M):
    return psd2.vec(np.asarray(M, dtype=float))


# -- frozen values -------------------------------------------------------------


def test_barrier_values():
    assert barrier_value(Orthant(2), [1.0, 1.0]) == 0.0
    assert barrier_value(SecondOrder(1), [0.0, 1.0]) == 0.0
    assert barrier_value(psd2, sv(np.diag([1.0, 2.0]))) == pytest.approx(-np.log(2.0), abs=1e-15)


def test_psd_barrier_matches_slogdet():
    rng = np.random.default_rng(0)
    c = PSD(5)
    x = c.sample_interior(rng)
    sign, logdet = np.linalg.slogdet(c.mat(x))
    assert sign == 1.0
    assert c.barrier(x) == pytest.approx(-logdet, rel=1e-12)


def test_gradients():
    np.testing.assert_allclose(barrier_gradient(Orthant(2), [1.0, 2.0]), [-1.0, -0.5])
    np.testing.assert_allclose(barrier_gradient(SecondOrder(1), [0.0, 1.0]), [0.0, -2.0])
    np.testing.assert_allclose(barrier_gradient(psd2, sv(np.diag([1.0, 2.0]))), sv(-np.diag([1.0, 0.5])))


def test_gradient_examples_agree_with_central_differences():
    for cone, x in ((SecondOrder(1), np.array([0.0, 1.0])), (psd2, sv(np.diag([1.0, 2.0])))):
        fd = fd_gradient(cone.barrier, x, np.full(x.size, 1e-6))
        np.testing.assert_allclose(fd, cone.gradient(x), atol=1e-8)


def test_hessian_apply_examples():
    np.testing.assert_allclose(hessian_apply(Orthant(2), [1.0, 2.0], [1.0, 1.0]), [1.0, 0.25])
    np.testing.assert_allclose(hessian_apply(SecondOrder(1), [0.0, 1.0], [1.0, 1.0]), [2.0, 2.0])
    V = sv([[0.3, -1.2], [-1.2, 4.0]])
    np.testing.assert_allclose(hessian_apply(psd2, sv(np.eye(2)), V), V)


def test_inverse_hessian_examples():
    np.testing.assert_allclose(inverse_hessian_apply(Orthant(2), [1.0, 2.0], [1.0, 1.0]), [1.0, 4.0])
    x = sv(np.diag([1.0, 2.0]))
    v = sv([[0.0, 1.0], [1.0, 0.0]])
    out = inverse_hessian_apply(psd2, x, v)
    np.testing.assert_allclose(out, sv([[0.0, 2.0], [2.0, 0.0]]))
    # dense oracle: solve with the explicit Hessian
    np.testing.assert_allclose(np.linalg.solve(psd2.hessian_matrix(x), v), out, atol=1e-12)
    soc = SecondOrder(1)
    np.testing.assert_allclose(inverse_hessian_apply(soc, [0.0, 1.0], [2.0, 2.0]), [1.0, 1.0])
    np.testing.assert_allclose(np.linalg.solve(soc.hessian_matrix(np.array([0.0, 1.0])), [2.0, 2.0]), [1.0, 1.0])


def test_local_norm_examples():
    assert dual_local_norm(Orthant(2), [1.0, 2.0], [-1.0, -0.5]) == pytest.approx(np.sqrt(2.0))
    assert local_norm(SecondOrder(1), [0.0, 1.0], [1.0, 0.0]) == pytest.approx(np.sqrt(2.0))
    for c in (Orthant(3), SecondOrder(2), PSD(2)):
        assert local_norm(c, c.identity(), np.zeros(c.dim)) == 0.0
        assert dual_local_norm(c, c.identity(), np.zeros(c.dim)) == 0.0


def test_complexity_parameter():
    assert complexity_parameter(Orthant(5)) == 5
    assert complexity_parameter(SecondOrder(10)) == 2
    assert complexity_parameter(Product([Orthant(2), PSD(3)])) == 5
    assert complexity_parameter(Free(4)) == 0


def test_contains_interior_examples():
    assert not contains_interior(Orthant(2), [1.0, -1.0])
    assert contains_interior(SecondOrder(1), [0.5, 1.0])
    assert not contains_interior(psd2, sv([[1.0, 2.0], [2.0, 1.0]]))
    assert not contains_interior(SecondOrder(1), [1.0, 1.0])  # boundary
    assert not contains_interior(Orthant(2), [1.0, np.nan])


def test_svec_preserves_inner_product():
    rng = np.random.default_rng(1)
    c = PSD(4)
    A, B = rng.standard_normal((2, 4, 4))
    A, B = A + A.T, B + B.T
    assert c.vec(A) @ c.vec(B) == pytest.approx(np.trace(A @ B))
    np.testing.assert_allclose(c.mat(c.vec(A)), A)


# -- errors --------------------------------------------------------------------


def test_domain_error_names_block():
    cone = Product([Orthant(2), SecondOrder(2)])
    with pytest.raises(DomainError, match="block 1"):
        cone.barrier(np.array([1.0, 1.0, 2.0, 0.0, 1.0]))


def test_interior_point_certifies_and_freezes():
    p = InteriorPoint(Orthant(2), np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        p.x[0] = 5.0
    with pytest.raises(DomainError):
        InteriorPoint(Orthant(2), np.array([1.0, 0.0]))


def test_shape_mismatch():
    with pytest.raises(ValueError, match="shape"):
        Orthant(3).hess_apply(np.ones(3), np.ones(2))


def test_negative_quadratic_form_detected():
    class Broken(Orthant):
        def hess_apply(self, x, v):
            return -super().hess_apply(x, v)

    with pytest.raises(InternalConsistencyError):
        Broken(2).local_norm(np.ones(2), np.ones(2))


def test_psd_singular_is_rejected():
    with pytest.raises(DomainError):
        psd2.gradient(sv([[1.0, 1.0], [1.0, 1.0]]))


# -- properties ----------------------------------------------------------------

cone_strategy = st.one_of(
    st.integers(1, 8).map(Orthant),
    st.integers(1, 8).map(SecondOrder),
    st.integers(1, 5).map(PSD),
    st.tuples(st.integers(1, 3), st.integers(1, 3), st.integers(1, 3)).map(
        lambda t: Product([Orthant(t[0]), SecondOrder(t[1]), PSD(t[2])])
    ),
)


@settings(max_examples=60, deadline=None)
@given(cone=cone_strategy, seed=st.integers(0, 2**32 - 1))
def test_theta_identities(cone, seed):
    rng = np.random.default_rng(seed)
    x = cone.sample_interior(rng)
    g = cone.gradient(x)
    th = cone.theta
    assert cone.dual_local_norm(x, g) ** 2 == pytest.approx(th, rel=1e-8)
    assert -x @ g == pytest.approx(th, rel=1e-8)
    assert cone.local_norm(x, x) ** 2 == pytest.approx(th, rel=1e-8)


@settings(max_examples=60, deadline=None)
@given(cone=cone_strategy, seed=st.integers(0, 2**32 - 1), t=st.floats(0.1, 10.0))
def test_logarithmic_homogeneity(cone, seed, t):
    x = cone.sample_interior(np.random.default_rng(seed))
    assert cone.barrier(t * x) == pytest.approx(cone.barrier(x) - cone.theta * np.log(t), abs=1e-9 * (1 + abs(cone.barrier(x))))
    np.testing.assert_allclose(cone.gradient(t * x), cone.gradient(x) / t, rtol=1e-9, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(cone=cone_strategy, seed=st.integers(0, 2**32 - 1))
def test_hessian_and_inverse_are_inverse(cone, seed):
    rng = np.random.default_rng(seed)
    x = cone.sample_interior(rng, spread=0.5)
    v = rng.standard_normal(cone.dim)
    np.testing.assert_allclose(cone.hess_apply(x, cone.inv_hess_apply(x, v)), v, rtol=1e-8, atol=1e-8 * np.linalg.norm(v))
    H = cone.hessian_matrix(x)
    np.testing.assert_allclose(H, H.T, atol=1e-10 * np.abs(H).max())
    assert np.linalg.eigvalsh(H)[0] > 0


@settings(max_examples=40, deadline=None)
@given(cone=cone_strategy, seed=st.integers(0, 2**32 - 1), r=st.floats(0.01, 0.99))
def test_dikin_ellipsoid_is_interior(cone, seed, r):
    rng = np.random.default_rng(seed)
    x = cone.sample_interior(rng)
    v = rng.standard_normal(cone.dim)
    assert cone.contains_interior(x + r * v / cone.local_norm(x, v))


def test_batched_inverse_matches_rows():
    rng = np.random.default_rng(3)
    cone = Product([Free(2), PSD(3), SecondOrder(2)])
    x = cone.sample_interior(rng)
    V = rng.standard_normal((4, cone.dim))
    np.testing.assert_allclose(cone.inv_hess_apply_rows(x, V), [cone.inv_hess_apply(x, v) for v in V], rtol=1e-12)
    assert cone.inv_hess_apply_rows(x, np.zeros((0, cone.dim))).shape == (0, cone.dim)


def test_free_block_is_euclidean():
    c = Free(3)
    v = np.array([1.0, -2.0, 2.0])
    assert c.local_norm(np.zeros(3), v) == pytest.approx(3.0)
    assert c.barrier(np.zeros(3)) == 0.0
    assert not c.pointed

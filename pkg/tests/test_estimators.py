import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sipm.cones import Orthant
from sipm.errors import ConfigurationError, InvariantViolation
from sipm.estimators import (
    EstimatorState,
    Schedule,
    Variant,
    extrapolate,
    hypothesis_violations,
    schedule_at,
    shift_with_barrier,
    update_em,
    update_fg,
    update_me,
    update_pm,
    update_rm,
)


class TableOracle:
    """Component i returns a fixed row; batch mean over the drawn rows."""

    def __init__(self, rows, shift=None):
        self.rows = np.asarray(rows, dtype=float)
        self.n_components = len(self.rows)
        self.shift = shift

    def batch_gradient(self, x, idx):
        g = self.rows[np.asarray(idx)].mean(axis=0)
        return g + (self.shift(x) if self.shift else 0.0)

    def full_gradient(self, x):
        return self.rows.mean(axis=0) + (self.shift(x) if self.shift else 0.0)


class ScriptedOracle:
    """Returns scripted values per evaluation point, ignoring the indices."""

    n_components = 1

    def __init__(self, table):
        self.table = table

    def batch_gradient(self, x, idx):
        return np.asarray(self.table[tuple(np.round(x, 12))], dtype=float)

    def full_gradient(self, x):
        return self.batch_gradient(x, None)


# -- schedules -------------------------------------------------------------


def test_rm_schedule_at_zero():
    v = schedule_at(Schedule("rm", 0.5, 0.1, 2.0), 0)
    assert v.eta == pytest.approx(1 / 6)
    assert v.gamma == 1.0
    assert v.mu == 1.0


def test_me_schedule():
    s = Schedule("me", 0.9, 1e-3, 4.0)
    v = s.at(3)
    assert v.eta == pytest.approx(0.45)
    assert v.batch == 4
    assert v.mu == pytest.approx(max(0.5, 1e-3 / 3))


def test_em_schedule_ratio():
    v = Schedule("em", 0.7, 1e-3, 1.0).at(0)
    assert v.eta == pytest.approx(0.5)
    assert v.gamma == 1.0
    assert v.eta / v.gamma <= 0.7
    # ratio stays below s_eta even for s_eta close to 1
    arr = Schedule("em", 0.99, 1e-3, 1.0).arrays(10**5)
    assert np.all(arr["eta"] / arr["gamma"] <= 0.99)


def test_pm_schedule_and_floor():
    s = Schedule("pm", 0.5, 0.2, 9.0)
    v = s.at(15)
    assert v.eta == pytest.approx(0.5 / 16**0.75)
    assert v.gamma == pytest.approx(0.25)
    assert v.mu == pytest.approx(0.5)
    assert s.at(10**9).mu == pytest.approx(0.2 / 4)  # eps / (1 + sqrt(theta))


def test_fixed_and_full_batches():
    assert Schedule("me1", 0.5, 0.1, 1.0, batch_size=7).at(100).batch == 7
    assert Schedule("fg", 0.5, 0.1, 1.0).at(3).batch == -1
    me = Schedule("me", 0.5, 0.1, 1.0, batch_init=10, batch_increment=10)
    assert [me.at(k).batch for k in range(3)] == [10, 20, 30]
    assert Schedule("fg", 0.5, 0.1, 1.0).at(3).eta == pytest.approx(0.25)


def test_arrays_match_scalar_evaluation():
    for v in Variant:
        s = Schedule(v, 0.3, 1e-2, 5.0)
        arr = s.arrays(50)
        for k in (0, 7, 50):
            val = s.at(k)
            assert arr["eta"][k] == pytest.approx(val.eta)
            assert arr["gamma"][k] == pytest.approx(val.gamma)
            assert arr["mu"][k] == pytest.approx(val.mu)


@pytest.mark.parametrize("kw", [dict(s_eta=1.0), dict(s_eta=0.0), dict(epsilon=1.5), dict(batch_size=0), dict(eta_exponent=-1)])
def test_invalid_schedules(kw):
    base = dict(variant="pm", s_eta=0.5, epsilon=0.1, theta=1.0)
    base.update(kw)
    with pytest.raises(ConfigurationError):
        Schedule(**base)


def test_hypothesis_filter():
    assert hypothesis_violations(Schedule("em", 0.5, 1e-3, 1.0, eta_exponent=0.5), kmax=10**4)
    assert hypothesis_violations(Schedule("rm", 0.5, 1e-3, 1.0, eta_exponent=0.5), kmax=10**4)
    assert not hypothesis_violations(Schedule("rm", 0.5, 1e-3, 1.0, eta_exponent=0.5, gamma_exponent=0.5), kmax=10**4)


@settings(max_examples=30, deadline=None)
@given(s=st.floats(0.01, 0.99), v=st.sampled_from(list(Variant)))
def test_default_schedules_satisfy_hypotheses(s, v):
    assert hypothesis_violations(Schedule(v, s, 1e-3, 3.0), kmax=2000) == []


# -- estimator recursions ------------------------------------------------------


def test_me_full_batch_is_exact_for_a_deterministic_sum():
    rows = np.arange(12.0).reshape(4, 3)
    st_ = EstimatorState.create(0)
    o = TableOracle(rows)
    m = update_me(st_, o, np.zeros(3), 4)
    assert st_.samples == 4
    # with replacement the draw need not be a permutation; the full gradient is
    np.testing.assert_allclose(update_fg(EstimatorState.create(0), o, np.zeros(3)), rows.mean(axis=0))
    assert m.shape == (3,)


def test_me_single_draw_is_one_component():
    rows = np.eye(5)
    st_ = EstimatorState.create(3)
    m = update_me(st_, TableOracle(rows), np.zeros(5), 1)
    assert sorted(m) == [0, 0, 0, 0, 1]


def test_pm_initial_and_convex_combination():
    rows = np.array([[0.0, 2.0]])
    st_ = EstimatorState.create(0)
    m0 = update_pm(st_, TableOracle(rows), np.zeros(2), 1.0)
    np.testing.assert_allclose(m0, [0.0, 2.0])
    st_.m_bar = np.array([2.0, 0.0])
    np.testing.assert_allclose(update_pm(st_, TableOracle(rows), np.zeros(2), 0.5), [1.0, 1.0])
    st_.m_bar = np.array([5.0, 5.0])
    np.testing.assert_allclose(update_pm(st_, TableOracle(rows), np.zeros(2), 1.0), [0.0, 2.0])


def test_em_extrapolation():
    np.testing.assert_allclose(extrapolate(np.array([2.0, 2.0]), np.array([1.0, 1.0]), 0.5), [3.0, 3.0])
    x = np.array([2.0, 3.0])
    np.testing.assert_allclose(extrapolate(x, np.array([9.0, 9.0]), 1.0), x)


def test_em_first_step_samples_at_x0():
    o = TableOracle([[1.0, 1.0]], shift=lambda x: x)
    st_ = EstimatorState.create(0)
    x0 = np.array([1.0, 2.0])
    z, m = update_em(st_, o, x0, None, 1.0)
    np.testing.assert_allclose(z, x0)
    np.testing.assert_allclose(m, [2.0, 3.0])


def test_em_rejects_exterior_extrapolation():
    o = TableOracle([[1.0, 1.0]])
    st_ = EstimatorState.create(0)
    with pytest.raises(InvariantViolation):
        update_em(st_, o, np.array([0.5, 0.5]), np.array([2.0, 2.0]), 0.1, cone=Orthant(2))


def test_rm_arithmetic():
    x_prev, x = np.array([0.0]), np.array([1.0])
    o = ScriptedOracle({(1.0,): [3.0, 0.0], (0.0,): [2.0, 0.0]})
    st_ = EstimatorState.create(0)
    st_.m_bar = np.array([1.0, 0.0])
    np.testing.assert_allclose(update_rm(st_, o, x, x_prev, 0.0), [2.0, 0.0])
    assert st_.samples == 2


def test_rm_first_step_is_a_fresh_sample_and_counts_once():
    o = ScriptedOracle({(1.0,): [3.0]})
    st_ = EstimatorState.create(0)
    np.testing.assert_allclose(update_rm(st_, o, np.array([1.0]), None, 1.0), [3.0])
    assert st_.samples == 1


def test_rm_telescopes_with_exact_gradients():
    def grad(x):
        return np.array([x[0] ** 2, np.sin(x[1])])

    class Exact:
        n_components = 1

        def batch_gradient(self, x, idx):
            return grad(x)

        def full_gradient(self, x):
            return grad(x)

    st_ = EstimatorState.create(0)
    xs = [np.array([0.1 * k, 1.0 - 0.2 * k]) for k in range(5)]
    prev = None
    for k, x in enumerate(xs):
        gamma = 1.0 if k == 0 else 1.0 / (k + 1) ** (2 / 3)
        m = update_rm(st_, Exact(), x, prev, gamma)
        np.testing.assert_allclose(m, grad(x), rtol=1e-14, atol=1e-15)
        prev = x


def test_shift_with_barrier():
    np.testing.assert_allclose(shift_with_barrier(np.array([1.0, 0.0]), 1.0, np.array([-1.0, -1.0])), [1.0, -1.0])
    np.testing.assert_allclose(shift_with_barrier(np.zeros(2), 0.5, np.array([-2.0, 0.0])), [-1.0, 0.0])
    m = np.array([0.3, -0.7])
    np.testing.assert_allclose(shift_with_barrier(m, 1e-12, np.array([5.0, 5.0])), m, atol=1e-10)


def test_seeded_draws_are_reproducible():
    a = EstimatorState.create(42).draw(100, 10)
    b = EstimatorState.create(42).draw(100, 10)
    np.testing.assert_array_equal(a, b)
    assert a.min() >= 0 and a.max() < 100


def test_estimator_statistics_suite():
    from sipm.checks import estimator_statistics

    rep = estimator_statistics(n_batches=4000)
    assert rep.passed, rep.line()


def test_eta_scale_replaces_the_default_constant():
    assert Schedule("rm", 0.6, 1e-3, 1.0).at(0).eta == pytest.approx(0.2)
    assert Schedule("rm", 0.6, 1e-3, 1.0, eta_scale=1.0).at(0).eta == pytest.approx(0.6)
    assert Schedule("em", 0.6, 1e-3, 1.0, eta_scale=0.5).at(3).eta == pytest.approx(0.3 / 4 ** (5 / 7))
    with pytest.raises(ConfigurationError):
        Schedule("pm", 0.5, 1e-3, 1.0, eta_scale=1.5)
    # the plain power-law form keeps gamma > eta and eta / gamma <= s when eta decays no slower than gamma
    for v in ("pm", "rm", "em"):
        s = Schedule(v, 0.9, 1e-3, 1.0, eta_scale=1.0, eta_exponent=0.5, gamma_exponent=0.5)
        assert hypothesis_violations(s, kmax=10**4) == []

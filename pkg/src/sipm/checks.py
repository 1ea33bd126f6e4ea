"""Numerical audit suites for cones, the dual solve, schedules and problems.

Each suite returns a :class:`CheckReport`. ``first_failure`` records the
inputs of the first violating case so a failure can be reproduced.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cones import PSD, Cone, Free, Orthant, Product, SecondOrder
from .data import synth_cluster, synth_multitask, synth_regression
from .estimators import EstimatorState, Schedule, Variant, update_me, update_rm
from .kkt import AffineConstraints, solve_dual
from .problems import ConicProblem, multitask, robust_regression, stream_cluster


@dataclass
class CheckReport:
    suite: str
    checked: int = 0
    violations: int = 0
    worst: float = 0.0
    first_failure: str | None = None
    seconds: float = 0.0
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.checked > 0 and self.violations == 0

    def record(self, ok: bool, value: float, describe: Callable[[], str]) -> None:
        self.checked += 1
        if np.isfinite(value):
            self.worst = max(self.worst, float(value))
        else:
            self.worst = float("inf")
        if not ok:
            self.violations += 1
            if self.first_failure is None:
                self.first_failure = describe()

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        s = f"{status} {self.suite}: {self.checked} checks, {self.violations} violations, worst {self.worst:.3e}"
        if self.first_failure:
            s += f"; first failure: {self.first_failure}"
        return s


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        rep = fn(*args, **kwargs)
        rep.seconds = time.perf_counter() - t0
        return rep

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# -- test hook ---------------------------------------------------------------


class PerturbedHessian(Cone):
    """Wraps a cone and scales its Hessian by ``1 + delta`` (negative control)."""

    def __init__(self, base: Cone, delta: float = 1e-3):
        self.base = base
        self.delta = delta
        self.dim = base.dim
        self.theta = base.theta
        self.pointed = base.pointed

    def __repr__(self) -> str:
        return f"PerturbedHessian({self.base!r}, {self.delta:g})"

    def _violation(self, x):
        return self.base._violation(x)

    def barrier(self, x):
        return self.base.barrier(x)

    def gradient(self, x):
        return self.base.gradient(x)

    def hess_apply(self, x, v):
        return (1.0 + self.delta) * self.base.hess_apply(x, v)

    def inv_hess_apply(self, x, v):
        return self.base.inv_hess_apply(x, v) / (1.0 + self.delta)

    def sample_interior(self, rng, spread=1.0):
        return self.base.sample_interior(rng, spread)

    def identity(self):
        return self.base.identity()


def standard_cones() -> list[Cone]:
    """Cones audited by the barrier suites: each family at a few sizes plus a product."""
    return [
        Orthant(1), Orthant(7), Orthant(20),
        SecondOrder(1), SecondOrder(5), SecondOrder(20),
        PSD(1), PSD(4), PSD(10),
        Product([Orthant(3), SecondOrder(4), PSD(3)]),
    ]


def _cones(perturb: float | None) -> list[Cone]:
    cones = standard_cones()
    if perturb:
        cones = [PerturbedHessian(c, perturb) for c in cones]
    return cones


def in_dual_cone(cone: Cone, s: np.ndarray, tol: float = 1e-12) -> bool:
    """Membership in the (closed) dual cone, with a relative tolerance.

    The orthant, second-order and PSD cones are self-dual; the dual of the
    whole space is ``{0}``.
    """
    if isinstance(cone, PerturbedHessian):
        return in_dual_cone(cone.base, s, tol)
    scale = tol * max(1.0, float(np.linalg.norm(s)))
    if isinstance(cone, Product):
        return all(in_dual_cone(c, si, tol) for c, si in zip(cone.cones, cone.blocks(s)))
    if isinstance(cone, Orthant):
        return bool(np.min(s) >= -scale)
    if isinstance(cone, SecondOrder):
        return bool(s[-1] - np.linalg.norm(s[:-1]) >= -scale)
    if isinstance(cone, PSD):
        return bool(np.linalg.eigvalsh(cone.mat(s))[0] >= -scale)
    if isinstance(cone, Free):
        return bool(np.max(np.abs(s)) <= scale)
    raise TypeError(f"no dual-cone test for {cone!r}")


# -- barrier suites ----------------------------------------------------------


@_timed
def barrier_identities(n_points: int = 100, seed: int = 0, rtol: float = 1e-8, perturb: float | None = None) -> CheckReport:
    """``(|grad B|*)^2 = -x.grad B = |x|_x^2 = theta`` and log-homogeneity."""
    rep = CheckReport("barrier-identities")
    rng = np.random.default_rng(seed)
    for cone in _cones(perturb):
        th = cone.theta
        for i in range(n_points):
            x = cone.sample_interior(rng, spread=1.0)
            g = cone.gradient(x)
            vals = (cone.dual_local_norm(x, g) ** 2, -float(x @ g), cone.local_norm(x, x) ** 2)
            for name, val in zip(("dual-norm^2", "-x.g", "norm^2"), vals):
                err = abs(val - th)
                rep.record(err <= rtol * th, err / th, lambda: f"{cone!r} point {i}: {name} = {val!r}, theta = {th}")
            t = float(np.exp(rng.uniform(-1, 1)))
            err = abs(cone.barrier(t * x) - (cone.barrier(x) - th * np.log(t)))
            rep.record(err <= rtol * max(1.0, th), err, lambda: f"{cone!r} point {i}: B(tx) != B(x) - theta log t, t={t}")
    return rep


def _unit_direction(cone, x, rng):
    v = rng.standard_normal(cone.dim)
    return v / cone.local_norm(x, v)


@_timed
def dikin(n_pairs: int = 1000, radii=(0.1, 0.5, 0.9, 0.999), seed: int = 1, perturb: float | None = None) -> CheckReport:
    """Primal Dikin ellipsoid is interior; the dual ball around ``-grad B`` is in K*."""
    rep = CheckReport("dikin")
    rng = np.random.default_rng(seed)
    for cone in _cones(perturb):
        for i in range(n_pairs):
            x = cone.sample_interior(rng)
            r = radii[i % len(radii)]
            y = x + r * _unit_direction(cone, x, rng)
            rep.record(cone.contains_interior(y), 0.0, lambda: f"{cone!r} pair {i}: x + {r} u left the cone")
            u = rng.standard_normal(cone.dim)
            s = -cone.gradient(x) + r * u / cone.dual_local_norm(x, u)
            rep.record(in_dual_cone(cone, s), 0.0, lambda: f"{cone!r} pair {i}: dual ball point at r={r} not in K*")
    return rep


@_timed
def norm_sandwich(
    n_pairs: int = 1000, radii=(0.1, 0.5, 0.9, 0.999), seed: int = 2, slack: float = 1e-9, perturb: float | None = None
) -> CheckReport:
    """``(1-r)|v|*_x <= |v|*_y <= |v|*_x / (1-r)`` for ``|y-x|_x = r``."""
    rep = CheckReport("norm-sandwich")
    rng = np.random.default_rng(seed)
    for cone in _cones(perturb):
        for i in range(n_pairs):
            x = cone.sample_interior(rng)
            r = radii[i % len(radii)]
            y = x + r * _unit_direction(cone, x, rng)
            v = rng.standard_normal(cone.dim)
            nx, ny = cone.dual_local_norm(x, v), cone.dual_local_norm(y, v)
            lo, hi = (1 - r) * nx, nx / (1 - r)
            excess = max(lo - ny, ny - hi, 0.0) / nx
            rep.record(excess <= slack, excess, lambda: f"{cone!r} pair {i}: r={r}, |v|*_x={nx!r}, |v|*_y={ny!r}")
    return rep


@_timed
def gradient_lipschitz(
    n_pairs: int = 1000, s_values=(0.1, 0.5, 0.9), seed: int = 3, slack: float = 1e-9, perturb: float | None = None
) -> CheckReport:
    """``|grad B(y) - grad B(x)|*_x <= |y-x|_x / (1-s)`` whenever ``|y-x|_x <= s``."""
    rep = CheckReport("barrier-lipschitz")
    rng = np.random.default_rng(seed)
    for cone in _cones(perturb):
        for i in range(n_pairs):
            x = cone.sample_interior(rng)
            s = s_values[i % len(s_values)]
            r = s * rng.uniform(0.05, 1.0)
            y = x + r * _unit_direction(cone, x, rng)
            lhs = cone.dual_local_norm(x, cone.gradient(y) - cone.gradient(x))
            bound = r / (1 - s)
            excess = max(lhs - bound, 0.0) / bound
            rep.record(excess <= slack, excess, lambda: f"{cone!r} pair {i}: s={s}, r={r}, lhs={lhs!r}")
    return rep


@_timed
def hessian_inverse(n_points: int = 50, seed: int = 4, rtol: float = 1e-8, perturb: float | None = None) -> CheckReport:
    """``H (H^{-1} v) = v`` and the batched inverse matches the single-vector one."""
    rep = CheckReport("hessian-inverse")
    rng = np.random.default_rng(seed)
    for cone in _cones(perturb):
        for i in range(n_points):
            x = cone.sample_interior(rng, spread=0.5)
            V = rng.standard_normal((3, cone.dim))
            for v in V:
                back = cone.hess_apply(x, cone.inv_hess_apply(x, v))
                err = np.linalg.norm(back - v) / np.linalg.norm(v)
                rep.record(err <= rtol, err, lambda: f"{cone!r} point {i}: |H H^-1 v - v|/|v| = {err:.3e}")
            rows = cone.inv_hess_apply_rows(x, V)
            single = np.array([cone.inv_hess_apply(x, v) for v in V])
            err = np.linalg.norm(rows - single) / max(np.linalg.norm(single), 1e-300)
            rep.record(err <= rtol, err, lambda: f"{cone!r} point {i}: batched inverse Hessian mismatch {err:.3e}")
    return rep


# -- finite differences ------------------------------------------------------


def fd_gradient(f: Callable[[np.ndarray], float], x: np.ndarray, steps: np.ndarray) -> np.ndarray:
    """Central differences with a per-coordinate step."""
    g = np.empty(x.size)
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = steps[i]
        g[i] = (f(x + e) - f(x - e)) / (2 * steps[i])
    return g


def _local_steps(cone: Cone, x: np.ndarray, radius: float) -> np.ndarray:
    # coordinate steps of local length ``radius``, so x +- h e_i stays interior
    eye = np.eye(cone.dim)
    return np.array([radius / max(cone.local_norm(x, e), 1e-300) for e in eye])


def _rel(a, b) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12))


@_timed
def finite_difference_barrier(n_points: int = 20, seed: int = 5, rtol: float = 1e-5) -> CheckReport:
    rep = CheckReport("fd-barrier")
    rng = np.random.default_rng(seed)
    for cone in standard_cones():
        for i in range(n_points):
            x = cone.sample_interior(rng, spread=0.5)
            g = cone.gradient(x)
            fd = fd_gradient(cone.barrier, x, _local_steps(cone, x, 1e-4))
            err = _rel(fd, g)
            rep.record(err <= rtol, err, lambda: f"{cone!r} point {i}: gradient rel err {err:.3e}")
            v = rng.standard_normal(cone.dim)
            h = 1e-4 / cone.local_norm(x, v)
            fd_hv = (cone.gradient(x + h * v) - cone.gradient(x - h * v)) / (2 * h)
            err = _rel(fd_hv, cone.hess_apply(x, v))
            rep.record(err <= rtol, err, lambda: f"{cone!r} point {i}: Hessian-vector rel err {err:.3e}")
    return rep


def small_problems(seed: int = 0) -> list[ConicProblem]:
    """One small instance of each benchmark problem."""
    return [
        robust_regression(synth_regression(6, 80, seed=seed)),
        multitask(synth_multitask(3, 30, 4, seed=seed)),
        stream_cluster(synth_cluster(8, 2, 20, seed=seed)),
    ]


@_timed
def finite_difference_problems(n_points: int = 20, seed: int = 6, rtol: float = 1e-5) -> CheckReport:
    """Full gradients of the benchmark objectives against central differences."""
    rep = CheckReport("fd-problems")
    rng = np.random.default_rng(seed)
    for pb in small_problems(seed):
        for i in range(n_points):
            x = pb.cone.sample_interior(rng, spread=0.5)
            g = pb.full_gradient(x)
            fd = fd_gradient(pb.objective, x, _local_steps(pb.cone, x, 1e-5))
            err = _rel(fd, g)
            rep.record(err <= rtol, err, lambda: f"{pb.name} point {i}: gradient rel err {err:.3e}")
    return rep


@_timed
def finite_sum_consistency(n_points: int = 5, seed: int = 7, rtol: float = 1e-10) -> CheckReport:
    """Mean of all component gradients equals the full gradient."""
    rep = CheckReport("finite-sum")
    rng = np.random.default_rng(seed)
    for pb in small_problems(seed):
        for i in range(n_points):
            x = pb.cone.sample_interior(rng, spread=0.5)
            g = pb.full_gradient(x)
            comp = np.mean([pb.component_gradient(j, x) for j in range(pb.n_components)], axis=0)
            err = _rel(comp, g)
            rep.record(err <= rtol, err, lambda: f"{pb.name} point {i}: component mean rel err {err:.3e}")
            err = _rel(pb.batch_gradient(x, np.arange(pb.n_components)), g)
            rep.record(err <= rtol, err, lambda: f"{pb.name} point {i}: full-batch rel err {err:.3e}")
    return rep


# -- dual solve --------------------------------------------------------------


def random_small_cone(rng: np.random.Generator, max_dim: int = 12) -> Cone:
    blocks: list[Cone] = []
    dim = 0
    while True:
        kind = rng.integers(3)
        c = (Orthant(int(rng.integers(1, 4))), SecondOrder(int(rng.integers(1, 4))), PSD(int(rng.integers(1, 4))))[kind]
        if dim + c.dim > max_dim:
            break
        blocks.append(c)
        dim += c.dim
        if rng.random() < 0.3:
            break
    if not blocks:
        blocks.append(Orthant(int(rng.integers(1, max_dim + 1))))
    return blocks[0] if len(blocks) == 1 else Product(blocks)


def weighted_lsq_multiplier(A: np.ndarray, H_dense: np.ndarray, m: np.ndarray) -> np.ndarray:
    """``argmin_lam |m + A^T lam|^2`` in the metric ``H_dense^{-1}``, by dense least squares."""
    Hinv = np.linalg.inv(H_dense)
    L = np.linalg.cholesky(0.5 * (Hinv + Hinv.T))
    lam, *_ = np.linalg.lstsq(L.T @ A.T, -(L.T @ m), rcond=None)
    return lam


@_timed
def kkt(n_instances: int = 200, seed: int = 8, rtol: float = 1e-8) -> CheckReport:
    """Null-space property of the dual residual and agreement with a dense oracle."""
    rep = CheckReport("kkt")
    rng = np.random.default_rng(seed)
    done = 0
    while done < n_instances:
        cone = random_small_cone(rng)
        n = cone.dim
        m_rows = int(rng.integers(0, min(5, n - 1) + 1)) if n > 1 else 0
        A = rng.standard_normal((m_rows, n))
        if m_rows and np.linalg.matrix_rank(A) < m_rows:
            continue
        cons = AffineConstraints(A, A @ cone.identity())
        x = cone.sample_interior(rng, spread=0.5)
        g = rng.standard_normal(n)
        res = solve_dual(cons, cone, x, g)
        Hr = res.h_residual
        if m_rows:
            HAt = cone.inv_hess_apply_rows(x, A).T
            scale = np.linalg.norm(A, 2) * (np.linalg.norm(cone.inv_hess_apply(x, g)) + np.linalg.norm(HAt @ res.lam))
            null = float(np.linalg.norm(A @ Hr)) / max(scale, 1e-300)
            rep.record(null <= rtol, null, lambda: f"{cone!r} m={m_rows}: |A H r| / scale = {null:.3e}")
            oracle = weighted_lsq_multiplier(A, cone.hessian_matrix(x), g)
            err = float(np.linalg.norm(res.lam - oracle) / max(1.0, np.linalg.norm(oracle)))
            rep.record(err <= rtol, err, lambda: f"{cone!r} m={m_rows}: lambda differs from oracle by {err:.3e}")
        else:
            err = float(np.linalg.norm(res.residual - g))
            rep.record(err == 0.0, err, lambda: f"{cone!r}: residual must equal the estimate without constraints")
        done += 1
    return rep


# -- schedules ---------------------------------------------------------------


def _nonincreasing(a: np.ndarray) -> tuple[bool, float]:
    d = np.diff(a)
    worst = float(np.max(d)) if d.size else 0.0
    return worst <= 0.0, max(worst, 0.0)


@_timed
def schedules(kmax: int = 10**6, s_values=(0.3, 0.5, 0.9), epsilon: float = 1e-3, theta: float = 10.0) -> CheckReport:
    """Hypotheses of the convergence theorems, swept numerically over ``k = 0..kmax``."""
    rep = CheckReport("schedules")
    for s in s_values:
        for v in Variant:
            sc = Schedule(v, s, epsilon, theta)
            arr = sc.arrays(kmax)
            k1 = arr["k"] + 1.0
            eta, gam, mu = arr["eta"], arr["gamma"], arr["mu"]
            tag = f"{v.value} s={s}"
            for name, seq in (("eta", eta), ("gamma", gam), ("mu", mu)):
                ok, worst = _nonincreasing(seq)
                rep.record(ok, worst, lambda: f"{tag}: {name} increases somewhere")
            ok = bool(np.all((eta > 0) & (eta <= s)) and np.all((mu > 0) & (mu <= 1)))
            rep.record(ok, 0.0, lambda: f"{tag}: eta or mu out of range")
            if v in (Variant.ME, Variant.ME1, Variant.FG):
                if v is Variant.ME:
                    batches = np.array([sc.at(k).batch for k in (0, 1, 10, kmax)])
                    rep.record(bool(np.all(np.diff(batches) >= 0)), 0.0, lambda: f"{tag}: batch size decreases")
                continue
            if v in (Variant.PM, Variant.RM):
                bad = np.flatnonzero(gam <= eta)
                rep.record(bad.size == 0, 0.0, lambda: f"{tag}: gamma_k <= eta_k at k={bad[0]}")
            if v is Variant.EM:
                ratio = eta / gam
                bad = np.flatnonzero(ratio > s)
                rep.record(bad.size == 0, max(float(ratio.max()) - s, 0.0), lambda: f"{tag}: eta/gamma > s at k={bad[0]}")
            alpha = (gam - eta) / (1.0 - eta)  # = 1 - (1 - gamma)/(1 - eta)
            lower = {
                Variant.PM: (1 - s) / k1**0.5,
                Variant.EM: (1 - 5 * s / 7) / k1 ** (4 / 7),
                Variant.RM: (1 - s / 3) / k1 ** (2 / 3),
            }[v]
            gap = lower - alpha
            bad = np.flatnonzero(gap > 1e-15 * lower)
            rep.record(bad.size == 0, float(np.max(gap / lower)), lambda: f"{tag}: alpha_k below bound at k={bad[0]}")
            if v in (Variant.EM, Variant.RM):
                r = 1 / 7 if v is Variant.EM else 1 / 3
                # (1-a) p_{k+1} <= (1-a/2) p_k with p_k = (k+1)^r, as a margin to avoid cancellation
                growth = np.expm1(r * np.log1p(1.0 / k1))
                margin = alpha / 2 - (1 - alpha) * growth
                bad = np.flatnonzero(margin < -1e-15)
                rep.record(bad.size == 0, float(max(-margin.min(), 0.0)), lambda: f"{tag}: potential inequality fails at k={bad[0]}")
    return rep


# -- estimator statistics ----------------------------------------------------


class DeterministicOracle:
    """Every batch returns the exact full gradient."""

    def __init__(self, problem: ConicProblem):
        self.problem = problem
        self.n_components = problem.n_components

    def batch_gradient(self, x, idx):
        return self.problem.full_gradient(x)

    def full_gradient(self, x):
        return self.problem.full_gradient(x)


@_timed
def estimator_statistics(n_batches: int = 10_000, batch_sizes=(1, 4, 16), seed: int = 9) -> CheckReport:
    """Mini-batch unbiasedness and 1/B variance; recursive momentum telescoping."""
    rep = CheckReport("estimators")
    pb = robust_regression(synth_regression(5, 200, seed=seed))
    rng = np.random.default_rng(seed)
    x = pb.x0.x.copy()
    x[: pb.d] = 0.3 * rng.standard_normal(pb.d)
    g = pb.full_gradient(x)
    comps = np.array([pb.component_gradient(j, x) for j in range(pb.n_components)])
    sigma2 = float(np.mean(np.sum((comps - g) ** 2, axis=1)))
    for B in batch_sizes:
        st = EstimatorState.create([seed, B])
        draws = np.array([update_me(st, pb, x, B) for _ in range(n_batches)])
        se = draws.std(axis=0, ddof=1) / np.sqrt(n_batches)
        z = np.abs(draws.mean(axis=0) - g)
        # coordinates fed only by deterministic terms have rounding-level spread
        live = se > 1e-12 * (1.0 + np.abs(g))
        worst = float(np.max(z[live] / se[live])) if live.any() else 0.0
        ok = worst <= 4.0 and np.allclose(z[~live], 0.0, atol=1e-10)
        rep.record(ok, worst, lambda: f"batch {B}: mean deviates by {worst:.2f} standard errors")
        ratio = float(np.mean(np.sum((draws - g) ** 2, axis=1)) / (sigma2 / B))
        rep.record(0.5 <= ratio <= 2.0, ratio, lambda: f"batch {B}: variance ratio {ratio:.3f} outside [0.5, 2]")
    det = DeterministicOracle(pb)
    st = EstimatorState.create(seed)
    x1 = x.copy()
    x1[: pb.d] += 0.1
    update_rm(st, det, x, None, 1.0)
    m1 = update_rm(st, det, x1, x, 0.4)
    err = _rel(m1, pb.full_gradient(x1))
    rep.record(err <= 1e-12, err, lambda: f"recursive momentum with exact oracle: rel err {err:.3e}")
    return rep


SUITES: dict[str, Callable[..., CheckReport]] = {
    "barrier": barrier_identities,
    "dikin": dikin,
    "sandwich": norm_sandwich,
    "lipschitz": gradient_lipschitz,
    "inverse": hessian_inverse,
    "fd-barrier": finite_difference_barrier,
    "fd-problems": finite_difference_problems,
    "finite-sum": finite_sum_consistency,
    "kkt": kkt,
    "schedules": schedules,
    "estimators": estimator_statistics,
}

# suites that accept the perturbed-Hessian hook
PERTURBABLE = {"barrier", "dikin", "sandwich", "lipschitz", "inverse"}


def run_suites(names=None, kmax: int = 10**6, perturb: float | None = None) -> list[CheckReport]:
    names = list(SUITES) if not names else list(names)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(f"unknown suite(s): {', '.join(unknown)}")
    out = []
    for n in names:
        kwargs = {}
        if n == "schedules":
            kwargs["kmax"] = kmax
        if perturb and n in PERTURBABLE:
            kwargs["perturb"] = perturb
        out.append(SUITES[n](**kwargs))
    return out

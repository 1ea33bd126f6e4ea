"""Cones with logarithmically homogeneous self-concordant barriers.

Every cone point is a flat real vector. PSD blocks use the symmetric
vectorization ``svec`` (upper triangle, row-major, off-diagonals scaled by
sqrt(2)) so that the Euclidean inner product of two vectors equals the
trace inner product of the matrices.

Supported barriers::

    Orthant(n)     B(x)   = -sum log x_i                 theta = n
    SecondOrder(d) B(u,t) = -log(t^2 - |u|^2)            theta = 2
    PSD(d)         B(X)   = -log det X                   theta = d
    Free(n)        B      = 0, Hessian taken as identity theta = 0
    Product(...)   block sums                            theta = sum
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .errors import DomainError, InternalConsistencyError

_SQRT2 = np.sqrt(2.0)
_NEG_QUAD_TOL = 1e-12


class Cone:
    """Abstract cone. Subclasses set ``dim`` and ``theta``."""

    dim: int
    theta: float
    #: False only for the whole-space block, which is not a pointed cone.
    pointed: bool = True

    def contains_interior(self, x: np.ndarray) -> bool:
        return self._violation(np.asarray(x, dtype=float)) is None

    def check_interior(self, x: np.ndarray) -> np.ndarray:
        """Return ``x`` as a float array or raise :class:`DomainError`."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"{self!r}: expected shape ({self.dim},), got {x.shape}")
        msg = self._violation(x)
        if msg is not None:
            raise DomainError(msg)
        return x

    def _violation(self, x: np.ndarray) -> str | None:
        raise NotImplementedError

    def barrier(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def gradient(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hess_apply(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def inv_hess_apply(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sample_interior(self, rng: np.random.Generator, spread: float = 1.0) -> np.ndarray:
        """Random strictly interior point; ``spread`` controls conditioning."""
        raise NotImplementedError

    def identity(self) -> np.ndarray:
        """A canonical interior point (ones, (0, 1), identity matrix)."""
        raise NotImplementedError

    def _check_v(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.dim,):
            raise ValueError(f"{self!r}: vector has shape {v.shape}, expected ({self.dim},)")
        return v

    def inv_hess_apply_rows(self, x: np.ndarray, V: np.ndarray) -> np.ndarray:
        """Apply the inverse Hessian to every row of ``V``."""
        V = np.atleast_2d(np.asarray(V, dtype=float))
        if V.shape[0] == 0:
            return V.copy()
        return np.array([self.inv_hess_apply(x, v) for v in V])

    def hessian_matrix(self, x: np.ndarray) -> np.ndarray:
        """Dense Hessian, assembled column by column (for small checks only)."""
        eye = np.eye(self.dim)
        H = np.column_stack([self.hess_apply(x, e) for e in eye])
        return 0.5 * (H + H.T)

    def local_norm(self, x: np.ndarray, v: np.ndarray) -> float:
        v = self._check_v(v)
        return _sqrt_quad(v, self.hess_apply(x, v))

    def dual_local_norm(self, x: np.ndarray, v: np.ndarray) -> float:
        v = self._check_v(v)
        return _sqrt_quad(v, self.inv_hess_apply(x, v))


def _sqrt_quad(v: np.ndarray, Hv: np.ndarray) -> float:
    q = float(v @ Hv)
    if q < 0.0:
        if q < -_NEG_QUAD_TOL * max(1.0, float(np.linalg.norm(v) * np.linalg.norm(Hv))):
            raise InternalConsistencyError(f"negative quadratic form {q:.3e}")
        return 0.0
    return float(np.sqrt(q))


class Orthant(Cone):
    def __init__(self, n: int):
        if n < 1:
            raise ValueError("Orthant dimension must be positive")
        self.n = n
        self.dim = n
        self.theta = float(n)

    def __repr__(self) -> str:
        return f"Orthant({self.n})"

    def _violation(self, x):
        if not np.all(np.isfinite(x)):
            return f"{self!r}: non-finite entry"
        bad = np.flatnonzero(x <= 0.0)
        if bad.size:
            return f"{self!r}: coordinate {bad[0]} = {x[bad[0]]:.3e} is not > 0"
        return None

    def barrier(self, x):
        x = self.check_interior(x)
        return float(-np.sum(np.log(x)))

    def gradient(self, x):
        x = self.check_interior(x)
        return -1.0 / x

    def hess_apply(self, x, v):
        x = self.check_interior(x)
        return self._check_v(v) / x**2

    def inv_hess_apply(self, x, v):
        x = self.check_interior(x)
        return self._check_v(v) * x**2

    def sample_interior(self, rng, spread=1.0):
        return np.exp(spread * rng.standard_normal(self.n))

    def identity(self):
        return np.ones(self.n)


class SecondOrder(Cone):
    """Lorentz cone {(u, t) in R^d x R : |u| <= t}; ``t`` is the last entry."""

    def __init__(self, d: int):
        if d < 1:
            raise ValueError("SecondOrder dimension must be positive")
        self.d = d
        self.dim = d + 1
        self.theta = 2.0

    def __repr__(self) -> str:
        return f"SecondOrder({self.d})"

    @staticmethod
    def _gap(x):
        # t^2 - |u|^2 as a product to limit cancellation near the boundary
        nu = np.linalg.norm(x[:-1])
        return (x[-1] - nu) * (x[-1] + nu)

    def _violation(self, x):
        if not np.all(np.isfinite(x)):
            return f"{self!r}: non-finite entry"
        t = x[-1]
        if t <= 0.0:
            return f"{self!r}: t = {t:.3e} is not > 0"
        gap = self._gap(x)
        if gap <= 0.0:
            return f"{self!r}: t^2 - |u|^2 = {gap:.3e} is not > 0"
        return None

    def barrier(self, x):
        x = self.check_interior(x)
        return float(-np.log(self._gap(x)))

    def gradient(self, x):
        x = self.check_interior(x)
        s = self._gap(x)
        g = 2.0 * x / s
        g[-1] = -g[-1]
        return g

    def hess_apply(self, x, v):
        # H = (2/s^2) (2 Jx (Jx)^T - s J),  J = diag(-I, 1)
        x = self.check_interior(x)
        v = self._check_v(v)
        s = self._gap(x)
        Jx = x.copy()
        Jx[:-1] = -Jx[:-1]
        Jv = v.copy()
        Jv[:-1] = -Jv[:-1]
        return (2.0 / s**2) * (2.0 * (Jx @ v) * Jx - s * Jv)

    def inv_hess_apply(self, x, v):
        # H^{-1} = x x^T - (s/2) J
        x = self.check_interior(x)
        v = self._check_v(v)
        s = self._gap(x)
        Jv = v.copy()
        Jv[:-1] = -Jv[:-1]
        return (x @ v) * x - 0.5 * s * Jv

    def sample_interior(self, rng, spread=1.0):
        u = rng.standard_normal(self.d)
        t = np.linalg.norm(u) + np.exp(spread * rng.standard_normal())
        return np.append(u, t)

    def identity(self):
        e = np.zeros(self.dim)
        e[-1] = 1.0
        return e


class PSD(Cone):
    """Positive semidefinite cone of d x d symmetric matrices, svec-coordinates."""

    def __init__(self, d: int):
        if d < 1:
            raise ValueError("PSD dimension must be positive")
        self.d = d
        self.dim = d * (d + 1) // 2
        self.theta = float(d)
        self._iu = np.triu_indices(d)
        self._scale = np.where(self._iu[0] == self._iu[1], 1.0, _SQRT2)

    def __repr__(self) -> str:
        return f"PSD({self.d})"

    def mat(self, v: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`vec`; a 2-D input is treated as a stack of rows."""
        v = np.asarray(v, dtype=float) / self._scale
        M = np.zeros(v.shape[:-1] + (self.d, self.d))
        i, j = self._iu
        M[..., i, j] = v
        M[..., j, i] = v
        return M

    def vec(self, M: np.ndarray) -> np.ndarray:
        M = np.asarray(M, dtype=float)
        i, j = self._iu
        return 0.5 * (M[..., i, j] + M[..., j, i]) * self._scale

    def _violation(self, x):
        if not np.all(np.isfinite(x)):
            return f"{self!r}: non-finite entry"
        lam_min = np.linalg.eigvalsh(self.mat(x))[0]
        if lam_min <= 0.0:
            return f"{self!r}: smallest eigenvalue {lam_min:.3e} is not > 0"
        return None

    def _chol(self, x):
        x = self._check_v(x)
        try:
            return sla.cho_factor(self.mat(x), lower=True, check_finite=True)
        except (np.linalg.LinAlgError, ValueError):
            raise DomainError(self._violation(x) or f"{self!r}: Cholesky factorization failed") from None

    def barrier(self, x):
        c, _ = self._chol(x)
        return float(-2.0 * np.sum(np.log(np.diag(c))))

    def _inverse(self, x):
        cf = self._chol(x)
        Xi = sla.cho_solve(cf, np.eye(self.d))
        return 0.5 * (Xi + Xi.T)

    def gradient(self, x):
        return -self.vec(self._inverse(x))

    def hess_apply(self, x, v):
        Xi = self._inverse(x)
        V = self.mat(self._check_v(v))
        return self.vec(Xi @ V @ Xi)

    def inv_hess_apply(self, x, v):
        self._chol(x)
        X = self.mat(x)
        V = self.mat(self._check_v(v))
        return self.vec(X @ V @ X)

    def inv_hess_apply_rows(self, x, V):
        self._chol(x)
        X = self.mat(x)
        return self.vec(X @ self.mat(np.atleast_2d(V)) @ X)

    def sample_interior(self, rng, spread=1.0):
        Q, _ = np.linalg.qr(rng.standard_normal((self.d, self.d)))
        lam = np.exp(spread * rng.standard_normal(self.d))
        return self.vec((Q * lam) @ Q.T)

    def identity(self):
        return self.vec(np.eye(self.d))


class Free(Cone):
    """The whole space R^n: B = 0, theta = 0, local norms are Euclidean.

    Not a pointed cone, so the barrier identities relating ``x`` and
    ``grad B(x)`` to theta do not hold on this block.
    """

    pointed = False

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("Free dimension must be positive")
        self.n = n
        self.dim = n
        self.theta = 0.0

    def __repr__(self) -> str:
        return f"Free({self.n})"

    def _violation(self, x):
        if not np.all(np.isfinite(x)):
            return f"{self!r}: non-finite entry"
        return None

    def barrier(self, x):
        self.check_interior(x)
        return 0.0

    def gradient(self, x):
        self.check_interior(x)
        return np.zeros(self.n)

    def hess_apply(self, x, v):
        return self._check_v(v).copy()

    def inv_hess_apply(self, x, v):
        return self._check_v(v).copy()

    def sample_interior(self, rng, spread=1.0):
        return rng.standard_normal(self.n)

    def identity(self):
        return np.zeros(self.n)


class Product(Cone):
    """Cartesian product; vectors are concatenations of the block vectors."""

    def __init__(self, cones: Sequence[Cone]):
        self.cones = list(cones)
        if not self.cones:
            raise ValueError("Product of zero cones")
        self.offsets = np.cumsum([0] + [c.dim for c in self.cones])
        self.dim = int(self.offsets[-1])
        self.theta = float(sum(c.theta for c in self.cones))
        self.pointed = all(c.pointed for c in self.cones)

    def __repr__(self) -> str:
        return "Product(" + ", ".join(map(repr, self.cones)) + ")"

    def blocks(self, x: np.ndarray) -> list[np.ndarray]:
        return [x[a:b] for a, b in zip(self.offsets[:-1], self.offsets[1:])]

    def _violation(self, x):
        for i, (c, xi) in enumerate(zip(self.cones, self.blocks(x))):
            msg = c._violation(xi)
            if msg is not None:
                return f"block {i}: {msg}"
        return None

    def barrier(self, x):
        x = self.check_interior(x)
        return float(sum(c.barrier(xi) for c, xi in zip(self.cones, self.blocks(x))))

    def gradient(self, x):
        x = self.check_interior(x)
        return np.concatenate([c.gradient(xi) for c, xi in zip(self.cones, self.blocks(x))])

    def hess_apply(self, x, v):
        x = self.check_interior(x)
        v = self._check_v(v)
        return np.concatenate(
            [c.hess_apply(xi, vi) for c, xi, vi in zip(self.cones, self.blocks(x), self.blocks(v))]
        )

    def inv_hess_apply(self, x, v):
        x = self.check_interior(x)
        v = self._check_v(v)
        return np.concatenate(
            [c.inv_hess_apply(xi, vi) for c, xi, vi in zip(self.cones, self.blocks(x), self.blocks(v))]
        )

    def inv_hess_apply_rows(self, x, V):
        x = self.check_interior(x)
        V = np.atleast_2d(np.asarray(V, dtype=float))
        return np.concatenate(
            [c.inv_hess_apply_rows(xi, V[:, a:b]) for c, xi, a, b in
             zip(self.cones, self.blocks(x), self.offsets[:-1], self.offsets[1:])],
            axis=1,
        )

    def sample_interior(self, rng, spread=1.0):
        return np.concatenate([c.sample_interior(rng, spread) for c in self.cones])

    def identity(self):
        return np.concatenate([c.identity() for c in self.cones])


@dataclass(frozen=True)
class InteriorPoint:
    """A vector certified to lie in the interior of ``cone`` at construction."""

    cone: Cone
    x: np.ndarray

    def __post_init__(self):
        x = self.cone.check_interior(self.x).copy()
        x.setflags(write=False)
        object.__setattr__(self, "x", x)


def _raw(x) -> np.ndarray:
    return x.x if isinstance(x, InteriorPoint) else np.asarray(x, dtype=float)


# Functional aliases; each accepts a plain array or an InteriorPoint.

def barrier_value(cone: Cone, x) -> float:
    return cone.barrier(_raw(x))


def barrier_gradient(cone: Cone, x) -> np.ndarray:
    return cone.gradient(_raw(x))


def hessian_apply(cone: Cone, x, v) -> np.ndarray:
    return cone.hess_apply(_raw(x), v)


def inverse_hessian_apply(cone: Cone, x, v) -> np.ndarray:
    return cone.inv_hess_apply(_raw(x), v)


def local_norm(cone: Cone, x, v) -> float:
    return cone.local_norm(_raw(x), v)


def dual_local_norm(cone: Cone, x, v) -> float:
    return cone.dual_local_norm(_raw(x), v)


def complexity_parameter(cone: Cone) -> float:
    return cone.theta


def contains_interior(cone: Cone, x) -> bool:
    return cone.contains_interior(_raw(x))

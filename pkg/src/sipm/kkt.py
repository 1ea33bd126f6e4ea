"""Dual multiplier solve and feasible search direction.

With ``H = hess B(x)^{-1}`` the multiplier is

    lambda = -(A H A^T)^{-1} A H m

which makes ``r = m + A^T lambda`` satisfy ``A H r = 0``; the primal
direction ``-H r / |r|*_x`` then has unit local norm and stays in null(A).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .cones import Cone
from .errors import DataError, EstimatedStationary, IllPosedConstraintsError

RANK_TOL = 1e-10
COND_LIMIT = 1e14
STATIONARITY_FLOOR = 1e-14


def _rank_pivots(A: np.ndarray) -> tuple[int, np.ndarray]:
    """Numerical rank of ``A`` and its row pivot order (pivoted QR of A^T)."""
    if A.shape[0] == 0:
        return 0, np.arange(0)
    _, R, piv = sla.qr(A.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    scale = np.linalg.norm(A, 2)
    rank = int(np.sum(diag > RANK_TOL * max(scale, np.finfo(float).tiny)))
    return rank, piv


@dataclass(frozen=True)
class AffineConstraints:
    """Equality constraints ``A x = b`` with ``A`` of full row rank (m may be 0)."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if A.shape[0] != b.shape[0]:
            raise DataError(f"A has {A.shape[0]} rows but b has length {b.shape[0]}")
        rank, _ = _rank_pivots(A)
        if rank < A.shape[0]:
            raise IllPosedConstraintsError(f"A has rank {rank} < {A.shape[0]} rows")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @classmethod
    def empty(cls, n: int) -> "AffineConstraints":
        return cls(np.zeros((0, n)), np.zeros(0))

    @classmethod
    def deflated(cls, A, b, tol: float = 1e-9) -> "AffineConstraints":
        """Drop linearly dependent rows, after checking they are consistent."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float).reshape(-1)
        rank, piv = _rank_pivots(A)
        keep = np.sort(piv[:rank])
        if rank < A.shape[0]:
            # dropped rows must be implied by the kept ones
            coef, *_ = np.linalg.lstsq(A[keep].T, A.T, rcond=None)
            gap = np.abs(coef.T @ b[keep] - b)
            if np.max(gap) > tol * (1.0 + np.max(np.abs(b))):
                raise DataError("dependent constraint rows have inconsistent right-hand sides")
        return cls(A[keep], b[keep])

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def drift(self, x: np.ndarray) -> float:
        """Infinity norm of ``A x - b`` (0 when there are no rows)."""
        if self.m == 0:
            return 0.0
        return float(np.max(np.abs(self.A @ x - self.b)))

    def drift_tolerance(self, rel: float = 1e-8) -> float:
        bmax = float(np.max(np.abs(self.b))) if self.m else 0.0
        return rel * (1.0 + bmax)


@dataclass(frozen=True)
class DualSolveResult:
    lam: np.ndarray
    residual: np.ndarray
    residual_dual_norm: float
    # H @ residual, kept so the direction needs no further Hessian solve
    h_residual: np.ndarray = field(repr=False)


def solve_dual(constraints: AffineConstraints, cone: Cone, x: np.ndarray, m: np.ndarray) -> DualSolveResult:
    x = np.asarray(x, dtype=float)
    m = np.asarray(m, dtype=float)
    if m.shape != (cone.dim,):
        raise ValueError(f"gradient estimate has shape {m.shape}, expected ({cone.dim},)")
    A = constraints.A
    if constraints.m == 0:
        lam = np.zeros(0)
        r = m.copy()
    else:
        HAt = cone.inv_hess_apply_rows(x, A).T
        M = A @ HAt
        M = 0.5 * (M + M.T)
        rhs = -(HAt.T @ m)
        cond = np.linalg.cond(M)
        if not np.isfinite(cond) or cond > COND_LIMIT:
            raise IllPosedConstraintsError(f"A H A^T condition estimate {cond:.3e} exceeds {COND_LIMIT:.0e}")
        try:
            cf = sla.cho_factor(M, lower=True)
        except np.linalg.LinAlgError:
            jitter = 1e-12 * np.trace(M) / M.shape[0]
            try:
                cf = sla.cho_factor(M + jitter * np.eye(M.shape[0]), lower=True)
            except np.linalg.LinAlgError:
                raise IllPosedConstraintsError("A H A^T is not positive definite") from None
        lam = sla.cho_solve(cf, rhs)
        r = m + A.T @ lam
    Hr = cone.inv_hess_apply(x, r)
    q = float(r @ Hr)
    return DualSolveResult(lam=lam, residual=r, residual_dual_norm=float(np.sqrt(max(q, 0.0))), h_residual=Hr)


def search_direction(cone: Cone, x: np.ndarray, dual: DualSolveResult) -> np.ndarray:
    """Unit-local-norm direction ``-H r / |r|*_x``."""
    nrm = dual.residual_dual_norm
    if not nrm > STATIONARITY_FLOOR:
        raise EstimatedStationary(f"residual dual norm {nrm:.3e} at or below {STATIONARITY_FLOOR:.0e}")
    return -dual.h_residual / nrm

"""Benchmark problems in the form ``min f(x) s.t. A x = b, x in K``.

Each problem is a finite sum over ``n_components`` data components. The
component gradient includes the deterministic terms of ``f`` (linear
penalties, regularizers), so averaging it over a uniformly drawn component
is an unbiased estimate of the full gradient.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
from scipy.cluster.vq import kmeans2

from .cones import PSD, Cone, Free, InteriorPoint, Product, SecondOrder
from .data import MultiTaskData, RobustRegressionData, StreamClusterData
from .errors import ConfigurationError, DomainError
from .kkt import AffineConstraints


def robust_loss(t):
    """phi(t) = t^2 / (1 + t^2)."""
    t2 = np.square(t)
    return t2 / (1.0 + t2)


def robust_loss_derivative(t):
    return 2.0 * t / np.square(1.0 + np.square(t))


class ConicProblem:
    """Objective oracles plus cone, equality constraints and a strictly feasible start."""

    name = "problem"
    cone: Cone
    constraints: AffineConstraints
    x0: InteriorPoint
    n_components: int

    def objective(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def full_gradient(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def batch_gradient(self, x: np.ndarray, idx: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def component_gradient(self, i: int, x: np.ndarray) -> np.ndarray:
        return self.batch_gradient(x, np.array([i]))

    def is_feasible(self, x: np.ndarray, rel: float = 1e-8) -> bool:
        return self.cone.contains_interior(x) and self.constraints.drift(x) <= self.constraints.drift_tolerance(rel)

    def check_start(self) -> None:
        if not self.is_feasible(self.x0.x):
            raise ConfigurationError(
                f"{self.name}: starting point is not strictly feasible "
                f"(equality drift {self.constraints.drift(self.x0.x):.3e})"
            )


class QuadraticProblem(ConicProblem):
    """f(x) = mean_i |x - c_i|^2 / 2 over rows of ``centers``; used for sanity runs."""

    name = "quadratic"

    def __init__(self, cone: Cone, centers, x0, constraints: AffineConstraints | None = None):
        self.cone = cone
        self.centers = np.atleast_2d(np.asarray(centers, dtype=float))
        self.center = self.centers.mean(axis=0)
        self.n_components = self.centers.shape[0]
        self.constraints = constraints or AffineConstraints.empty(cone.dim)
        self.x0 = InteriorPoint(cone, np.asarray(x0, dtype=float))

    def objective(self, x):
        return float(0.5 * np.mean(np.sum((x - self.centers) ** 2, axis=1)))

    def full_gradient(self, x):
        return x - self.center

    def batch_gradient(self, x, idx):
        return x - self.centers[idx].mean(axis=0)


class RobustRegressionProblem(ConicProblem):
    """Chance-constrained robust regression with two second-order cone blocks.

    Variable layout ``x = (w, v, s, t)``: ``(w, v)`` and ``(s, t)`` each lie in
    a second-order cone, ``s = Sigma^{1/2} w`` is imposed through ``A`` and
    ``t = sqrt(eta) * theta``. The objective is
    ``mean_i phi(a_i.w - b_i) + lam1 * theta + lam2 * v``.
    """

    name = "robust"

    def __init__(self, data: RobustRegressionData):
        self.data = data
        d = data.d
        self.d = d
        self.cone = Product([SecondOrder(d), SecondOrder(d)])
        A = np.zeros((d, 2 * d + 2))
        A[:, :d] = -data.sigma_root
        A[:, d + 1 : 2 * d + 1] = np.eye(d)
        self.constraints = AffineConstraints(A, np.zeros(d))
        self.n_components = data.p
        self.sqrt_eta = float(np.sqrt(data.eta_prob))
        x0 = np.zeros(2 * d + 2)
        x0[d] = 1.0  # v
        x0[-1] = self.sqrt_eta  # theta = 1
        self.x0 = InteriorPoint(self.cone, x0)
        self._lin = np.zeros(2 * d + 2)
        self._lin[d] = data.lam2
        self._lin[-1] = data.lam1 / self.sqrt_eta

    def split(self, x):
        """``(w, v, theta)`` from the lifted vector."""
        d = self.d
        return x[:d], x[d], x[-1] / self.sqrt_eta

    def residuals(self, x, idx=None):
        a, b = self.data.features, self.data.labels
        w = x[: self.d]
        if idx is None:
            return a @ w - b
        return a[idx] @ w - b[idx]

    def objective(self, x):
        return float(np.mean(robust_loss(self.residuals(x))) + self._lin @ x)

    def full_gradient(self, x):
        r = self.residuals(x)
        g = self._lin.copy()
        g[: self.d] += self.data.features.T @ robust_loss_derivative(r) / self.n_components
        return g

    def batch_gradient(self, x, idx):
        idx = np.asarray(idx)
        r = self.residuals(x, idx)
        g = self._lin.copy()
        g[: self.d] += self.data.features[idx].T @ robust_loss_derivative(r) / idx.size
        return g


class MultiTaskProblem(ConicProblem):
    """Multi-task relationship learning with a task-covariance regularizer.

    Variables ``x = (vec(W), svec(Sigma))`` with ``W`` (tasks x d) free and
    ``Sigma`` in the PSD cone, ``tr(Sigma) = 1``. Objective::

        (1/T) sum_i mean_j phi(w_i . p_ij - q_ij) + lam * tr(W^T P(Sigma) W)

    ``precision_map='inverse'`` uses ``P(Sigma) = Sigma^{-1}``; ``'identity'``
    uses ``P = I`` (decouples Sigma; mostly for testing).
    """

    name = "multitask"

    def __init__(self, data: MultiTaskData, precision_map: str = "inverse"):
        if precision_map not in ("inverse", "identity"):
            raise ConfigurationError(f"unknown precision map {precision_map!r}")
        self.data = data
        self.precision_map = precision_map
        T, d = data.n_tasks, data.d
        self.T, self.d = T, d
        self.psd = PSD(T)
        self.nW = T * d
        self.cone = Product([Free(self.nW), self.psd])
        row = np.concatenate([np.zeros(self.nW), self.psd.vec(np.eye(T))])
        self.constraints = AffineConstraints(row[None, :], np.array([1.0]))
        N = data.features.shape[0]
        self.n_components = N
        counts = np.bincount(data.task, minlength=T)
        # weight making the plain average over all N samples equal the task-averaged loss
        self.weights = N / (T * counts[data.task])
        self.x0 = InteriorPoint(self.cone, np.concatenate([np.zeros(self.nW), self.psd.vec(np.eye(T) / T)]))

    def split(self, x):
        return x[: self.nW].reshape(self.T, self.d), self.psd.mat(x[self.nW :])

    def _precision(self, S):
        if self.precision_map == "identity":
            return np.eye(self.T)
        try:
            cf = sla.cho_factor(S, lower=True)
        except np.linalg.LinAlgError:
            raise DomainError("Sigma is not positive definite") from None
        P = sla.cho_solve(cf, np.eye(self.T))
        return 0.5 * (P + P.T)

    def _residuals(self, W, idx=None):
        X, y, t = self.data.features, self.data.labels, self.data.task
        if idx is None:
            return np.einsum("ij,ij->i", X, W[t]) - y
        return np.einsum("ij,ij->i", X[idx], W[t[idx]]) - y[idx]

    def objective(self, x):
        W, S = self.split(x)
        P = self._precision(S)
        loss = np.mean(self.weights * robust_loss(self._residuals(W)))
        return float(loss + self.data.lam * np.sum(W * (P @ W)))

    def _regularizer_gradient(self, W, S):
        P = self._precision(S)
        gW = 2.0 * self.data.lam * (P @ W)
        if self.precision_map == "identity":
            gS = np.zeros(self.psd.dim)
        else:
            PW = P @ W
            gS = -self.data.lam * self.psd.vec(PW @ PW.T)
        return gW, gS

    def full_gradient(self, x):
        W, S = self.split(x)
        gW, gS = self._regularizer_gradient(W, S)
        coef = self.weights * robust_loss_derivative(self._residuals(W)) / self.n_components
        loss_grad = np.zeros_like(W)
        for i in range(self.T):
            sel = self.data.task == i
            loss_grad[i] = coef[sel] @ self.data.features[sel]
        return np.concatenate([(gW + loss_grad).ravel(), gS])

    def batch_gradient(self, x, idx):
        idx = np.asarray(idx)
        W, S = self.split(x)
        gW, gS = self._regularizer_gradient(W, S)
        coef = self.weights[idx] * robust_loss_derivative(self._residuals(W, idx)) / idx.size
        loss_grad = np.zeros_like(W)
        np.add.at(loss_grad, self.data.task[idx], coef[:, None] * self.data.features[idx])
        return np.concatenate([(gW + loss_grad).ravel(), gS])

    def task_losses(self, x) -> np.ndarray:
        """Mean robust loss per task."""
        W, _ = self.split(x)
        r = robust_loss(self._residuals(W))
        return np.bincount(self.data.task, weights=r, minlength=self.T) / np.bincount(self.data.task, minlength=self.T)


class StreamClusterProblem(ConicProblem):
    """SDP relaxation of k-means over a stream of distance matrices.

    ``min mean_i <A_i, W> + tau * sum_j log(gamma + lambda_j(W))`` over PSD ``W``
    with unit row sums and trace ``k``.
    """

    name = "cluster"

    def __init__(self, data: StreamClusterData):
        self.data = data
        d, k = data.d, data.k
        self.d, self.k = d, k
        self.psd = PSD(d)
        self.cone = self.psd
        e = np.ones(d)
        rows = [self.psd.vec(0.5 * (np.outer(np.eye(d)[i], e) + np.outer(e, np.eye(d)[i]))) for i in range(d)]
        rows.append(self.psd.vec(np.eye(d)))
        self.constraints = AffineConstraints.deflated(np.array(rows), np.concatenate([np.ones(d), [float(k)]]))
        self.n_components = data.p
        self.Avec = np.array([self.psd.vec(Ai) for Ai in data.matrices])
        self.Abar = self.Avec.mean(axis=0)
        off = (d - k) / (d * (d - 1))
        W0 = np.full((d, d), off)
        np.fill_diagonal(W0, k / d)
        self.x0 = InteriorPoint(self.cone, self.psd.vec(W0))

    def _eig(self, x):
        W = self.psd.mat(x)
        try:
            lam, U = np.linalg.eigh(W)
        except np.linalg.LinAlgError as exc:
            raise DomainError(f"eigendecomposition failed (cond {np.linalg.cond(W):.3e})") from exc
        shifted = self.data.gamma_reg + lam
        if np.any(shifted <= 0):
            raise DomainError(f"gamma + lambda_min(W) = {shifted.min():.3e} is not > 0")
        return shifted, U

    def regularizer_gradient(self, x):
        shifted, U = self._eig(x)
        return self.psd.vec(self.data.tau * (U / shifted) @ U.T)

    def objective(self, x):
        shifted, _ = self._eig(x)
        return float(self.Abar @ x + self.data.tau * np.sum(np.log(shifted)))

    def full_gradient(self, x):
        return self.Abar + self.regularizer_gradient(x)

    def batch_gradient(self, x, idx):
        return self.Avec[np.asarray(idx)].mean(axis=0) + self.regularizer_gradient(x)


def robust_regression(data: RobustRegressionData) -> RobustRegressionProblem:
    return RobustRegressionProblem(data)


def multitask(data: MultiTaskData, precision_map: str = "inverse") -> MultiTaskProblem:
    return MultiTaskProblem(data, precision_map)


def stream_cluster(data: StreamClusterData) -> StreamClusterProblem:
    return StreamClusterProblem(data)


def round_clusters(W: np.ndarray, k: int, seed: int = 0) -> np.ndarray:
    """Spectral rounding: k-means on the rows of the top-k eigenvectors of ``W``."""
    lam, U = np.linalg.eigh(0.5 * (W + W.T))
    emb = U[:, -k:] * np.sqrt(np.clip(lam[-k:], 0.0, None))
    _, labels = kmeans2(emb, k, seed=seed, minit="++")
    return labels

"""Benchmark datasets: containers, seeded synthetic generators and CSV I/O.

CSV layouts (header row required, '.' decimal point):

* regression:  ``a1, ..., ad, label``
* multi-task:  ``task, a1, ..., ad, label`` with integer task ids
* stream-cluster: ``obs, point, y1, ..., yq`` -- one row per observation of
  one point; the per-observation distance matrices are built at load time.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class RobustRegressionData:
    features: np.ndarray  # (p, d)
    labels: np.ndarray  # (p,)
    sigma_root: np.ndarray  # (d, d) symmetric PSD square root of the feature covariance
    lam1: float = 0.05
    lam2: float = 0.05
    eta_prob: float = 0.1
    w_true: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        a, b, R = self.features, self.labels, self.sigma_root
        if a.ndim != 2 or b.shape != (a.shape[0],):
            raise DataError(f"features {a.shape} and labels {b.shape} are inconsistent")
        d = a.shape[1]
        if R.shape != (d, d):
            raise DataError(f"covariance root has shape {R.shape}, expected ({d}, {d})")
        if not np.allclose(R, R.T, atol=1e-10 * (1 + np.abs(R).max())):
            raise DataError("covariance root is not symmetric")
        lam_min = np.linalg.eigvalsh(0.5 * (R + R.T))[0]
        if lam_min < -1e-10 * (1 + np.abs(R).max()):
            raise DataError(f"covariance root is not PSD (eigenvalue {lam_min:.3e})")
        if min(self.lam1, self.lam2) <= 0 or not 0 < self.eta_prob < 1:
            raise DataError("lam1, lam2 must be positive and eta_prob in (0, 1)")

    @property
    def p(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class MultiTaskData:
    features: np.ndarray  # (N, d)
    labels: np.ndarray  # (N,)
    task: np.ndarray  # (N,) ints in 0..n_tasks-1
    n_tasks: int
    lam: float = 0.1
    w_true: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        N = self.features.shape[0]
        if self.labels.shape != (N,) or self.task.shape != (N,):
            raise DataError("features, labels and task ids have inconsistent lengths")
        counts = np.bincount(self.task, minlength=self.n_tasks)
        if counts.shape[0] != self.n_tasks or np.any(counts == 0):
            raise DataError("every task needs at least one sample and ids must be < n_tasks")
        if self.lam <= 0:
            raise DataError("lam must be positive")

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class StreamClusterData:
    matrices: np.ndarray  # (p, d, d) symmetric
    k: int
    tau: float = 0.05
    gamma_reg: float = 0.5
    labels: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        A = self.matrices
        if A.ndim != 3 or A.shape[1] != A.shape[2]:
            raise DataError(f"matrices must have shape (p, d, d), got {A.shape}")
        if not np.allclose(A, np.swapaxes(A, 1, 2)):
            raise DataError("data matrices must be symmetric")
        if not 2 <= self.k < A.shape[1]:
            raise DataError(f"cluster count k={self.k} must satisfy 2 <= k < d={A.shape[1]}")
        if self.tau < 0 or self.gamma_reg <= 0:
            raise DataError("tau must be nonnegative and gamma_reg positive")

    @property
    def p(self) -> int:
        return self.matrices.shape[0]

    @property
    def d(self) -> int:
        return self.matrices.shape[1]


# -- assembly helpers --------------------------------------------------------

def covariance_root(features: np.ndarray) -> np.ndarray:
    C = np.cov(features, rowvar=False).reshape(features.shape[1], features.shape[1])
    lam, U = np.linalg.eigh(0.5 * (C + C.T))
    R = (U * np.sqrt(np.clip(lam, 0.0, None))) @ U.T
    return 0.5 * (R + R.T)


def regression_data(features, labels, **params) -> RobustRegressionData:
    a = np.asarray(features, dtype=float)
    b = np.asarray(labels, dtype=float)
    return RobustRegressionData(a, b, covariance_root(a), **params)


def distance_matrices(obs: np.ndarray, normalize: bool = True) -> np.ndarray:
    """Squared-distance matrices ``D_i[j, l] = |y_ij - y_il|^2`` from (p, d, q) observations."""
    sq = np.sum(obs**2, axis=2)
    G = np.einsum("ijq,ilq->ijl", obs, obs)
    D = sq[:, :, None] + sq[:, None, :] - 2.0 * G
    D = np.clip(0.5 * (D + np.swapaxes(D, 1, 2)), 0.0, None)
    idx = np.arange(obs.shape[1])
    D[:, idx, idx] = 0.0
    if normalize:
        d = obs.shape[1]
        scale = D.mean(axis=0).sum() / (d * (d - 1))
        if scale > 0:
            D = D / scale
    return D


def impute_missing(features: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Fill ``mask``-ed entries by least squares on each row's observed features.

    The regression for a row is fitted on the fully observed rows.
    """
    a = features.copy()
    complete = ~mask.any(axis=1)
    if complete.sum() < a.shape[1] + 1:
        raise DataError("too few complete rows to fit the imputation regressions")
    full = a[complete]
    for i in np.flatnonzero(~complete):
        miss = mask[i]
        obs = ~miss
        X = np.column_stack([np.ones(full.shape[0]), full[:, obs]])
        coef, *_ = np.linalg.lstsq(X, full[:, miss], rcond=None)
        a[i, miss] = np.concatenate([[1.0], a[i, obs]]) @ coef
    return a


# -- synthetic generators ----------------------------------------------------

def synth_regression(
    d: int = 10,
    p: int = 2000,
    seed: int = 0,
    noise: float = 0.1,
    missing: bool = False,
    **params,
) -> RobustRegressionData:
    """Correlated Gaussian features, planted unit-norm model, Student-t(3) noise.

    With ``missing=True`` a quarter of the features are deleted in half of
    the samples and re-imputed by linear regression.
    """
    if d < 1 or p < 2:
        raise DataError("need d >= 1 and p >= 2")
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    root = (Q * np.sqrt(np.linspace(0.5, 2.0, d))) @ Q.T
    a = rng.standard_normal((p, d)) @ root
    w = rng.standard_normal(d)
    w /= np.linalg.norm(w)
    b = a @ w
    if noise:
        b = b + noise * rng.standard_t(3, size=p)
    if missing:
        mask = np.zeros((p, d), dtype=bool)
        n_del = max(1, int(round(0.25 * d)))
        rows = rng.choice(p, size=p // 2, replace=False)
        for i in rows:
            mask[i, rng.choice(d, size=n_del, replace=False)] = True
        a = impute_missing(a, mask)
    return RobustRegressionData(a, b, covariance_root(a), w_true=w, **params)


def synth_multitask(
    n_tasks: int = 5,
    m: int = 200,
    d: int = 10,
    seed: int = 0,
    noise: float = 0.1,
    relatedness: float = 0.3,
    **params,
) -> MultiTaskData:
    """Tasks share a planted model up to ``relatedness``-scaled deviations."""
    if n_tasks < 1 or m < 1 or d < 1:
        raise DataError("dimensions must be positive")
    rng = np.random.default_rng(seed)
    shared = rng.standard_normal(d) / np.sqrt(d)
    W = shared + relatedness * rng.standard_normal((n_tasks, d)) / np.sqrt(d)
    task = np.repeat(np.arange(n_tasks), m)
    X = rng.standard_normal((n_tasks * m, d))
    y = np.einsum("ij,ij->i", X, W[task])
    if noise:
        y = y + noise * rng.standard_t(3, size=y.shape[0])
    return MultiTaskData(X, y, task, n_tasks, w_true=W, **params)


def synth_cluster_observations(
    d: int = 30, k: int = 3, p: int = 200, seed: int = 0, q: int = 2, drift: float = 1.0, spread: float = 0.3
) -> tuple[np.ndarray, np.ndarray]:
    """``(obs, labels)``: d points in k Gaussian clusters observed p times.

    Observation i rescales every point by ``1 + drift * eps_i`` with
    ``eps_i ~ N(0, 1)`` and adds small per-observation jitter.
    """
    if not 2 <= k < d or p < 1:
        raise DataError("need 2 <= k < d and p >= 1")
    rng = np.random.default_rng(seed)
    angles = 2 * np.pi * np.arange(k) / k
    centers = np.zeros((k, q))
    centers[:, 0] = 3.0 * np.cos(angles)
    if q > 1:
        centers[:, 1] = 3.0 * np.sin(angles)
    labels = np.arange(d) % k
    base = centers[labels] + spread * rng.standard_normal((d, q))
    eps = rng.standard_normal(p)
    obs = (1.0 + drift * eps)[:, None, None] * base[None] + 0.1 * rng.standard_normal((p, d, q))
    return obs, labels


def synth_cluster(d: int = 30, k: int = 3, p: int = 200, seed: int = 0, q: int = 2, drift: float = 1.0, **params):
    obs, labels = synth_cluster_observations(d, k, p, seed, q, drift)
    return StreamClusterData(distance_matrices(obs), k, labels=labels, **params)


def synth_generate(kind: str, dims: dict, seed: int):
    """Dispatch to the generator for ``kind`` in {robust, multitask, cluster}."""
    gens = {"robust": synth_regression, "multitask": synth_multitask, "cluster": synth_cluster}
    if kind not in gens:
        raise DataError(f"unknown problem kind {kind!r}")
    return gens[kind](seed=seed, **dims)


# -- CSV ---------------------------------------------------------------------

def _read_numeric_csv(path) -> tuple[list[str], np.ndarray]:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if len(rows) < 2:
        raise DataError(f"{path}: need a header row and at least one data row")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if any(c.strip() for c in r)]
    try:
        # float() is locale independent
        arr = np.array([[float(c) for c in r] for r in body], dtype=float)
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric entry ({exc})") from exc
    if arr.ndim != 2 or arr.shape[1] != len(header):
        raise DataError(f"{path}: rows do not match the {len(header)}-column header")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{path}: non-finite entries")
    return header, arr


def _write_csv(path, header, rows):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if not isinstance(v, (int, np.integer)) else int(v) for v in r])


def load_regression_csv(path, **params) -> RobustRegressionData:
    header, arr = _read_numeric_csv(path)
    if arr.shape[1] < 2:
        raise DataError("regression CSV needs at least one feature column and a label column")
    return regression_data(arr[:, :-1], arr[:, -1], **params)


def save_regression_csv(path, data: RobustRegressionData) -> None:
    header = [f"a{j + 1}" for j in range(data.d)] + ["label"]
    _write_csv(path, header, np.column_stack([data.features, data.labels]))


def load_multitask_csv(path, **params) -> MultiTaskData:
    header, arr = _read_numeric_csv(path)
    if arr.shape[1] < 3:
        raise DataError("multi-task CSV needs task, feature and label columns")
    task_f = arr[:, 0]
    if np.any(task_f != np.round(task_f)) or np.any(task_f < 0):
        raise DataError("task ids must be nonnegative integers")
    ids, task = np.unique(task_f.astype(int), return_inverse=True)
    return MultiTaskData(arr[:, 1:-1], arr[:, -1], task.astype(int), len(ids), **params)


def save_multitask_csv(path, data: MultiTaskData) -> None:
    header = ["task"] + [f"a{j + 1}" for j in range(data.d)] + ["label"]
    rows = [[int(t), *f, y] for t, f, y in zip(data.task, data.features, data.labels)]
    _write_csv(path, header, rows)


def load_cluster_csv(path, k: int = 3, **params) -> StreamClusterData:
    header, arr = _read_numeric_csv(path)
    if arr.shape[1] < 3:
        raise DataError("cluster CSV needs obs, point and coordinate columns")
    oi, pj = arr[:, 0], arr[:, 1]
    if np.any(oi != np.round(oi)) or np.any(pj != np.round(pj)) or oi.min() < 0 or pj.min() < 0:
        raise DataError("obs and point indices must be nonnegative integers")
    oi, pj = oi.astype(int), pj.astype(int)
    p, d, q = oi.max() + 1, pj.max() + 1, arr.shape[1] - 2
    if arr.shape[0] != p * d:
        raise DataError(f"expected {p * d} rows for {p} observations of {d} points, got {arr.shape[0]}")
    obs = np.full((p, d, q), np.nan)
    obs[oi, pj] = arr[:, 2:]
    if np.isnan(obs).any():
        raise DataError("missing or duplicated (obs, point) rows")
    return StreamClusterData(distance_matrices(obs), k, **params)


def save_cluster_csv(path, obs: np.ndarray) -> None:
    p, d, q = obs.shape
    header = ["obs", "point"] + [f"y{j + 1}" for j in range(q)]
    rows = [[i, j, *obs[i, j]] for i in range(p) for j in range(d)]
    _write_csv(path, header, rows)

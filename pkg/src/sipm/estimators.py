"""Stochastic gradient estimators and their step/momentum/barrier schedules.

Variants::

    ME   mini-batch, batch grows (default |B_k| = k + 1)
    ME1  mini-batch with a fixed batch size
    PM   Polyak momentum
    EM   extrapolated Polyak momentum (sample taken at an extrapolated point)
    RM   recursive momentum (one sample evaluated at two consecutive iterates)
    FG   exact full gradient (deterministic baseline)

Each momentum variant draws a mini-batch of ``batch_size`` components per
sample; ``batch_size=1`` is the single-sample estimator.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple, Protocol

import numpy as np

from .errors import ConfigurationError, InvariantViolation


class Variant(str, enum.Enum):
    ME = "me"
    ME1 = "me1"
    PM = "pm"
    EM = "em"
    RM = "rm"
    FG = "fg"


# (eta scale, eta exponent, gamma exponent, mu exponent) of the default schedules
_DEFAULTS = {
    Variant.ME: (1.0, 1 / 2, None, 1 / 2),
    Variant.ME1: (1.0, 1 / 2, None, 1 / 2),
    Variant.FG: (1.0, 1 / 2, None, 1 / 2),
    Variant.PM: (1.0, 3 / 4, 1 / 2, 1 / 4),
    Variant.EM: (5 / 7, 5 / 7, 4 / 7, 2 / 7),
    Variant.RM: (1 / 3, 2 / 3, 2 / 3, 1 / 3),
}


class ScheduleValues(NamedTuple):
    eta: float
    gamma: float  # 1.0 for variants without momentum
    batch: int  # components drawn per sample (full data size marker -1 for FG)
    mu: float


@dataclass(frozen=True)
class Schedule:
    """Step size, momentum weight, batch size and barrier parameter per iteration.

    Exponent overrides replace the default ``(k+1)^-alpha`` decay rates
    (for grid searches); ``None`` keeps the default value. ``eta_scale``
    replaces the constant in front of ``s_eta`` (1/3 for RM, 5/7 for EM).
    """

    variant: Variant
    s_eta: float
    epsilon: float
    theta: float
    batch_size: int = 1
    batch_init: int = 1
    batch_increment: int = 1
    eta_exponent: float | None = None
    gamma_exponent: float | None = None
    mu_exponent: float | None = None
    eta_scale: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if not 0.0 < self.s_eta < 1.0:
            raise ConfigurationError(f"s_eta must lie in (0, 1), got {self.s_eta}")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigurationError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.theta < 0:
            raise ConfigurationError("theta must be nonnegative")
        if self.batch_size < 1 or self.batch_init < 1 or self.batch_increment < 0:
            raise ConfigurationError("batch sizes must be positive (increment nonnegative)")
        for name in ("eta_exponent", "gamma_exponent", "mu_exponent"):
            val = getattr(self, name)
            if val is not None and val < 0:
                raise ConfigurationError(f"{name} must be nonnegative")
        if self.eta_scale is not None and not 0.0 < self.eta_scale <= 1.0:
            raise ConfigurationError(f"eta_scale must lie in (0, 1], got {self.eta_scale}")

    @property
    def mu_floor(self) -> float:
        return self.epsilon / (1.0 + np.sqrt(self.theta))

    def exponents(self) -> tuple[float, float, float | None, float]:
        scale, ea, ga, ma = _DEFAULTS[self.variant]
        if self.eta_scale is not None:
            scale = self.eta_scale
        if self.eta_exponent is not None:
            ea = self.eta_exponent
        if self.gamma_exponent is not None and ga is not None:
            ga = self.gamma_exponent
        if self.mu_exponent is not None:
            ma = self.mu_exponent
        return scale, ea, ga, ma

    def at(self, k: int) -> ScheduleValues:
        if k < 0:
            raise ValueError("iteration counter must be nonnegative")
        scale, ea, ga, ma = self.exponents()
        k1 = float(k + 1)
        eta = scale * self.s_eta / k1**ea
        gamma = 1.0 if ga is None else 1.0 / k1**ga
        mu = max(1.0 / k1**ma, self.mu_floor)
        v = self.variant
        if v is Variant.ME:
            batch = self.batch_init + self.batch_increment * k
        elif v is Variant.FG:
            batch = -1
        else:
            batch = self.batch_size
        return ScheduleValues(eta, gamma, batch, mu)

    def arrays(self, kmax: int) -> dict[str, np.ndarray]:
        """Vectorized ``eta, gamma, mu`` for k = 0..kmax (schedule audits)."""
        scale, ea, ga, ma = self.exponents()
        k1 = np.arange(1, kmax + 2, dtype=float)
        eta = scale * self.s_eta / k1**ea
        gamma = np.ones_like(k1) if ga is None else 1.0 / k1**ga
        mu = np.maximum(1.0 / k1**ma, self.mu_floor)
        return {"k": k1 - 1, "eta": eta, "gamma": gamma, "mu": mu}


def hypothesis_violations(schedule: Schedule, kmax: int = 10**6) -> list[str]:
    """Which of the step/momentum conditions the convergence analysis needs fail up to ``kmax``.

    eta nonincreasing in (0, s_eta]; gamma in (0, 1]; gamma_k > eta_k for
    PM and RM; eta_k / gamma_k <= s_eta for EM (keeps the extrapolated
    point interior). Ratios equal to their bound up to rounding pass.
    """
    arr = schedule.arrays(kmax)
    eta, gam = arr["eta"], arr["gamma"]
    out = []
    if np.any(np.diff(eta) > 0) or eta.max() > schedule.s_eta * (1 + 1e-12) or eta.min() <= 0:
        out.append("eta must be nonincreasing in (0, s_eta]")
    if gam.min() <= 0 or gam.max() > 1:
        out.append("gamma must lie in (0, 1]")
    v = schedule.variant
    _, ea, ga, _ = schedule.exponents()
    # eta decaying slower than gamma eventually breaks both ratio conditions
    slow = ga is not None and ea < ga
    if v in (Variant.PM, Variant.RM) and (slow or np.any(gam <= eta)):
        out.append("gamma_k > eta_k fails")
    if v is Variant.EM and (slow or np.any(eta / gam > schedule.s_eta * (1 + 1e-12))):
        out.append("eta_k / gamma_k <= s_eta fails")
    return out


def schedule_at(s: Schedule, k: int) -> ScheduleValues:
    return s.at(k)


class GradientOracle(Protocol):
    n_components: int

    def batch_gradient(self, x: np.ndarray, idx: np.ndarray) -> np.ndarray:
        """Mean of the component gradients ``G(x; xi_i)`` over ``idx``."""

    def full_gradient(self, x: np.ndarray) -> np.ndarray: ...


@dataclass
class EstimatorState:
    """Running estimate and the memory the recursions need.

    Initialized with ``m_bar = 0`` and ``gamma_prev = 1`` so that the first
    update of every recursion returns a fresh sample.
    """

    m_bar: np.ndarray | None = None
    prev_x: np.ndarray | None = None
    prev_m_bar: np.ndarray | None = None
    gamma_prev: float = 1.0
    k: int = 0
    samples: int = 0
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))
    z: np.ndarray | None = None  # last extrapolated point (EM)

    @classmethod
    def create(cls, seed) -> "EstimatorState":
        return cls(rng=np.random.default_rng(seed))

    def draw(self, n_components: int, batch: int) -> np.ndarray:
        # i.i.d. indices, with replacement
        return self.rng.integers(0, n_components, size=batch)

    def _commit(self, m_bar: np.ndarray, x: np.ndarray) -> np.ndarray:
        self.prev_m_bar = self.m_bar
        self.m_bar = m_bar
        self.prev_x = np.array(x, dtype=float, copy=True)
        self.k += 1
        return m_bar


def _previous(state: EstimatorState, x: np.ndarray) -> np.ndarray:
    return np.zeros_like(x, dtype=float) if state.m_bar is None else state.m_bar


def update_me(state: EstimatorState, oracle: GradientOracle, x: np.ndarray, batch_size: int) -> np.ndarray:
    if batch_size < 1:
        raise ConfigurationError("batch size must be at least 1")
    idx = state.draw(oracle.n_components, batch_size)
    state.samples += batch_size
    return state._commit(oracle.batch_gradient(x, idx), x)


def update_pm(
    state: EstimatorState, oracle: GradientOracle, x: np.ndarray, gamma_prev: float, batch_size: int = 1
) -> np.ndarray:
    if not 0.0 < gamma_prev <= 1.0:
        raise ConfigurationError(f"momentum weight must lie in (0, 1], got {gamma_prev}")
    idx = state.draw(oracle.n_components, batch_size)
    state.samples += batch_size
    g = oracle.batch_gradient(x, idx)
    return state._commit((1.0 - gamma_prev) * _previous(state, x) + gamma_prev * g, x)


def extrapolate(x: np.ndarray, x_prev: np.ndarray, gamma_prev: float) -> np.ndarray:
    return x + ((1.0 - gamma_prev) / gamma_prev) * (x - x_prev)


def update_em(
    state: EstimatorState,
    oracle: GradientOracle,
    x: np.ndarray,
    x_prev: np.ndarray | None,
    gamma_prev: float,
    batch_size: int = 1,
    cone=None,
) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(z, m_bar)``; the fresh sample is evaluated at ``z``.

    When ``cone`` is given, ``z`` is certified interior; a failure means the
    schedule broke the ``eta_k / gamma_k <= s_eta`` requirement.
    """
    if not 0.0 < gamma_prev <= 1.0:
        raise ConfigurationError(f"momentum weight must lie in (0, 1], got {gamma_prev}")
    if x_prev is None:
        x_prev = x
    z = extrapolate(x, x_prev, gamma_prev)
    if cone is not None and not cone.contains_interior(z):
        raise InvariantViolation(f"extrapolated point left the cone at k={state.k}")
    idx = state.draw(oracle.n_components, batch_size)
    state.samples += batch_size
    g = oracle.batch_gradient(z, idx)
    state.z = z
    m_bar = state._commit((1.0 - gamma_prev) * _previous(state, x) + gamma_prev * g, x)
    return z, m_bar


def update_rm(
    state: EstimatorState,
    oracle: GradientOracle,
    x: np.ndarray,
    x_prev: np.ndarray | None,
    gamma_prev: float,
    batch_size: int = 1,
) -> np.ndarray:
    """STORM-type update; one batch of indices is evaluated at ``x`` and ``x_prev``."""
    if not 0.0 <= gamma_prev <= 1.0:
        raise ConfigurationError(f"momentum weight must lie in [0, 1], got {gamma_prev}")
    idx = state.draw(oracle.n_components, batch_size)
    g = oracle.batch_gradient(x, idx)
    state.samples += batch_size
    if gamma_prev < 1.0 and x_prev is not None:
        g_prev = oracle.batch_gradient(x_prev, idx)
        state.samples += batch_size
        m_bar = g + (1.0 - gamma_prev) * (_previous(state, x) - g_prev)
    else:
        m_bar = g
    return state._commit(m_bar, x)


def update_fg(state: EstimatorState, oracle: GradientOracle, x: np.ndarray) -> np.ndarray:
    state.samples += oracle.n_components
    return state._commit(oracle.full_gradient(x), x)


def shift_with_barrier(m_bar: np.ndarray, mu: float, grad_b: np.ndarray) -> np.ndarray:
    """``m = m_bar + mu (m_bar + grad B(x))``."""
    return (1.0 + mu) * m_bar + mu * grad_b


def estimate(
    state: EstimatorState, schedule: Schedule, oracle: GradientOracle, x: np.ndarray, values: ScheduleValues, cone=None
) -> np.ndarray:
    """Dispatch one estimator update for iteration ``state.k`` and record gamma_k."""
    v = schedule.variant
    if v in (Variant.ME, Variant.ME1):
        m_bar = update_me(state, oracle, x, values.batch)
    elif v is Variant.PM:
        m_bar = update_pm(state, oracle, x, state.gamma_prev, values.batch)
    elif v is Variant.EM:
        _, m_bar = update_em(state, oracle, x, state.prev_x, state.gamma_prev, values.batch, cone=cone)
    elif v is Variant.RM:
        m_bar = update_rm(state, oracle, x, state.prev_x, state.gamma_prev, values.batch)
    else:
        m_bar = update_fg(state, oracle, x)
    state.gamma_prev = values.gamma
    return m_bar

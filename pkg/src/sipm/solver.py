"""The stochastic interior-point iteration.

Per iteration ``k``::

    m_bar = estimator update at x^k
    m     = m_bar + mu_k (m_bar + grad B(x^k))
    lam   = -(A H A^T)^{-1} A H m,   H = hess B(x^k)^{-1}
    x^{k+1} = x^k - eta_k H (m + A^T lam) / |m + A^T lam|*_{x^k}

so every step has local length exactly ``eta_k < 1`` and stays in null(A).
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .estimators import EstimatorState, Schedule, estimate, shift_with_barrier
from .errors import ConfigurationError, EstimatedStationary, InvariantViolation
from .kkt import DualSolveResult, search_direction, solve_dual
from .problems import ConicProblem

log = logging.getLogger(__name__)

STEP_LENGTH_RTOL = 1e-8
DRIFT_RTOL = 1e-8

RECORD_FIELDS = ("k", "epoch", "f_rel", "stat_rel", "mu", "eta", "samples", "wall_ms")


@dataclass(frozen=True)
class IterationRecord:
    k: int
    epoch: float
    f_rel: float
    stat_rel: float
    mu: float
    eta: float
    samples: int
    wall_ms: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Budget:
    max_epochs: float | None = None
    max_iterations: int | None = None

    def __post_init__(self):
        if self.max_epochs is None and self.max_iterations is None:
            raise ConfigurationError("budget needs max_epochs or max_iterations")
        if (self.max_epochs is not None and self.max_epochs <= 0) or (
            self.max_iterations is not None and self.max_iterations < 1
        ):
            raise ConfigurationError("budget must be positive")

    def exhausted(self, k: int, samples: int, n_components: int) -> bool:
        if self.max_iterations is not None and k >= self.max_iterations:
            return True
        return self.max_epochs is not None and samples >= self.max_epochs * n_components


@dataclass
class SolverState:
    x: np.ndarray
    lam: np.ndarray
    k: int
    estimator: EstimatorState
    schedule: Schedule
    f0: float | None = None
    stat0: float | None = None
    status: str = "running"
    t_start: float = field(default_factory=time.perf_counter)
    # largest observed invariant deviations, for audits
    max_drift: float = 0.0
    max_step_error: float = 0.0
    halvings: int = 0


@dataclass
class Trace:
    records: list[IterationRecord]
    status: str
    iterations: int
    seed: int
    max_drift: float = 0.0
    max_step_error: float = 0.0
    halvings: int = 0
    x_final: np.ndarray | None = None

    def final(self) -> IterationRecord:
        return self.records[-1]

    def tail_mean(self, field_name: str = "stat_rel", epochs: float = 1.0) -> float:
        """Average of a record field over the last ``epochs`` epochs."""
        last = self.records[-1].epoch
        vals = [getattr(r, field_name) for r in self.records if r.epoch >= last - epochs]
        return float(np.mean(vals))

    def draw_output(self, seed: int | None = None) -> IterationRecord:
        """Record of an iterate drawn uniformly from ``{floor(K/2), ..., K-1}``.

        Only recorded iterations are candidates.
        """
        K = self.iterations
        lo = K // 2
        cands = [r for r in self.records if lo <= r.k <= max(K - 1, 0)] or [self.records[-1]]
        rng = np.random.default_rng([self.seed if seed is None else seed, 0x6B])
        return cands[int(rng.integers(len(cands)))]


def stationarity_measure(cone, x, residual) -> float:
    """``|residual|*_x``."""
    return cone.dual_local_norm(x, residual)


def true_stationarity(problem: ConicProblem, x: np.ndarray, mu: float) -> float:
    """Exact measure ``|grad phi_mu(x) + A^T lam|*_x`` with the optimal multiplier."""
    g = shift_with_barrier(problem.full_gradient(x), mu, problem.cone.gradient(x))
    return solve_dual(problem.constraints, problem.cone, x, g).residual_dual_norm


def init_state(problem: ConicProblem, schedule: Schedule, seed) -> SolverState:
    try:
        problem.check_start()
    except Exception as exc:
        raise ConfigurationError(str(exc)) from exc
    x0 = np.array(problem.x0.x, dtype=float, copy=True)
    return SolverState(
        x=x0,
        lam=np.zeros(problem.constraints.m),
        k=0,
        estimator=EstimatorState.create(seed),
        schedule=schedule,
    )


def _advance(problem: ConicProblem, x: np.ndarray, eta: float, dual: DualSolveResult, state: SolverState):
    cone = problem.cone
    d = search_direction(cone, x, dual)
    x_new = x + eta * d
    if not cone.contains_interior(x_new):
        # cannot happen in exact arithmetic; retry once with half the step
        log.warning("step %d left the cone at eta=%.3e; retrying with eta/2", state.k, eta)
        state.halvings += 1
        eta = 0.5 * eta
        x_new = x + eta * d
        if not cone.contains_interior(x_new):
            raise InvariantViolation(f"iterate {state.k + 1} is not interior after step halving")
    return x_new, eta


def step(state: SolverState, problem: ConicProblem, check_invariants: bool = False, record: bool = True):
    """One iteration. Returns ``(state, record)``; ``record`` is None when not requested."""
    cone, cons = problem.cone, problem.constraints
    x, k = state.x, state.k
    vals = state.schedule.at(k)
    m_bar = estimate(state.estimator, state.schedule, problem, x, vals, cone=cone)
    m = shift_with_barrier(m_bar, vals.mu, cone.gradient(x))
    dual = solve_dual(cons, cone, x, m)
    stat = dual.residual_dual_norm
    if state.stat0 is None:
        state.f0 = problem.objective(x)
        state.stat0 = stat
    rec = None
    if record:
        f = problem.objective(x)
        rec = IterationRecord(
            k=k,
            epoch=state.estimator.samples / problem.n_components,
            f_rel=f / state.f0 if state.f0 != 0 else float("nan"),
            stat_rel=stat / state.stat0 if state.stat0 > 0 else 0.0,
            mu=vals.mu,
            eta=vals.eta,
            samples=state.estimator.samples,
            wall_ms=1e3 * (time.perf_counter() - state.t_start),
        )
    try:
        x_new, eta = _advance(problem, x, vals.eta, dual, state)
    except EstimatedStationary:
        state.status = "estimated-stationary"
        state.lam = dual.lam
        return state, rec
    if check_invariants:
        step_len = cone.local_norm(x, x_new - x)
        err = abs(step_len - eta)
        state.max_step_error = max(state.max_step_error, err / eta)
        if err > STEP_LENGTH_RTOL * eta:
            raise InvariantViolation(f"step {k}: local step length {step_len!r} != eta {eta!r}")
        drift = cons.drift(x_new)
        state.max_drift = max(state.max_drift, drift)
        if drift > cons.drift_tolerance(DRIFT_RTOL):
            raise InvariantViolation(f"step {k}: equality drift {drift:.3e}")
    state.x = x_new
    state.lam = dual.lam
    state.k = k + 1
    return state, rec


def run(
    problem: ConicProblem,
    schedule: Schedule,
    budget: Budget,
    seed: int = 0,
    record_every: int = 1,
    stop_at_tolerance: bool = True,
    check_invariants: bool = False,
) -> Trace:
    """Iterate until the budget is spent, ``stat_rel <= epsilon``, or stationarity.

    Deterministic in ``(problem data, schedule, seed)``.
    """
    if record_every < 1:
        raise ConfigurationError("record_every must be at least 1")
    state = init_state(problem, schedule, seed)
    records: list[IterationRecord] = []
    status = "budget"
    while not budget.exhausted(state.k, state.estimator.samples, problem.n_components):
        k = state.k
        state, rec = step(state, problem, check_invariants=check_invariants, record=True)
        done = state.status != "running"
        converged = stop_at_tolerance and rec.stat_rel <= schedule.epsilon
        last = done or converged or budget.exhausted(state.k, state.estimator.samples, problem.n_components)
        if k % record_every == 0 or last:
            records.append(rec)
        if done:
            status = state.status
            break
        if converged:
            status = "converged"
            break
    return Trace(
        records=records,
        status=status,
        iterations=state.k,
        seed=seed,
        max_drift=state.max_drift,
        max_step_error=state.max_step_error,
        halvings=state.halvings,
        x_final=state.x,
    )

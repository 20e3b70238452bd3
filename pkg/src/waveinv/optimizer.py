"""Projected Fletcher-Reeves conjugate gradient for the coefficient inverse problem."""
from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import dataclass, field

from .adjoint import residual_trace, run_adjoint
from .errors import LineSearchFailed
from .fields import BoundaryTrace, CoefficientField
from .forward import InitialCondition, Scheme, SourceSpec, TimeAxis, run_forward
from .geometry import Grid
from .objective import (
    GradientField,
    TikhonovSpec,
    functional,
    gradient,
    project,
    error_bound_from_gradient,
)

log = logging.getLogger(__name__)

REPORT_FIELDS = ("m", "J", "gnorm", "max_c", "alpha", "beta", "wall")


@dataclass
class CgConfig:
    theta: float = 1e-6
    max_iter: int = 25
    alpha: float | None = None  # fixed step; None selects Armijo backtracking
    alpha0: float | None = None  # initial trial step; None derives it from g0
    alpha0_scale: float = 1.0  # with alpha0=None: alpha0 = scale / max(||g0||_inf, floor)
    alpha0_floor: float = 1.0
    shrink: float = 0.5
    armijo: float = 1e-4
    max_trials: int = 20
    grow: float = 2.0  # next iteration's first trial is grow * last accepted step
    restart_every: int | None = None
    stall_rtol: float = 1e-3
    stall_window: int = 3

    def __post_init__(self):
        if self.theta <= 0:
            raise ValueError("theta must be positive")
        if self.alpha is not None and self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.alpha0 is not None and self.alpha0 <= 0:
            raise ValueError("alpha0 must be positive")
        if self.max_iter < 0:
            raise ValueError("max_iter must be non-negative")


@dataclass(eq=False)
class InversionProblem:
    """Everything needed to evaluate J(c) and its gradient."""

    grid: Grid
    data: BoundaryTrace
    src: SourceSpec
    ic: InitialCondition
    ta: TimeAxis
    spec: TikhonovSpec
    absorbing: tuple[str, ...] = ("front", "back")
    n_solves: int = 0

    def scheme(self, c) -> Scheme:
        return Scheme(self.grid, c, self.src, self.ta, self.absorbing)

    def objective(self, c: CoefficientField) -> float:
        trace, _ = run_forward(self.scheme(c), self.ic, full=False)
        self.n_solves += 1
        return functional(trace, self.data, c, self.spec)

    def objective_and_gradient(self, c: CoefficientField) -> tuple[float, GradientField]:
        scheme = self.scheme(c)
        trace, u_hist = run_forward(scheme, self.ic, full=True)
        J = functional(trace, self.data, c, self.spec)
        lam = run_adjoint(scheme, residual_trace(trace, self.data, self.spec.cutoff))
        self.n_solves += 2
        return J, gradient(u_hist, lam, c, self.spec)


@dataclass(eq=False)
class InversionState:
    m: int
    c: CoefficientField
    g: GradientField
    J: float
    d: GradientField | None = None
    gnorm_prev: float | None = None
    alpha: float = math.nan
    beta: float = math.nan
    history: list[dict] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    @property
    def gnorm(self) -> float:
        return self.g.norm()


def _row(state: InversionState, t0: float) -> dict:
    return {
        "m": state.m,
        "J": state.J,
        "gnorm": state.gnorm,
        "max_c": state.c.max(),
        "alpha": state.alpha,
        "beta": state.beta,
        "wall": time.perf_counter() - t0,
    }


def initial_state(problem: InversionProblem, c0: CoefficientField, t0: float | None = None) -> InversionState:
    t0 = time.perf_counter() if t0 is None else t0
    J, g = problem.objective_and_gradient(c0)
    st = InversionState(m=0, c=c0, g=g, J=J)
    st.history.append(_row(st, t0))
    return st


def _initial_alpha(config: CgConfig, g0: GradientField) -> float:
    if config.alpha0 is not None:
        return config.alpha0
    scale = max(g0.max_abs(), config.alpha0_floor)
    return config.alpha0_scale / scale if scale > 0 else config.alpha0_scale


def cg_step(
    state: InversionState,
    problem: InversionProblem,
    config: CgConfig,
    alpha_start: float,
    t0: float,
) -> InversionState:
    """One projected FR update c^{m+1} = P(c^m + alpha d^m), with J and g at c^{m+1}."""
    g = state.g
    gn2 = state.gnorm**2
    restart = (
        state.d is None
        or state.gnorm_prev is None
        or (config.restart_every and state.m % config.restart_every == 0)
    )
    if restart:
        beta = 0.0
        d = -g
    else:
        beta = gn2 / state.gnorm_prev**2
        d = GradientField(g.grid, -g.values + beta * state.d.values)
        if g.dot(d) >= 0.0:
            log.info("m=%d: FR direction is not a descent direction, restarting", state.m)
            beta = 0.0
            d = -g

    flags = list(state.flags)
    c = state.c
    upper = c.upper

    def trial(alpha: float) -> tuple[CoefficientField, float]:
        ct = project(c.copy(c.values + alpha * d.values), upper)
        return ct, problem.objective(ct)

    def search(direction: GradientField) -> tuple[bool, float, CoefficientField, float]:
        alpha = alpha_start
        for _ in range(config.max_trials):
            ct = project(c.copy(c.values + alpha * direction.values), upper)
            Jt = problem.objective(ct)
            # projected Armijo condition on the actual displacement
            slope = g.dot(ct.values - c.values)
            if Jt <= state.J + config.armijo * slope and Jt <= state.J:
                return True, alpha, ct, Jt
            alpha *= config.shrink
        return False, alpha, ct, Jt

    if config.alpha is not None:
        alpha = config.alpha
        c_new, _ = trial(alpha)
    else:
        accepted, alpha, c_new, J_new = search(d)
        if not accepted and beta != 0.0:
            log.info("m=%d: no Armijo step along the CG direction, retrying along -g", state.m)
            beta = 0.0
            d = -g
            accepted, alpha, c_new, J_new = search(d)
        if not accepted:
            alpha = alpha_start / 10.0
            c_new, J_new = trial(alpha)
            flags.append(f"line search failed at m={state.m}")
            if J_new > state.J:
                raise LineSearchFailed(f"no decrease along d at m={state.m}")

    J_next, g_next = problem.objective_and_gradient(c_new)
    nxt = InversionState(
        m=state.m + 1,
        c=c_new,
        g=g_next,
        J=J_next,
        d=d,
        gnorm_prev=state.gnorm,
        alpha=alpha,
        beta=beta,
        history=list(state.history),
        flags=flags,
    )
    nxt.history.append(_row(nxt, t0))
    return nxt


def _stalled(history: list[dict], config: CgConfig) -> bool:
    w = config.stall_window
    if len(history) < w + 1:
        return False
    norms = [r["gnorm"] for r in history[-(w + 1):]]
    return all(abs(b - a) < config.stall_rtol * max(abs(a), 1e-300) for a, b in zip(norms, norms[1:]))


@dataclass
class RunReport:
    rows: list[dict]
    stop_reason: str
    n_iter: int
    error_bound: list[tuple[int, float, float]] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=REPORT_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: (repr(float(v)) if k != "m" else int(v)) for k, v in r.items()})
        return buf.getvalue()


def run(
    config: CgConfig,
    problem: InversionProblem,
    c_init: CoefficientField | None = None,
    c_star: CoefficientField | None = None,
    bound_params: tuple[float, float, float] | None = None,
    callback=None,
) -> tuple[InversionState, RunReport]:
    """Iterate until ||g|| <= theta, max_iter updates, or the gradient norm stalls.

    With ``c_star`` and ``bound_params = (delta, nu, xi)`` the error bound
    diagnostic is evaluated at every iterate.
    """
    t0 = time.perf_counter()
    c_init = problem.spec.c0 if c_init is None else c_init
    state = initial_state(problem, project(c_init), t0)
    bound = []

    def diag(st: InversionState):
        if c_star is not None and bound_params is not None:
            lhs, rhs = error_bound_from_gradient(st.g, st.c, problem.spec.c0, c_star, *bound_params)
            bound.append((st.m, lhs, rhs))
        if callback is not None:
            callback(st)

    diag(state)
    log.info("m=0 J=%.6e |g|=%.3e max c=%.4f", state.J, state.gnorm, state.c.max())
    alpha_start = config.alpha if config.alpha is not None else _initial_alpha(config, state.g)
    alpha_cap = alpha_start * config.grow**4

    reason = "max_iter"
    if state.gnorm <= config.theta:
        reason = "gradient_tolerance"
    elif config.max_iter == 0:
        reason = "max_iter"
    else:
        while state.m < config.max_iter:
            try:
                state = cg_step(state, problem, config, alpha_start, t0)
            except LineSearchFailed as exc:
                log.warning("%s", exc)
                state.flags.append(str(exc))
                reason = "line_search_failed"
                break
            diag(state)
            log.info(
                "m=%d J=%.6e |g|=%.3e max c=%.4f alpha=%.3e beta=%.3f",
                state.m, state.J, state.gnorm, state.c.max(), state.alpha, state.beta,
            )
            if config.alpha is None:
                alpha_start = min(state.alpha * config.grow, alpha_cap)
            if state.gnorm <= config.theta:
                reason = "gradient_tolerance"
                break
            if _stalled(state.history, config):
                reason = "stabilized"
                break
    report = RunReport(list(state.history), reason, state.m, bound, list(state.flags))
    return state, report


def monotone(history: list[dict]) -> bool:
    js = [r["J"] for r in history]
    return all(b <= a for a, b in zip(js, js[1:]))


def gradient_check(
    problem: InversionProblem,
    c: CoefficientField,
    dc,
    eps_list=(1e-2, 1e-3, 1e-4, 1e-5, 1e-6),
) -> list[tuple[float, float, float, float]]:
    """Central differences of J along ``dc`` against <g, dc>.

    Returns rows (eps, fd, adjoint, relative error).  ``dc`` should vanish
    outside the inner box, where the gradient is defined to be zero.
    """
    dv = getattr(dc, "values", dc)
    _, g = problem.objective_and_gradient(c)
    adj = g.dot(dv)
    rows = []
    for eps in eps_list:
        jp = problem.objective(c.copy(c.values + eps * dv))
        jm = problem.objective(c.copy(c.values - eps * dv))
        fd = (jp - jm) / (2.0 * eps)
        rows.append((eps, fd, adj, abs(fd - adj) / max(abs(adj), 1e-300)))
    return rows

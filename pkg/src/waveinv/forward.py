"""Explicit leapfrog solver for u_tt = div(c grad u) on the structured lattice.

The semi-discrete system is the lumped-mass form of the weak problem

    M u'' + K(c) u = G(t) - D u'

with M the nodal lumped mass, K the edge-based stiffness of the
piecewise-constant coefficient and D the lumped boundary mass of the
faces that are currently absorbing.  In the interior this is the usual
7-point variable-coefficient stencil; on faces it is the ghost-node
Neumann closure.  Time stepping is the centered second-order scheme

    (M + tau/2 D) u^{k+1} = (2M - tau^2 K) u^k - (M - tau/2 D) u^{k-1} + tau^2 G^k.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CflViolation, NonFiniteField
from .fields import BoundaryTrace, WaveHistory
from .geometry import Face, Grid, faces

log = logging.getLogger(__name__)

BLOWUP_CHECK_EVERY = 50


@dataclass(frozen=True)
class SourceSpec:
    """Plane-wave pulse sin(omega t) on (0, 2 pi / omega], zero afterwards."""

    omega: float = 40.0
    amplitude: float = 1.0

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError("omega must be positive")

    @property
    def t1(self) -> float:
        return 2.0 * math.pi / self.omega

    def __call__(self, t):
        return pulse_value(self, t)


def pulse_value(src: SourceSpec, t):
    t = np.asarray(t, dtype=float)
    on = (t > 0.0) & (t <= src.t1)
    out = np.where(on, src.amplitude * np.sin(src.omega * t), 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class InitialCondition:
    """``kind`` is "zero", "gaussian_bump" (f0 = exp(-|x|^2), f1 = 0) or
    "custom" with explicit nodal arrays."""

    kind: str = "zero"
    f0: np.ndarray | None = field(default=None, repr=False)
    f1: np.ndarray | None = field(default=None, repr=False)
    scale: float = 1.0

    def evaluate(self, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == "zero":
            f0 = np.zeros(grid.n)
            f1 = np.zeros(grid.n)
        elif self.kind == "gaussian_bump":
            x = grid.node_coords()
            f0 = np.exp(-np.sum(x**2, axis=-1))
            f1 = np.zeros(grid.n)
        elif self.kind == "custom":
            f0 = np.zeros(grid.n) if self.f0 is None else np.asarray(self.f0, dtype=float)
            f1 = np.zeros(grid.n) if self.f1 is None else np.asarray(self.f1, dtype=float)
            if f0.shape != grid.n or f1.shape != grid.n:
                raise ValueError("custom initial data must have the grid node shape")
        else:
            raise ValueError(f"unknown initial condition {self.kind!r}")
        return self.scale * f0, self.scale * f1


@dataclass(frozen=True)
class TimeAxis:
    tau: float
    T: float

    def __post_init__(self):
        if self.tau <= 0 or self.T <= 0:
            raise ValueError("tau and T must be positive")
        ratio = self.T / self.tau
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ValueError(f"T={self.T} is not an integer multiple of tau={self.tau}")

    @property
    def nt(self) -> int:
        return int(round(self.T / self.tau))

    def times(self) -> np.ndarray:
        return self.tau * np.arange(self.nt + 1)

    def refined(self, factor: int = 2) -> "TimeAxis":
        return TimeAxis(self.tau / factor, self.T)


def cell_values(c) -> np.ndarray:
    """Per-cell array of a CoefficientField, GradientField or plain array."""
    values = getattr(c, "values", c)
    return np.asarray(values, dtype=float)


def cfl_max_tau(grid: Grid, c) -> float:
    """Largest stable leapfrog step h / (sqrt(max c) sqrt(3))."""
    cmax = float(np.max(cell_values(c)))
    return grid.h / (math.sqrt(cmax) * math.sqrt(3.0))


def _edge_weights(c: np.ndarray, h: float, axis: int) -> np.ndarray:
    """h/4 times the sum of the (up to four) cells sharing each lattice edge."""
    cm = np.moveaxis(c, axis, 0)
    cp = np.pad(cm, ((0, 0), (1, 1), (1, 1)))
    w = cp[:, :-1, :-1] + cp[:, 1:, :-1] + cp[:, :-1, 1:] + cp[:, 1:, 1:]
    return np.moveaxis(0.25 * h * w, 0, axis)


def _sum_cell_edges(p: np.ndarray, axis: int) -> np.ndarray:
    pm = np.moveaxis(p, axis, 0)
    s = pm[:, :-1, :-1] + pm[:, 1:, :-1] + pm[:, :-1, 1:] + pm[:, 1:, 1:]
    return np.moveaxis(s, 0, axis)


class Stiffness:
    """Edge-based stiffness K(c) with a(u, v) = sum_K c_K sum_{e in K} h/4 du_e dv_e."""

    def __init__(self, grid: Grid, c):
        self.grid = grid
        self.c = cell_values(c)
        if self.c.shape != grid.cell_shape:
            raise ValueError(f"coefficient shape {self.c.shape} != cells {grid.cell_shape}")
        self.weights = [_edge_weights(self.c, grid.h, a) for a in range(3)]

    def apply(self, u: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        ku = np.zeros_like(u) if out is None else out
        if out is not None:
            ku.fill(0.0)
        for a in range(3):
            flux = self.weights[a] * np.diff(u, axis=a)
            lo = [slice(None)] * 3
            hi = [slice(None)] * 3
            lo[a] = slice(None, -1)
            hi[a] = slice(1, None)
            ku[tuple(lo)] -= flux
            ku[tuple(hi)] += flux
        return ku

    def cell_products(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """d a(u, v) / d c_K for every cell: h/4 sum over the cell's 12 edges."""
        out = np.zeros(self.grid.cell_shape)
        for a in range(3):
            out += _sum_cell_edges(np.diff(u, axis=a) * np.diff(v, axis=a), a)
        return 0.25 * self.grid.h * out

    def energy(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(np.sum(self.c * self.cell_products(u, v)))


class Scheme:
    """Precomputed operators of the leapfrog scheme shared by forward and adjoint."""

    def __init__(
        self,
        grid: Grid,
        c,
        src: SourceSpec,
        ta: TimeAxis,
        absorbing: tuple[str, ...] = ("front", "back"),
        check_cfl: bool = True,
    ):
        self.grid = grid
        self.src = src
        self.ta = ta
        self.K = Stiffness(grid, c)
        if check_cfl:
            bound = cfl_max_tau(grid, self.K.c)
            if ta.tau > bound * (1.0 + 1e-12):
                raise CflViolation(f"tau={ta.tau:.6g} exceeds the CFL bound {bound:.6g}")
        self.absorbing = tuple(a.lower() for a in absorbing)
        self.M = grid.lumped_mass
        self.bF = grid.front_area
        self.bB = grid.back_area
        self.front = faces(grid, Face.FRONT)
        self.times = ta.times()
        self.pulse_on = (self.times > 0.0) & (self.times <= src.t1)

        tau = ta.tau
        d_pulse = self.bB.copy() if "back" in self.absorbing else np.zeros(grid.n)
        d_after = d_pulse + (self.bF if "front" in self.absorbing else 0.0)
        self._d = (d_pulse, d_after)
        self._inv_a = tuple(1.0 / (self.M + 0.5 * tau * d) for d in self._d)
        self._b = tuple(self.M - 0.5 * tau * d for d in self._d)

    def phase(self, k: int) -> int:
        """0 while the pulse is driving the FRONT face, 1 afterwards."""
        return 0 if self.times[k] <= self.src.t1 else 1

    def damping(self, k: int) -> np.ndarray:
        return self._d[self.phase(k)]

    def inv_a(self, k: int) -> np.ndarray:
        return self._inv_a[self.phase(k)]

    def b(self, k: int) -> np.ndarray:
        return self._b[self.phase(k)]

    def load(self, k: int) -> np.ndarray | float:
        if not self.pulse_on[k]:
            return 0.0
        return self.bF * pulse_value(self.src, self.times[k])

    def front_values(self, u: np.ndarray) -> np.ndarray:
        return u[:, :, 0].ravel(order="F")

    def first_step(self, u0: np.ndarray, f1: np.ndarray) -> np.ndarray:
        tau = self.ta.tau
        rhs = -self.K.apply(u0) + self.load(0) - self.damping(0) * f1
        return u0 + tau * f1 + 0.5 * tau**2 * rhs / self.M

    def step(self, k: int, u_prev: np.ndarray, u_cur: np.ndarray, ku: np.ndarray) -> np.ndarray:
        """u^{k+1} from u^{k-1}, u^k and K u^k."""
        tau2 = self.ta.tau ** 2
        rhs = 2.0 * self.M * u_cur - tau2 * ku - self.b(k) * u_prev
        if self.pulse_on[k]:
            rhs += tau2 * self.load(k)
        return rhs * self.inv_a(k)


def _check_finite(u: np.ndarray, k: int, what: str) -> None:
    if not np.all(np.isfinite(u)):
        raise NonFiniteField(f"{what} field became non-finite at level {k}")


def forward_solve(
    grid: Grid,
    c,
    src: SourceSpec,
    ic: InitialCondition,
    ta: TimeAxis,
    record: str = "trace_only",
    absorbing: tuple[str, ...] = ("front", "back"),
) -> tuple[BoundaryTrace, WaveHistory | None]:
    """Run the state problem; return the FRONT trace and optionally the full history."""
    if record not in ("trace_only", "full"):
        raise ValueError(f"record must be 'trace_only' or 'full', not {record!r}")
    scheme = Scheme(grid, c, src, ta, absorbing)
    return run_forward(scheme, ic, record == "full")


def run_forward(scheme: Scheme, ic: InitialCondition, full: bool) -> tuple[BoundaryTrace, WaveHistory | None]:
    grid, nt = scheme.grid, scheme.ta.nt
    u0, f1 = ic.evaluate(grid)
    trace = np.empty((nt + 1, grid.n[0] * grid.n[1]))
    hist = np.empty((nt + 1,) + grid.n) if full else None

    u_prev = u0
    u_cur = scheme.first_step(u0, f1)
    trace[0] = scheme.front_values(u_prev)
    trace[1] = scheme.front_values(u_cur)
    if full:
        hist[0] = u_prev
        hist[1] = u_cur
    ku = np.empty(grid.n)
    for k in range(1, nt):
        scheme.K.apply(u_cur, out=ku)
        u_next = scheme.step(k, u_prev, u_cur, ku)
        u_prev, u_cur = u_cur, u_next
        trace[k + 1] = scheme.front_values(u_cur)
        if full:
            hist[k + 1] = u_cur
        if (k + 1) % BLOWUP_CHECK_EVERY == 0:
            _check_finite(u_cur, k + 1, "forward")
    _check_finite(u_cur, nt, "forward")
    bt = BoundaryTrace(trace, scheme.ta.tau, grid, scheme.front)
    wh = WaveHistory(grid, hist, scheme.ta.tau) if full else None
    return bt, wh


def discrete_energy(scheme: Scheme, u_prev: np.ndarray, u_cur: np.ndarray) -> float:
    """Leapfrog energy between two consecutive levels.

    Conserved exactly by the undamped, unforced scheme and non-increasing
    when absorbing faces are active.
    """
    tau = scheme.ta.tau
    v = (u_cur - u_prev) / tau
    kin = 0.5 * float(np.sum(scheme.M * v * v))
    pot = 0.5 * scheme.K.energy(u_cur, u_prev)
    return kin + pot

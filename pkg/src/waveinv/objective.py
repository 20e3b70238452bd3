"""Tikhonov functional, adjoint-state gradient, box projection and image post-processing."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adjoint import CutoffSpec, cutoff, trapezoid_weights
from .errors import HistoryMismatch, TraceMismatch
from .fields import BoundaryTrace, CoefficientField, WaveHistory
from .forward import Stiffness, cell_values
from .geometry import Grid


@dataclass(frozen=True)
class GammaRule:
    """gamma = delta ** (2 nu) for a known noise level delta."""

    delta: float
    nu: float

    def __post_init__(self):
        if not 0 < self.nu < 0.25:
            raise ValueError("nu must lie in (0, 1/4)")
        if self.delta <= 0:
            raise ValueError("delta must be positive")

    @property
    def gamma(self) -> float:
        return self.delta ** (2 * self.nu)


@dataclass(eq=False)
class TikhonovSpec:
    gamma: float
    c0: CoefficientField
    cutoff: CutoffSpec | None = None
    gamma_rule: GammaRule | None = None

    def __post_init__(self):
        if self.gamma_rule is not None:
            self.gamma = self.gamma_rule.gamma
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")

    def weights(self, times: np.ndarray) -> np.ndarray:
        """Cut-off weight z(t_k) on each time level."""
        T = float(times[-1])
        if self.cutoff is None:
            return np.ones_like(times)
        return cutoff(self.cutoff, times, T)


@dataclass(eq=False)
class GradientField:
    """L2 gradient density per cell; zero outside the inner box."""

    grid: Grid
    values: np.ndarray

    def dot(self, other) -> float:
        """L2(Omega) inner product with another per-cell field."""
        return float(self.grid.h**3 * np.sum(self.values * cell_values(other)))

    def norm(self) -> float:
        return float(np.sqrt(self.grid.h**3 * np.sum(self.values**2)))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __neg__(self) -> "GradientField":
        return GradientField(self.grid, -self.values)


def l2_norm(grid: Grid, values: np.ndarray) -> float:
    return float(np.sqrt(grid.h**3 * np.sum(np.asarray(values) ** 2)))


def misfit(u_trace: BoundaryTrace, data: BoundaryTrace, spec: TikhonovSpec, grid: Grid) -> float:
    """Data term 1/2 sum_k sum_i (u - data)^2 z(t_k) b_i tau w_k."""
    u_trace.check_aligned(data)
    nt = u_trace.nt
    n1, n2, _ = grid.n
    if u_trace.n_face != n1 * n2:
        raise TraceMismatch(f"trace has {u_trace.n_face} face nodes, grid front has {n1 * n2}")
    area = grid.front_area[:, :, 0].ravel(order="F")
    tw = u_trace.tau * trapezoid_weights(nt) * spec.weights(u_trace.times())
    r2 = (u_trace.values - data.values) ** 2
    return 0.5 * float(np.sum(tw * (r2 @ area)))


def regularization(c, spec: TikhonovSpec, grid: Grid) -> float:
    dc = cell_values(c) - spec.c0.values
    return 0.5 * spec.gamma * grid.h**3 * float(np.sum(dc * dc))


def functional(u_trace: BoundaryTrace, data: BoundaryTrace, c: CoefficientField, spec: TikhonovSpec) -> float:
    """Tikhonov functional J(c) for a state trace already computed at ``c``."""
    grid = c.grid
    return misfit(u_trace, data, spec, grid) + regularization(c, spec, grid)


def gradient(
    u_hist: WaveHistory, lam_hist: WaveHistory, c: CoefficientField, spec: TikhonovSpec
) -> GradientField:
    """g = int_0^T grad u . grad lam dt + gamma (c - c0), zeroed outside the inner box."""
    if u_hist.values.shape != lam_hist.values.shape:
        raise HistoryMismatch(
            f"history shapes differ: {u_hist.values.shape} vs {lam_hist.values.shape}"
        )
    if abs(u_hist.tau - lam_hist.tau) > 1e-12 * u_hist.tau:
        raise HistoryMismatch(f"time steps differ: {u_hist.tau} vs {lam_hist.tau}")
    grid = c.grid
    if u_hist.values.shape[1:] != grid.n:
        raise HistoryMismatch("histories do not live on the coefficient's grid")
    stiff = Stiffness(grid, c)
    w = trapezoid_weights(u_hist.nt)
    acc = np.zeros(grid.cell_shape)
    for k in range(u_hist.nt + 1):
        lam = lam_hist.values[k]
        if w[k] and np.any(lam):
            acc += w[k] * stiff.cell_products(u_hist.values[k], lam)
    g = u_hist.tau * acc / grid.h**3 + spec.gamma * (c.values - spec.c0.values)
    g[~grid.inner_cells] = 0.0
    return GradientField(grid, g)


def project(c: CoefficientField, upper: float | None = None) -> CoefficientField:
    """Clamp to the admissible box [1, d]; cells outside the inner box are pinned to 1."""
    d = c.upper if upper is None else upper
    v = np.clip(c.values, 1.0, d)
    v[~c.grid.inner_cells] = 1.0
    return CoefficientField(c.grid, v, d)


def postprocess(c: CoefficientField, P: float) -> CoefficientField:
    """Keep values above P times the inner-box maximum, set the rest to 1."""
    if not 0 < P < 1:
        raise ValueError("P must lie in (0, 1)")
    inner = c.grid.inner_cells
    cmax = float(c.values[inner].max()) if inner.any() else float(c.values.max())
    v = np.where(c.values > P * cmax, c.values, 1.0)
    return CoefficientField(c.grid, v, c.upper)


def error_bound_from_gradient(
    g: GradientField,
    c: CoefficientField,
    c0: CoefficientField,
    c_star: CoefficientField,
    delta: float,
    nu: float,
    xi: float,
) -> tuple[float, float]:
    """(||c - c*||, 2/delta^(2nu) ||g|| + xi ||c0 - c*||) in L2 over the cells."""
    grid = c.grid
    lhs = l2_norm(grid, c.values - c_star.values)
    rhs = 2.0 / delta ** (2 * nu) * g.norm() + xi * l2_norm(grid, c0.values - c_star.values)
    return lhs, rhs


def error_bound(
    u_hist: WaveHistory,
    lam_hist: WaveHistory,
    c: CoefficientField,
    c0: CoefficientField,
    spec: TikhonovSpec,
    delta: float,
    nu: float,
    xi: float,
    c_star: CoefficientField,
) -> tuple[float, float]:
    g = gradient(u_hist, lam_hist, c, spec)
    return error_bound_from_gradient(g, c, c0, c_star, delta, nu, xi)

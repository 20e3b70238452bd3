"""Backward-in-time adjoint solver driven by the FRONT boundary residual.

The sweep is the transpose of the leapfrog recurrence in ``forward``:

    C_{k-1} lam^{k-1} = (2M - tau^2 K) lam^k - B_{k+1} lam^{k+1} - tau^2 S^k

with C_0 = M, C_k = M + tau/2 D_k, B_k = M - tau/2 D_k and
S^k = w_k b_F (u - u_data)^k z(t_k) the lumped boundary load (w_k are the
trapezoidal weights).  Away from the pulse/absorbing switch this is the
forward scheme run backward in time, with the absorbing faces handled
the same way.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TraceMismatch
from .fields import BoundaryTrace, WaveHistory
from .forward import Scheme, SourceSpec, TimeAxis, _check_finite
from .geometry import Grid


@dataclass(frozen=True)
class CutoffSpec:
    """Quintic smoothstep taper from 1 to 0 over the last ``window`` of [0, T]."""

    window: float

    def __post_init__(self):
        if self.window <= 0:
            raise ValueError("cutoff window must be positive")


def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)


def cutoff(spec: CutoffSpec, t, T: float):
    if not 0 < spec.window < T:
        raise ValueError(f"cutoff window {spec.window} must lie in (0, T={T})")
    t = np.asarray(t, dtype=float)
    z = 1.0 - _smoothstep((t - (T - spec.window)) / spec.window)
    z = np.where(t >= T, 0.0, z)
    return float(z) if z.ndim == 0 else z


def residual_trace(u_trace: BoundaryTrace, data: BoundaryTrace, spec: CutoffSpec | None) -> BoundaryTrace:
    """(u - data) * z(t) on the FRONT face; zero at the final level unless ``spec`` is None."""
    u_trace.check_aligned(data)
    if spec is None:
        z = np.ones(u_trace.nt + 1)
    else:
        z = cutoff(spec, u_trace.times(), u_trace.T)
    return u_trace.copy((u_trace.values - data.values) * z[:, None])


def trapezoid_weights(nt: int) -> np.ndarray:
    w = np.ones(nt + 1)
    w[0] = w[-1] = 0.5
    return w


def _face_to_nodes(scheme: Scheme, row: np.ndarray) -> np.ndarray:
    n1, n2, _ = scheme.grid.n
    out = np.zeros(scheme.grid.n)
    out[:, :, 0] = row.reshape(n2, n1).T
    return out


def run_adjoint(scheme: Scheme, residual: BoundaryTrace) -> WaveHistory:
    grid, nt, tau = scheme.grid, scheme.ta.nt, scheme.ta.tau
    if residual.values.shape != (nt + 1, grid.n[0] * grid.n[1]):
        raise TraceMismatch(
            f"residual shape {residual.values.shape} does not match "
            f"({nt + 1}, {grid.n[0] * grid.n[1]})"
        )
    if abs(residual.tau - tau) > 1e-12 * tau:
        raise TraceMismatch(f"residual tau={residual.tau} != solver tau={tau}")
    w = trapezoid_weights(nt)
    tau2 = tau * tau
    M = scheme.M

    lam = np.zeros((nt + 1,) + grid.n)
    ku = np.empty(grid.n)
    # lam^{nt} = 0 and lam^{nt+1} = 0 by the terminal conditions
    for k in range(nt, 0, -1):
        rhs = -tau2 * scheme.bF * _face_to_nodes(scheme, w[k] * residual.values[k])
        if k < nt:
            scheme.K.apply(lam[k], out=ku)
            rhs += 2.0 * M * lam[k] - tau2 * ku
        if k + 1 < nt:
            rhs -= scheme.b(k + 1) * lam[k + 1]
        lam[k - 1] = rhs / M if k == 1 else rhs * scheme.inv_a(k - 1)
        if k % 50 == 0:
            _check_finite(lam[k - 1], k - 1, "adjoint")
    _check_finite(lam[0], 0, "adjoint")
    return WaveHistory(grid, lam, tau)


def adjoint_solve(
    grid: Grid,
    c,
    residual: BoundaryTrace,
    ta: TimeAxis,
    src: SourceSpec,
    absorbing: tuple[str, ...] = ("front", "back"),
) -> WaveHistory:
    """Solve the adjoint problem backward from lam(T) = lam_t(T) = 0.

    ``src`` fixes the instant at which the FRONT face switches from the
    pulse-driven Neumann condition to the absorbing one.
    """
    return run_adjoint(Scheme(grid, c, src, ta, absorbing), residual)


# one-step operators, used to check the discrete duality


def forward_step_pair(scheme: Scheme, k: int, x: np.ndarray, y: np.ndarray):
    """(u^{k-1}, u^k) -> (u^k, u^{k+1}) for the unforced scheme."""
    ky = scheme.K.apply(y)
    nxt = (2.0 * scheme.M * y - scheme.ta.tau**2 * ky - scheme.b(k) * x) * scheme.inv_a(k)
    return y, nxt


def adjoint_step_pair(scheme: Scheme, k: int, a: np.ndarray, b: np.ndarray):
    """Transpose of :func:`forward_step_pair` in the Euclidean inner product."""
    q = b * scheme.inv_a(k)
    kq = scheme.K.apply(q)
    return -scheme.b(k) * q, a + 2.0 * scheme.M * q - scheme.ta.tau**2 * kq

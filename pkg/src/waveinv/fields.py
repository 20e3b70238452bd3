"""Field containers, conductivity phantoms and the boundary-data noise model."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import GridMismatch, TraceMismatch, ValueOutOfBounds
from .geometry import Face, FaceSet, Grid, faces

# default admissible upper bounds
D_BALLS = 5.0
D_GAUSSIAN = 10.0


@dataclass(eq=False)
class CoefficientField:
    """Piecewise-constant coefficient, one value per lattice cell."""

    grid: Grid
    values: np.ndarray
    upper: float = D_GAUSSIAN

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.cell_shape:
            raise GridMismatch(f"values shape {self.values.shape} != cells {self.grid.cell_shape}")

    def copy(self, values: np.ndarray | None = None) -> "CoefficientField":
        v = self.values.copy() if values is None else values
        return CoefficientField(self.grid, v, self.upper)

    def max(self) -> float:
        return float(self.values.max())

    def is_admissible(self) -> bool:
        v = self.values
        return bool(
            np.all(v >= 1.0) and np.all(v <= self.upper) and np.all(v[~self.grid.inner_cells] == 1.0)
        )

    @classmethod
    def uniform(cls, grid: Grid, value: float = 1.0, upper: float = D_GAUSSIAN) -> "CoefficientField":
        return cls(grid, np.full(grid.cell_shape, float(value)), upper)


@dataclass(eq=False)
class WaveState:
    grid: Grid
    u: np.ndarray
    k: int


@dataclass(eq=False)
class WaveHistory:
    """Nodal field at every time level; ``values[k]`` has the grid shape."""

    grid: Grid
    values: np.ndarray  # (nt + 1, n1, n2, n3)
    tau: float

    @property
    def nt(self) -> int:
        return self.values.shape[0] - 1

    @property
    def T(self) -> float:
        return self.nt * self.tau

    def __len__(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, k: int) -> WaveState:
        k = range(len(self))[k]
        return WaveState(self.grid, self.values[k], k)

    def __iter__(self):
        return (self[k] for k in range(len(self)))


@dataclass(eq=False)
class BoundaryTrace:
    """Values of u on the FRONT face, indexed ``[time level, face node]``."""

    values: np.ndarray
    tau: float
    grid: Grid | None = None
    faces: FaceSet | None = field(default=None, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("trace values must be 2-D (levels, face nodes)")
        if self.grid is not None and self.faces is None:
            self.faces = faces(self.grid, Face.FRONT)
        if self.faces is not None and len(self.faces) != self.values.shape[1]:
            raise TraceMismatch(
                f"trace has {self.values.shape[1]} face nodes, face set has {len(self.faces)}"
            )

    @property
    def nt(self) -> int:
        return self.values.shape[0] - 1

    @property
    def n_face(self) -> int:
        return self.values.shape[1]

    @property
    def T(self) -> float:
        return self.nt * self.tau

    def times(self) -> np.ndarray:
        return self.tau * np.arange(self.nt + 1)

    def as_face_array(self) -> np.ndarray:
        """Values reshaped to ``(levels, n1, n2)`` (requires a grid)."""
        if self.grid is None:
            raise ValueError("trace has no grid attached")
        n1, n2, _ = self.grid.n
        return self.values.reshape(-1, n2, n1).transpose(0, 2, 1)

    def copy(self, values: np.ndarray | None = None) -> "BoundaryTrace":
        v = self.values.copy() if values is None else values
        return BoundaryTrace(v, self.tau, self.grid, self.faces)

    def check_aligned(self, other: "BoundaryTrace") -> None:
        if self.values.shape != other.values.shape:
            raise TraceMismatch(f"trace shapes differ: {self.values.shape} vs {other.values.shape}")
        if abs(self.tau - other.tau) > 1e-12 * max(self.tau, other.tau):
            raise TraceMismatch(f"time steps differ: {self.tau} vs {other.tau}")


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float = 0.0  # percent
    seed: int = 0
    mode: str = "random"  # or "literal": deterministic scale by (1 + sigma/100)

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.mode not in ("random", "literal"):
            raise ValueError(f"unknown noise mode {self.mode!r}")


# ---------------------------------------------------------------- phantoms


def gaussian1(x: np.ndarray) -> np.ndarray:
    """Single smooth spike of height 5 over a unit background, centered at the origin."""
    x = np.asarray(x, dtype=float)
    r2 = (x[..., 0] ** 2 + x[..., 1] ** 2 + x[..., 2] ** 2) / 0.2
    return 1.0 + 5.0 * np.exp(-r2)


def gaussian3(x: np.ndarray) -> np.ndarray:
    """Three spikes of height 5 centered at x1 = -2, 0, 2."""
    x = np.asarray(x, dtype=float)
    out = np.ones(x.shape[:-1])
    for shift in (-2.0, 0.0, 2.0):
        r2 = ((x[..., 0] - shift) ** 2 + x[..., 1] ** 2 + x[..., 2] ** 2) / 0.2
        out = out + 5.0 * np.exp(-r2)
    return out


@dataclass(frozen=True)
class Ball:
    center: tuple[float, float, float]
    radius: float
    value: float = 4.0


def default_balls(case: str = "i", value: float = 4.0) -> list[Ball]:
    """Three small scatterers on the x3 = 0 plane; case "ii" moves the
    middle (smallest) one 0.3 toward the FRONT face."""
    shift = -0.3 if case == "ii" else 0.0
    return [
        Ball((-1.5, 0.0, 0.0), 0.3, value),
        Ball((0.0, 0.0, shift), 0.2, value),
        Ball((1.5, 0.0, 0.0), 0.4, value),
    ]


def phantom(
    grid: Grid,
    kind: str,
    *,
    balls: Sequence[Ball] | None = None,
    value: float = 1.0,
    upper: float | None = None,
) -> CoefficientField:
    """Sample a conductivity phantom at the cell centers of ``grid``.

    ``kind`` is one of ``"uniform"``, ``"balls"``, ``"gaussian1"``,
    ``"gaussian3"``.  Cells outside the inner box are set to 1.
    """
    centers = grid.cell_centers()
    if kind == "uniform":
        vals = np.full(grid.cell_shape, float(value))
        d = D_GAUSSIAN if upper is None else upper
    elif kind == "gaussian1":
        vals = gaussian1(centers)
        d = D_GAUSSIAN if upper is None else upper
    elif kind == "gaussian3":
        vals = gaussian3(centers)
        d = D_GAUSSIAN if upper is None else upper
    elif kind == "balls":
        balls = default_balls() if balls is None else list(balls)
        d = D_BALLS if upper is None else upper
        vals = np.ones(grid.cell_shape)
        for b in balls:
            if not grid.inner.contains(np.asarray(b.center), strict=True):
                raise ValueOutOfBounds(f"ball center {b.center} outside the inner box")
            if not 1.0 <= b.value <= d:
                raise ValueOutOfBounds(f"ball value {b.value} outside [1, {d}]")
            inside = np.sum((centers - np.asarray(b.center)) ** 2, axis=-1) <= b.radius**2
            vals[inside] = b.value
    else:
        raise ValueError(f"unknown phantom kind {kind!r}")

    vals[~grid.inner_cells] = 1.0
    if vals.min() < 1.0 or vals.max() > d:
        raise ValueOutOfBounds(f"phantom values in [{vals.min()}, {vals.max()}] exceed [1, {d}]")
    return CoefficientField(grid, vals, d)


# ---------------------------------------------------------------- data


def add_noise(trace: BoundaryTrace, spec: NoiseSpec) -> BoundaryTrace:
    """Multiplicative noise u * (1 + sigma/100 * r), r ~ U[-1, 1] i.i.d."""
    if not np.all(np.isfinite(trace.values)):
        raise ValueError("trace contains non-finite values")
    if spec.sigma == 0:
        return trace.copy()
    if spec.mode == "literal":
        return trace.copy(trace.values * (1.0 + spec.sigma / 100.0))
    rng = np.random.default_rng(spec.seed)
    r = rng.uniform(-1.0, 1.0, size=trace.values.shape)
    return trace.copy(trace.values * (1.0 + spec.sigma / 100.0 * r))


def refine_grid(grid: Grid, factor: int = 2) -> Grid:
    from .geometry import build_grid

    return build_grid(grid.domain, grid.inner, grid.h / factor)


def restrict_to_coarse(fine: BoundaryTrace, coarse_grid: Grid, coarse_tau: float) -> BoundaryTrace:
    """Point-sample a trace recorded on a 2x refined grid and time axis."""
    fg = fine.grid
    if fg is None:
        raise GridMismatch("fine trace carries no grid")
    if abs(2 * fg.h - coarse_grid.h) > 1e-9 * coarse_grid.h:
        raise GridMismatch(f"fine h={fg.h} is not half of coarse h={coarse_grid.h}")
    if not np.allclose(fg.domain.lo, coarse_grid.domain.lo, atol=1e-9 * coarse_grid.h):
        raise GridMismatch("grids are not aligned")
    if any(nf != 2 * (nc - 1) + 1 for nf, nc in zip(fg.n, coarse_grid.n)):
        raise GridMismatch(f"node counts {fg.n} vs {coarse_grid.n} do not nest")
    if abs(2 * fine.tau - coarse_tau) > 1e-9 * coarse_tau:
        raise GridMismatch(f"fine tau={fine.tau} is not half of coarse tau={coarse_tau}")
    if fine.nt % 2:
        raise GridMismatch("fine trace has an odd number of steps")
    face = fine.as_face_array()[::2, ::2, ::2]
    vals = face.transpose(0, 2, 1).reshape(face.shape[0], -1)
    return BoundaryTrace(np.ascontiguousarray(vals), coarse_tau, coarse_grid)

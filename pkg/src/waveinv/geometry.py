"""Structured 3D lattice with an inner (unknown coefficient) box.

Arrays on the lattice are stored with shape ``(n1, n2, n3)``; flat node
indices follow x1-fastest ordering, i.e. ``i1 + n1 * (i2 + n2 * i3)``
(numpy ``order="F"``).  Cells are the voxels between nodes, shape
``(n1 - 1, n2 - 1, n3 - 1)``.  x3 is the propagation axis: the FRONT face
(backscattering boundary) is the plane of minimal x3.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property

import numpy as np

from .errors import IncommensurateExtent, MarginTooSmall

_REL_TOL = 1e-9


class Region(IntEnum):
    OUTER = 0
    OVERLAP = 1
    INNER = 2


class Face(IntEnum):
    NONE = 0
    FRONT = 1
    BACK = 2
    LATERAL = 3


@dataclass(frozen=True)
class BoxDomain:
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != 3 or len(hi) != 3:
            raise ValueError("BoxDomain needs 3-vectors")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ValueError(f"degenerate box lo={lo} hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def extent(self) -> np.ndarray:
        return np.subtract(self.hi, self.lo)

    def contains(self, pts: np.ndarray, strict: bool = True) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        if strict:
            return np.all((pts > lo) & (pts < hi), axis=-1)
        return np.all((pts >= lo) & (pts <= hi), axis=-1)


@dataclass(frozen=True)
class FaceSet:
    """Boundary nodes carrying one face tag, in node order."""

    tag: Face
    indices: np.ndarray  # flat node indices, x1 fastest
    normals: np.ndarray  # (len, 3) outward unit normals
    shape: tuple[int, int]  # (n1, n2) for FRONT/BACK, (len, 1) otherwise

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True, eq=False)
class Grid:
    domain: BoxDomain
    inner: BoxDomain
    h: float
    n: tuple[int, int, int]
    node_region: np.ndarray = field(repr=False)
    face_tag: np.ndarray = field(repr=False)

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.domain.lo)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.n

    @property
    def cell_shape(self) -> tuple[int, int, int]:
        return tuple(k - 1 for k in self.n)

    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.n))

    def axes(self) -> list[np.ndarray]:
        return [self.domain.lo[k] + self.h * np.arange(self.n[k]) for k in range(3)]

    def cell_axes(self) -> list[np.ndarray]:
        return [self.domain.lo[k] + self.h * (np.arange(self.n[k] - 1) + 0.5) for k in range(3)]

    def node_coords(self) -> np.ndarray:
        """Node coordinates, shape ``(n1, n2, n3, 3)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def cell_centers(self) -> np.ndarray:
        return np.stack(np.meshgrid(*self.cell_axes(), indexing="ij"), axis=-1)

    @cached_property
    def inner_cells(self) -> np.ndarray:
        """Boolean mask of cells whose centers lie inside the inner box."""
        return self.inner.contains(self.cell_centers())

    @cached_property
    def lumped_mass(self) -> np.ndarray:
        """Nodal lumped mass: h^3 times the fraction of the dual cell inside the domain."""
        w = [np.ones(k) for k in self.n]
        for a in w:
            a[0] = a[-1] = 0.5
        return self.h**3 * np.einsum("i,j,k->ijk", *w)

    def _face_area(self, k3: int) -> np.ndarray:
        w1 = np.ones(self.n[0])
        w2 = np.ones(self.n[1])
        w1[0] = w1[-1] = 0.5
        w2[0] = w2[-1] = 0.5
        out = np.zeros(self.n)
        out[:, :, k3] = self.h**2 * np.outer(w1, w2)
        return out

    @cached_property
    def front_area(self) -> np.ndarray:
        """Lumped boundary mass of the x3 = min plane (zero elsewhere)."""
        return self._face_area(0)

    @cached_property
    def back_area(self) -> np.ndarray:
        return self._face_area(-1)

    def flat_index(self, i1, i2, i3):
        return np.ravel_multi_index((i1, i2, i3), self.n, order="F")

    def unravel(self, flat):
        return np.unravel_index(flat, self.n, order="F")

    def faces(self, tag: Face | str) -> FaceSet:
        return faces(self, tag)

    def same_as(self, other: "Grid") -> bool:
        return (
            self.n == other.n
            and abs(self.h - other.h) <= _REL_TOL * self.h
            and np.allclose(self.domain.lo, other.domain.lo, atol=_REL_TOL * self.h)
        )


def _count(lo: float, hi: float, h: float) -> int:
    ratio = (hi - lo) / h
    m = round(ratio)
    if m < 1 or abs(ratio - m) > _REL_TOL * max(1.0, ratio):
        raise IncommensurateExtent(f"extent {hi - lo!r} is not a multiple of h={h!r}")
    return m + 1


def build_grid(domain: BoxDomain, inner: BoxDomain, h: float) -> Grid:
    """Build the lattice over ``domain`` and tag nodes against ``inner``.

    At least two node layers (a margin of 2h) must separate the inner box
    from the outer boundary on every side.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    n = tuple(_count(domain.lo[k], domain.hi[k], h) for k in range(3))
    tol = _REL_TOL * max(1.0, float(np.max(np.abs(domain.extent))))
    for k in range(3):
        margins = (inner.lo[k] - domain.lo[k], domain.hi[k] - inner.hi[k])
        if min(margins) < 2 * h - tol:
            raise MarginTooSmall(
                f"axis {k + 1}: inner box margin {min(margins):.6g} < 2h = {2 * h:.6g}"
            )

    axes = [domain.lo[k] + h * np.arange(n[k]) for k in range(3)]
    coords = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    ilo, ihi = np.asarray(inner.lo), np.asarray(inner.hi)
    strictly_in = np.all((coords > ilo + tol) & (coords < ihi - tol), axis=-1)
    # distance outside the inner box in the max-norm
    outside = np.max(np.maximum(ilo - coords, coords - ihi), axis=-1)
    region = np.full(n, Region.OUTER, dtype=np.uint8)
    region[outside <= h + tol] = Region.OVERLAP
    region[strictly_in] = Region.INNER

    tag = np.zeros(n, dtype=np.uint8)
    lateral = np.zeros(n, dtype=bool)
    lateral[[0, -1], :, :] = True
    lateral[:, [0, -1], :] = True
    tag[lateral] = Face.LATERAL
    tag[:, :, -1] = Face.BACK
    tag[:, :, 0] = Face.FRONT

    region.setflags(write=False)
    tag.setflags(write=False)
    return Grid(domain=domain, inner=inner, h=float(h), n=n, node_region=region, face_tag=tag)


def faces(grid: Grid, tag: Face | str) -> FaceSet:
    """All boundary nodes of ``grid`` carrying ``tag``, in node order."""
    if isinstance(tag, str):
        tag = Face[tag.upper()]
    tag = Face(tag)
    if tag is Face.NONE:
        raise ValueError("NONE is not a boundary face tag")
    flat_tags = grid.face_tag.ravel(order="F")
    idx = np.flatnonzero(flat_tags == tag)
    n1, n2, n3 = grid.n
    if tag is Face.FRONT:
        normals = np.tile([0.0, 0.0, -1.0], (len(idx), 1))
        shape = (n1, n2)
    elif tag is Face.BACK:
        normals = np.tile([0.0, 0.0, 1.0], (len(idx), 1))
        shape = (n1, n2)
    else:
        i1, i2, _ = np.unravel_index(idx, grid.n, order="F")
        normals = np.zeros((len(idx), 3))
        normals[i1 == 0, 0] = -1.0
        normals[i1 == n1 - 1, 0] = 1.0
        on_x2 = (i1 != 0) & (i1 != n1 - 1)
        normals[on_x2 & (i2 == 0), 1] = -1.0
        normals[on_x2 & (i2 == n2 - 1), 1] = 1.0
        shape = (len(idx), 1)
    return FaceSet(tag=tag, indices=idx, normals=normals, shape=shape)

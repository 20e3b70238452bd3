"""Serialization of coefficient fields and boundary traces.

Binary layouts (all little-endian):

``WVTR1`` trace
    magic ``b"WVTR1"``, u64 n_face, u64 n_levels, f64 tau, then
    ``n_levels * n_face`` f64 values, row-major with one row per time level.
``WVCF1`` coefficient field
    magic ``b"WVCF1"``, u64 n1, n2, n3 (node counts), f64 origin[3], f64 h,
    f64 upper bound, f64 inner-box lo[3] and hi[3], then
    ``(n1-1)(n2-1)(n3-1)`` f64 cell values, x1 fastest.

VTK output is legacy ASCII STRUCTURED_POINTS with the coefficient stored
as CELL_DATA.
"""
from __future__ import annotations

import os
import struct

import numpy as np

from .errors import CorruptHeader, DimensionMismatch, GridError
from .fields import BoundaryTrace, CoefficientField
from .geometry import BoxDomain, Grid, build_grid

TRACE_MAGIC = b"WVTR1"
FIELD_MAGIC = b"WVCF1"
_TRACE_HEAD = struct.Struct("<5sQQd")
_FIELD_HEAD = struct.Struct("<5sQQQ" + "d" * 11)


def save_trace(trace: BoundaryTrace, path: str | os.PathLike) -> None:
    n_levels, n_face = trace.values.shape
    with open(path, "wb") as fh:
        fh.write(_TRACE_HEAD.pack(TRACE_MAGIC, n_face, n_levels, trace.tau))
        fh.write(np.ascontiguousarray(trace.values, dtype="<f8").tobytes())


def load_trace(path: str | os.PathLike, grid: Grid | None = None) -> BoundaryTrace:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _TRACE_HEAD.size:
        raise CorruptHeader(f"{path}: file too short for a WVTR1 header")
    magic, n_face, n_levels, tau = _TRACE_HEAD.unpack_from(raw)
    if magic != TRACE_MAGIC:
        raise CorruptHeader(f"{path}: bad magic {magic!r}")
    payload = raw[_TRACE_HEAD.size:]
    if len(payload) != 8 * n_face * n_levels:
        raise CorruptHeader(
            f"{path}: header announces {n_levels}x{n_face} values, payload has {len(payload)} bytes"
        )
    values = np.frombuffer(payload, dtype="<f8").reshape(n_levels, n_face).astype(np.float64)
    if grid is not None and grid.n[0] * grid.n[1] != n_face:
        raise DimensionMismatch(f"{path}: {n_face} face nodes, grid FRONT has {grid.n[0] * grid.n[1]}")
    return BoundaryTrace(values, tau, grid)


def save_field(c: CoefficientField, path: str | os.PathLike) -> None:
    g = c.grid
    with open(path, "wb") as fh:
        head = _FIELD_HEAD.pack(
            FIELD_MAGIC, *g.n, *g.domain.lo, g.h, c.upper, *g.inner.lo, *g.inner.hi
        )
        fh.write(head)
        fh.write(np.asarray(c.values, dtype="<f8").tobytes(order="F"))


def load_field(path: str | os.PathLike, grid: Grid | None = None) -> CoefficientField:
    """Read a WVCF1 file, rebuilding its grid unless one is supplied."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _FIELD_HEAD.size:
        raise CorruptHeader(f"{path}: file too short for a WVCF1 header")
    magic, n1, n2, n3, o1, o2, o3, h, upper, *box = _FIELD_HEAD.unpack_from(raw)
    if magic != FIELD_MAGIC:
        raise CorruptHeader(f"{path}: bad magic {magic!r}")
    if min(n1, n2, n3) < 2 or not h > 0:
        raise CorruptHeader(f"{path}: invalid dimensions {(n1, n2, n3)} or spacing {h}")
    cells = (n1 - 1, n2 - 1, n3 - 1)
    payload = raw[_FIELD_HEAD.size:]
    if len(payload) != 8 * int(np.prod(cells)):
        raise CorruptHeader(f"{path}: payload of {len(payload)} bytes does not match {cells} cells")
    values = np.frombuffer(payload, dtype="<f8").reshape(cells, order="F").astype(np.float64)
    if grid is None:
        lo = (o1, o2, o3)
        hi = tuple(o + h * (n - 1) for o, n in zip(lo, (n1, n2, n3)))
        domain = BoxDomain(lo, hi)
        try:
            grid = build_grid(domain, BoxDomain(box[:3], box[3:]), h)
        except (ValueError, GridError) as exc:
            raise CorruptHeader(f"{path}: inconsistent geometry ({exc})") from exc
    elif grid.n != (n1, n2, n3) or abs(grid.h - h) > 1e-12 * h:
        raise DimensionMismatch(f"{path}: field is {(n1, n2, n3)} / h={h}, grid is {grid.n} / h={grid.h}")
    return CoefficientField(grid, values, upper)


def write_vtk(c: CoefficientField, path: str | os.PathLike, name: str = "c") -> None:
    g = c.grid
    n_cells = int(np.prod(g.cell_shape))
    lines = [
        "# vtk DataFile Version 3.0",
        f"waveinv coefficient {name}",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        "DIMENSIONS {} {} {}".format(*g.n),
        "ORIGIN {!r} {!r} {!r}".format(*g.domain.lo),
        f"SPACING {g.h!r} {g.h!r} {g.h!r}",
        f"CELL_DATA {n_cells}",
        f"SCALARS {name} double 1",
        "LOOKUP_TABLE default",
    ]
    flat = np.asarray(c.values).ravel(order="F")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
        for start in range(0, flat.size, 6):
            fh.write(" ".join(f"{v:.17g}" for v in flat[start:start + 6]) + "\n")


def read_vtk(path: str | os.PathLike) -> tuple[tuple[int, int, int], np.ndarray, float, np.ndarray]:
    """Parse a file written by :func:`write_vtk`: (dims, origin, spacing, cell values)."""
    with open(path, encoding="utf-8") as fh:
        tokens = fh.read().split("\n")
    header = {}
    i = 0
    while i < len(tokens) and not tokens[i].startswith("LOOKUP_TABLE"):
        parts = tokens[i].split()
        if parts:
            header[parts[0]] = parts[1:]
        i += 1
    if "DIMENSIONS" not in header or "CELL_DATA" not in header:
        raise CorruptHeader(f"{path}: not a STRUCTURED_POINTS cell-data file")
    dims = tuple(int(v) for v in header["DIMENSIONS"])
    origin = np.array([float(v) for v in header["ORIGIN"]])
    spacing = float(header["SPACING"][0])
    n = int(header["CELL_DATA"][0])
    vals = np.array(" ".join(tokens[i + 1:]).split(), dtype=float)
    if vals.size != n or n != int(np.prod([d - 1 for d in dims])):
        raise DimensionMismatch(f"{path}: expected {n} cell values, found {vals.size}")
    cells = tuple(d - 1 for d in dims)
    return dims, origin, spacing, vals.reshape(cells, order="F")

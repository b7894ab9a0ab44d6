"""Scalar fields sampled on the uniform periodic grid, with IO.

Values are stored row-major with axis 0 the first coordinate; node k of an
axis sits at -side/2 + k*h.  Exports: CSV with a one-line header, and a
fixed-width little-endian binary dump (int64 grid_n, int64 d, float64
time, float64 torus_side, then the float64 values row-major).
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .params import ConstructionParams

_HEADER = struct.Struct("<qqdd")


@dataclass(frozen=True)
class GridField:
    values: np.ndarray
    time: float
    params: ConstructionParams

    def __post_init__(self):
        expected = (self.params.grid_n,) * self.params.d
        if self.values.shape != expected:
            raise ValueError(f"values shaped {self.values.shape}, expected {expected}")

    @property
    def h(self) -> float:
        return self.params.h

    def with_values(self, values: np.ndarray, time: float | None = None) -> "GridField":
        return replace(self, values=values, time=self.time if time is None else time)

    def shifted(self, c: float) -> "GridField":
        return self.with_values(self.values + c)

    def node_index(self, x: np.ndarray) -> tuple[int, ...]:
        p = self.params
        half = p.torus_side / 2.0
        idx = np.rint((np.asarray(x, dtype=float) + half) / p.h).astype(int) % p.grid_n
        return tuple(int(i) for i in idx)

    def value_at_node(self, x: np.ndarray) -> float:
        """Value at the grid node nearest to x."""
        return float(self.values[self.node_index(x)])

    def sample(self, pts: np.ndarray) -> np.ndarray:
        """Periodic multilinear interpolation at arbitrary points."""
        return interp_periodic(self.values, pts, self.params)

    def to_csv(self) -> str:
        p = self.params
        buf = io.StringIO()
        buf.write(f"{p.grid_n},{p.d},{self.time!r},{p.torus_side!r}\n")
        flat = self.values.reshape(-1)
        for v in flat:
            buf.write(f"{v!r}\n")
        return buf.getvalue()

    def to_binary(self) -> bytes:
        p = self.params
        head = _HEADER.pack(p.grid_n, p.d, float(self.time), p.torus_side)
        return head + self.values.astype("<f8").tobytes(order="C")

    def save(self, path: str | Path):
        Path(path).write_bytes(self.to_binary())


def field_from_binary(data: bytes, params: ConstructionParams) -> GridField:
    grid_n, d, time, side = _HEADER.unpack_from(data)
    if grid_n != params.grid_n or d != params.d or side != params.torus_side:
        raise ValueError("binary header does not match the construction parameters")
    values = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).astype(float)
    return GridField(values.reshape((grid_n,) * d), time, params)


def load_field(path: str | Path, params: ConstructionParams) -> GridField:
    return field_from_binary(Path(path).read_bytes(), params)


def field_from_csv(text: str, params: ConstructionParams) -> GridField:
    lines = text.strip().splitlines()
    grid_n, d, time, side = lines[0].split(",")
    if int(grid_n) != params.grid_n or int(d) != params.d:
        raise ValueError("csv header does not match the construction parameters")
    values = np.array([float(v) for v in lines[1:]])
    return GridField(values.reshape((params.grid_n,) * params.d), float(time), params)


def grid_axes(p: ConstructionParams) -> np.ndarray:
    half = p.torus_side / 2.0
    return -half + np.arange(p.grid_n) * p.h


def grid_points(p: ConstructionParams) -> np.ndarray:
    """All node coordinates, shaped (grid_n, ..., grid_n, d)."""
    ax = grid_axes(p)
    mesh = np.meshgrid(*([ax] * p.d), indexing="ij")
    return np.stack(mesh, axis=-1)


def interp_periodic(values: np.ndarray, pts: np.ndarray, p: ConstructionParams) -> np.ndarray:
    """Periodic multilinear interpolation with non-negative weights."""
    pts = np.asarray(pts, dtype=float)
    n = p.grid_n
    g = (pts + p.torus_side / 2.0) / p.h
    i0 = np.floor(g).astype(int)
    f = g - i0
    i0 %= n
    i1 = (i0 + 1) % n
    if p.d == 2:
        fx, fy = f[..., 0], f[..., 1]
        v = (
            values[i0[..., 0], i0[..., 1]] * (1 - fx) * (1 - fy)
            + values[i1[..., 0], i0[..., 1]] * fx * (1 - fy)
            + values[i0[..., 0], i1[..., 1]] * (1 - fx) * fy
            + values[i1[..., 0], i1[..., 1]] * fx * fy
        )
        return v
    if p.d == 3:
        fx, fy, fz = f[..., 0], f[..., 1], f[..., 2]
        v = np.zeros(pts.shape[:-1])
        for dx, wx in ((i0[..., 0], 1 - fx), (i1[..., 0], fx)):
            for dy, wy in ((i0[..., 1], 1 - fy), (i1[..., 1], fy)):
                for dz, wz in ((i0[..., 2], 1 - fz), (i1[..., 2], fz)):
                    v += values[dx, dy, dz] * wx * wy * wz
        return v
    raise ValueError("interpolation supports d in (2, 3)")


def lipschitz_estimate(field: GridField) -> float:
    """Max slope over grid edges: the measured Lipschitz constant."""
    v = field.values
    h = field.h
    worst = 0.0
    for axis in range(v.ndim):
        diff = np.abs(np.roll(v, -1, axis=axis) - v) / h
        worst = max(worst, float(diff.max()))
    return worst


def sup_norm(a: GridField | np.ndarray, b: GridField | np.ndarray | None = None) -> float:
    va = a.values if isinstance(a, GridField) else a
    if b is None:
        return float(np.max(np.abs(va)))
    vb = b.values if isinstance(b, GridField) else b
    return float(np.max(np.abs(va - vb)))


def point_initial_field(p: ConstructionParams, y: np.ndarray, eff_inf: float) -> GridField:
    """Zero at the node nearest y, effective infinity elsewhere."""
    values = np.full((p.grid_n,) * p.d, eff_inf, dtype=float)
    field = GridField(values, 0.0, p)
    values[field.node_index(y)] = 0.0
    return field

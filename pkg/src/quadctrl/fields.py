"""Rectangular grids, node-indexed scalar fields and their on-disk format.

Fields are stored as (n1+1, n2+1) arrays, first index along x1.  CSV export
writes one `x1,x2,value` row per node in row-major order (x1 outer) next to a
JSON sidecar holding whatever metadata the producing solver attached, so a
result directory is self-describing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError

__all__ = ["GridSpec", "ScalarField", "write_field_csv", "read_field_csv", "write_sidecar"]


@dataclass(frozen=True)
class GridSpec:
    """Uniform node grid on [0, L1] x [0, L2] with n1 x n2 cells."""

    L1: float
    L2: float
    n1: int
    n2: int

    def __post_init__(self):
        if not (self.L1 > 0.0 and self.L2 > 0.0):
            raise ConfigError("grid extents must be positive")
        if self.n1 < 8 or self.n2 < 8:
            raise ConfigError("need at least 8 cells per direction")

    @property
    def h1(self) -> float:
        return self.L1 / self.n1

    @property
    def h2(self) -> float:
        return self.L2 / self.n2

    def x1(self) -> np.ndarray:
        return np.linspace(0.0, self.L1, self.n1 + 1)

    def x2(self) -> np.ndarray:
        return np.linspace(0.0, self.L2, self.n2 + 1)

    def mesh(self):
        """Node coordinate arrays of shape (n1+1, n2+1)."""
        return np.meshgrid(self.x1(), self.x2(), indexing="ij")

    def refine(self) -> "GridSpec":
        return GridSpec(self.L1, self.L2, 2 * self.n1, 2 * self.n2)

    def inner_slice(self, frac: float = 0.8) -> tuple[slice, slice]:
        """Index slices selecting the central `frac` portion of each axis."""
        if not (0.0 < frac <= 1.0):
            raise ConfigError("frac must be in (0, 1]")
        m1 = int(np.ceil(self.n1 * (1.0 - frac) / 2.0))
        m2 = int(np.ceil(self.n2 * (1.0 - frac) / 2.0))
        return slice(m1, self.n1 + 1 - m1), slice(m2, self.n2 + 1 - m2)


@dataclass(eq=False)
class ScalarField:
    """Node values on a GridSpec plus solver-attached metadata."""

    grid: GridSpec
    values: np.ndarray
    kind: str = "field"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = (self.grid.n1 + 1, self.grid.n2 + 1)
        if self.values.shape != expected:
            raise ConfigError(f"values shape {self.values.shape} does not match grid {expected}")

    def interp(self, p1, p2, clamp: bool = False):
        """Bilinear interpolation at points (p1, p2), elementwise.

        With clamp=False, points outside [0,L1]x[0,L2] raise; with
        clamp=True they are projected onto the boundary first (callers that
        track grid exits should test for them separately).
        """
        p1 = np.asarray(p1, dtype=float)
        p2 = np.asarray(p2, dtype=float)
        g = self.grid
        if clamp:
            p1 = np.clip(p1, 0.0, g.L1)
            p2 = np.clip(p2, 0.0, g.L2)
        elif np.any(p1 < 0) or np.any(p1 > g.L1) or np.any(p2 < 0) or np.any(p2 > g.L2):
            raise ConfigError("interpolation point outside the grid")
        f1 = np.clip(p1 / g.h1, 0.0, g.n1 - 1e-12)
        f2 = np.clip(p2 / g.h2, 0.0, g.n2 - 1e-12)
        i = f1.astype(np.int64)
        j = f2.astype(np.int64)
        t1 = f1 - i
        t2 = f2 - j
        v = self.values
        out = ((1 - t1) * (1 - t2) * v[i, j] + t1 * (1 - t2) * v[i + 1, j]
               + (1 - t1) * t2 * v[i, j + 1] + t1 * t2 * v[i + 1, j + 1])
        return float(out) if out.ndim == 0 else out

    def restrict_to(self, coarse: GridSpec) -> np.ndarray:
        """Values at the nodes of a nested coarser grid (same extents)."""
        if (coarse.L1 != self.grid.L1 or coarse.L2 != self.grid.L2
                or self.grid.n1 % coarse.n1 or self.grid.n2 % coarse.n2):
            raise ConfigError("grids do not nest")
        s1 = self.grid.n1 // coarse.n1
        s2 = self.grid.n2 // coarse.n2
        return self.values[::s1, ::s2]


def write_sidecar(path: str | Path, meta: dict) -> Path:
    """Write `meta` as JSON next to `path` (path.meta.json) and return it."""
    side = Path(str(path) + ".meta.json")

    def _clean(obj):
        if isinstance(obj, dict):
            return {k: _clean(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [_clean(v) for v in obj]
        if isinstance(obj, np.ndarray):
            if obj.size > 64:
                return f"<array shape={obj.shape} dtype={obj.dtype} omitted>"
            return obj.tolist()
        if isinstance(obj, (np.integer,)):
            return int(obj)
        if isinstance(obj, (np.floating,)):
            return float(obj)
        return obj

    side.write_text(json.dumps(_clean(meta), indent=2, sort_keys=True) + "\n")
    return side


def write_field_csv(fld: ScalarField, path: str | Path, extra_meta: dict | None = None) -> Path:
    path = Path(path)
    g = fld.grid
    x1 = np.repeat(g.x1(), g.n2 + 1)
    x2 = np.tile(g.x2(), g.n1 + 1)
    data = np.column_stack([x1, x2, fld.values.ravel(order="C")])
    header = "x1,x2,value"
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")
    meta = {"kind": fld.kind,
            "grid": {"L1": g.L1, "L2": g.L2, "n1": g.n1, "n2": g.n2}}
    meta.update(fld.meta)
    if extra_meta:
        meta.update(extra_meta)
    write_sidecar(path, meta)
    return path


def read_field_csv(path: str | Path, kind: str = "field") -> ScalarField:
    path = Path(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    side = Path(str(path) + ".meta.json")
    meta = json.loads(side.read_text()) if side.exists() else {}
    if "grid" in meta:
        g = GridSpec(meta["grid"]["L1"], meta["grid"]["L2"],
                     int(meta["grid"]["n1"]), int(meta["grid"]["n2"]))
    else:
        n1 = len(np.unique(data[:, 0])) - 1
        n2 = len(np.unique(data[:, 1])) - 1
        g = GridSpec(data[:, 0].max(), data[:, 1].max(), n1, n2)
    values = data[:, 2].reshape(g.n1 + 1, g.n2 + 1)
    return ScalarField(g, values, kind=meta.get("kind", kind), meta=meta)

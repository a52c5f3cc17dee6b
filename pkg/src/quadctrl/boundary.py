"""Free boundary of the stopping problem, read off a solved grid field.

For each row x2 = const the stopping region is a left segment {x1 <= psi},
so the boundary is the rightmost abscissa per row where the field is still
at zero (within a threshold), sharpened by interpolating the threshold
crossing between that node and its right neighbor.  The resulting curve is
the barrier the reflection policy pushes against.

In the degenerate mode the field vanishes identically and no crossing
exists; extraction then flags the boundary as degenerate instead of
reporting a curve, and `check_boundary` refuses it, directing the caller to
the ray policy (the barrier degenerates onto the kink ray of the cost).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateModeError
from .fields import GridSpec, ScalarField

__all__ = ["Boundary", "BoundaryReport", "extract_boundary", "check_boundary"]


@dataclass(frozen=True, eq=False)
class Boundary:
    """Barrier abscissa per grid row, with the threshold that defined it."""

    grid: GridSpec
    x2: np.ndarray          # row ordinates, length n2+1
    psi: np.ndarray         # barrier abscissa per row
    zero_tol: float
    degenerate: bool

    def __call__(self, q2):
        """Barrier abscissa at arbitrary ordinates (linear interpolation in
        the rows; clamped to the end rows outside [0, L2])."""
        if self.degenerate:
            raise DegenerateModeError(
                "degenerate mode: the stopping value vanishes identically and "
                "no barrier curve exists; use the kink-ray policy instead")
        q2 = np.asarray(q2, dtype=float)
        out = np.interp(q2, self.x2, self.psi)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class BoundaryReport:
    ok: bool
    max_slope: float
    slope_bound: float
    monotone_violation: float   # most negative row-to-row decrease
    cone_ok: bool
    cone_max_excess: float
    grows: bool
    notes: tuple = field(default=())


def extract_boundary(u_field: ScalarField, zero_tol: float | None = None) -> Boundary:
    """Rightmost zero abscissa per row of a stopping-value field.

    zero_tol defaults to the threshold recorded by the solver in the field's
    meta (falling back to 1e-7).  The column x1 = 0 is exactly zero, so every
    row yields an abscissa; rows that are zero all the way across report
    psi = L1.  When the whole inner subgrid is below the threshold the field
    carries no boundary information and the result is flagged degenerate.
    """
    if zero_tol is None:
        zero_tol = float(u_field.meta.get("zero_tol", 1e-7))
    if zero_tol <= 0.0:
        raise ConfigError("zero_tol must be positive")
    g = u_field.grid
    u = u_field.values

    gmax = float(u.max())
    noise = float(u_field.meta.get("zero_tol", 1e-7))
    if gmax <= noise:
        # the field itself is at solver-noise scale: nothing to extract
        return Boundary(grid=g, x2=g.x2(), psi=np.zeros(g.n2 + 1),
                        zero_tol=zero_tol, degenerate=True)
    if zero_tol >= gmax:
        raise ConfigError("zero_tol exceeds the field's maximum: "
                          "every node would count as stopped")
    s1, s2 = g.inner_slice(0.8)
    if float(u[s1, s2].max()) <= zero_tol:
        # only far-edge nodes clear the threshold: no usable information
        return Boundary(grid=g, x2=g.x2(), psi=np.zeros(g.n2 + 1),
                        zero_tol=zero_tol, degenerate=True)

    x1 = g.x1()
    below = u <= zero_tol
    # rightmost below-threshold node per row; column 0 is exactly zero
    last = g.n1 - np.argmax(below[::-1, :], axis=0)
    psi = x1[last].astype(float)
    # sharpen by the threshold crossing toward the right neighbor
    inner = last < g.n1
    li = last[inner]
    rows = np.flatnonzero(inner)
    lo = u[li, rows]
    hi = u[li + 1, rows]
    frac = np.where(hi > lo, (zero_tol - lo) / np.where(hi > lo, hi - lo, 1.0), 0.0)
    psi[inner] += g.h1 * np.clip(frac, 0.0, 1.0)
    return Boundary(grid=g, x2=g.x2(), psi=psi, zero_tol=zero_tol, degenerate=False)


def check_boundary(boundary: Boundary, c: float, *,
                   slope_slack: float | None = None,
                   edge_cells: int = 8) -> BoundaryReport:
    """Structural checks of an extracted barrier against the kink slope c.

    Verifies (i) the discrete slope never exceeds 1/c plus slack (default
    slack (h1+h2)/(c*h2), one extraction cell per row step), (ii) the curve
    is nondecreasing up to one extraction cell, (iii) it stays inside the
    cone 0 <= psi <= x2/c + h1, and (iv) it keeps growing across the upper
    half of the domain (psi at 0.8*L2 strictly above psi at 0.4*L2).

    The slope check skips row steps within edge_cells mesh widths of the
    right edge x1 = L1: there the barrier estimate saturates against the
    artificial edge and its one-sided closure, producing spurious steep
    steps that say nothing about the interior curve.  The cone and
    monotonicity checks remain global.

    Raises DegenerateModeError for a degenerate boundary.
    """
    if boundary.degenerate:
        raise DegenerateModeError(
            "degenerate mode: the barrier collapses onto the kink ray and "
            "has no extracted curve to check; use the kink-ray policy")
    if c <= 0.0:
        raise ConfigError("kink slope c must be positive")
    g = boundary.grid
    if slope_slack is None:
        slope_slack = (g.h1 + g.h2) / (c * g.h2)
    psi = np.asarray(boundary.psi, dtype=float)
    x2 = np.asarray(boundary.x2, dtype=float)

    d = np.diff(psi)
    interior = np.maximum(psi[:-1], psi[1:]) < g.L1 - edge_cells * g.h1
    max_slope = float((d[interior] / g.h2).max()) if interior.any() else 0.0
    slope_bound = 1.0 / c + slope_slack
    slope_ok = max_slope <= slope_bound

    monotone_violation = float(min(d.min(), 0.0))
    monotone_ok = monotone_violation >= -g.h1

    excess = psi - (x2 / c + g.h1)
    cone_max_excess = float(max(excess.max(), 0.0))
    cone_ok = bool(np.all(psi >= 0.0)) and cone_max_excess <= 0.0

    lo = float(np.interp(0.4 * g.L2, x2, psi))
    hi = float(np.interp(0.8 * g.L2, x2, psi))
    grows = hi > lo

    notes = []
    if (~interior).any():
        notes.append(f"slope check skipped {int((~interior).sum())} row steps "
                     "in the right-edge saturation zone")
    if not slope_ok:
        notes.append(f"max discrete slope {max_slope:.4g} exceeds 1/c + slack = {slope_bound:.4g}")
    if not monotone_ok:
        notes.append(f"barrier decreases by {-monotone_violation:.4g} somewhere (more than one cell)")
    if not cone_ok:
        notes.append("barrier leaves the cone 0 <= psi <= x2/c + h1")
    if not grows:
        notes.append("barrier fails to grow across the upper half of the domain")
    return BoundaryReport(ok=slope_ok and monotone_ok and cone_ok and grows,
                          max_slope=max_slope, slope_bound=slope_bound,
                          monotone_violation=monotone_violation,
                          cone_ok=cone_ok, cone_max_excess=cone_max_excess,
                          grows=grows, notes=tuple(notes))

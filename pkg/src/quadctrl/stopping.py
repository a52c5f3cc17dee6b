"""Optimal stopping value of the absorbed/reflected state process.

The stopping value w solves a linear complementarity problem: at every
interior node, min((gamma + A) w - payoff, w) = 0, where A is the elliptic
operator of the free motion, the payoff rate is the one-sided x1 derivative
of the running cost, w = 0 on the absorbing edge x1 = 0, and zero-slope
closures stand in for the reflecting edge x2 = 0 and the artificial far
edges.  `solve_stopping_value` solves it by projected SOR with a cascaded
(coarse to fine) initial guess; `mc_stopping_value` re-estimates w(x) by
simulating the state and stopping the first time the interpolated grid
solution drops below a threshold, which is how the nearly optimal stopping
rule is realized.

The zero set of w is the region where stopping immediately is optimal.  It
always contains the edge x1 = 0; for the solve to capture the full zero set
of every row the domain must extend high enough in x2, so the solver checks
that every row reaches values <= zero_tol and, when asked, doubles L2 (at
fixed mesh width) until the check passes or the enlargement budget runs out.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import obstacle_sweeps, threshold_mc_chunk
from ._stencil import apply_operator, build_coeffs
from .errors import ConfigError, NonConvergenceError
from .fields import GridSpec, ScalarField
from .model import CostParams, ModelParams, validate
from .paths import block_generator

__all__ = [
    "solve_stopping_value",
    "mc_stopping_value",
    "McStoppingEstimate",
    "complementarity_residual",
]

_CHUNK = 100          # sweeps between convergence checks
_COARSE_BUDGET = 8000  # sweep cap per cascade level below the target grid


def _prolong(vc: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of node values onto the once-refined grid."""
    n1, n2 = vc.shape[0] - 1, vc.shape[1] - 1
    vf = np.empty((2 * n1 + 1, 2 * n2 + 1))
    vf[::2, ::2] = vc
    vf[1::2, ::2] = 0.5 * (vc[:-1, :] + vc[1:, :])
    vf[::2, 1::2] = 0.5 * (vc[:, :-1] + vc[:, 1:])
    vf[1::2, 1::2] = 0.25 * (vc[:-1, :-1] + vc[1:, :-1] + vc[:-1, 1:] + vc[1:, 1:])
    return vf


def _payoff_nodes(cost: CostParams, grid: GridSpec) -> np.ndarray:
    x1, x2 = grid.mesh()
    return np.ascontiguousarray(cost.payoff_rate(x1, x2))


def complementarity_residual(model: ModelParams, cost: CostParams,
                             fld: ScalarField) -> tuple[float, np.ndarray]:
    """Sup norm of min(PDE residual, w) over interior nodes, plus the raw
    residual array (NaN on the boundary ring)."""
    co = build_coeffs(model, fld.grid)
    r = apply_operator(co, model.gamma, fld.values) - _payoff_nodes(cost, fld.grid)
    comp = np.minimum(r[1:-1, 1:-1], fld.values[1:-1, 1:-1])
    return float(np.abs(comp).max()), r


def _apply_bcs(u: np.ndarray, top_dirichlet: bool) -> None:
    u[0, :] = 0.0
    u[:, 0] = u[:, 1]
    u[-1, :] = u[-2, :]
    u[:, -1] = 0.0 if top_dirichlet else u[:, -2]


def _solve_on_grid(model, cost, grid, u0, omega, change_tol, resid_tol,
                   max_sweeps, top_dirichlet, strict):
    """PSOR until both the per-sweep change and the complementarity residual
    meet tolerance.  With strict=False, budget exhaustion returns the current
    iterate instead of raising (used for cascade warm-up levels)."""
    co = build_coeffs(model, grid)
    rhs = _payoff_nodes(cost, grid)
    u = np.ascontiguousarray(np.array(u0, dtype=float))
    _apply_bcs(u, top_dirichlet)
    gamma = float(model.gamma)
    sweeps = 0
    change = np.inf
    resid = np.inf
    while sweeps < max_sweeps:
        n = int(min(_CHUNK, max_sweeps - sweeps))
        change = obstacle_sweeps(u, rhs, gamma, *co.interior(),
                                 float(omega), n, bool(top_dirichlet))
        sweeps += n
        resid, _ = complementarity_residual(model, cost,
                                            ScalarField(grid, u, kind="stopping-value"))
        if change < change_tol and resid <= resid_tol:
            return u, sweeps, change, resid
    if strict:
        raise NonConvergenceError(
            f"projected SOR did not converge in {sweeps} sweeps "
            f"(last change {change:.3e}, complementarity residual {resid:.3e})",
            last_change=float(change), last_residual=float(resid),
            iterations=sweeps)
    return u, sweeps, change, resid


def _cascade_schedule(grid: GridSpec, enabled: bool) -> list[GridSpec]:
    """Grids from coarsest to finest; the last entry is `grid` itself."""
    grids = [grid]
    while enabled:
        g = grids[0]
        if g.n1 % 2 or g.n2 % 2 or min(g.n1, g.n2) <= 32:
            break
        grids.insert(0, GridSpec(g.L1, g.L2, g.n1 // 2, g.n2 // 2))
    return grids


def _rows_reach_zero(u: np.ndarray, zero_tol: float) -> bool:
    return bool(np.all(u.min(axis=1) <= zero_tol))


def solve_stopping_value(model: ModelParams, cost: CostParams, grid: GridSpec, *,
                         omega: float = 1.5, change_tol: float = 1e-8,
                         resid_tol: float = 2.5e-7, max_sweeps: int = 200_000,
                         auto_enlarge: bool = True, max_enlarge: int = 3,
                         zero_tol: float | None = None, cascade: bool = True,
                         top_bc: str = "neumann") -> ScalarField:
    """Solve the discrete complementarity problem for the stopping value.

    Returns a ScalarField (kind "stopping-value") whose meta records the
    sweep counts, final change and residual, the row-zero check outcome and
    any domain enlargements performed.  top_bc selects the closure on the far
    edge x2 = L2: "neumann" (zero slope, the default) or "dirichlet" (clamp
    to zero, a diagnostic variant for gauging far-field distortion).

    Raises NonConvergenceError if the sweep budget runs out on the target
    grid, MonotoneSchemeError if the covariance/mesh combination violates the
    stencil sign conditions.
    """
    if top_bc not in ("neumann", "dirichlet"):
        raise ConfigError(f"unknown top_bc {top_bc!r}: use 'neumann' or 'dirichlet'")
    if not (0.0 < omega < 2.0):
        raise ConfigError("omega must lie in (0, 2)")
    validate(model, cost)
    top_dirichlet = top_bc == "dirichlet"
    if zero_tol is None:
        zero_tol = 10.0 * change_tol

    g = grid
    total_sweeps = 0
    enlargements = 0
    u = None
    while True:
        if u is None:
            # cascade from the coarsest level of this grid
            schedule = _cascade_schedule(g, cascade)
            u = np.zeros((schedule[0].n1 + 1, schedule[0].n2 + 1))
            for lvl, gl in enumerate(schedule):
                final = lvl == len(schedule) - 1
                budget = max_sweeps if final else _COARSE_BUDGET
                u, s, change, resid = _solve_on_grid(
                    model, cost, gl, u, omega, change_tol, resid_tol,
                    budget, top_dirichlet, strict=final)
                total_sweeps += s
                if not final:
                    u = _prolong(u)
        else:
            u, s, change, resid = _solve_on_grid(
                model, cost, g, u, omega, change_tol, resid_tol,
                max_sweeps, top_dirichlet, strict=True)
            total_sweeps += s

        row_zero_ok = _rows_reach_zero(u, zero_tol)
        if row_zero_ok or not auto_enlarge or enlargements >= max_enlarge:
            break
        # double the x2 extent at fixed mesh width; warm-start the new strip
        # by replicating the current top row
        g2 = GridSpec(g.L1, 2.0 * g.L2, g.n1, 2 * g.n2)
        u2 = np.empty((g2.n1 + 1, g2.n2 + 1))
        u2[:, :g.n2 + 1] = u
        u2[:, g.n2 + 1:] = u[:, -1:]
        g, u = g2, u2
        enlargements += 1

    bad_rows = int(np.count_nonzero(u.min(axis=1) > zero_tol))
    meta = {
        "theta": model.theta, "sigma": model.sigma, "gamma": model.gamma,
        "a": cost.a, "b1": cost.b1, "b2": cost.b2, "c": cost.c,
        "omega": omega, "change_tol": change_tol, "resid_tol": resid_tol,
        "zero_tol": zero_tol, "top_bc": top_bc, "cascade": cascade,
        "sweeps": total_sweeps, "final_change": float(change),
        "final_residual": float(resid),
        "row_zero_ok": row_zero_ok, "rows_missing_zero": bad_rows,
        "enlargements": enlargements, "L2_final": g.L2,
    }
    return ScalarField(g, u, kind="stopping-value", meta=meta)


@dataclass
class McStoppingEstimate:
    """Monte Carlo estimate of the stopping value at one start point."""

    estimate: float
    std_error: float
    n_paths: int
    n_threshold: int   # stopped because interpolated w dropped below eps
    n_absorbed: int    # first coordinate hit zero
    n_exited: int      # left the grid of the supplied field
    n_horizon: int     # still running at the simulation horizon
    warning: str | None = None

    def __iter__(self):
        return iter((self.estimate, self.std_error))


def mc_stopping_value(model: ModelParams, cost: CostParams, u_field: ScalarField,
                      x, eps: float, n_paths: int = 10_000, dt: float = 1e-4,
                      seed: int = 0, *, t_max: float | None = None,
                      block_size: int = 4096) -> McStoppingEstimate:
    """Estimate the stopping value at x by simulation.

    Paths of the absorbed/reflected state are advanced on a uniform time
    grid; each path accrues the discounted payoff rate and retires at the
    first of: the interpolated field dropping to eps or below, absorption
    (first coordinate hits zero, crossing time interpolated within the
    step), leaving the field's grid, or the horizon t_max.  Retired paths
    accrue nothing further, which realizes the nearly optimal threshold
    stopping rule evaluated on the supplied grid solution.

    Randomness is drawn per block of block_size paths from a counter-based
    stream keyed by (seed, block), so results are reproducible and
    independent of any outer parallelism.  Returns the mean, its standard
    error and retirement counts; the warning field is set when more than 10%
    of paths exit the grid.
    """
    if eps <= 0.0:
        raise ConfigError("eps must be positive")
    if dt <= 0.0:
        raise ConfigError("dt must be positive")
    if n_paths < 2:
        raise ConfigError("need at least two paths for a standard error")
    x = np.asarray(x, dtype=float).reshape(2)
    g = u_field.grid
    if np.any(x < 0.0) or x[0] > g.L1 or x[1] > g.L2:
        raise ConfigError("start point must lie inside the field's grid")
    gamma = float(model.gamma)
    if t_max is None:
        # horizon past which the remaining discounted payoff is < 1e-5
        m = max(cost.a, cost.b1, 1e-12)
        t_max = np.log(m / gamma * 1e5 + 1.0) / gamma
    steps = int(np.ceil(t_max / dt))

    # trivial threshold rule: stop at time zero
    if u_field.interp(x[0], x[1]) <= eps:
        return McStoppingEstimate(0.0, 0.0, n_paths, n_paths, 0, 0, 0)

    chol = model.chol * np.sqrt(dt)
    drift = model.theta * dt
    disc_step = -np.expm1(-gamma * dt) / gamma   # integral of e^{-gamma s} over one step
    u = np.ascontiguousarray(u_field.values)
    chunk = 256
    payoffs = []
    n_threshold = n_absorbed = n_exited = n_horizon = 0

    for block, start in enumerate(range(0, n_paths, block_size)):
        nb = min(block_size, n_paths - start)
        rng = block_generator(seed, block)
        out = np.zeros(nb)
        z1 = np.full(nb, x[0])
        w2 = np.full(nb, x[1])
        acc = np.zeros(nb)
        idx = np.arange(nb)
        k0 = 0
        while k0 < steps and idx.size:
            # normals for the alive paths over one chunk of steps; the
            # compiled kernel retires paths in place (status: 1 threshold,
            # 2 absorbed, 3 grid exit) and leaves survivors alive at k0+span
            span = min(chunk, steps - k0)
            normals = rng.standard_normal((idx.size, span, 2))
            status = np.zeros(idx.size, dtype=np.int64)
            disc = np.exp(-gamma * dt * (k0 + np.arange(span)))
            threshold_mc_chunk(u, g.h1, g.h2, g.L1, g.L2, g.n1, g.n2,
                               z1, w2, acc, status, normals, disc,
                               chol[0, 0], chol[1, 0], chol[1, 1],
                               drift[0], drift[1],
                               -cost.a, cost.b1, cost.c,
                               eps, gamma, dt, disc_step)
            dead = status != 0
            if dead.any():
                out[idx[dead]] = acc[dead]
                n_threshold += int((status == 1).sum())
                n_absorbed += int((status == 2).sum())
                n_exited += int((status == 3).sum())
                keep = ~dead
                z1, w2, acc, idx = z1[keep], w2[keep], acc[keep], idx[keep]
            k0 += span
        if idx.size:
            out[idx] = acc
            n_horizon += int(idx.size)
        payoffs.append(out)

    vals = np.concatenate(payoffs)
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / np.sqrt(n_paths))
    warning = None
    if n_exited > 0.1 * n_paths:
        warning = (f"{n_exited} of {n_paths} paths left the grid before "
                   "stopping; enlarge the field's domain")
    return McStoppingEstimate(est, se, n_paths, n_threshold, n_absorbed,
                              n_exited, n_horizon, warning)

"""Control value on a grid: policy iteration for a switching system.

The dynamic programming equation for the singularly controlled state couples
a linear elliptic PDE with two gradient constraints.  Its Markov-chain
approximation on a uniform grid is the fixed point of the three-action
backup

    V[i,j] = min( diffusion backup at (i,j), V[i+1,j], V[i,j+1] )

where the diffusion backup is one step of the monotone nine-point
discretization of (gamma + A) V = running cost, and taking a neighbor's
value models an instantaneous costless push of size h in that coordinate.
On the constraint edges x1 = 0 and x2 = 0 the diffusion option is removed
(the uncontrolled motion would exit the quadrant), so only pushes remain; on
the far edges the push off the grid is removed and the diffusion backup
falls back to one-sided closures.  Ties prefer diffusing, then the x1 push.

`solve_control_value` computes the fixed point by policy iteration: freeze
the action table, relax the resulting linear system with the shared SOR
kernel, re-improve the actions, repeat until the table is stable and the
fixed-point residual is small.  Push nodes satisfy their copy equation
exactly at convergence, so the forward differences of the result are
nonnegative up to solver tolerance by construction.
"""

from __future__ import annotations

import numpy as np

from ._kernels import policy_sweeps
from ._stencil import StencilCoeffs, apply_operator, build_coeffs
from .errors import ConfigError, NonConvergenceError
from .fields import GridSpec, ScalarField
from .model import CostParams, ModelParams, TwoPieceCost, validate
from .stopping import _cascade_schedule, _prolong

__all__ = ["solve_control_value", "hjb_residual", "push_active_cells"]

_CHUNK = 100
_EVAL_CAP = 6000   # sweep cap per policy evaluation


def _running_cost_nodes(cost, grid: GridSpec) -> np.ndarray:
    x1, x2 = grid.mesh()
    return np.ascontiguousarray(cost.rate(x1, x2))


def _diffuse_backup(co: StencilCoeffs, gamma: float, v: np.ndarray,
                    rc: np.ndarray) -> np.ndarray:
    """One relaxation target per node when choosing to diffuse; +inf on the
    constraint edges where diffusing is not available."""
    N1, N2 = v.shape
    B = np.full_like(v, np.inf)
    denom = gamma + sum(co.interior())
    acc = (co.cE * v[2:, 1:-1] + co.cW * v[:-2, 1:-1]
           + co.cN * v[1:-1, 2:] + co.cS * v[1:-1, :-2]
           + co.cNE * v[2:, 2:] + co.cNW * v[:-2, 2:]
           + co.cSE * v[2:, :-2] + co.cSW * v[:-2, :-2])
    B[1:-1, 1:-1] = (acc + rc[1:-1, 1:-1]) / denom
    i = N1 - 1
    B[i, 1:-1] = ((co.rW * v[i - 1, 1:-1] + co.rN * v[i, 2:]
                   + co.rS * v[i, :-2] + rc[i, 1:-1])
                  / (gamma + co.rW + co.rN + co.rS))
    j = N2 - 1
    B[1:-1, j] = ((co.tS * v[1:-1, j - 1] + co.tE * v[2:, j]
                   + co.tW * v[:-2, j] + rc[1:-1, j])
                  / (gamma + co.tS + co.tE + co.tW))
    B[i, j] = ((co.qW * v[i - 1, j] + co.qS * v[i, j - 1] + rc[i, j])
               / (gamma + co.qW + co.qS))
    B[0, :] = np.inf
    B[:, 0] = np.inf
    return B


def _improve(co, gamma, v, rc):
    """Greedy action table for the current iterate, plus the three backups."""
    B = _diffuse_backup(co, gamma, v, rc)
    p1 = np.full_like(v, np.inf)
    p1[:-1, :] = v[1:, :]
    p2 = np.full_like(v, np.inf)
    p2[:, :-1] = v[:, 1:]
    act = np.where((B <= p1) & (B <= p2), 0,
                   np.where(p1 <= p2, 1, 2)).astype(np.int8)
    return act, B, p1, p2


def _pde_scale(co: StencilCoeffs, gamma: float, shape) -> np.ndarray:
    """Per-node diagonal of the diffuse linear system (converts a fixed-point
    defect in value units into a PDE-scale residual)."""
    s = np.full(shape, gamma + sum(co.interior()))
    s[-1, :] = gamma + co.rW + co.rN + co.rS
    s[:, -1] = gamma + co.tS + co.tE + co.tW
    s[-1, -1] = gamma + co.qW + co.qS
    s[0, :] = 1.0
    s[:, 0] = 1.0
    return s


def _fixed_point_residual(co, gamma, v, rc, act) -> float:
    """Sup norm of the residual of V = min(backups): PDE-scaled at diffuse
    nodes (so it is the linear-system residual there), value-scaled at push
    nodes (where the copy equation holds exactly at convergence)."""
    _, B, p1, p2 = _improve(co, gamma, v, rc)
    best = np.minimum(B, np.minimum(p1, p2))
    defect = np.abs(v - best)
    scale = np.where(act == 0, _pde_scale(co, gamma, v.shape), 1.0)
    return float((defect * scale).max())


def _policy_iteration(co, gamma, rc, v, omega, change_tol, resid_tol,
                      sweep_budget, max_improvements, strict):
    act, _, _, _ = _improve(co, gamma, v, rc)
    sweeps = 0
    change = np.inf
    resid = np.inf
    for it in range(max_improvements):
        spent = 0
        while True:
            n = int(min(_CHUNK, sweep_budget - sweeps, _EVAL_CAP - spent))
            if n <= 0:
                break
            change = policy_sweeps(v, rc, act, gamma, *co.interior(),
                                   co.rW, co.rN, co.rS,
                                   co.tS, co.tE, co.tW, co.qW, co.qS,
                                   float(omega), n)
            sweeps += n
            spent += n
            if change < change_tol:
                break
        new_act, _, _, _ = _improve(co, gamma, v, rc)
        stable = bool(np.array_equal(new_act, act))
        act = new_act
        if stable and change < change_tol:
            resid = _fixed_point_residual(co, gamma, v, rc, act)
            if resid <= resid_tol:
                return v, act, sweeps, change, resid, it + 1
        if sweeps >= sweep_budget:
            break
    resid = _fixed_point_residual(co, gamma, v, rc, act)
    if strict:
        raise NonConvergenceError(
            f"policy iteration did not converge ({sweeps} sweeps, "
            f"last change {change:.3e}, fixed-point residual {resid:.3e})",
            last_change=float(change), last_residual=float(resid),
            iterations=sweeps)
    return v, act, sweeps, change, resid, max_improvements


def solve_control_value(model: ModelParams, cost, grid: GridSpec, *,
                        omega: float = 1.5, change_tol: float = 1e-8,
                        resid_tol: float = 2.5e-7, max_sweeps: int = 200_000,
                        max_improvements: int = 60,
                        cascade: bool = True) -> ScalarField:
    """Solve the discrete switching system for the control value.

    `cost` may be canonical CostParams or a TwoPieceCost in gradient form;
    only its running-cost rate enters the system.  Returns a ScalarField
    (kind "control-value") whose meta records the action table ("actions":
    0 diffuse, 1 push toward +x1, 2 push toward +x2), sweep and improvement
    counts, the final change and fixed-point residual, and the discrete
    Lipschitz constants max |dV|/h per direction.
    """
    if not (0.0 < omega < 2.0):
        raise ConfigError("omega must lie in (0, 2)")
    if isinstance(cost, CostParams):
        validate(model, cost)
    elif not isinstance(cost, TwoPieceCost):
        raise ConfigError("cost must be CostParams or TwoPieceCost")
    gamma = float(model.gamma)

    schedule = _cascade_schedule(grid, cascade)
    v = None
    total_sweeps = 0
    for lvl, gl in enumerate(schedule):
        co = build_coeffs(model, gl)
        rc = _running_cost_nodes(cost, gl)
        if v is None:
            v = rc / gamma
        final = lvl == len(schedule) - 1
        budget = max_sweeps if final else max_sweeps // 4
        v, act, sweeps, change, resid, improvements = _policy_iteration(
            co, gamma, rc, v, omega, change_tol, resid_tol,
            budget, max_improvements, strict=final)
        total_sweeps += sweeps
        if not final:
            v = _prolong(v)

    d1 = np.abs(np.diff(v, axis=0)).max() / grid.h1
    d2 = np.abs(np.diff(v, axis=1)).max() / grid.h2
    meta = {
        "theta": model.theta, "sigma": model.sigma, "gamma": model.gamma,
        "cost": _cost_meta(cost),
        "omega": omega, "change_tol": change_tol, "resid_tol": resid_tol,
        "cascade": cascade, "sweeps": total_sweeps,
        "improvements": improvements,
        "final_change": float(change), "final_residual": float(resid),
        "lipschitz_d1": float(d1), "lipschitz_d2": float(d2),
        "actions": act,
    }
    return ScalarField(grid, v, kind="control-value", meta=meta)


def _cost_meta(cost) -> dict:
    if isinstance(cost, CostParams):
        return {"a": cost.a, "b1": cost.b1, "b2": cost.b2, "c": cost.c}
    return {"alpha": cost.alpha, "beta": cost.beta, "c": cost.c}


def push_active_cells(v_field: ScalarField) -> np.ndarray:
    """Boolean mask of nodes whose converged action is a push."""
    act = v_field.meta.get("actions")
    if act is None:
        raise ConfigError("field has no action table in meta")
    return np.asarray(act) != 0


def hjb_residual(model: ModelParams, cost, v_field: ScalarField,
                 u_field: ScalarField | None = None, boundary=None, *,
                 buffer_cells: int = 2) -> ScalarField:
    """PDE residual of the control value inside the numerical no-action
    region, NaN elsewhere.

    The no-action region is taken as {x1 > psi(x2) + h1, x2 > h2}, with psi
    from `boundary` (or extracted from `u_field` when no boundary is given),
    shrunk by `buffer_cells` cells away from the far edges where the
    one-sided closures distort the stencil.  Inside it the control value
    should satisfy the linear PDE (gamma + A) V = running cost, so the
    residual there measures grid consistency; large values flag either push
    intrusion or a misplaced boundary.
    """
    if boundary is None:
        if u_field is None:
            raise ConfigError("need a boundary or a stopping-value field to locate the no-action region")
        from .boundary import extract_boundary
        boundary = extract_boundary(u_field)
    g = v_field.grid
    bx2 = np.asarray(boundary.x2)
    if bx2[-1] < g.x2()[-1] - 1e-9:
        raise ConfigError("boundary does not cover the x2 range of the value field")
    psi = boundary(g.x2())

    co = build_coeffs(model, g)
    rc = _running_cost_nodes(cost, g)
    r = apply_operator(co, model.gamma, v_field.values) - rc

    x1 = g.x1()[:, None]
    x2 = g.x2()[None, :]
    mask = (x1 > psi[None, :] + g.h1) & (x2 > g.h2)
    mask[: 1, :] = False
    mask[g.n1 - buffer_cells:, :] = False
    mask[:, g.n2 - buffer_cells:] = False
    out = np.where(mask, r, np.nan)
    meta = {
        "buffer_cells": buffer_cells,
        "evaluated_nodes": int(mask.sum()),
        "max_abs_residual": float(np.nanmax(np.abs(out))) if mask.any() else np.nan,
    }
    return ScalarField(g, out, kind="residual", meta=meta)

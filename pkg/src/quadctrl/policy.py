"""Reflection policies and Monte Carlo evaluation of their discounted cost.

A policy here is a moving lower barrier for the first coordinate: the second
coordinate is always reflected at zero, and after each x2 update the first
coordinate is projected up to barrier(x2).  Four barrier families cover the
conjectured optimum and the comparison battery:

    free-boundary-reflect    barrier interpolated from an extracted boundary
    ray-reflect              barrier x2 / c (the cost's kink ray)
    axis-reflect             barrier 0 (normal reflection at the axes)
    scaled-boundary-reflect  kappa times an extracted boundary

Stepping is per-step projection (the discrete Skorokhod map coordinate by
coordinate, x2 first because the barrier takes the already-reflected x2), so
pushing happens exactly when the post-step state sits on the barrier.  The
cost integral is accumulated by the trapezoid rule on the time grid and the
truncation beyond the horizon is covered by a reported tail bound computed
from a linear-growth envelope of the expected running cost.

Common-random-number comparisons across policies work by fixing (seed,
block_size, dt, horizon): every policy then consumes identical Gaussian
increments path for path, and block-keyed streams make the result
independent of how blocks are scheduled (including the workers option,
which farms blocks out to processes).
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass

import numpy as np

from .boundary import Boundary
from .errors import ConfigError, DegenerateModeError
from .model import CostParams, ModelParams, TwoPieceCost
from .paths import ControlledPath, block_generator

__all__ = [
    "PolicySpec",
    "SimResult",
    "step_policy",
    "evaluate_policy",
    "simulate_policy_path",
    "policy_tail_bound",
]

_KINDS = ("free-boundary-reflect", "ray-reflect", "axis-reflect",
          "scaled-boundary-reflect")


@dataclass(frozen=True, eq=False)
class PolicySpec:
    """Barrier-reflection policy: which barrier, and its parameters.

    Use the classmethod constructors; they validate the pieces each kind
    needs.  Extracted boundaries are interpolated in x2 and clamped to their
    end rows outside [0, L2] (solve on an enlarged domain if paths spend
    real time above the top row).
    """

    kind: str
    c: float | None = None
    boundary: Boundary | None = None
    kappa: float = 1.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown policy kind {self.kind!r}; expected one of {_KINDS}")
        if self.kind == "ray-reflect":
            if self.c is None or not (self.c > 0.0):
                raise ConfigError("ray-reflect needs a positive kink slope c")
        if self.kind in ("free-boundary-reflect", "scaled-boundary-reflect"):
            if self.boundary is None:
                raise ConfigError(f"{self.kind} needs an extracted boundary")
            if self.boundary.degenerate:
                raise DegenerateModeError(
                    "degenerate boundary: the barrier collapses onto the kink "
                    "ray; use the ray-reflect policy instead")
        if self.kind == "scaled-boundary-reflect" and not (self.kappa > 0.0):
            raise ConfigError("scaled-boundary-reflect needs kappa > 0")

    @classmethod
    def free_boundary(cls, boundary: Boundary) -> "PolicySpec":
        return cls(kind="free-boundary-reflect", boundary=boundary)

    @classmethod
    def ray(cls, c: float) -> "PolicySpec":
        return cls(kind="ray-reflect", c=c)

    @classmethod
    def axis(cls) -> "PolicySpec":
        return cls(kind="axis-reflect")

    @classmethod
    def scaled_boundary(cls, boundary: Boundary, kappa: float) -> "PolicySpec":
        return cls(kind="scaled-boundary-reflect", boundary=boundary, kappa=kappa)

    def barrier(self, q2):
        """Barrier abscissa at (an array of) second coordinates."""
        q2 = np.asarray(q2, dtype=float)
        if self.kind == "axis-reflect":
            out = np.zeros_like(q2)
        elif self.kind == "ray-reflect":
            out = q2 / self.c
        else:
            out = np.interp(q2, self.boundary.x2, self.boundary.psi)
            if self.kind == "scaled-boundary-reflect":
                out = self.kappa * out
        return out if out.ndim else float(out)

    def describe(self) -> str:
        if self.kind == "ray-reflect":
            return f"ray-reflect(1/c={1.0 / self.c:.6g})"
        if self.kind == "scaled-boundary-reflect":
            return f"scaled-boundary-reflect(kappa={self.kappa:g})"
        return self.kind


def step_policy(policy: PolicySpec, state, incr):
    """One projected transition: x2 reflects at zero, then x1 at the barrier.

    Returns (new_state, y_increments), both length-2 arrays; the pushing
    increments are nonnegative and positive only when the new state sits
    exactly on the corresponding barrier.  Apply with a zero increment to
    realize the initial jump onto the barrier.
    """
    state = np.asarray(state, dtype=float).reshape(2)
    incr = np.asarray(incr, dtype=float).reshape(2)
    if state[0] < 0.0 or state[1] < 0.0:
        raise ConfigError("state must lie in the nonnegative quadrant")
    x2_free = state[1] + incr[1]
    x2 = max(x2_free, 0.0)
    dy2 = x2 - x2_free
    b = float(policy.barrier(x2))
    x1_free = state[0] + incr[0]
    x1 = max(x1_free, b)
    dy1 = x1 - x1_free
    return np.array([x1, x2]), np.array([dy1, dy2])


@dataclass(frozen=True, eq=False)
class SimResult:
    """Monte Carlo estimate of the discounted cost of one policy from one
    start point, with the truncation tail bound folded into the report."""

    j_estimate: float
    std_error: float
    n_paths: int
    dt: float
    horizon: float
    tail_bound: float
    initial_jump: np.ndarray
    kind: str
    seed: int

    def row(self, x) -> dict:
        """Flat record for CSV export."""
        return {
            "policy": self.kind, "x1": float(x[0]), "x2": float(x[1]),
            "j": self.j_estimate, "stderr": self.std_error,
            "tail_bound": self.tail_bound, "n_paths": self.n_paths,
            "dt": self.dt, "T": self.horizon, "seed": self.seed,
        }


def _growth_coeffs(cost) -> tuple[float, float]:
    """(M1, M2) with running cost <= M1 z1 + M2 z2 on the quadrant."""
    if isinstance(cost, CostParams):
        return max(cost.b1, 0.0), 1.0
    a, b = cost.alpha, cost.beta
    return max(a[0], b[0], 0.0), max(a[1], b[1], 0.0)


def policy_tail_bound(model: ModelParams, cost, policy: PolicySpec, x,
                      T: float) -> float:
    """Upper estimate of the discounted cost accrued after time T.

    Uses a crude linear-growth envelope E cost(X(t)) <= A + B t + C sqrt(t):
    the reflected second coordinate is bounded through standard running-max
    moments of Brownian motion, and the first through the barrier envelope
    (constant for clamped extracted boundaries, linear in x2 for the ray).
    Crude constants are fine here; at practical horizons the discount factor
    makes the whole bound tiny.
    """
    x = np.asarray(x, dtype=float).reshape(2)
    gamma = float(model.gamma)
    s1 = float(np.sqrt(model.sigma[0, 0]))
    s2 = float(np.sqrt(model.sigma[1, 1]))
    t1, t2 = np.abs(model.theta)
    M1, M2 = _growth_coeffs(cost)
    if policy.kind == "ray-reflect":
        p0, slope = 0.0, 1.0 / policy.c
    elif policy.kind == "axis-reflect":
        p0, slope = 0.0, 0.0
    else:
        p0 = policy.kappa if policy.kind == "scaled-boundary-reflect" else 1.0
        p0 *= float(np.max(policy.boundary.psi))
        slope = 0.0
    q = np.sqrt(2.0 / np.pi)
    # E X2(t) <= x2 + t2 t + s2 q sqrt(t); E sup X2 <= x2 + t2 t + 2 s2 q sqrt(t)
    # X1(t) <= max(x1 + B1(t), sup_s [barrier(X2(s)) + B1(t) - B1(s)])
    A = M1 * (x[0] + p0 + slope * x[1]) + M2 * x[1]
    B = M1 * (2.0 * t1 + slope * t2) + M2 * t2
    C = (M1 * (3.0 * s1 + 2.0 * slope * s2) + M2 * s2) * q
    if T <= 0.0:
        raise ConfigError("horizon must be positive")
    rootT = np.sqrt(T)
    integral = (A / gamma + B * (T / gamma + 1.0 / gamma ** 2)
                + C * (rootT / gamma + 1.0 / (2.0 * gamma ** 2 * rootT)))
    return float(np.exp(-gamma * T) * integral)


def _pick_horizon(model, cost, policy, x, tail_tol: float) -> float:
    T = max(np.log(1.0 / tail_tol) / float(model.gamma), 1.0)
    while policy_tail_bound(model, cost, policy, x, T) > tail_tol:
        T *= 1.25
    return float(T)


def _eval_block(model, cost, policy, x, dt, steps, seed, block, nb):
    """Discounted trapezoid cost of nb paths in one seeded block."""
    rng = block_generator(seed, block)
    gamma = float(model.gamma)
    chol_t = (model.chol * np.sqrt(dt)).T
    drift = model.theta * dt
    x1 = np.full(nb, x[0])
    x2 = np.full(nb, x[1])
    b = policy.barrier(x2)
    x1 = np.maximum(x1, b)
    acc = 0.5 * dt * cost.rate(x1, x2)
    for k in range(1, steps + 1):
        incr = rng.standard_normal((nb, 2)) @ chol_t + drift
        x2 = np.maximum(x2 + incr[:, 1], 0.0)
        x1 = np.maximum(x1 + incr[:, 0], policy.barrier(x2))
        w = dt if k < steps else 0.5 * dt
        acc += w * np.exp(-gamma * k * dt) * cost.rate(x1, x2)
    return acc


def evaluate_policy(model: ModelParams, cost, policy: PolicySpec, x,
                    dt: float, T: float | None = None,
                    n_paths: int = 10_000, seed: int = 0, *,
                    tail_tol: float | None = None, block_size: int = 4096,
                    workers: int = 1) -> SimResult:
    """Monte Carlo estimate of the discounted running cost under a policy.

    With T omitted, the horizon is grown until the tail bound drops below
    tail_tol (default 1e-4 * (1 + |x|)).  For common-random-number
    comparisons pass the same seed, dt, T, n_paths and block_size to every
    policy.  workers > 1 distributes blocks over processes; the estimate is
    bit-identical for any worker count because block k always draws from the
    (seed, k) stream.
    """
    x = np.asarray(x, dtype=float).reshape(2)
    if np.any(x < 0.0):
        raise ConfigError("start point must lie in the nonnegative quadrant")
    if dt <= 0.0:
        raise ConfigError("dt must be positive")
    if n_paths < 2:
        raise ConfigError("need at least two paths for a standard error")
    if workers < 1:
        raise ConfigError("workers must be at least 1")
    if tail_tol is None:
        tail_tol = 1e-4 * (1.0 + float(np.linalg.norm(x)))
    if T is None:
        T = _pick_horizon(model, cost, policy, x, tail_tol)
    elif T <= 0.0:
        raise ConfigError("horizon must be positive")
    steps = int(np.ceil(T / dt))
    tail = policy_tail_bound(model, cost, policy, x, steps * dt)

    sizes = [min(block_size, n_paths - s) for s in range(0, n_paths, block_size)]
    args = [(model, cost, policy, x, dt, steps, seed, blk, nb)
            for blk, nb in enumerate(sizes)]
    if workers == 1:
        parts = [_eval_block(*a) for a in args]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_eval_block_star, args))
    vals = np.concatenate(parts)
    _, jump = step_policy(policy, x, (0.0, 0.0))
    return SimResult(
        j_estimate=float(vals.mean()),
        std_error=float(vals.std(ddof=1) / np.sqrt(n_paths)),
        n_paths=n_paths, dt=dt, horizon=float(steps * dt),
        tail_bound=tail, initial_jump=jump, kind=policy.describe(), seed=seed)


def _eval_block_star(a):
    return _eval_block(*a)


def simulate_policy_path(model: ModelParams, policy: PolicySpec, x,
                         dt: float, steps: int, seed: int = 0,
                         block: int = 0) -> ControlledPath:
    """One full trajectory with its cumulative pushing processes (for path
    dumps and the pathwise feasibility tests)."""
    x = np.asarray(x, dtype=float).reshape(2)
    if np.any(x < 0.0):
        raise ConfigError("start point must lie in the nonnegative quadrant")
    rng = block_generator(seed, block)
    chol_t = (model.chol * np.sqrt(dt)).T
    drift = model.theta * dt
    xs = np.empty((steps + 1, 2))
    ys = np.empty((steps + 1, 2))
    state, dy = step_policy(policy, x, (0.0, 0.0))
    xs[0] = state
    ys[0] = dy
    for k in range(1, steps + 1):
        incr = rng.standard_normal((1, 2)) @ chol_t + drift
        state, dy = step_policy(policy, state, incr[0])
        xs[k] = state
        ys[k] = ys[k - 1] + dy
    return ControlledPath(dt=dt, x=xs, y=ys)

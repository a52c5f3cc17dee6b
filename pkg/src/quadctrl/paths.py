"""Path generation: seeding, Gaussian increments, discrete reflection maps.

Reproducibility contract: all randomness flows through counter-based Philox
streams keyed by (master seed, block index).  A Monte Carlo run splits its
paths into fixed-size blocks, block k drawing from `block_generator(seed, k)`
regardless of which worker executes it, so results are bit-identical for a
given seed and independent of how blocks are scheduled.

`skorokhod_1d` is the discrete one-sided reflection map.  It is exact for the
sampled points: the pushing sequence is the smallest nondecreasing one keeping
the path nonnegative, and pushes happen only at nodes sitting exactly at zero
(complementarity holds in floating point, not just up to rounding).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .model import ModelParams

__all__ = [
    "PathSample",
    "StoppingPath",
    "ControlledPath",
    "block_generator",
    "gaussian_increments",
    "skorokhod_1d",
    "simulate_z",
    "bridge_min",
    "reflected_step_exact",
]


def block_generator(seed: int, block: int = 0) -> np.random.Generator:
    """Counter-based generator for one block of paths."""
    if seed < 0 or block < 0:
        raise ConfigError("seed and block index must be nonnegative")
    key = np.array([np.uint64(seed), np.uint64(block)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True, eq=False)
class PathSample:
    """Brownian increments over a uniform time grid: shape (steps, 2),
    row k distributed N(theta*dt, sigma*dt)."""

    dt: float
    increments: np.ndarray
    seed: int
    block: int = 0

    @property
    def steps(self) -> int:
        return self.increments.shape[0]


def gaussian_increments(model: ModelParams, dt: float, steps: int,
                        seed: int, block: int = 0, n_paths: int = 1) -> np.ndarray:
    """Exact Brownian increments, shape (steps, n_paths, 2).

    Mean theta*dt and covariance sigma*dt per row, via the Cholesky factor of
    sigma; no discretization error enters here.
    """
    if dt <= 0.0 or steps < 0:
        raise ConfigError("dt must be positive and steps nonnegative")
    rng = block_generator(seed, block)
    z = rng.standard_normal((steps, n_paths, 2))
    scale = model.chol * np.sqrt(dt)
    return model.theta * dt + z @ scale.T


def sample_increments(model: ModelParams, dt: float, steps: int,
                      seed: int, block: int = 0) -> PathSample:
    incr = gaussian_increments(model, dt, steps, seed, block, n_paths=1)[:, 0, :]
    return PathSample(dt=dt, increments=incr, seed=seed, block=block)


def skorokhod_1d(x0: float, increments: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Discrete reflection at zero of the walk x0 + cumsum(increments).

    Returns (w, l), both of length len(increments) + 1 with w[0] = x0 and
    l[0] = 0: w is the reflected path, l the cumulative pushing.  l is the
    running maximum of the constraint deficit, so it is the minimal
    nondecreasing process with w = free + l >= 0, and w[k] == 0.0 exactly
    whenever l increases at step k.
    """
    if x0 < 0.0:
        raise ConfigError("x0 must be nonnegative")
    increments = np.asarray(increments, dtype=float)
    free = np.empty(increments.shape[0] + 1)
    free[0] = x0
    np.cumsum(increments, out=free[1:])
    free[1:] += x0
    l = np.maximum.accumulate(np.maximum(-free, 0.0))
    w = free + l
    return w, l


@dataclass(frozen=True, eq=False)
class StoppingPath:
    """One trajectory of the stopping-problem state: first coordinate free,
    second reflected at zero; absorbed when the first coordinate hits zero."""

    dt: float
    z: np.ndarray              # (steps+1, 2); rows after absorption are frozen
    absorbed: bool
    absorption_index: int      # first grid index with z1 <= 0 (or -1)
    absorption_time: float     # sign-change time refined by linear interpolation (or inf)


def simulate_z(model: ModelParams, x, dt: float, steps: int,
               seed: int, block: int = 0) -> StoppingPath:
    """Simulate the stopping-problem state from x on a uniform time grid.

    The second coordinate is reflected with the discrete map; absorption in
    the first coordinate is detected by sign change and the crossing time is
    refined by linear interpolation within the step.  Past absorption the
    path is frozen at its absorption-step value.
    """
    x = np.asarray(x, dtype=float).reshape(2)
    if np.any(x < 0.0):
        raise ConfigError("start point must lie in the nonnegative quadrant")
    incr = gaussian_increments(model, dt, steps, seed, block, n_paths=1)[:, 0, :]
    z1_free = np.empty(steps + 1)
    z1_free[0] = x[0]
    np.cumsum(incr[:, 0], out=z1_free[1:])
    z1_free[1:] += x[0]
    z2, _ = skorokhod_1d(x[1], incr[:, 1])

    if x[0] <= 0.0:
        hit = 0
    else:
        below = np.flatnonzero(z1_free[1:] <= 0.0)
        hit = below[0] + 1 if below.size else -1

    z = np.column_stack([z1_free, z2])
    if hit >= 0:
        z[hit + 1:] = z[hit]
        if hit == 0:
            t_abs = 0.0
        else:
            za, zb = z1_free[hit - 1], z1_free[hit]
            frac = za / (za - zb) if za != zb else 0.0
            t_abs = (hit - 1 + frac) * dt
        return StoppingPath(dt=dt, z=z, absorbed=True,
                            absorption_index=hit, absorption_time=t_abs)
    return StoppingPath(dt=dt, z=z, absorbed=False,
                        absorption_index=-1, absorption_time=np.inf)


@dataclass(frozen=True, eq=False)
class ControlledPath:
    """One trajectory of a reflected control policy: states and the two
    cumulative pushing processes on a uniform time grid."""

    dt: float
    x: np.ndarray              # (steps+1, 2)
    y: np.ndarray              # (steps+1, 2), nondecreasing, y[0] = initial jump


def bridge_min(a: np.ndarray, b: np.ndarray, var_dt: float,
               u: np.ndarray) -> np.ndarray:
    """Minimum over one step of a Brownian bridge from a to b with variance
    var_dt, sampled by inversion from uniforms u in (0, 1).

    The bridge law does not depend on the drift, so this is exact for drifted
    increments as well.
    """
    return 0.5 * (a + b - np.sqrt((a - b) ** 2 - 2.0 * var_dt * np.log(u)))


def reflected_step_exact(w: np.ndarray, incr: np.ndarray, var_dt: float,
                         u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One exact-in-law transition of Brownian motion reflected at zero.

    Takes the current state, a free Gaussian increment and a uniform sample;
    accounts for excursions below zero between grid points via the bridge
    minimum, which removes the half-order timing bias of plain per-step
    projection.  Returns (next state, pushing added this step).
    """
    free = w + incr
    m = bridge_min(w, free, var_dt, u)
    push = np.maximum(-m, 0.0)
    return free + push, push

"""Problem data: dynamics parameters and the two-piece linear running cost.

The state is a controlled planar Brownian motion confined to the nonnegative
quadrant.  Uncontrolled increments have drift ``theta`` and covariance
``sigma`` per unit time; costs are discounted at rate ``gamma``.  The running
cost is continuous, convex, piecewise linear with a single kink along the ray
``z2 = c * z1``:

    rate(z) = z2 - a * z1       if z2 >= c * z1   (above / on the ray)
            = b1 * z1 + b2 * z2 otherwise          (below the ray)

with ``a > 0``, ``b1 >= 0``, ``0 <= b2 < 1`` and the kink slope forced by
continuity, ``c = (a + b1) / (1 - b2)``.  This is the canonical form used by
every solver in the package; `from_alpha_beta` maps a cost given as a pair of
gradient vectors onto it.

The payoff rate of the associated optimal stopping problem is the one-sided
derivative of the running cost in the first coordinate: ``-a`` above the ray,
``b1`` below it.  ``b1 == 0`` is the degenerate mode: the stopping value is
identically zero and the free boundary collapses onto the kink ray.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

__all__ = [
    "ModelParams",
    "CostParams",
    "TwoPieceCost",
    "ValidationReport",
    "from_alpha_beta",
    "running_cost",
    "stopping_payoff",
    "validate",
]

MODE_REGULAR = "regular"
MODE_DEGENERATE = "degenerate-b1-zero"


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Drift vector, covariance matrix and discount rate of the free motion."""

    theta: np.ndarray
    sigma: np.ndarray
    gamma: float

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).reshape(2)
        sigma = np.asarray(self.sigma, dtype=float).reshape(2, 2)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "sigma", sigma)
        if not np.all(np.isfinite(theta)) or not np.all(np.isfinite(sigma)):
            raise ConfigError("model parameters must be finite")
        if abs(sigma[0, 1] - sigma[1, 0]) > 1e-12 * (1.0 + abs(sigma[0, 1])):
            raise ConfigError("sigma must be symmetric")
        if np.linalg.eigvalsh(sigma).min() <= 0.0:
            raise ConfigError("sigma must be positive definite")
        if not (self.gamma > 0.0):
            raise ConfigError("gamma must be positive")

    @property
    def chol(self) -> np.ndarray:
        """Lower Cholesky factor of sigma (used to draw exact increments)."""
        return np.linalg.cholesky(self.sigma)

    def monotone_scheme_ok(self) -> bool:
        """Whether min(sigma11, sigma22) >= |sigma12|, the condition under
        which the nine-point stencil on a square mesh stays monotone."""
        return min(self.sigma[0, 0], self.sigma[1, 1]) >= abs(self.sigma[0, 1])


@dataclass(frozen=True)
class CostParams:
    """Canonical two-piece linear cost (see module docstring)."""

    a: float
    b1: float
    b2: float

    def __post_init__(self):
        for name in ("a", "b1", "b2"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ConfigError(f"cost parameter {name} must be finite")
        if not (self.a > 0.0):
            raise ConfigError("cost parameter a must be positive")
        if self.b1 < 0.0:
            raise ConfigError("cost parameter b1 must be nonnegative")
        if not (0.0 <= self.b2 < 1.0):
            raise ConfigError("cost parameter b2 must lie in [0, 1)")

    @property
    def c(self) -> float:
        return (self.a + self.b1) / (1.0 - self.b2)

    @property
    def degenerate(self) -> bool:
        return self.b1 == 0.0

    def rate(self, z1, z2):
        """Running cost, elementwise on broadcastable arrays."""
        z1 = np.asarray(z1, dtype=float)
        z2 = np.asarray(z2, dtype=float)
        above = z2 >= self.c * z1
        return np.where(above, z2 - self.a * z1, self.b1 * z1 + self.b2 * z2)

    def payoff_rate(self, z1, z2):
        """Stopping payoff rate: one-sided derivative of `rate` in z1.

        On the kink ray itself the above-ray branch applies, matching the
        convention in `rate`.
        """
        z1 = np.asarray(z1, dtype=float)
        z2 = np.asarray(z2, dtype=float)
        above = z2 >= self.c * z1
        return np.where(above, -self.a, self.b1)


@dataclass(frozen=True, eq=False)
class TwoPieceCost:
    """Two-piece linear cost given by its gradient on each side of the kink
    ray: ``alpha . z`` above the ray ``z2 = c*z1``, ``beta . z`` below it.

    Continuity across the ray, convexity and nonnegativity on the quadrant
    are enforced at construction.  Use `from_alpha_beta` to reduce a cost in
    this form to canonical `CostParams` when it falls in the regime the
    solvers handle.
    """

    alpha: np.ndarray
    beta: np.ndarray
    c: float

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float).reshape(2)
        beta = np.asarray(self.beta, dtype=float).reshape(2)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(beta)) and np.isfinite(self.c)):
            raise ConfigError("cost gradients and kink slope must be finite")
        if not (self.c > 0.0):
            raise ConfigError("kink slope c must be positive")
        scale = 1.0 + np.abs(alpha).max() + np.abs(beta).max()
        gap = (alpha[0] + self.c * alpha[1]) - (beta[0] + self.c * beta[1])
        if abs(gap) > 1e-9 * scale:
            raise ConfigError("cost is discontinuous across the kink ray: "
                              "alpha.(1,c) must equal beta.(1,c)")
        if alpha[0] > beta[0] + 1e-12 * scale or beta[1] > alpha[1] + 1e-12 * scale:
            raise ConfigError("cost is not convex: need alpha1 <= beta1 and beta2 <= alpha2")
        if alpha[1] < 0.0 or beta[0] < 0.0 or alpha[0] + self.c * alpha[1] < 0.0:
            raise ConfigError("cost is negative somewhere on the quadrant")

    def rate(self, z1, z2):
        z1 = np.asarray(z1, dtype=float)
        z2 = np.asarray(z2, dtype=float)
        above = z2 >= self.c * z1
        return np.where(above,
                        self.alpha[0] * z1 + self.alpha[1] * z2,
                        self.beta[0] * z1 + self.beta[1] * z2)

    def regime(self) -> str:
        """Coarse classification by the signs of the two gradients."""
        a_nonneg = bool(np.all(self.alpha >= 0.0))
        b_nonneg = bool(np.all(self.beta >= 0.0))
        if a_nonneg and b_nonneg:
            return "both-nonnegative"
        if not a_nonneg and b_nonneg:
            return "first-coordinate-decreasing-above"
        if a_nonneg and not b_nonneg:
            return "second-coordinate-decreasing-below"
        return "decreasing-on-both-branches"


def from_alpha_beta(alpha, beta, c: float) -> CostParams:
    """Reduce a gradient-form cost to canonical `CostParams`.

    Requires the regime the solvers handle: decreasing in z1 above the ray
    (alpha1 < 0, alpha2 > 0) and nondecreasing below it (beta >= 0).  The
    reduction divides the cost by alpha2, so the returned parameters describe
    the original cost up to the positive factor alpha2; value functions
    computed from them must be rescaled by alpha2 if absolute levels matter.
    """
    two = TwoPieceCost(alpha, beta, c)
    regime = two.regime()
    if regime == "both-nonnegative":
        raise ConfigError(
            "both cost gradients are nonnegative: no interior pushing is ever "
            "optimal and the canonical reduction does not apply; solve with "
            "the TwoPieceCost directly")
    if regime != "first-coordinate-decreasing-above":
        raise ConfigError(
            f"cost regime '{regime}' is outside the family this package "
            "solves (needs alpha1 < 0 <= alpha2 and beta >= 0)")
    a2 = two.alpha[1]
    if a2 <= 0.0:
        raise ConfigError("alpha2 must be positive for the canonical reduction")
    return CostParams(a=-two.alpha[0] / a2, b1=two.beta[0] / a2, b2=two.beta[1] / a2)


def _check_quadrant(z: np.ndarray):
    if np.any(z < 0.0):
        raise ConfigError("state must lie in the nonnegative quadrant")


def running_cost(cost: CostParams | TwoPieceCost, z) -> float | np.ndarray:
    """Running cost at a point (or an (..., 2) array of points) of the quadrant."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != 2:
        raise ConfigError("z must have two coordinates")
    _check_quadrant(z)
    out = cost.rate(z[..., 0], z[..., 1])
    return float(out) if out.ndim == 0 else out


def stopping_payoff(cost: CostParams, z) -> float | np.ndarray:
    """Stopping payoff rate at a point (or an (..., 2) array of points)."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != 2:
        raise ConfigError("z must have two coordinates")
    _check_quadrant(z)
    out = cost.payoff_rate(z[..., 0], z[..., 1])
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    c: float
    mode: str
    monotone_scheme_ok: bool
    notes: tuple = field(default=())


def validate(model: ModelParams, cost: CostParams) -> ValidationReport:
    """Cross-check a (model, cost) pair and report derived quantities.

    Construction of the dataclasses already rejects ill-posed parameters, so
    this mainly reports the derived kink slope, the operating mode and
    whether the covariance satisfies the monotone-stencil condition that the
    grid solvers require on square meshes.
    """
    notes = []
    mono = model.monotone_scheme_ok()
    if not mono:
        notes.append("min(sigma11, sigma22) < |sigma12|: grid solvers will reject this covariance")
    mode = MODE_DEGENERATE if cost.degenerate else MODE_REGULAR
    if mode == MODE_DEGENERATE:
        notes.append("b1 = 0: stopping value is identically zero; use the ray policy")
    return ValidationReport(ok=True, c=cost.c, mode=mode,
                            monotone_scheme_ok=mono, notes=tuple(notes))

"""Monotone nine-point finite-difference stencil shared by the grid solvers.

Both grid solvers discretize the same elliptic operator

    (A f)(x) = -1/2 tr(sigma D^2 f)(x) - theta . Df(x)

on a uniform rectangular mesh.  Second derivatives use central differences,
the mixed derivative the sign-adapted four-corner stencil (NE/SW corners when
sigma12 >= 0, NW/SE when sigma12 < 0), and first derivatives are upwinded
against the drift sign.  Written with the diagonal term moved to the left,
the discrete equation at an interior node is

    (gamma + sum of coefficients) f[i,j] - sum_nb coeff_nb * f[nb] = rhs[i,j]

with every neighbor coefficient nonnegative provided the mesh satisfies
    sigma11 / h1^2 >= |sigma12| / (h1 h2)   and
    sigma22 / h2^2 >= |sigma12| / (h1 h2),
which on a square mesh reduces to min(sigma11, sigma22) >= |sigma12|.  That
sign structure makes the scheme monotone, hence convergent for both the
obstacle problem and the switching system built on top of it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MonotoneSchemeError
from .fields import GridSpec
from .model import ModelParams

__all__ = ["StencilCoeffs", "build_coeffs", "apply_operator"]


@dataclass(frozen=True)
class StencilCoeffs:
    """Nonnegative neighbor weights of the discretized operator.

    E/W step in x1, N/S in x2; the four corner weights carry the mixed
    derivative.  r*/t*/q* are the one-sided closures used on the far edges
    where a full centered stencil does not fit: second derivatives normal to
    the edge and the mixed term are dropped there (zero-slope extrapolation),
    inward first derivatives kept one-sided, outward ones dropped.
    """

    cE: float
    cW: float
    cN: float
    cS: float
    cNE: float
    cNW: float
    cSE: float
    cSW: float
    # right edge (i = n1): only W/N/S neighbors available
    rW: float
    rN: float
    rS: float
    # top edge (j = n2): only S/E/W neighbors available
    tS: float
    tE: float
    tW: float
    # far corner (n1, n2): only W/S neighbors available
    qW: float
    qS: float

    def interior(self) -> tuple[float, ...]:
        return (self.cE, self.cW, self.cN, self.cS,
                self.cNE, self.cNW, self.cSE, self.cSW)


def build_coeffs(model: ModelParams, grid: GridSpec) -> StencilCoeffs:
    """Neighbor weights for the operator of `model` on `grid`.

    Raises MonotoneSchemeError if the mixed-derivative weight would drive a
    direct-neighbor weight negative on this mesh.
    """
    h1, h2 = grid.h1, grid.h2
    s11 = model.sigma[0, 0]
    s22 = model.sigma[1, 1]
    s12 = model.sigma[0, 1]
    t1, t2 = model.theta

    a11 = 0.5 * s11 / h1 ** 2
    a22 = 0.5 * s22 / h2 ** 2
    a12 = 0.5 * abs(s12) / (h1 * h2)
    if a11 < a12 or a22 < a12:
        raise MonotoneSchemeError(
            "mixed-derivative weight exceeds a direct second-derivative "
            "weight on this mesh; need sigma11/h1^2 >= |sigma12|/(h1 h2) and "
            "sigma22/h2^2 >= |sigma12|/(h1 h2)")

    up1 = max(t1, 0.0) / h1   # drift pushing toward +x1: forward difference
    dn1 = max(-t1, 0.0) / h1
    up2 = max(t2, 0.0) / h2
    dn2 = max(-t2, 0.0) / h2

    cE = a11 - a12 + up1
    cW = a11 - a12 + dn1
    cN = a22 - a12 + up2
    cS = a22 - a12 + dn2
    if s12 >= 0.0:
        cNE = cSW = a12
        cNW = cSE = 0.0
    else:
        cNW = cSE = a12
        cNE = cSW = 0.0

    # One-sided closures: drop the curvature normal to the missing side and
    # the mixed term (zero-slope extrapolation); keep drift terms whose
    # upwind neighbor exists, drop those pointing off the grid.
    # Right edge i = n1: x2 curvature still fits, x1 terms one-sided.
    rW = dn1
    rN = a22 + up2
    rS = a22 + dn2
    # top edge j = n2: x2 curvature and mixed term dropped; x1 curvature kept
    tS = dn2
    tE = a11 + up1
    tW = a11 + dn1
    # far corner: both curvatures and the mixed term dropped
    qW = dn1
    qS = dn2

    return StencilCoeffs(cE=cE, cW=cW, cN=cN, cS=cS,
                         cNE=cNE, cNW=cNW, cSE=cSE, cSW=cSW,
                         rW=rW, rN=rN, rS=rS, tS=tS, tE=tE, tW=tW,
                         qW=qW, qS=qS)


def apply_operator(co: StencilCoeffs, gamma: float, f: np.ndarray) -> np.ndarray:
    """Discrete (gamma + A) f on interior nodes, NaN elsewhere.

    Vectorized companion of the sweep kernels, used for residual checks: the
    returned array r satisfies r[i,j] = (gamma + sum c) f[i,j] - sum c f[nb]
    for 0 < i < n1, 0 < j < n2.
    """
    out = np.full_like(f, np.nan)
    C = f[1:-1, 1:-1]
    acc = (co.cE * f[2:, 1:-1] + co.cW * f[:-2, 1:-1]
           + co.cN * f[1:-1, 2:] + co.cS * f[1:-1, :-2]
           + co.cNE * f[2:, 2:] + co.cNW * f[:-2, 2:]
           + co.cSE * f[2:, :-2] + co.cSW * f[:-2, :-2])
    denom = gamma + sum(co.interior())
    out[1:-1, 1:-1] = denom * C - acc
    return out

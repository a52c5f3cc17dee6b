"""Relaxation sweep kernels (numba).  Sequential Gauss-Seidel order with
alternating sweep direction; no fastmath so projections hit exact zeros and
results are reproducible bit for bit."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def obstacle_sweeps(u, rhs, gamma, cE, cW, cN, cS, cNE, cNW, cSE, cSW,
                    omega, nsweeps, top_dirichlet):
    """Projected SOR sweeps for the obstacle problem min(pde, u) = 0.

    Interior nodes get the nine-point update projected onto u >= 0; then the
    boundary conditions are refreshed: reflecting copy at x2 = 0, zero at
    x1 = 0, copy (or zero, for the diagnostic variant) on the far edges.
    Returns the sup-norm interior change of the final sweep.
    """
    N1, N2 = u.shape
    denom = gamma + cE + cW + cN + cS + cNE + cNW + cSE + cSW
    maxchg = 0.0
    for s in range(nsweeps):
        maxchg = 0.0
        if s & 1 == 0:
            ia, ib, istp = 1, N1 - 1, 1
            ja, jb, jstp = 1, N2 - 1, 1
        else:
            ia, ib, istp = N1 - 2, 0, -1
            ja, jb, jstp = N2 - 2, 0, -1
        for i in range(ia, ib, istp):
            for j in range(ja, jb, jstp):
                acc = (cE * u[i + 1, j] + cW * u[i - 1, j]
                       + cN * u[i, j + 1] + cS * u[i, j - 1]
                       + cNE * u[i + 1, j + 1] + cNW * u[i - 1, j + 1]
                       + cSE * u[i + 1, j - 1] + cSW * u[i - 1, j - 1])
                cand = (acc + rhs[i, j]) / denom
                newv = u[i, j] + omega * (cand - u[i, j])
                if newv < 0.0:
                    newv = 0.0
                d = newv - u[i, j]
                if d < 0.0:
                    d = -d
                if d > maxchg:
                    maxchg = d
                u[i, j] = newv
        for i in range(N1):
            u[i, 0] = u[i, 1]
            if top_dirichlet:
                u[i, N2 - 1] = 0.0
            else:
                u[i, N2 - 1] = u[i, N2 - 2]
        for j in range(N2):
            u[N1 - 1, j] = u[N1 - 2, j]
        for j in range(N2):
            u[0, j] = 0.0
    return maxchg


@njit(cache=True)
def policy_sweeps(v, rhs, act, gamma, cE, cW, cN, cS, cNE, cNW, cSE, cSW,
                  rW, rN, rS, tS, tE, tW, qW, qS, omega, nsweeps):
    """SOR sweeps for the linear system fixed by an action table.

    act codes: 0 diffuse, 1 push toward +x1 (value copied from the right
    neighbor), 2 push toward +x2.  Diffuse nodes use the nine-point interior
    stencil, or the one-sided closures on the far edges (r*/t*/q*
    coefficients for the right edge, top edge and far corner).  Push nodes
    are plain assignments.  Returns the sup-norm change of the final sweep.
    """
    N1, N2 = v.shape
    denom_i = gamma + cE + cW + cN + cS + cNE + cNW + cSE + cSW
    denom_r = gamma + rW + rN + rS
    denom_t = gamma + tS + tE + tW
    denom_q = gamma + qW + qS
    maxchg = 0.0
    for s in range(nsweeps):
        maxchg = 0.0
        if s & 1 == 0:
            ia, ib, istp = 0, N1, 1
            ja, jb, jstp = 0, N2, 1
        else:
            ia, ib, istp = N1 - 1, -1, -1
            ja, jb, jstp = N2 - 1, -1, -1
        for i in range(ia, ib, istp):
            for j in range(ja, jb, jstp):
                a = act[i, j]
                if a == 1:
                    newv = v[i + 1, j]
                elif a == 2:
                    newv = v[i, j + 1]
                else:
                    if 0 < i < N1 - 1 and 0 < j < N2 - 1:
                        acc = (cE * v[i + 1, j] + cW * v[i - 1, j]
                               + cN * v[i, j + 1] + cS * v[i, j - 1]
                               + cNE * v[i + 1, j + 1] + cNW * v[i - 1, j + 1]
                               + cSE * v[i + 1, j - 1] + cSW * v[i - 1, j - 1])
                        cand = (acc + rhs[i, j]) / denom_i
                    elif i == N1 - 1 and 0 < j < N2 - 1:
                        acc = rW * v[i - 1, j] + rN * v[i, j + 1] + rS * v[i, j - 1]
                        cand = (acc + rhs[i, j]) / denom_r
                    elif j == N2 - 1 and 0 < i < N1 - 1:
                        acc = tS * v[i, j - 1] + tE * v[i + 1, j] + tW * v[i - 1, j]
                        cand = (acc + rhs[i, j]) / denom_t
                    else:
                        acc = qW * v[i - 1, j] + qS * v[i, j - 1]
                        cand = (acc + rhs[i, j]) / denom_q
                    newv = v[i, j] + omega * (cand - v[i, j])
                d = newv - v[i, j]
                if d < 0.0:
                    d = -d
                if d > maxchg:
                    maxchg = d
                v[i, j] = newv
    return maxchg


@njit(cache=True)
def threshold_mc_chunk(uvals, h1, h2, L1, L2, n1, n2,
                       z1, w2, acc, status, normals, disc,
                       c11, c21, c22, drift1, drift2,
                       pay_above, pay_below, kink_c,
                       eps, gamma, dt, disc_step):
    """Advance one chunk of the threshold-rule stopping simulation.

    Per path and per step within the chunk: retire on grid exit, retire when
    the bilinearly interpolated field drops to eps, otherwise accrue the
    discounted payoff over the step and advance; absorption in the first
    coordinate retires the path with the crossing time interpolated inside
    the step.  status: 0 alive, 1 threshold, 2 absorbed, 3 exited.  Arrays
    are updated in place; normals has shape (paths, chunk, 2) and disc holds
    the per-step discount factors e^{-gamma t_k} for the chunk.
    """
    npaths = z1.shape[0]
    chunk = normals.shape[1]
    for p in range(npaths):
        a = z1[p]
        b = w2[p]
        s = acc[p]
        for j in range(chunk):
            if a > L1 or b > L2:
                status[p] = 3
                break
            # clamped bilinear interpolation of the field
            p1 = a
            if p1 < 0.0:
                p1 = 0.0
            elif p1 > L1:
                p1 = L1
            p2 = b
            if p2 < 0.0:
                p2 = 0.0
            elif p2 > L2:
                p2 = L2
            f1 = p1 / h1
            lim1 = n1 - 1e-12
            if f1 > lim1:
                f1 = lim1
            f2 = p2 / h2
            lim2 = n2 - 1e-12
            if f2 > lim2:
                f2 = lim2
            i0 = int(f1)
            j0 = int(f2)
            t1 = f1 - i0
            t2 = f2 - j0
            uval = ((1.0 - t1) * (1.0 - t2) * uvals[i0, j0]
                    + t1 * (1.0 - t2) * uvals[i0 + 1, j0]
                    + (1.0 - t1) * t2 * uvals[i0, j0 + 1]
                    + t1 * t2 * uvals[i0 + 1, j0 + 1])
            if uval <= eps:
                status[p] = 1
                break
            pay = pay_above if b >= kink_c * a else pay_below
            g1 = normals[p, j, 0]
            g2 = normals[p, j, 1]
            incr1 = c11 * g1 + drift1
            incr2 = c21 * g1 + c22 * g2 + drift2
            an = a + incr1
            bn = b + incr2
            if bn < 0.0:
                bn = 0.0
            if an <= 0.0:
                gap = a - an
                if gap < 1e-300:
                    gap = 1e-300
                delta = dt * a / gap
                s += pay * disc[j] * (-np.expm1(-gamma * delta) / gamma)
                acc[p] = s
                status[p] = 2
                break
            s += pay * disc[j] * disc_step
            a = an
            b = bn
        z1[p] = a
        w2[p] = b
        acc[p] = s

"""End-to-end acceptance battery on the standard fixture.

One test per shipped claim, each with its tolerance pinned inline and the
stated wall-clock budget asserted.  The fixture is the package default:
a = 1, b1 = 1, b2 = 0 (kink slope c = 2), zero drift, identity covariance,
unit discount rate, domain [0, 8]^2 at 256 cells per side.  Expensive grid
solves are shared through module-scoped fixtures that record their own
solve times; relaxation factors for the half-step refinement legs are
passed explicitly to keep the whole run inside the budget.
"""

import time

import numpy as np
import pytest

from quadctrl import (
    CostParams,
    GridSpec,
    ModelParams,
    PolicySpec,
    TwoPieceCost,
    complementarity_residual,
    evaluate_policy,
    extract_boundary,
    check_boundary,
    hjb_residual,
    mc_stopping_value,
    push_active_cells,
    solve_control_value,
    solve_stopping_value,
)
from quadctrl.paths import sample_increments, skorokhod_1d
from quadctrl.verify import check_gradient_identity, rbm_resolvent_mc

MODEL = ModelParams(theta=(0.0, 0.0), sigma=np.eye(2), gamma=1.0)
COST = CostParams(a=1.0, b1=1.0, b2=0.0)
GRID = GridSpec(8.0, 8.0, 256, 256)
SEED = 0


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


@pytest.fixture(scope="module")
def u256():
    return timed(solve_stopping_value, MODEL, COST, GRID)


@pytest.fixture(scope="module")
def v256():
    return timed(solve_control_value, MODEL, COST, GRID)


@pytest.fixture(scope="module")
def bnd(u256):
    return extract_boundary(u256[0])


@pytest.fixture(scope="module")
def u512():
    return timed(solve_stopping_value, MODEL, COST, GRID.refine(), omega=1.95)


@pytest.fixture(scope="module")
def v512():
    return timed(solve_control_value, MODEL, COST, GRID.refine(), omega=1.95)


def test_c01_skorokhod_complementarity_and_minimality():
    # one-sided reflection at zero: the pushing process never acts while
    # the path is strictly positive, and it is pointwise minimal among
    # 100 randomized feasible pushing processes, on 1000 paths
    t0 = time.perf_counter()
    steps, dt, n = 1000, 1e-3, 1000
    rng = np.random.default_rng(SEED)
    incr = rng.normal(0.0, np.sqrt(dt), size=(n, steps))
    w = np.empty((n, steps + 1))
    l = np.empty((n, steps + 1))
    for i in range(n):
        w[i], l[i] = skorokhod_1d(0.0, incr[i])
    assert np.all(w >= 0.0)
    dl = np.diff(l, axis=1)
    assert np.all(dl >= 0.0)
    comp = np.einsum("ij,ij->i", w[:, 1:], dl)
    assert np.all(comp == 0.0)                 # exact, not approximate

    free = np.concatenate([np.zeros((n, 1)), np.cumsum(incr, axis=1)], axis=1)
    needed = np.maximum(-free, 0.0)
    alt_rng = np.random.default_rng(SEED + 1)
    for k in range(100):
        if k % 2 == 0:
            # arbitrary nondecreasing candidate projected to feasibility
            raw = np.cumsum(alt_rng.exponential(0.002, size=(n, steps + 1)),
                            axis=1) - alt_rng.uniform(0, 1, size=(n, 1))
            alt = np.maximum.accumulate(np.maximum(raw, needed), axis=1)
        else:
            # extra pushing on top of a feasible floor
            alt = np.maximum.accumulate(needed, axis=1) + np.cumsum(
                alt_rng.uniform(0, 0.001, size=(n, steps + 1)), axis=1)
        assert np.all(alt >= l)
    assert time.perf_counter() - t0 < 30.0


def test_c02_one_dimensional_discounted_oracle():
    # reflected Brownian motion from the origin: Monte Carlo with exact
    # one-step reflection against the closed form 1/sqrt(2)
    (est, se), wall = timed(rbm_resolvent_mc, 0.0, 0.0, 1.0, 1.0,
                            dt=1e-3, T=15.0, n_paths=100_000, seed=SEED)
    assert abs(est - 1.0 / np.sqrt(2.0)) <= 3.0 * se
    assert wall < 60.0


def test_c03_obstacle_solve_structure(u256):
    u, wall = u256
    assert wall < 60.0
    vals = u.values
    assert vals.min() >= 0.0
    assert np.abs(vals[0, :]).max() == 0.0     # exact zero column at x1 = 0
    comp, _ = complementarity_residual(MODEL, COST, u)
    assert comp <= 1e-6
    assert np.diff(vals, axis=0).min() >= -1e-6   # nondecreasing in x1
    assert np.diff(vals, axis=1).max() <= 1e-6    # nonincreasing in x2
    assert u.meta["row_zero_ok"]
    assert u.meta["rows_missing_zero"] == 0
    assert u.meta["enlargements"] >= 1         # top rows demanded more room


def test_c04_stopping_value_monte_carlo_cross_check(u256):
    # five interior probes, 10^4 paths each, threshold stopping rule; the
    # estimate must sit within max(3 stderr, 1e-3) of the grid field
    u = u256[0]
    probes = [(2.0, 1.0), (1.0, 0.5), (1.5, 1.5), (0.5, 0.25), (1.0, 3.5)]
    t0 = time.perf_counter()
    for x in probes:
        res = mc_stopping_value(MODEL, COST, u, x, eps=1e-3,
                                n_paths=10_000, dt=1e-4, seed=SEED)
        tol = max(3.0 * res.std_error, 1e-3)
        assert abs(res.estimate - u.interp(*x)) <= tol, (x, res.estimate)
    assert time.perf_counter() - t0 < 120.0


def test_c05_free_boundary_shape(bnd, u256):
    t0 = time.perf_counter()
    assert not bnd.degenerate
    g = u256[0].grid
    x2 = bnd.x2
    assert np.all(bnd.psi >= 0.0)
    assert np.all(bnd.psi <= x2 / COST.c + g.h1)   # kink-ray cone
    rep = check_boundary(bnd, COST.c)
    assert rep.ok, rep.notes
    assert rep.monotone_violation <= 0.0           # nondecreasing rows
    assert rep.max_slope <= rep.slope_bound        # 1/c plus one-cell slack
    assert rep.grows
    assert time.perf_counter() - t0 < 30.0


def test_c06_gradient_identity_under_refinement(u256, v256, u512, v512):
    # forward e1-difference of the control value reproduces the stopping
    # value, and the inner-subgrid sup halves from 256^2 to 512^2
    u, tu = u256
    v, tv = v256
    u2, tu2 = u512
    v2, tv2 = v512
    rec = check_gradient_identity(v, u, tol=20.0 * v.grid.h1 + 1e-5)
    assert rec.passed, rec.line()
    rec2 = check_gradient_identity(v2, u2, tol=20.0 * v2.grid.h1 + 1e-5)
    assert rec2.passed, rec2.line()
    ratio = rec2.measured / rec.measured
    assert 0.3 <= ratio <= 0.7, (rec.measured, rec2.measured)
    assert tu + tv + tu2 + tv2 < 300.0


def test_c07_control_value_structure(v256, u256, bnd):
    v = v256[0]
    vals = v.values
    g = v.grid
    # discrete convexity along both axes and both diagonals, everywhere
    # except the far-edge closure margin and the barrier collar
    from quadctrl.verify import check_convexity, check_monotone_gradients
    rec = check_convexity(v, boundary=bnd, tol=1e-6)
    assert rec.passed, rec.line()
    assert np.diff(vals, axis=0).min() >= -1e-6
    assert np.diff(vals, axis=1).min() >= -1e-6
    recs = {r.name: r for r in check_monotone_gradients(v)}
    assert recs["strict-e2-interior"].passed       # strictly increasing in x2
    res = hjb_residual(MODEL, COST, v, boundary=bnd)
    h = max(g.h1, g.h2)
    assert res.meta["max_abs_residual"] <= 10.0 * h
    # the e1 gradient vanishes (within grid tolerance) left of the barrier
    gradient_tol = 20.0 * g.h1 + 10.0 * float(v.meta.get("change_tol", 1e-8))
    psi = bnd(g.x2())
    left = g.x1()[:-1, None] + g.h1 <= psi[None, :]
    d1 = np.diff(vals, axis=0) / g.h1
    assert left.any()
    assert d1[left].max() <= gradient_tol


def test_c08_policy_dominance_and_value_match(v256, bnd):
    # common-random-number battery: the extracted-boundary policy beats
    # axis reflection, kink-ray reflection, and the half/double scaled
    # barriers at every probe, and its simulated cost matches the grid
    # control value
    v = v256[0]
    h = max(v.grid.h1, v.grid.h2)
    fb = PolicySpec.free_boundary(bnd)
    alts = {
        "axis": PolicySpec.axis(),
        "ray": PolicySpec.ray(COST.c),
        "scaled-half": PolicySpec.scaled_boundary(bnd, 0.5),
        "scaled-double": PolicySpec.scaled_boundary(bnd, 2.0),
    }
    kw = dict(dt=1e-3, T=8.0, n_paths=10_000, seed=SEED)
    t0 = time.perf_counter()
    for x in [(2.0, 1.0), (1.0, 3.0), (0.5, 0.5), (4.0, 4.0)]:
        rf = evaluate_policy(MODEL, COST, fb, x, **kw)
        for name, alt in alts.items():
            ra = evaluate_policy(MODEL, COST, alt, x, **kw)
            band = 3.0 * float(np.hypot(rf.std_error, ra.std_error))
            assert rf.j_estimate <= ra.j_estimate + band, (x, name)
        tol = 3.0 * rf.std_error + rf.tail_bound + 20.0 * h
        assert abs(rf.j_estimate - v.interp(*x)) <= tol, x
    assert time.perf_counter() - t0 < 180.0


def test_c09_degenerate_mode_battery():
    # with b1 = 0 stopping is never profitable: the solved field vanishes,
    # extraction reports the degenerate mode, and kink-ray reflection
    # dominates the remaining alternatives
    cost0 = CostParams(a=1.0, b1=0.0, b2=0.0)
    u0 = solve_stopping_value(MODEL, cost0, GRID)
    assert u0.values.max() <= 1e-6
    assert extract_boundary(u0).degenerate
    ray = PolicySpec.ray(cost0.c)
    alts = {
        "axis": PolicySpec.axis(),
        "ray-shallow": PolicySpec.ray(2.0 * cost0.c),
        "ray-steep": PolicySpec.ray(0.5 * cost0.c),
    }
    kw = dict(dt=1e-3, T=8.0, n_paths=2000, seed=SEED)
    for x in [(2.0, 1.0), (1.0, 3.0), (0.5, 0.5), (4.0, 4.0)]:
        rr = evaluate_policy(MODEL, cost0, ray, x, **kw)
        for name, alt in alts.items():
            ra = evaluate_policy(MODEL, cost0, alt, x, **kw)
            band = 3.0 * float(np.hypot(rr.std_error, ra.std_error))
            assert rr.j_estimate <= ra.j_estimate + band, (x, name)


def test_c10_nonnegative_gradients_mean_normal_reflection():
    # when both branch gradients of the running cost are nonnegative the
    # optimal pushing degenerates to normal reflection at the axes: the
    # push-active set of the solved control value touches only cells
    # adjacent to the domain boundary
    cost = TwoPieceCost(alpha=(1.0, 1.0), beta=(1.0, 1.0), c=1.0)
    v = solve_control_value(MODEL, cost, GRID)
    active = push_active_cells(v)
    ii, jj = np.where(active)
    assert ii.size > 0
    assert np.all((ii <= 1) | (jj <= 1))

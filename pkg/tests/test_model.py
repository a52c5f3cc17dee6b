"""Parameter validation, the two-piece cost rates and the gradient-form
converter."""
from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from quadctrl import (
    ConfigError,
    CostParams,
    ModelParams,
    TwoPieceCost,
    from_alpha_beta,
    running_cost,
    stopping_payoff,
    validate,
)


def _fixture_model(**kw):
    base = dict(theta=(0.0, 0.0), sigma=np.eye(2), gamma=1.0)
    base.update(kw)
    return ModelParams(**base)


# ---------------------------------------------------------------- validation

def test_validate_regular_mode_reports_kink_slope_two():
    rep = validate(_fixture_model(), CostParams(a=1.0, b1=1.0, b2=0.0))
    assert rep.ok
    assert rep.c == 2.0
    assert rep.mode == "regular"
    assert rep.monotone_scheme_ok


def test_validate_flags_degenerate_mode_when_b1_zero():
    rep = validate(_fixture_model(), CostParams(a=1.0, b1=0.0, b2=0.0))
    assert rep.ok
    assert rep.c == 1.0
    assert rep.mode == "degenerate-b1-zero"
    assert any("b1" in n for n in rep.notes)


def test_b2_equal_one_is_rejected():
    with pytest.raises(ConfigError):
        CostParams(a=1.0, b1=1.0, b2=1.0)


@pytest.mark.parametrize("kw", [
    dict(a=0.0, b1=1.0, b2=0.0),
    dict(a=-1.0, b1=1.0, b2=0.0),
    dict(a=1.0, b1=-0.5, b2=0.0),
    dict(a=1.0, b1=1.0, b2=-0.1),
    dict(a=np.nan, b1=1.0, b2=0.0),
])
def test_cost_parameter_range_errors(kw):
    with pytest.raises(ConfigError):
        CostParams(**kw)


def test_model_rejects_asymmetric_or_indefinite_sigma():
    with pytest.raises(ConfigError):
        _fixture_model(sigma=[[1.0, 0.5], [0.2, 1.0]])
    with pytest.raises(ConfigError):
        _fixture_model(sigma=[[1.0, 2.0], [2.0, 1.0]])  # eigenvalue -1
    with pytest.raises(ConfigError):
        _fixture_model(gamma=0.0)


def test_monotone_scheme_condition_depends_on_off_diagonal():
    ok = _fixture_model(sigma=[[1.0, 0.5], [0.5, 1.0]])
    assert ok.monotone_scheme_ok()
    # positive definite (det 1.75) but the off-diagonal exceeds min(s11, s22)
    bad = _fixture_model(sigma=[[4.0, 1.5], [1.5, 1.0]])
    assert not bad.monotone_scheme_ok()
    rep = validate(bad, CostParams(a=1.0, b1=1.0, b2=0.0))
    assert not rep.monotone_scheme_ok
    assert any("sigma" in n for n in rep.notes)


def test_chol_reproduces_sigma():
    m = _fixture_model(sigma=[[2.0, 0.6], [0.6, 1.0]])
    np.testing.assert_allclose(m.chol @ m.chol.T, m.sigma, atol=1e-14)


# ---------------------------------------------------------------- cost rates

def test_running_cost_branch_values():
    cost = CostParams(a=1.0, b1=1.0, b2=0.0)
    assert running_cost(cost, (1.0, 3.0)) == 2.0     # above the ray
    assert running_cost(cost, (0.0, 0.0)) == 0.0
    # on the kink ray both branches give the same number
    assert running_cost(cost, (1.0, 2.0)) == 1.0
    assert cost.rate(1.0, 2.0) == 1.0


def test_stopping_payoff_branch_values():
    cost = CostParams(a=1.0, b1=1.0, b2=0.0)
    assert stopping_payoff(cost, (1.0, 1.0)) == 1.0      # below: slope b1
    assert stopping_payoff(cost, (1.0, 2.0)) == -1.0     # ray joins the top branch
    assert stopping_payoff(cost, (0.0, 0.0)) == -1.0


def test_rates_reject_negative_components():
    cost = CostParams(a=1.0, b1=1.0, b2=0.0)
    with pytest.raises(ConfigError):
        running_cost(cost, (-0.1, 1.0))
    with pytest.raises(ConfigError):
        stopping_payoff(cost, (1.0, -0.1))


def test_rates_broadcast_over_arrays():
    cost = CostParams(a=1.0, b1=1.0, b2=0.0)
    z1 = np.array([1.0, 0.0, 1.0])
    z2 = np.array([3.0, 0.0, 2.0])
    np.testing.assert_array_equal(cost.rate(z1, z2), [2.0, 0.0, 1.0])
    np.testing.assert_array_equal(cost.payoff_rate(z1, z2), [-1.0, -1.0, -1.0])


_coords = st.fractions(min_value=0, max_value=100, max_denominator=64)
_steps = st.fractions(min_value=-50, max_value=50, max_denominator=64)


@given(a=st.fractions(min_value=Fraction(1, 8), max_value=4, max_denominator=16),
       b1=st.fractions(min_value=0, max_value=4, max_denominator=16),
       b2=st.fractions(min_value=0, max_value=Fraction(7, 8), max_denominator=16),
       z1=_coords, z2=_coords, h1=_steps, h2=_steps)
def test_running_cost_is_segment_convex(a, b1, b2, z1, z2, h1, h2):
    """For piecewise-linear rates the midpoint convexity gap is a sum of two
    nonnegative kink terms; with rational inputs it is exactly nonnegative up
    to one rounding ulp."""
    if z1 - abs(h1) < 0 or z2 - abs(h2) < 0:
        return
    cost = CostParams(a=float(a), b1=float(b1), b2=float(b2))
    mid = 2.0 * cost.rate(float(z1), float(z2))
    ends = (cost.rate(float(z1 + h1), float(z2 + h2))
            + cost.rate(float(z1 - h1), float(z2 - h2)))
    assert ends - mid >= -1e-12 * (1.0 + abs(ends) + abs(mid))


@given(z1=_coords, z2=_coords)
def test_payoff_is_left_derivative_of_running_cost(z1, z2):
    cost = CostParams(a=1.0, b1=1.0, b2=0.0)
    delta = Fraction(1, 1024)
    if z1 - delta < 0:
        return
    left = z1 - delta
    # only meaningful when both points sit in the same branch
    same_branch = (float(z2) >= cost.c * float(z1)) == (float(z2) >= cost.c * float(left))
    if not same_branch:
        return
    diff = (cost.rate(float(z1), float(z2)) - cost.rate(float(left), float(z2))) / float(delta)
    assert diff == pytest.approx(cost.payoff_rate(float(z1), float(z2)), abs=1e-9)


def test_payoff_monotonicities_on_a_grid():
    cost = CostParams(a=1.0, b1=1.0, b2=0.0)
    z = np.linspace(0.0, 5.0, 41)
    g = cost.payoff_rate(z[:, None], z[None, :])
    assert np.all(np.diff(g, axis=0) >= 0.0)   # nondecreasing in z1
    assert np.all(np.diff(g, axis=1) <= 0.0)   # nonincreasing in z2


def test_running_cost_nondecreasing_in_z2():
    cost = CostParams(a=1.0, b1=1.0, b2=0.5)
    z = np.linspace(0.0, 5.0, 41)
    g = cost.rate(z[:, None], z[None, :])
    assert np.all(np.diff(g, axis=1) >= -1e-15)


# ----------------------------------------------------------------- converter

def test_converter_normalizes_by_alpha2():
    # alpha.(1,2) = beta.(1,2) = 6; dividing by alpha2 = 4 canonicalizes
    got = from_alpha_beta((-2.0, 4.0), (2.0, 2.0), c=2.0)
    assert got == CostParams(a=0.5, b1=0.5, b2=0.5)


def test_converter_roundtrip_reproduces_scaled_rate():
    # continuous across the ray: alpha.(1,c) = beta.(1,c) = 4
    alpha, beta, c = (-1.0, 2.0), (1.5, 1.0), 2.5
    two = TwoPieceCost(alpha, beta, c)
    canon = from_alpha_beta(alpha, beta, c)
    z = np.linspace(0.0, 4.0, 17)
    np.testing.assert_allclose(two.rate(z[:, None], z[None, :]),
                               2.0 * canon.rate(z[:, None], z[None, :]),
                               atol=1e-12)


def test_converter_rejects_both_nonnegative_regime():
    with pytest.raises(ConfigError, match="nonnegative"):
        from_alpha_beta((1.0, 1.0), (3.0, 0.0), c=2.0)


def test_converter_rejects_unsupported_regimes():
    # continuous, convex, nonnegative, but decreasing in z2 below the ray
    with pytest.raises(ConfigError, match="regime"):
        from_alpha_beta((0.0, 1.0), (2.0, -1.0), c=1.0)


def test_two_piece_cost_requires_continuity_at_the_kink():
    # alpha and beta agree on the ray z2 = 2 z1 only if a1 + 2 a2 = b1 + 2 b2
    with pytest.raises(ConfigError):
        TwoPieceCost((-1.0, 2.0), (1.0, 2.0), c=2.0)
    TwoPieceCost((-1.0, 2.0), (3.0, 0.0), c=2.0)  # continuous: both give 3 z1


def test_two_piece_regime_classification():
    assert TwoPieceCost((1.0, 1.0), (1.0, 1.0), 1.0).regime() == "both-nonnegative"
    assert TwoPieceCost((-1.0, 2.0), (3.0, 0.0), 2.0).regime() == \
        "first-coordinate-decreasing-above"

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ambigg.errors import DomainError, UnsupportedError
from ambigg.interim import interim_payoff
from ambigg.model import (
    AmbiguitySet,
    PriorFamily,
    noise_cdf,
    opponent_mass,
    piecewise_linear_model,
    posterior_cdf,
    posterior_expect,
    posterior_params,
    preset,
    split_xi,
    validate_assumptions,
)
from ambigg.numerics import norm_cdf

NORMAL = PriorFamily.normal(2.0, 0.52)
IMPROPER = PriorFamily.improper()


def test_posterior_params_normal():
    mean, prec = posterior_params(NORMAL, 4.0, 1.0)
    assert prec == 6.0
    assert mean == pytest.approx((2 * 0.52 + 4 * 1.0) / 6)


def test_posterior_params_improper_is_signal():
    assert posterior_params(IMPROPER, 3.0, -0.7) == (-0.7, 3.0)


def test_prior_validation():
    with pytest.raises(DomainError):
        PriorFamily.normal(0.0, 1.0)
    with pytest.raises(DomainError):
        PriorFamily("beta")
    with pytest.raises(DomainError):
        PriorFamily.improper(noise="cauchy")
    with pytest.raises(DomainError):
        posterior_params(NORMAL, 0.0, 1.0)
    with pytest.raises(UnsupportedError):
        posterior_params(PriorFamily.normal(1.0, 0.0, noise="logistic"), 1.0, 0.0)


@given(st.floats(-5, 5), st.floats(0.01, 0.5), st.floats(0.05, 50))
def test_posterior_mean_increasing_in_signal(x, dx, xi):
    m1, p1 = posterior_params(NORMAL, xi, x)
    m2, p2 = posterior_params(NORMAL, xi, x + dx)
    assert m2 > m1 and p1 == p2


def test_opponent_mass_example_and_limits():
    assert opponent_mass(IMPROPER, 4.0, 0.5, 0.0) == pytest.approx(1 - norm_cdf(1.0), abs=1e-15)
    assert opponent_mass(IMPROPER, 4.0, -math.inf, 3.0) == 1.0
    assert opponent_mass(IMPROPER, 4.0, math.inf, 3.0) == 0.0


@given(st.floats(0.05, 20), st.floats(-4, 4), st.floats(-4, 4), st.floats(0, 1))
def test_opponent_mass_monotone(xi, kappa, theta, step):
    m = opponent_mass(IMPROPER, xi, kappa, theta)
    assert 0.0 <= m <= 1.0
    assert opponent_mass(IMPROPER, xi, kappa + step, theta) <= m
    assert opponent_mass(IMPROPER, xi, kappa, theta + step) >= m


@pytest.mark.parametrize("priors", [NORMAL, IMPROPER, PriorFamily.improper(noise="logistic")])
def test_posterior_cdf_ordered_in_signal(priors):
    theta = np.linspace(-3, 3, 41)
    lo = posterior_cdf(priors, 1.5, -0.2, theta)
    hi = posterior_cdf(priors, 1.5, 0.4, theta)
    assert np.all(hi <= lo + 1e-15)


def test_logistic_noise_has_unit_variance_at_xi_one():
    t = np.linspace(-40, 40, 400001)
    pdf = np.gradient(noise_cdf(PriorFamily.improper(noise="logistic"), t, 1.0), t)
    assert np.trapezoid(t**2 * pdf, t) == pytest.approx(1.0, rel=1e-4)


def test_logistic_improper_posterior_mean():
    priors = PriorFamily.improper(noise="logistic")
    assert posterior_expect(priors, lambda t: t, 2.0, 0.3) == pytest.approx(0.3, abs=1e-9)


def test_ambiguity_set():
    amb = AmbiguitySet.interval(0.56, 1.1)
    assert not amb.is_product and not amb.is_singleton
    assert np.allclose(amb.sample(3), [0.56, 0.83, 1.1])
    assert AmbiguitySet.singleton(2.0).is_singleton
    prod = AmbiguitySet.product((1, 2), (3, 3))
    assert prod.is_product and prod.smallest() == 1
    assert len(prod.sample(4)) == 4
    assert len(AmbiguitySet.product((1, 2), (3, 4)).sample(4)) == 16
    with pytest.raises(DomainError):
        AmbiguitySet.interval(0.0, 1.0)
    assert split_xi((1.0, 2.0)) == (1.0, 2.0) and split_xi(3.0) == (3.0, 3.0)


def test_linear_model_passes_all_assumptions():
    rep = validate_assumptions(preset("linear"), NORMAL, AmbiguitySet.interval(0.56, 1.1))
    assert rep.passed
    assert not rep["A4"].certified


def test_decreasing_in_opponents_fails_a1():
    model = piecewise_linear_model(u1_l=-1.0)
    rep = validate_assumptions(model, NORMAL, AmbiguitySet.interval(1.0, 2.0))
    assert [c.name for c in rep.failures()] == ["A1"]
    assert "A1: FAIL" in rep.summary()


def test_dominant_action_fails_a5():
    model = piecewise_linear_model(u1_const=1.0, u1_theta=((0.0, 0.0), (1.0, 0.0)))
    rep = validate_assumptions(model, NORMAL, AmbiguitySet.interval(1.0, 2.0))
    assert not rep["A5"].passed


@pytest.mark.parametrize("name", ["debt", "currency", "synthetic"])
def test_presets_pass_validation(name):
    assert validate_assumptions(preset(name), IMPROPER, AmbiguitySet.interval(1.0, 4.0)).passed


def test_bankrun_withdrawal_rises_with_stayers():
    # only the differential is monotone in l; the withdrawal payoff alone is not
    rep = validate_assumptions(preset("bankrun"), IMPROPER, AmbiguitySet.interval(1.0, 4.0))
    assert [c.name for c in rep.failures()] == ["A1"]
    assert "u(0,l,theta) increases in l" in rep["A1"].detail


def test_unknown_preset():
    with pytest.raises(DomainError):
        preset("lottery")


def test_safe_action_detected():
    assert preset("linear").xi_invariant_action() == 0
    assert piecewise_linear_model(u0_const=0.2).safe_action == 0
    assert piecewise_linear_model(u0_l=0.5, u0_theta=((0, 0), (1, -1))).safe_action is None


KNOTS = ((-1.0, -0.5), (0.0, 0.0), (0.5, 1.0), (2.0, 1.2))


@given(
    st.floats(-2, 2),
    st.floats(-2, 2),
    st.floats(0.2, 8),
    st.floats(0.2, 8),
    st.sampled_from([NORMAL, IMPROPER]),
)
def test_piecewise_closed_form_matches_quadrature(x, kappa, xi_own, xi_opp, priors):
    model = piecewise_linear_model(u1_const=-0.3, u1_l=0.8, u1_theta=KNOTS)
    fast = interim_payoff(model, priors, 1, (xi_own, xi_opp), x, kappa)
    slow = interim_payoff(model, priors, 1, (xi_own, xi_opp), x, kappa, method="quadrature")
    assert fast == pytest.approx(slow, abs=1e-8)

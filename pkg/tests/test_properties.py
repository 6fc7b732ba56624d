import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ambigg.equilibrium import equilibrium_cutoffs, linear_cutoff
from ambigg.interim import interim_payoff, meu_value, payoff_gap, smooth_aggregate
from ambigg.model import AmbiguitySet, PriorFamily, preset
from ambigg.regime import theta_star

LINEAR = preset("linear")

etas = st.floats(0.5, 4.0)
ys = st.floats(0.1, 0.9)


@st.composite
def xi_intervals(draw, lo=0.2, hi=3.0):
    a = draw(st.floats(lo, hi))
    b = draw(st.floats(lo, hi))
    if abs(a - b) < 1e-3:
        b = min(hi, a + 0.1) if a + 0.1 <= hi else a - 0.1
    return AmbiguitySet.interval(min(a, b), max(a, b))


@given(etas, ys, xi_intervals(), st.floats(-3, 3), st.floats(-3, 3), st.floats(0.01, 1))
def test_gap_monotone_in_signal_and_cutoff(eta, y, amb, x, kappa, step):
    priors = PriorFamily.normal(eta, y)
    g = payoff_gap(LINEAR, priors, amb, x, kappa)
    assert payoff_gap(LINEAR, priors, amb, x + step, kappa) >= g - 1e-10
    assert payoff_gap(LINEAR, priors, amb, x, kappa + step) <= g + 1e-10


@given(etas, ys, xi_intervals())
def test_envelope_below_members(eta, y, amb):
    priors = PriorFamily.normal(eta, y)
    k = np.linspace(-3, 4, 41)
    env = meu_value(LINEAR, priors, amb, 1, k, k)
    for xi in amb.sample(7):
        assert np.all(env <= np.asarray(interim_payoff(LINEAR, priors, 1, xi, k, k)) + 1e-12)


@given(st.floats(-20, 20), st.floats(1e-4, 1e4))
def test_theta_star_residual(kappa, xi):
    t = theta_star(kappa, xi)
    assert abs(t - 0.5 * math.erfc(-math.sqrt(xi) * (kappa - t) / math.sqrt(2))) < 1e-12


@settings(max_examples=6)
@given(etas, ys, xi_intervals())
def test_largest_cutoff_is_largest_single_prior_cutoff(eta, y, amb):
    # with a safe action the worst precision for investing picks the largest cutoff
    priors = PriorFamily.normal(eta, y)
    rep = equilibrium_cutoffs(LINEAR, priors, amb)
    members = max(linear_cutoff(eta, xi, y) for xi in np.linspace(amb.lo, amb.hi, 200))
    assert rep.max_cutoff == pytest.approx(members, abs=1e-6)


@settings(max_examples=15)
@given(ys, xi_intervals(), st.floats(-2, 3), st.floats(-2, 3), st.sampled_from([1.0, 10.0, 100.0]))
def test_smooth_certainty_equivalent_above_worst_case(y, amb, x, kappa, alpha):
    priors = PriorFamily.normal(2.0, y)
    meu = payoff_gap(LINEAR, priors, amb, x, kappa)  # action 0 pays 0
    _, ce = smooth_aggregate(LINEAR, priors, amb, alpha, 1, x, kappa)
    assert ce >= meu - 1e-9
    assert ce <= max(interim_payoff(LINEAR, priors, 1, xi, x, kappa) for xi in amb.sample(33)) + 1e-9

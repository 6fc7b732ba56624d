import math

import numpy as np
import pytest

from ambigg.equilibrium import (
    best_response_cutoff,
    two_state_example,
    dominance_bounds,
    equilibrium_cutoffs,
    fictitious_cutoff,
    iterated_deletion,
    linear_cutoff,
    max_cutoff_safe_action,
    minimax_cutoff,
    cutoff_sensitivity_dy,
    xi_star,
)
from ambigg.errors import AssumptionError, ContractError, DomainError
from ambigg.interim import payoff_gap
from ambigg.model import AmbiguitySet, PriorFamily, piecewise_linear_model, preset

LINEAR = preset("linear")
ETA = 2.0
ONE_ROOT = (PriorFamily.normal(ETA, 0.52), AmbiguitySet.interval(0.56, 1.1))
THREE_ROOTS = (PriorFamily.normal(ETA, 0.48), AmbiguitySet.singleton(0.37))
LOW_MEAN = (PriorFamily.normal(ETA, 0.48), AmbiguitySet.interval(0.37, 0.56))
IMPROPER = PriorFamily.improper()


def test_dominance_bounds_signs():
    priors, amb = ONE_ROOT
    lo, hi = dominance_bounds(LINEAR, priors, amb)
    assert lo <= -ETA * 0.52 / 1.1
    for k in (-math.inf, -1.0, 0.5, 3.0, math.inf):
        assert payoff_gap(LINEAR, priors, amb, lo, k) < 0
        assert payoff_gap(LINEAR, priors, amb, hi, k) > 0


def test_debt_window_contains_unit_interval():
    lo, hi = dominance_bounds(preset("debt", lam=0.4), IMPROPER, AmbiguitySet.interval(1.0, 4.0))
    assert lo < 0.0 and hi > 1.0


def test_dominance_search_fails_without_dominance_region():
    flat = piecewise_linear_model(u1_const=1.0, u1_theta=((0.0, 0.0), (1.0, 0.0)))
    with pytest.raises(AssumptionError):
        dominance_bounds(flat, ONE_ROOT[0], ONE_ROOT[1])


def test_best_response_at_extremal_profiles():
    priors, amb = ONE_ROOT
    # nobody else invests: own posterior mean must reach 1 at the worst precision
    br_none = best_response_cutoff(LINEAR, priors, amb, math.inf)
    assert br_none == pytest.approx((0.56 + ETA - ETA * 0.52) / 0.56, abs=1e-8)
    # everybody invests: posterior mean must stay nonnegative at every precision
    br_all = best_response_cutoff(LINEAR, priors, amb, -math.inf)
    assert br_all == pytest.approx(-ETA * 0.52 / 1.1, abs=1e-8)


def test_equilibrium_is_best_response_fixed_point():
    priors, amb = ONE_ROOT
    rep = equilibrium_cutoffs(LINEAR, priors, amb)
    k = rep.cutoffs.roots[0]
    assert best_response_cutoff(LINEAR, priors, amb, k) == pytest.approx(k, abs=1e-8)


def test_report_invariants():
    priors, amb = THREE_ROOTS
    rep = equilibrium_cutoffs(LINEAR, priors, amb)
    roots = rep.cutoffs.roots
    assert len(rep) == 3 and list(roots) == sorted(roots)
    assert rep.min_cutoff == roots[0] and rep.max_cutoff == roots[-1]
    assert rep.window[0] <= rep.dominance[0] and rep.dominance[1] <= rep.window[1]
    assert rep.crossings_ok
    assert len(rep.argmin_xi) == 3
    d = rep.as_dict()
    assert d["cutoffs"] == list(roots) and all(abs(r) < 1e-8 for r in d["residuals"])


def test_max_cutoff_safe_action_picks_worst_precision():
    k0, xi0 = max_cutoff_safe_action(LINEAR, *ONE_ROOT)
    assert xi0 == pytest.approx(1.1)
    # below one half the largest cutoff comes from the top root of the noisiest game
    k0, xi0 = max_cutoff_safe_action(LINEAR, *LOW_MEAN)
    assert xi0 == pytest.approx(0.37)
    assert k0 == pytest.approx(linear_cutoff(ETA, 0.37, 0.48), abs=1e-8)
    assert k0 == pytest.approx(equilibrium_cutoffs(LINEAR, *LOW_MEAN).max_cutoff, abs=1e-7)


def test_max_cutoff_needs_invariant_action0():
    with pytest.raises(ContractError):
        max_cutoff_safe_action(preset("currency"), IMPROPER, AmbiguitySet.interval(1.0, 4.0))


def test_deletion_round_limits():
    priors, amb = ONE_ROOT
    trace = iterated_deletion(LINEAR, priors, amb, max_rounds=1)
    assert len(trace.rounds) == 2 and not trace.converged
    lo, hi = trace.limits
    assert lo == pytest.approx(best_response_cutoff(LINEAR, priors, amb, -math.inf), abs=1e-9)
    assert hi == pytest.approx(best_response_cutoff(LINEAR, priors, amb, math.inf), abs=1e-9)
    with pytest.raises(DomainError):
        iterated_deletion(LINEAR, priors, amb, max_rounds=0)


def test_deletion_brackets_all_equilibria():
    priors, amb = THREE_ROOTS
    trace = iterated_deletion(LINEAR, priors, amb)
    rep = equilibrium_cutoffs(LINEAR, priors, amb)
    lo, hi = trace.limits
    assert trace.converged
    assert lo == pytest.approx(rep.min_cutoff, abs=1e-7)
    assert hi == pytest.approx(rep.max_cutoff, abs=1e-7)
    los = [r[0] for r in trace.rounds]
    his = [r[1] for r in trace.rounds]
    assert np.all(np.diff(los) >= -1e-12) and np.all(np.diff(his) <= 1e-12)


def test_fictitious_cutoff_ignores_action0_precision():
    debt = preset("debt", lam=0.4)
    base = fictitious_cutoff(debt, IMPROPER, 1.0, 4.0)
    assert fictitious_cutoff(debt, IMPROPER, 2.5, 4.0) == pytest.approx(base, abs=1e-12)
    assert base == pytest.approx(0.27333, abs=1e-5)


def test_fictitious_cutoff_rejects_multiple_roots():
    with pytest.raises(AssumptionError):
        fictitious_cutoff(LINEAR, PriorFamily.normal(ETA, 0.48), 0.37, 0.37)


def test_minimax_matches_equilibrium():
    debt = preset("debt", lam=0.7)
    rep = minimax_cutoff(debt, IMPROPER, AmbiguitySet.interval(1.0, 4.0))
    assert rep.kstar == pytest.approx(1.22440, abs=1e-5)
    assert abs(rep.minmax - rep.maxmin) <= 1e-6
    assert rep.equilibrium_root == pytest.approx(rep.kstar, abs=1e-6)


def test_xi_star_matches_single_root_threshold():
    # just below the threshold the game has three equilibria, above it one
    xs = xi_star(ETA)
    priors = PriorFamily.normal(ETA, 0.48)
    n_below = len(equilibrium_cutoffs(LINEAR, priors, AmbiguitySet.singleton(xs * 0.9)))
    n_above = len(equilibrium_cutoffs(LINEAR, priors, AmbiguitySet.singleton(xs * 1.1)))
    assert n_below >= n_above == 1
    with pytest.raises(DomainError):
        xi_star(0.0)


@pytest.mark.parametrize("y,increasing", [(0.55, True), (0.45, False)])
def test_single_prior_cutoff_monotone_in_precision(y, increasing):
    xis = [1.0, 1.5, 2.5, 4.0]
    ks = [linear_cutoff(ETA, xi, y) for xi in xis]
    d = np.diff(ks)
    assert np.all(d > 0) if increasing else np.all(d < 0)


@pytest.mark.parametrize("xi_lo", [1e-2, 1e-3, 1e-4])
def test_low_precision_pushes_cutoff_out(xi_lo):
    priors = PriorFamily.normal(ETA, 0.4)
    rep = equilibrium_cutoffs(LINEAR, priors, AmbiguitySet.interval(xi_lo, 0.1))
    assert rep.max_cutoff > 5.0


def test_two_state_example():
    eq = two_state_example(0.8, 0.9)
    assert (1, 0) in eq
    assert eq == two_state_example(0.8, 0.9, grid=2000)
    with pytest.raises(DomainError):
        two_state_example(0.4, 0.9)


def test_sensitivity_far_cutoff_hits_the_bound():
    # the density terms underflow once the cutoff is thousands of sds away,
    # leaving exactly -eta / xi_lo up to rounding
    d = cutoff_sensitivity_dy(ETA, 1e-3, 0.4)
    assert d == pytest.approx(-ETA / 1e-3, rel=1e-12)
    assert cutoff_sensitivity_dy(ETA, 0.3, 0.4) < -ETA / 0.3

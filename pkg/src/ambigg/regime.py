"""Regime-change games: debt rollover, currency attacks and bank-run style payoffs.

Regime 0 occurs iff the share of players choosing action 0 is at least the
state ``theta``. With everyone on ``s[kappa]`` and normal noise of precision
``xi`` that share is ``Phi(sqrt(xi) (kappa - theta))``, so regime 0 happens
exactly for ``theta <= theta_star(kappa, xi)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .errors import AssumptionError, ContractError, DomainError, UnsupportedError
from .model import AmbiguitySet, PayoffModel, PriorFamily, posterior_params
from .numerics import (
    MIN_TOL,
    QUAD_TOL,
    ROOT_TOL,
    Interval,
    expand_bracket,
    find_roots,
    integrate_adaptive,
    maximize_on_interval,
    minimize_on_interval,
    norm_cdf,
    normal_partial_affine,
    std_normal_quantile,
)

IMPROPER = PriorFamily.improper()
_BISECT_ITERS = 64


def theta_star(kappa, xi):
    """Regime-change state: the fixed point of ``theta = Phi(sqrt(xi) (kappa - theta))``.

    Broadcasts over arrays. ``kappa = +inf`` gives 1 and ``-inf`` gives 0.
    """
    if np.ndim(kappa) == 0 and np.ndim(xi) == 0:
        return _theta_star_scalar(float(kappa), float(xi))
    kappa, xi = np.broadcast_arrays(np.asarray(kappa, dtype=float), np.asarray(xi, dtype=float))
    if kappa.size == 1:
        return np.full(kappa.shape, _theta_star_scalar(float(kappa.flat[0]), float(xi.flat[0])))
    if np.any(xi <= 0):
        raise DomainError("precision must be positive")
    rt = np.sqrt(xi)
    finite = np.isfinite(kappa)
    k = np.where(finite, kappa, 0.0)
    lo, hi = np.zeros(k.shape), np.ones(k.shape)
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        below = mid - norm_cdf(rt * (k - mid)) < 0.0
        lo, hi = np.where(below, mid, lo), np.where(below, hi, mid)
    t = 0.5 * (lo + hi)
    # one Newton step; h'(t) = 1 + sqrt(xi) phi(.) >= 1 so this cannot diverge
    z = rt * (k - t)
    h = t - norm_cdf(z)
    dh = 1.0 + rt * np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    polished = t - h / dh
    t = np.where((polished >= lo) & (polished <= hi), polished, t)
    t = np.where(finite, t, np.where(kappa > 0, 1.0, 0.0))
    return float(t) if t.ndim == 0 else t


def _theta_star_scalar(kappa: float, xi: float) -> float:
    if not xi > 0:
        raise DomainError("precision must be positive")
    if not math.isfinite(kappa):
        return 1.0 if kappa > 0 else 0.0
    rt = math.sqrt(xi)

    def cdf(z):
        return 0.5 * math.erfc(-z / math.sqrt(2.0))

    lo, hi = 0.0, 1.0
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if mid - cdf(rt * (kappa - mid)) < 0.0:
            lo = mid
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    z = rt * (kappa - t)
    polished = t - (t - cdf(z)) / (1.0 + rt * math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi))
    return polished if lo <= polished <= hi else t


# --------------------------------------------------------------------------
# models


@dataclass(frozen=True)
class RegimeChangeModel:
    """Payoff differentials ``d_R(theta) = u(1, R, theta) - u(0, R, theta)``.

    The safe action earns ``safe_value``; the other action earns
    ``safe_value + d_R`` (safe 0) or ``safe_value - d_R`` (safe 1). When
    ``affine`` is set to ``((a0, b0), (a1, b1))`` the differentials are
    ``a_R + b_R theta`` and interim payoffs have a closed form.
    """

    d0: Callable
    d1: Callable
    safe_action: int = 0
    safe_value: float = 0.0
    affine: tuple | None = None
    preset: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.safe_action not in (0, 1):
            raise DomainError("safe_action must be 0 or 1")

    @property
    def constant(self) -> bool:
        return self.affine is not None and self.affine[0][1] == 0.0 and self.affine[1][1] == 0.0

    @property
    def theta_hat(self) -> float:
        """Regime cutoff for constant differentials, ``d0 / (d0 - d1)``."""
        if not self.constant:
            raise UnsupportedError("theta_hat needs constant differentials")
        d0, d1 = self.affine[0][0], self.affine[1][0]
        return d0 / (d0 - d1)

    def check(self, thetas=None) -> None:
        """Sampled sign and monotonicity check of the differentials on ``[0, 1]``."""
        t = np.linspace(0.0, 1.0, 201) if thetas is None else np.asarray(thetas, dtype=float)
        v0 = np.asarray(self.d0(t), dtype=float) + 0.0 * t
        v1 = np.asarray(self.d1(t), dtype=float) + 0.0 * t
        if not (np.all(v0 < 0) and np.all(v1 > 0)):
            raise AssumptionError(f"{self.preset}: need d0 < 0 < d1 on the state window")
        if np.any(np.diff(v0) < -1e-12) or np.any(np.diff(v1) < -1e-12):
            raise AssumptionError(f"{self.preset}: differentials must be nondecreasing")

    def differential(self, theta, regime):
        """``d_R(theta)`` with ``regime`` 0/1 elementwise."""
        theta = np.asarray(theta, dtype=float)
        return np.where(regime == 0, self.d0(theta), self.d1(theta))

    def expected_differential(self, priors: PriorFamily, xi_own, xi_opp, x, kappa, *, method: str = "auto"):
        """``E[d_R(theta) | x]`` when opponents play ``s[kappa]``."""
        t_star = theta_star(kappa, xi_opp)
        if method != "quadrature" and self.affine is not None and priors.noise == "normal":
            mean, prec = posterior_params(priors, xi_own, x)
            sd = 1.0 / np.sqrt(prec)
            (a0, b0), (a1, b1) = self.affine
            out = normal_partial_affine(mean, sd, -np.inf, t_star, a0, b0) + normal_partial_affine(
                mean, sd, t_star, np.inf, a1, b1
            )
            return out
        from .model import posterior_expect

        def g(theta):
            theta = np.asarray(theta, dtype=float)
            return np.where(theta <= t_star, self.d0(theta), self.d1(theta))

        return posterior_expect(priors, g, float(xi_own), float(x), QUAD_TOL, (float(t_star),))

    def payoff_model(self) -> PayoffModel:
        c, safe = float(self.safe_value), self.safe_action
        sign = 1.0 if safe == 0 else -1.0

        def u(a, l, theta):
            l = np.asarray(l, dtype=float)
            theta = np.asarray(theta, dtype=float)
            if a == safe:
                return np.full(np.broadcast(l, theta).shape, c)
            regime = np.where(1.0 - l >= theta, 0, 1)
            return c + sign * self.differential(theta, regime)

        def breakpoints(kappa, xi_opp):
            return (theta_star(kappa, xi_opp),)

        def closed_form(priors, a, xi_own, xi_opp, x, kappa):
            if self.affine is None or priors.noise != "normal":
                return None
            shape = np.broadcast(np.asarray(xi_own), np.asarray(xi_opp), np.asarray(x), np.asarray(kappa)).shape
            if a == safe:
                return np.full(shape, c)
            return c + sign * np.asarray(self.expected_differential(priors, xi_own, xi_opp, x, kappa))

        return PayoffModel(
            u=u,
            name=self.preset,
            safe_action=safe,
            safe_value=c,
            params=dict(self.params),
            breakpoints=breakpoints,
            closed_form=closed_form,
            center=0.5,
        )


def _affine(a: float, b: float = 0.0):
    return lambda theta: a + b * np.asarray(theta, dtype=float)


def debt_model(lam: float = 0.4) -> RegimeChangeModel:
    """Debt rollover: not rolling over (action 0) recovers ``lam``; rolling
    over pays 1 unless the borrower defaults (regime 0)."""
    if not 0.0 < lam < 1.0:
        raise DomainError("collateral value lam must lie in (0, 1)")
    return RegimeChangeModel(
        d0=_affine(-lam),
        d1=_affine(1.0 - lam),
        safe_action=0,
        safe_value=lam,
        affine=((-lam, 0.0), (1.0 - lam, 0.0)),
        preset="debt",
        params={"lam": lam},
    )


def currency_model(e_star: float = 1.0, t: float = 0.1, f_slope: float = 0.5, f_intercept: float = 0.2) -> RegimeChangeModel:
    """Speculative attack: attacking (action 0) costs ``t`` and gains
    ``e_star - f(theta)`` on devaluation (regime 0); not attacking is safe.

    ``f(theta) = f_intercept + f_slope * theta`` is the post-devaluation rate.
    """
    f_lo = f_intercept + min(0.0, f_slope)
    f_hi = f_intercept + max(0.0, f_slope)
    if not (t > 0 and t < e_star - f_hi and t < e_star - f_lo):
        raise AssumptionError("currency preset needs 0 < t < e_star - f(theta) on [0, 1]")
    if f_slope < 0:
        raise AssumptionError("currency preset needs f nondecreasing in theta")
    a0 = -(e_star - f_intercept - t)
    return RegimeChangeModel(
        d0=_affine(a0, f_slope),
        d1=_affine(t),
        safe_action=1,
        safe_value=0.0,
        affine=((a0, float(f_slope)), (float(t), 0.0)),
        preset="currency",
        params={"e_star": e_star, "t": t, "f_slope": f_slope, "f_intercept": f_intercept},
    )


def synthetic_model(d0: float = -0.5, d1_const: float = 0.5, d1_slope: float = 0.5) -> RegimeChangeModel:
    """Constant ``d0`` with an increasing ``d1``; action 0 is safe."""
    m = RegimeChangeModel(
        d0=_affine(d0),
        d1=_affine(d1_const, d1_slope),
        safe_action=0,
        safe_value=0.0,
        affine=((float(d0), 0.0), (float(d1_const), float(d1_slope))),
        preset="synthetic",
        params={"d0": d0, "d1_const": d1_const, "d1_slope": d1_slope},
    )
    m.check()
    return m


def bankrun_model(
    withdraw_low: float = 0.2,
    withdraw_high: float = 1.0,
    stay_low: float = 0.0,
    stay_high: float = 1.5,
    threshold: float = 0.3,
) -> PayoffModel:
    """Bank-run style game with a state-independent withdrawal payoff.

    Withdrawing (action 0) pays ``withdraw_high`` when more than
    ``threshold`` of players stay and ``withdraw_low`` otherwise. Staying pays
    ``theta`` plus ``stay_high``/``stay_low`` on the same event.
    """
    if stay_high - stay_low < withdraw_high - withdraw_low:
        raise AssumptionError("staying must gain at least as much as withdrawing when the bank stays liquid")
    if not 0.0 < threshold < 1.0:
        raise DomainError("threshold must lie in (0, 1)")

    def f(l):
        return np.where(np.asarray(l, dtype=float) > threshold, withdraw_high, withdraw_low)

    def u(a, l, theta):
        l = np.asarray(l, dtype=float)
        theta = np.asarray(theta, dtype=float)
        if a == 0:
            return f(l) + 0.0 * theta
        return theta + np.where(l > threshold, stay_high, stay_low)

    def cut(kappa, xi_opp):
        # state at which the staying share crosses the threshold
        return kappa - std_normal_quantile(1.0 - threshold) / np.sqrt(xi_opp)

    def breakpoints(kappa, xi_opp):
        return (float(cut(kappa, xi_opp)),) if np.isfinite(kappa) else ()

    def closed_form(priors, a, xi_own, xi_opp, x, kappa):
        if priors.noise != "normal":
            return None
        mean, prec = posterior_params(priors, xi_own, x)
        sd = 1.0 / np.sqrt(prec)
        kappa = np.asarray(kappa, dtype=float)
        with np.errstate(invalid="ignore"):
            c = cut(np.where(np.isfinite(kappa), kappa, 0.0), np.asarray(xi_opp, dtype=float))
        c = np.where(np.isneginf(kappa), -np.inf, np.where(np.isposinf(kappa), np.inf, c))
        liquid = 1.0 - norm_cdf((c - mean) / sd)
        if a == 0:
            return withdraw_low + (withdraw_high - withdraw_low) * liquid
        return mean + stay_low + (stay_high - stay_low) * liquid

    return PayoffModel(
        u=u,
        name="bankrun",
        params={
            "withdraw_low": withdraw_low,
            "withdraw_high": withdraw_high,
            "stay_low": stay_low,
            "stay_high": stay_high,
            "threshold": threshold,
        },
        breakpoints=breakpoints,
        closed_form=closed_form,
        state_independent={0: f},
        center=0.0,
    )


def state_independent_value(f: Callable, breakpoints=(), tol: float = QUAD_TOL) -> float:
    """``int_0^1 f(l) dl``: the diagonal interim payoff of an action whose
    payoff depends on the opponents' share only, under a flat prior.

    Pass the jump locations of ``f`` as ``breakpoints``.
    """
    knots = [0.0, *sorted(float(b) for b in breakpoints if 0.0 < b < 1.0), 1.0]
    parts = []
    for a, b in zip(knots[:-1], knots[1:]):
        eps = 1e-12
        parts.append(
            integrate_adaptive(
                lambda l, a=a, b=b: np.asarray(f(np.clip(l, a + eps, b - eps)), dtype=float) + 0.0 * l,
                (a, b),
                tol / (len(knots) - 1),
            )
        )
    return math.fsum(parts)


# --------------------------------------------------------------------------
# cutoffs


def _diagonal(model: RegimeChangeModel, priors: PriorFamily, xi_own, xi_opp, method: str):
    def g(k):
        return model.expected_differential(priors, xi_own, xi_opp, k, k, method=method)

    return g


def single_prior_cutoff(
    model: RegimeChangeModel,
    xi: float,
    priors: PriorFamily = IMPROPER,
    *,
    xi_opp: float | None = None,
    method: str = "auto",
    tol: float = ROOT_TOL,
) -> float:
    """Cutoff ``k(xi)`` of the unique switching equilibrium without ambiguity.

    ``xi_opp`` lets the opponents' precision differ from the own one. For
    constant differentials with a flat prior the root is checked against
    ``theta_hat + Phi^-1(theta_hat) / sqrt(xi)``.
    """
    xi_opp = xi if xi_opp is None else xi_opp
    vectorized = method != "quadrature" and model.affine is not None
    g = _diagonal(model, priors, xi, xi_opp, method)
    if not vectorized:
        g_scalar = g

        def g(k):  # noqa: F811
            return np.array([g_scalar(float(v)) for v in np.atleast_1d(k)]) if np.ndim(k) else g_scalar(k)

    center = 0.5
    if model.constant and priors.kind == "improper" and xi_opp == xi:
        center = model.theta_hat + std_normal_quantile(model.theta_hat) / math.sqrt(xi)
    lo, hi = expand_bracket(lambda k: float(np.asarray(g(k))), center, width=1.0)
    # the diagonal gap is increasing, so the bracket holds the only root;
    # scan a margin around it to catch anything that says otherwise
    pad = 0.5 * (hi - lo)
    roots = find_roots(g, (lo - pad, hi + pad), 64 if vectorized else 16, tol, vectorized=vectorized, tangential=False)
    if len(roots) != 1:
        raise ContractError(f"expected one regime-change cutoff, found {len(roots)}")
    k = roots[0]
    if model.constant and priors.kind == "improper" and xi_opp == xi:
        closed = model.theta_hat + std_normal_quantile(model.theta_hat) / math.sqrt(xi)
        if abs(k - closed) > 1e-8 * max(1.0, abs(closed)):
            raise ContractError(f"cutoff {k} disagrees with closed form {closed}")
    return k


def _xi_invariant_action(model) -> int:
    if isinstance(model, RegimeChangeModel):
        return model.safe_action
    a = model.xi_invariant_action()
    if a is None:
        raise UnsupportedError("no safe or state-independent action; use equilibrium_cutoffs")
    return a


def _k_function(model, priors: PriorFamily):
    if isinstance(model, RegimeChangeModel):
        return lambda xi: single_prior_cutoff(model, xi, priors)
    from .equilibrium import equilibrium_cutoffs

    def k(xi):
        report = equilibrium_cutoffs(model, priors, AmbiguitySet.singleton(xi))
        if len(report.cutoffs) != 1:
            raise ContractError(f"single-prior game at xi={xi} has {len(report.cutoffs)} equilibria")
        return report.cutoffs[0]

    return k


def ambiguous_cutoff(
    model,
    ambiguity: AmbiguitySet,
    priors: PriorFamily = IMPROPER,
    *,
    scan_points: int = 24,
    tol: float = MIN_TOL,
    cross_check: bool = False,
) -> float:
    """Equilibrium cutoff under ambiguity about the noise precision.

    With action 0 safe the cutoff is ``max_xi k(xi)``; with action 1 safe it
    is ``min_xi k(xi)``. ``model`` is a :class:`RegimeChangeModel` or any
    :class:`PayoffModel` with a safe or state-independent action.
    """
    if ambiguity.is_product:
        raise UnsupportedError("use heterogeneous_cutoff for product ambiguity sets")
    a = _xi_invariant_action(model)
    k = _k_function(model, priors)
    window = ambiguity.own
    if window.is_degenerate:
        kstar = k(window.lo)
    else:
        # k(xi) is smooth in log xi; search there so wide sets stay resolved
        lw = Interval(math.log(window.lo), math.log(window.hi))
        opt = maximize_on_interval if a == 0 else minimize_on_interval
        res = opt(lambda s: k(math.exp(s)), lw, scan_points, tol)
        kstar = res.min
    if cross_check:
        from .equilibrium import equilibrium_cutoffs

        pm = model.payoff_model() if isinstance(model, RegimeChangeModel) else model
        report = equilibrium_cutoffs(pm, priors, ambiguity)
        if len(report.cutoffs) != 1 or abs(report.cutoffs[0] - kstar) > 1e-6:
            raise ContractError(f"cutoff {kstar} disagrees with equilibrium roots {list(report.cutoffs)}")
    return kstar


def regime_change_likelihood(model: RegimeChangeModel, ambiguity: AmbiguitySet, xi_eval: float, priors: PriorFamily = IMPROPER) -> float:
    """``theta_star`` at the ambiguous cutoff, seen under precision ``xi_eval``."""
    return theta_star(ambiguous_cutoff(model, ambiguity, priors), xi_eval)


def quality_monotonicity(model: RegimeChangeModel, xi_grid, priors: PriorFamily = IMPROPER, slack: float = 1e-9) -> str:
    """Classify ``xi -> theta_star(k(xi), xi)`` on a sorted grid."""
    xs = [float(v) for v in xi_grid]
    if len(xs) < 3 or any(b <= a for a, b in zip(xs, xs[1:])):
        raise DomainError("need a strictly increasing grid with at least 3 points")
    vals = np.array([theta_star(single_prior_cutoff(model, xi, priors), xi) for xi in xs])
    d = np.diff(vals)
    if np.all(np.abs(d) <= slack):
        return "constant"
    if np.all(d >= -slack):
        return "increasing"
    if np.all(d <= slack):
        return "decreasing"
    return "mixed"


# --------------------------------------------------------------------------
# debt crises


@dataclass(frozen=True)
class CrisisScenario:
    lam: float
    theta: float
    xi: float
    ambiguity: AmbiguitySet

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise DomainError("lam must lie in (0, 1)")
        if not self.xi > 0:
            raise DomainError("true precision must be positive")


class CrisisOutcome(NamedTuple):
    occurs: bool
    theta_bar: float
    kstar: float
    theta_star: float
    note: str = ""


def crisis_bound(lam: float, xi: float) -> float:
    """Largest state at which some precision set can still cause default."""
    return theta_star(lam, xi) if lam < 0.5 else 1.0


def crisis_occurs(scenario: CrisisScenario) -> CrisisOutcome:
    """Whether the borrower defaults at the true state under ambiguity.

    Default happens iff ``theta <= theta_star(kappa*, xi)``; outside
    ``lam < theta < theta_bar`` the answer does not depend on ambiguity and
    the outcome carries a note saying so.
    """
    lam = scenario.lam
    if lam == 0.5:
        raise DomainError("lam = 1/2 is degenerate: k(xi) = 1/2 for every precision")
    kstar = ambiguous_cutoff(debt_model(lam), scenario.ambiguity)
    ts = theta_star(kstar, scenario.xi)
    bar = crisis_bound(lam, scenario.xi)
    note = ""
    if scenario.theta <= lam:
        note = "state at or below lam: default without ambiguity too"
    elif scenario.theta >= bar:
        note = "state at or above theta_bar: no precision set causes default"
    return CrisisOutcome(bool(scenario.theta <= ts), bar, kstar, ts, note)


# --------------------------------------------------------------------------
# heterogeneous precisions


def heterogeneous_debt_cutoff(lam: float, xi_own: float, xi_opp: float) -> tuple[float, float]:
    """Closed form ``(k, theta_star)`` for the debt game when opponents' noise
    precision ``xi_opp`` differs from the own ``xi_own`` (flat prior)."""
    q = std_normal_quantile(lam)
    ts = float(norm_cdf(math.sqrt(xi_opp / xi_own) * q))
    return ts + q / math.sqrt(xi_own), ts


def heterogeneous_cutoff(
    model: RegimeChangeModel,
    own: Interval,
    opp: Interval,
    priors: PriorFamily = IMPROPER,
    *,
    scan_points: int = 16,
    tol: float = MIN_TOL,
) -> float:
    """Cutoff when the posterior uses ``xi_1 in own`` and the regime uses ``xi_2 in opp``.

    ``k(xi_1, xi_2)`` is maximized (safe action 0) or minimized (safe 1)
    over the product set: a grid in log precision, then coordinate-wise
    golden refinement.
    """
    own, opp = Interval(*own), Interval(*opp)
    sign = 1.0 if model.safe_action == 0 else -1.0

    def k(s1, s2):
        return sign * single_prior_cutoff(model, math.exp(s1), priors, xi_opp=math.exp(s2))

    l1 = Interval(math.log(own.lo), math.log(own.hi))
    l2 = Interval(math.log(opp.lo), math.log(opp.hi))
    g1 = l1.grid(scan_points) if not l1.is_degenerate else np.array([l1.lo])
    g2 = l2.grid(scan_points) if not l2.is_degenerate else np.array([l2.lo])
    K = np.array([[k(a, b) for b in g2] for a in g1])
    i, j = np.unravel_index(int(np.argmax(K)), K.shape)
    s1, s2, best = float(g1[i]), float(g2[j]), float(K[i, j])
    for _ in range(3):
        if len(g1) > 1:
            r = maximize_on_interval(lambda s: k(s, s2), (g1[max(i - 1, 0)], g1[min(i + 1, len(g1) - 1)]), 5, tol)
            if r.min >= best:
                s1, best = r.argmin, r.min
        if len(g2) > 1:
            r = maximize_on_interval(lambda s: k(s1, s), (g2[max(j - 1, 0)], g2[min(j + 1, len(g2) - 1)]), 5, tol)
            if r.min >= best:
                s2, best = r.argmin, r.min
    return sign * best

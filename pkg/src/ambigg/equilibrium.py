"""Switching equilibria under maxmin preferences: roots, best responses,
iterated deletion, the two-precision auxiliary game and uniqueness checks."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionError, ContractError, DomainError, NumericalError
from .interim import _has_fast_path, interim_payoff, meu_payoff, payoff_gap
from .model import AmbiguitySet, PayoffModel, PriorFamily, linear_model
from .numerics import (
    KAPPA_SCAN,
    MIN_TOL,
    ROOT_TOL,
    XI_SCAN,
    Interval,
    RootSet,
    find_roots,
    maximize_on_interval,
    minimize_on_interval,
    norm_pdf,
    refine_root,
)

BOUND_LIMIT = 1e6
DENSE_POINTS = 400
EQ_TOL = 1e-6


def _center(model: PayoffModel, priors: PriorFamily) -> float:
    return model.center if model.center is not None else priors.center


def _scan_extra(center: float, lo: float, hi: float, n: int) -> np.ndarray:
    """Points clustered around ``center``: log-spaced offsets out to the
    window edges plus a uniform core of half-width 5."""
    span = max(center - lo, hi - center, 1e-3)
    offs = np.geomspace(1e-3, span, n)
    core = np.linspace(center - 5.0, center + 5.0, n // 2)
    return np.concatenate([center - offs, center + offs, core])


def _outward(h, center: float, sign: int, want_negative: bool) -> float:
    step = 1.0
    while True:
        x = center + sign * step
        v = float(h(x))
        if not math.isfinite(v):
            raise NumericalError(f"non-finite payoff gap at signal {x}")
        if (v < 0.0) if want_negative else (v > 0.0):
            return x
        step *= 2.0
        if step > BOUND_LIMIT:
            side = "low" if sign < 0 else "high"
            raise AssumptionError(f"no dominance region at {side} signals within {BOUND_LIMIT:g} (A5 fails)")


# --------------------------------------------------------------------------
# dominance and best responses


def dominance_bounds(
    model: PayoffModel,
    priors: PriorFamily,
    ambiguity: AmbiguitySet,
    scan_points: int = XI_SCAN,
) -> tuple[float, float]:
    """Signals ``(x_lo, x_hi)`` beyond which one action is interim dominant.

    The gap is nonincreasing in the opponents' cutoff, so checking against
    ``s[-inf]`` (low side) and ``s[+inf]`` (high side) covers every profile.
    """
    c = _center(model, priors)
    x_lo = _outward(lambda x: payoff_gap(model, priors, ambiguity, x, -np.inf, scan_points), c, -1, True)
    x_hi = _outward(lambda x: payoff_gap(model, priors, ambiguity, x, np.inf, scan_points), c, +1, False)
    return x_lo, x_hi


def best_response_cutoff(
    model: PayoffModel,
    priors: PriorFamily,
    ambiguity: AmbiguitySet,
    kappa: float,
    *,
    bounds: tuple[float, float] | None = None,
    tol: float = ROOT_TOL,
    scan_points: int = XI_SCAN,
    cache: dict | None = None,
) -> float:
    """Cutoff ``kappa'`` with ``s[kappa']`` the best response to ``s[kappa]``."""
    x_lo, x_hi = bounds if bounds is not None else dominance_bounds(model, priors, ambiguity, scan_points)

    def h(x):
        if cache is None:
            return payoff_gap(model, priors, ambiguity, x, kappa, scan_points)
        key = (round(x, 12), kappa if not math.isfinite(kappa) else round(kappa, 12))
        if key not in cache:
            cache[key] = payoff_gap(model, priors, ambiguity, x, kappa, scan_points)
        return cache[key]

    f_lo, f_hi = h(x_lo), h(x_hi)
    if f_lo >= 0.0:
        return -math.inf if f_lo > 0.0 else x_lo
    if f_hi <= 0.0:
        return math.inf if f_hi < 0.0 else x_hi
    r, _ = refine_root(h, x_lo, x_hi, f_lo, f_hi, tol)
    return r


# --------------------------------------------------------------------------
# equilibrium enumeration


@dataclass(frozen=True)
class EquilibriumReport:
    cutoffs: RootSet
    min_cutoff: float
    max_cutoff: float
    argmin_xi: tuple  # per root: (argmin for action 1, argmin for action 0)
    dominance: tuple[float, float]
    window: tuple[float, float]
    crossings_ok: bool
    ties: tuple = ()
    note: str = "every strategy surviving iterated deletion lies between s[min_cutoff] and s[max_cutoff]"

    def __len__(self):
        return len(self.cutoffs)

    def as_dict(self) -> dict:
        return {
            "cutoffs": list(self.cutoffs.roots),
            "residuals": list(self.cutoffs.residuals),
            "tangential": list(self.cutoffs.tangential),
            "min_cutoff": self.min_cutoff,
            "max_cutoff": self.max_cutoff,
            "argmin_xi": [list(a) if isinstance(a, tuple) else a for a in self.argmin_xi],
            "dominance": list(self.dominance),
            "window": list(self.window),
            "crossings_ok": self.crossings_ok,
            "ties": list(self.ties),
            "note": self.note,
        }


def diagonal_gap(model, priors, ambiguity, scan_points: int = XI_SCAN, tol: float = MIN_TOL):
    """``g(kappa) = payoff_gap(kappa, kappa)``, vectorized when possible."""

    def g(k):
        return payoff_gap(model, priors, ambiguity, k, k, scan_points, tol)

    return g


def equilibrium_cutoffs(
    model: PayoffModel,
    priors: PriorFamily,
    ambiguity: AmbiguitySet,
    *,
    scan_points: int = KAPPA_SCAN,
    xi_scan: int = XI_SCAN,
    tol: float = ROOT_TOL,
    bounds: tuple[float, float] | None = None,
) -> EquilibriumReport:
    """All switching-equilibrium cutoffs, i.e. roots of ``g(kappa)``.

    The scan covers ``[x_lo - 1, x_hi + 1]`` with a uniform grid plus a
    cluster of points around the model's center, since dominance bounds can
    sit orders of magnitude away from the interesting region.
    """
    x_lo, x_hi = bounds if bounds is not None else dominance_bounds(model, priors, ambiguity, xi_scan)
    fast = _has_fast_path(model, priors) and not ambiguity.is_product
    g = diagonal_gap(model, priors, ambiguity, xi_scan)
    c = _center(model, priors)
    lo, hi = x_lo - 1.0, x_hi + 1.0
    n_uniform = scan_points if fast else max(16, scan_points // 8)
    n_dense = DENSE_POINTS if fast else DENSE_POINTS // 8
    for _ in range(8):
        roots = find_roots(g, (lo, hi), n_uniform, tol, vectorized=True, extra_points=_scan_extra(c, lo, hi, n_dense))
        edge = 1e-9 * (hi - lo)
        if roots.roots and (roots.min - lo < edge or hi - roots.max < edge):
            lo, hi = lo - (hi - lo), hi + (hi - lo)
            continue
        break
    if len(roots) == 0:
        raise ContractError("no equilibrium cutoff found; an equilibrium must exist under A1-A5")

    argmins, ties = [], []
    for k in roots:
        m1 = meu_payoff(model, priors, ambiguity, 1, k, k, xi_scan)
        m0 = meu_payoff(model, priors, ambiguity, 0, k, k, xi_scan)
        argmins.append((m1.argmin_xi, m0.argmin_xi))
        ties.append(m1.ties or m0.ties)
    delta = max(1e-6, 1e-6 * (hi - lo))
    crossings_ok = True
    for k in (roots.min, roots.max):
        below, above = float(g(k - delta)), float(g(k + delta))
        crossings_ok &= below < 0.0 < above
    return EquilibriumReport(
        cutoffs=roots,
        min_cutoff=roots.min,
        max_cutoff=roots.max,
        argmin_xi=tuple(argmins),
        dominance=(x_lo, x_hi),
        window=(lo, hi),
        crossings_ok=bool(crossings_ok),
        ties=tuple(ties),
    )


def single_prior_roots(model: PayoffModel, priors: PriorFamily, xi: float, **kw) -> RootSet:
    return equilibrium_cutoffs(model, priors, AmbiguitySet.singleton(xi), **kw).cutoffs


def _require_invariant_action0(model: PayoffModel, priors: PriorFamily, ambiguity: AmbiguitySet, c: float) -> float:
    if model.safe_action == 0:
        return float(model.safe_value)
    xis = ambiguity.sample(5)
    ks = np.linspace(c - 2.0, c + 2.0, 5)
    vals = np.array([[interim_payoff(model, priors, 0, xi, k, k) for k in ks] for xi in xis])
    if np.ptp(vals) > 1e-8:
        raise ContractError("action 0's diagonal payoff varies with the precision")
    return float(vals.mean())


def max_cutoff_safe_action(
    model: PayoffModel,
    priors: PriorFamily,
    ambiguity: AmbiguitySet,
    *,
    scan_points: int = 64,
    tol: float = MIN_TOL,
    check: bool = True,
) -> tuple[float, float]:
    """``(kappa0, xi0)``: the largest single-prior maximal cutoff over Xi.

    Requires action 0's diagonal payoff not to depend on the precision. With
    ``check`` the result is compared with the largest root of the Xi game.
    """
    if ambiguity.is_product:
        raise DomainError("needs an interval of precisions")
    _require_invariant_action0(model, priors, ambiguity, _center(model, priors))
    window = ambiguity.own

    def kmax(s):
        return single_prior_roots(model, priors, math.exp(s)).max

    if window.is_degenerate:
        xi0, k0 = window.lo, kmax(math.log(window.lo))
    else:
        res = maximize_on_interval(kmax, (math.log(window.lo), math.log(window.hi)), scan_points, tol)
        xi0, k0 = math.exp(res.argmin), res.min
        xi0 = min(max(xi0, window.lo), window.hi)
    if check:
        full = equilibrium_cutoffs(model, priors, ambiguity).max_cutoff
        if abs(full - k0) > EQ_TOL * max(1.0, abs(k0)):
            raise ContractError(f"largest cutoff {full} differs from the single-prior maximum {k0}")
    return k0, xi0


# --------------------------------------------------------------------------
# iterated deletion


@dataclass
class DeletionTrace:
    rounds: list = field(default_factory=list)  # (kappa_lo_n, kappa_hi_n)
    converged: bool = False
    tol: float = ROOT_TOL

    @property
    def limits(self) -> tuple[float, float]:
        return self.rounds[-1]


def _error_estimate(seq) -> float:
    if len(seq) < 2 or not all(math.isfinite(v) for v in seq[-2:]):
        return math.inf
    d1 = abs(seq[-1] - seq[-2])
    if len(seq) < 3 or not math.isfinite(seq[-3]):
        return d1 if d1 == 0.0 else math.inf
    d0 = abs(seq[-2] - seq[-3])
    if d1 == 0.0:
        return 0.0
    r = d1 / d0 if d0 > 0 else 1.0
    # geometric tail of the remaining steps
    return d1 * r / (1.0 - r) if r < 1.0 else math.inf


def iterated_deletion(
    model: PayoffModel,
    priors: PriorFamily,
    ambiguity: AmbiguitySet,
    max_rounds: int = 500,
    tol: float = ROOT_TOL,
    *,
    scan_points: int = XI_SCAN,
) -> DeletionTrace:
    """Best-response iteration from ``s[-inf]`` and ``s[+inf]``.

    ``kappa_lo`` can only rise and ``kappa_hi`` only fall; a step the wrong
    way beyond rounding raises :class:`ContractError`. Stops when a
    geometric-tail estimate of the remaining distance is below ``tol`` for
    both sequences.
    """
    if max_rounds < 1:
        raise DomainError("max_rounds must be at least 1")
    bounds = dominance_bounds(model, priors, ambiguity, scan_points)
    cache: dict = {}
    lo_seq, hi_seq = [-math.inf], [math.inf]
    trace = DeletionTrace(rounds=[(-math.inf, math.inf)], tol=tol)
    for _ in range(max_rounds):
        lo = best_response_cutoff(model, priors, ambiguity, lo_seq[-1], bounds=bounds, cache=cache, scan_points=scan_points)
        hi = best_response_cutoff(model, priors, ambiguity, hi_seq[-1], bounds=bounds, cache=cache, scan_points=scan_points)
        slack = 1e-10 * max(1.0, abs(lo), abs(hi))
        if lo < lo_seq[-1] - slack or hi > hi_seq[-1] + slack:
            raise ContractError(f"non-monotone deletion step: ({lo_seq[-1]}, {hi_seq[-1]}) -> ({lo}, {hi})")
        if lo > hi + slack:
            raise ContractError(f"deletion bounds crossed: {lo} > {hi}")
        lo_seq.append(lo)
        hi_seq.append(hi)
        trace.rounds.append((lo, hi))
        if _error_estimate(lo_seq) < tol and _error_estimate(hi_seq) < tol:
            trace.converged = True
            break
    return trace


# --------------------------------------------------------------------------
# auxiliary two-precision game


def _fictitious_gap(model, priors, xi0, xi1):
    fast = _has_fast_path(model, priors)

    def h(x, k):
        if fast:
            return np.asarray(interim_payoff(model, priors, 1, xi1, x, k), dtype=float) - np.asarray(
                interim_payoff(model, priors, 0, xi0, x, k), dtype=float
            )
        xs, ks = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(k, dtype=float))
        out = np.array(
            [
                interim_payoff(model, priors, 1, xi1, a, b) - interim_payoff(model, priors, 0, xi0, a, b)
                for a, b in zip(xs.ravel(), ks.ravel())
            ]
        )
        return out.reshape(xs.shape) if xs.ndim else float(out[0])

    return h


def fictitious_cutoff(
    model: PayoffModel,
    priors: PriorFamily,
    xi0: float,
    xi1: float,
    *,
    scan_points: int = KAPPA_SCAN,
    tol: float = ROOT_TOL,
) -> float:
    """Unique root of ``pi^1_{xi1}(k, k) - pi^0_{xi0}(k, k)``.

    Raises :class:`AssumptionError` when the root is not unique; callers
    should then fall back to :func:`equilibrium_cutoffs`.
    """
    h = _fictitious_gap(model, priors, xi0, xi1)
    c = _center(model, priors)
    x_lo = _outward(lambda x: h(x, -np.inf), c, -1, True)
    x_hi = _outward(lambda x: h(x, np.inf), c, +1, False)
    lo, hi = x_lo - 1.0, x_hi + 1.0
    fast = _has_fast_path(model, priors)
    n = scan_points if fast else max(16, scan_points // 8)
    roots = find_roots(
        lambda k: h(k, k), (lo, hi), n, tol, vectorized=True, extra_points=_scan_extra(c, lo, hi, DENSE_POINTS if fast else 50)
    )
    if len(roots) != 1:
        raise AssumptionError(f"auxiliary game at (xi0, xi1) = ({xi0}, {xi1}) has {len(roots)} cutoffs, not one")
    return roots[0]


@dataclass(frozen=True)
class MinimaxReport:
    kstar: float
    minmax: float
    maxmin: float
    k_surface: tuple  # (xi0 grid, xi1 grid, values[i0, i1])
    equilibrium_root: float | None = None


def minimax_cutoff(
    model: PayoffModel,
    priors: PriorFamily,
    ambiguity: AmbiguitySet,
    *,
    scan_points: int = 17,
    tol: float = MIN_TOL,
    order_tol: float = EQ_TOL,
    check: bool = True,
) -> MinimaxReport:
    """``min_{xi0} max_{xi1} k(xi0, xi1)`` and ``max_{xi1} min_{xi0} k``.

    Both orders are optimized in log precision with grid plus golden
    refinement. A gap between them above ``order_tol`` triggers one retry
    on a grid twice as dense, then a :class:`ContractError`.
    """
    if ambiguity.is_product:
        raise DomainError("needs an interval of precisions")
    window = ambiguity.own
    inv = model.xi_invariant_action()
    cache: dict = {}

    def k(s0, s1):
        key = (None if inv == 0 else s0, None if inv == 1 else s1)
        if key not in cache:
            cache[key] = fictitious_cutoff(model, priors, math.exp(s0), math.exp(s1))
        return cache[key]

    if window.is_degenerate:
        s = math.log(window.lo)
        v = k(s, s)
        surface = (np.array([window.lo]), np.array([window.lo]), np.array([[v]]))
        return _finish(model, priors, ambiguity, MinimaxReport(v, v, v, surface), check)

    lw = (math.log(window.lo), math.log(window.hi))
    n = scan_points
    for attempt in range(2):
        minmax = minimize_on_interval(lambda s0: maximize_on_interval(lambda s1: k(s0, s1), lw, n, tol).min, lw, n, tol).min
        maxmin = maximize_on_interval(lambda s1: minimize_on_interval(lambda s0: k(s0, s1), lw, n, tol).min, lw, n, tol).min
        if abs(minmax - maxmin) <= order_tol:
            break
        n = 2 * n - 1
    else:
        raise ContractError(f"min-max {minmax} and max-min {maxmin} differ by more than {order_tol}")
    g = Interval(*lw).grid(scan_points)
    K = np.array([[k(a, b) for b in g] for a in g])
    report = MinimaxReport(minmax, minmax, maxmin, (np.exp(g), np.exp(g), K))
    return _finish(model, priors, ambiguity, report, check)


def _finish(model, priors, ambiguity, report: MinimaxReport, check: bool) -> MinimaxReport:
    if not check:
        return report
    eq = equilibrium_cutoffs(model, priors, ambiguity)
    if len(eq.cutoffs) != 1:
        return report
    root = eq.cutoffs[0]
    if abs(root - report.kstar) > EQ_TOL * max(1.0, abs(root)):
        raise ContractError(f"minimax cutoff {report.kstar} differs from the equilibrium root {root}")
    return MinimaxReport(report.kstar, report.minmax, report.maxmin, report.k_surface, root)


# --------------------------------------------------------------------------
# linear-normal game


def xi_star(eta: float) -> float:
    """Precision above which the linear game without ambiguity has one equilibrium."""
    if not eta > 0:
        raise DomainError("eta must be positive")
    p = math.pi
    return eta * (eta - 2.0 * p + math.sqrt(eta * eta + 12.0 * p * eta + 4.0 * p * p)) / (8.0 * p)


def linear_cutoff(eta: float, xi: float, y: float) -> float:
    """Largest equilibrium cutoff of the linear game with known precision ``xi``."""
    return single_prior_roots(linear_model(), PriorFamily.normal(eta, y), xi).max


def cutoff_sensitivity_dy(eta: float, xi_lo: float, y: float) -> float:
    """``dk/dy`` at the largest cutoff of the linear game with precision ``xi_lo``,
    by the implicit function theorem."""
    k = linear_cutoff(eta, xi_lo, y)
    gamma = math.sqrt(eta * eta * xi_lo / ((eta + xi_lo) * (eta + 2.0 * xi_lo)))
    dens = gamma * norm_pdf(gamma * (y - k))
    den = xi_lo / (eta + xi_lo) - dens
    if abs(den) < 1e-8:
        raise NumericalError("cutoff is at a tangency; dk/dy is unbounded")
    return -(eta / (eta + xi_lo) + dens) / den


def condition_margin(eta: float, y: float, ambiguity: AmbiguitySet, scan_points: int = KAPPA_SCAN) -> float:
    """``max_{kappa in [-eta y / xi_hi, y]} min_xi pi^1_xi(kappa, kappa)``."""
    from .interim import meu_value

    model, priors = linear_model(), PriorFamily.normal(eta, y)
    window = (-eta * y / ambiguity.hi, y)
    return maximize_on_interval(
        lambda k: meu_value(model, priors, ambiguity, 1, k, k), window, scan_points, MIN_TOL, vectorized=True
    ).min


def uniqueness_certificate(eta: float, y: float, ambiguity: AmbiguitySet, tol: float = MIN_TOL) -> bool:
    """Sufficient condition for a unique equilibrium when not investing is
    ex-ante preferred (``y < 1/2``): no diagonal root below ``y``."""
    if not y < 0.5:
        raise DomainError("the certificate applies for y < 1/2")
    ok = condition_margin(eta, y, ambiguity) < -tol
    if ok:
        n = len(equilibrium_cutoffs(linear_model(), PriorFamily.normal(eta, y), ambiguity).cutoffs)
        if n != 1:
            raise ContractError(f"certificate holds but {n} equilibria were found")
    return ok


# --------------------------------------------------------------------------
# two-state example


def two_state_example(
    p_lo: float,
    p_hi: float,
    payoff_success: float = 2.0,
    payoff_fail: float = -1.0,
    payoff_out: float = 0.0,
    threshold: float = 2.0 / 3.0,
    grid: int = 10_000,
) -> frozenset:
    """Symmetric pure equilibria of a two-state investment game with an
    ambiguous signal accuracy ``p in [p_lo, p_hi]``.

    States ``g``/``b`` are equally likely; a player sees ``G`` with
    probability ``p`` in ``g`` and ``B`` with probability ``p`` in ``b``.
    Investment succeeds iff the state is ``g`` and the share of investors
    exceeds ``threshold``. Strategies are pairs ``(action after G, action
    after B)``; each is checked against every ``p`` on a grid that includes
    both endpoints.
    """
    if not 0.5 <= p_lo <= p_hi <= 1.0:
        raise DomainError("need 1/2 <= p_lo <= p_hi <= 1")
    ps = np.unique(np.concatenate([np.linspace(p_lo, p_hi, grid + 1), [p_lo, p_hi]]))
    agree = 1.0 - 2.0 * ps * (1.0 - ps)  # chance an opponent saw the same signal
    out = set()
    for strat in itertools.product((0, 1), repeat=2):
        ok = True
        for own, act in ((0, strat[0]), (1, strat[1])):  # 0 = G, 1 = B
            other = strat[1 - own]
            share = act * agree + other * (1.0 - agree)
            good = ps if own == 0 else 1.0 - ps
            success = np.where(share > threshold, payoff_success, payoff_fail)
            invest = good * success + (1.0 - good) * payoff_fail
            worst_invest = float(invest.min())
            if act == 1 and worst_invest < payoff_out:
                ok = False
            if act == 0 and worst_invest > payoff_out:
                ok = False
        if ok:
            out.add(strat)
    return frozenset(out)

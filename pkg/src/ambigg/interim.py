"""Interim expected payoffs, their worst case over Xi, and smooth ambiguity."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EvaluationError, NumericalError
from .model import (
    AmbiguitySet,
    PayoffModel,
    PriorFamily,
    opponent_mass,
    posterior_expect,
    posterior_params,
    split_xi,
)
from .numerics import (
    MIN_TOL,
    QUAD_TOL,
    XI_SCAN,
    Interval,
    integrate_adaptive,
    minimize_on_interval,
    norm_cdf,
)

PRODUCT_SCAN = 64
_INV_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class MeuResult:
    value: float
    argmin_xi: float | tuple[float, float]
    attained_on_boundary: bool
    degenerate: bool = False
    ties: bool = False


# --------------------------------------------------------------------------
# single-prior interim payoffs


def interim_payoff_linear(eta, y, xi, x, kappa):
    """Closed-form expected payoff to investing in the linear-normal game."""
    xi = np.asarray(xi, dtype=float)
    mean = (eta * y + xi * np.asarray(x, dtype=float)) / (eta + xi)
    scale = np.sqrt(xi * (eta + xi) / (eta + 2.0 * xi))
    with np.errstate(invalid="ignore"):
        out = mean - norm_cdf(scale * (np.asarray(kappa, dtype=float) - mean))
    return float(out) if np.ndim(out) == 0 else out


def linear_closed_form(priors: PriorFamily, a, xi_own, xi_opp, x, kappa):
    if priors.noise != "normal":
        return None
    if a == 0:
        return np.zeros(np.broadcast(np.asarray(xi_own), np.asarray(xi_opp), np.asarray(x), np.asarray(kappa)).shape)
    mean, prec = posterior_params(priors, xi_own, x)
    # opponent signal given x is normal with variance 1/prec + 1/xi_opp
    sd = np.sqrt(1.0 / prec + 1.0 / np.asarray(xi_opp, dtype=float))
    with np.errstate(invalid="ignore"):
        return mean - norm_cdf((np.asarray(kappa, dtype=float) - mean) / sd)


def interim_payoff_general(model: PayoffModel, priors: PriorFamily, a: int, xi, x: float, kappa: float, tol: float = QUAD_TOL) -> float:
    """``E_xi[u(a, E_xi[s[kappa]|theta], theta) | x]`` by quadrature.

    ``xi`` is a precision or an ``(own, opponents)`` pair. The integral is
    split at the model's breakpoints (e.g. the regime-change state).
    """
    xi_own, xi_opp = split_xi(xi)
    xi_own, xi_opp = float(xi_own), float(xi_opp)
    if model.safe_action == a:
        return float(model.safe_value)
    kappa = float(kappa)

    def integrand(theta):
        return model.u(a, opponent_mass(priors, xi_opp, kappa, theta), theta)

    cuts = tuple(model.breakpoints(kappa, xi_opp)) if model.breakpoints is not None else ()
    return posterior_expect(priors, integrand, xi_own, float(x), tol, cuts)


def interim_payoff(model: PayoffModel, priors: PriorFamily, a: int, xi, x, kappa, *, method: str = "auto"):
    """Interim payoff, using the model's closed form when it covers ``priors``.

    Broadcasts over array arguments; ``method="quadrature"`` forces the
    general path.
    """
    xi_own, xi_opp = split_xi(xi)
    if method != "quadrature" and model.closed_form is not None:
        out = model.closed_form(priors, a, xi_own, xi_opp, x, kappa)
        if out is not None:
            out = np.asarray(out, dtype=float)
            return float(out) if out.ndim == 0 else out
    b = np.broadcast(np.asarray(xi_own), np.asarray(xi_opp), np.asarray(x), np.asarray(kappa))
    if b.ndim == 0:
        return interim_payoff_general(model, priors, a, (float(xi_own), float(xi_opp)), float(x), float(kappa))
    args = np.broadcast_arrays(np.asarray(xi_own, float), np.asarray(xi_opp, float), np.asarray(x, float), np.asarray(kappa, float))
    out = np.empty(b.shape)
    for idx in np.ndindex(b.shape):
        out[idx] = interim_payoff_general(model, priors, a, (args[0][idx], args[1][idx]), args[2][idx], args[3][idx])
    return out


def _has_fast_path(model: PayoffModel, priors: PriorFamily) -> bool:
    if model.closed_form is None:
        return False
    return model.closed_form(priors, 1, 1.0, 1.0, 0.0, 0.0) is not None


# --------------------------------------------------------------------------
# worst case over Xi


def meu_payoff(
    model: PayoffModel,
    priors: PriorFamily,
    ambiguity: AmbiguitySet,
    a: int,
    x: float,
    kappa: float,
    scan_points: int = XI_SCAN,
    tol: float = MIN_TOL,
) -> MeuResult:
    """Minimum over Xi of the interim payoff to action ``a``."""
    if model.safe_action == a:
        return MeuResult(float(model.safe_value), ambiguity.lo if not ambiguity.is_product else (ambiguity.own.lo, ambiguity.opp.lo), True, degenerate=True)
    if ambiguity.is_product:
        return _meu_product(model, priors, ambiguity, a, x, kappa, tol)
    window = ambiguity.own
    fast = _has_fast_path(model, priors)

    def f(xi):
        v = interim_payoff(model, priors, a, xi, x, kappa)
        if fast:
            return v
        if not math.isfinite(v):
            raise EvaluationError("non-finite interim payoff", xi)
        return v

    if window.is_degenerate:
        return MeuResult(float(f(window.lo)), window.lo, True)
    grid = window.grid(scan_points)
    if fast:
        vals = np.asarray(f(grid), dtype=float)
        bad = ~np.isfinite(vals)
        if bad.any():
            raise EvaluationError("non-finite interim payoff", float(grid[np.argmax(bad)]))
    else:
        vals = np.array([f(float(v)) for v in grid])
    res = minimize_on_interval(f, window, scan_points, tol, vectorized=fast)
    near = np.nonzero(vals <= res.min + 1e-12)[0]
    ties = near.size > 1 and np.any(np.diff(near) > 1)
    boundary = abs(res.argmin - window.lo) <= tol or abs(res.argmin - window.hi) <= tol
    return MeuResult(float(res.min), float(res.argmin), bool(boundary), ties=bool(ties))


def _meu_product(model, priors, ambiguity, a, x, kappa, tol) -> MeuResult:
    own, opp = ambiguity.own, ambiguity.opp
    go, gp = own.grid(PRODUCT_SCAN), opp.grid(PRODUCT_SCAN)
    O, P = np.meshgrid(go, gp, indexing="ij")
    vals = np.asarray(interim_payoff(model, priors, a, (O, P), x, kappa), dtype=float)
    if not np.all(np.isfinite(vals)):
        i = np.argmax(~np.isfinite(vals))
        raise EvaluationError("non-finite interim payoff", float(O.flat[i]))
    i, j = np.unravel_index(int(np.argmin(vals)), vals.shape)
    best_o, best_p, best = float(go[i]), float(gp[j]), float(vals[i, j])
    # coordinate-wise refinement inside the neighbouring cells
    for _ in range(3):
        if not own.is_degenerate:
            lo, hi = go[max(i - 1, 0)], go[min(i + 1, len(go) - 1)]
            r = minimize_on_interval(lambda s: interim_payoff(model, priors, a, (s, best_p), x, kappa), (lo, hi), 9, tol)
            if r.min < best:
                best_o, best = r.argmin, r.min
        if not opp.is_degenerate:
            lo, hi = gp[max(j - 1, 0)], gp[min(j + 1, len(gp) - 1)]
            r = minimize_on_interval(lambda s: interim_payoff(model, priors, a, (best_o, s), x, kappa), (lo, hi), 9, tol)
            if r.min < best:
                best_p, best = r.argmin, r.min
    boundary = best_o in (own.lo, own.hi) or best_p in (opp.lo, opp.hi)
    return MeuResult(best, (best_o, best_p), bool(boundary))


def _golden_columns(fun, lo: np.ndarray, hi: np.ndarray, iters: int) -> tuple[np.ndarray, np.ndarray]:
    """Golden-section search run independently on each column's bracket."""
    a, b = lo.copy(), hi.copy()
    c = b - _INV_GOLDEN * (b - a)
    d = a + _INV_GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        left = fc <= fd
        a, b = np.where(left, a, c), np.where(left, d, b)
        nc = np.where(left, b - _INV_GOLDEN * (b - a), d)
        nd = np.where(left, c, a + _INV_GOLDEN * (b - a))
        fnew = fun(np.where(left, nc, nd))
        fc, fd = np.where(left, fnew, fd), np.where(left, fc, fnew)
        c, d = nc, nd
    take_c = fc <= fd
    return np.where(take_c, c, d), np.where(take_c, fc, fd)


def meu_value(
    model: PayoffModel,
    priors: PriorFamily,
    ambiguity: AmbiguitySet,
    a: int,
    x,
    kappa,
    scan_points: int = XI_SCAN,
    tol: float = MIN_TOL,
) -> np.ndarray:
    """Vectorized ``min_xi`` of the interim payoff over arrays of ``(x, kappa)``.

    Same algorithm as :func:`meu_payoff` (grid with both endpoints, then
    golden section in the cells next to the best grid point), run for all
    query points at once when the model has a closed form.
    """
    x, kappa = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(kappa, dtype=float))
    shape = x.shape
    x, kappa = x.ravel(), kappa.ravel()
    if model.safe_action == a:
        return np.full(shape, float(model.safe_value))
    if ambiguity.is_product or not _has_fast_path(model, priors):
        out = np.array([meu_payoff(model, priors, ambiguity, a, xx, kk, scan_points, tol).value for xx, kk in zip(x, kappa)])
        return out.reshape(shape)
    window = ambiguity.own
    if window.is_degenerate:
        return np.asarray(interim_payoff(model, priors, a, window.lo, x, kappa), dtype=float).reshape(shape)
    grid = window.grid(scan_points)
    vals = np.asarray(interim_payoff(model, priors, a, grid[:, None], x[None, :], kappa[None, :]), dtype=float)
    if not np.all(np.isfinite(vals)):
        i = np.argmax(~np.isfinite(vals))
        raise EvaluationError("non-finite interim payoff", float(grid[i // vals.shape[1]]))
    i = np.argmin(vals, axis=0)
    grid_min = vals[i, np.arange(vals.shape[1])]
    lo = grid[np.maximum(i - 1, 0)]
    hi = grid[np.minimum(i + 1, len(grid) - 1)]
    iters = max(1, int(math.ceil(math.log(max(2.0 * window.width / (scan_points - 1), tol) / tol) / math.log(1.0 / _INV_GOLDEN))))
    _, ref = _golden_columns(lambda s: np.asarray(interim_payoff(model, priors, a, s, x, kappa), dtype=float), lo, hi, iters)
    return np.minimum(grid_min, ref).reshape(shape)


def payoff_gap(
    model: PayoffModel,
    priors: PriorFamily,
    ambiguity: AmbiguitySet,
    x,
    kappa,
    scan_points: int = XI_SCAN,
    tol: float = MIN_TOL,
):
    """``min_xi pi^1 - min_xi pi^0`` at ``(x, kappa)``; broadcasts over arrays."""
    if np.ndim(x) == 0 and np.ndim(kappa) == 0:
        v1 = meu_payoff(model, priors, ambiguity, 1, float(x), float(kappa), scan_points, tol).value
        v0 = meu_payoff(model, priors, ambiguity, 0, float(x), float(kappa), scan_points, tol).value
        return v1 - v0
    return meu_value(model, priors, ambiguity, 1, x, kappa, scan_points, tol) - meu_value(
        model, priors, ambiguity, 0, x, kappa, scan_points, tol
    )


# --------------------------------------------------------------------------
# smooth ambiguity


def smooth_aggregate(
    model: PayoffModel,
    priors: PriorFamily,
    ambiguity: AmbiguitySet,
    alpha: float,
    a: int,
    x: float,
    kappa: float,
    tol: float = 1e-12,
) -> tuple[float, float]:
    """Uniform-weight exponential aggregator over Xi and its certainty equivalent.

    Returns ``(aggregate, certainty_equivalent)`` with
    ``aggregate = mean_xi(-exp(-alpha * pi_xi) / alpha)``. The integral is
    taken relative to the worst-case payoff so large ``alpha`` cannot
    overflow.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if ambiguity.is_product or ambiguity.own.is_degenerate:
        raise ValueError("smooth aggregation needs a nondegenerate interval Xi")
    window: Interval = ambiguity.own
    worst = meu_payoff(model, priors, ambiguity, a, x, kappa).value
    fast = _has_fast_path(model, priors)

    def weight(xi):
        if fast or model.safe_action == a:
            v = np.asarray(interim_payoff(model, priors, a, xi, x, kappa), dtype=float)
        else:
            v = np.array([interim_payoff(model, priors, a, float(s), x, kappa) for s in np.atleast_1d(xi)])
        return np.exp(-alpha * (np.broadcast_to(v, np.shape(xi)) - worst))

    mean_weight = integrate_adaptive(weight, window, tol) / window.width
    if not (math.isfinite(mean_weight) and mean_weight > 0):
        raise NumericalError(f"smooth aggregate lost precision (mean weight {mean_weight})")
    ce = worst - math.log(mean_weight) / alpha
    aggregate = -math.exp(-alpha * ce) / alpha if -alpha * ce < 700 else -math.inf
    if not math.isfinite(ce):
        raise NumericalError("certainty equivalent is not finite")
    return aggregate, ce

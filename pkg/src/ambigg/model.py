"""Payoff models, prior families, ambiguity sets and the A1-A5 validator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import DomainError, UnsupportedError
from .numerics import QUAD_TOL, Interval, expect_normal, integrate_adaptive, norm_cdf, norm_pdf, normal_partial_affine

NOISE_KINDS = ("normal", "logistic")
_LOGISTIC_SCALE = math.sqrt(3.0) / math.pi  # logistic scale giving unit variance
_LOGISTIC_TRUNCATION = 40.0  # in logistic scale units; tail mass ~ e^-40


# --------------------------------------------------------------------------
# priors


@dataclass(frozen=True)
class PriorFamily:
    """State prior plus noise family indexed by precision ``xi``.

    ``kind`` is ``"normal"`` (precision ``eta``, mean ``y``) or
    ``"improper_uniform"``. Noise is zero-mean with variance ``1/xi``.
    """

    kind: str
    eta: float | None = None
    y: float | None = None
    noise: str = "normal"

    def __post_init__(self):
        if self.kind not in ("normal", "improper_uniform"):
            raise DomainError(f"unknown prior kind {self.kind!r}")
        if self.noise not in NOISE_KINDS:
            raise DomainError(f"unknown noise family {self.noise!r}")
        if self.kind == "normal":
            if self.eta is None or self.y is None:
                raise DomainError("normal prior needs eta and y")
            if not self.eta > 0:
                raise DomainError(f"prior precision must be positive, got {self.eta}")

    @classmethod
    def normal(cls, eta: float, y: float, noise: str = "normal") -> "PriorFamily":
        return cls("normal", float(eta), float(y), noise)

    @classmethod
    def improper(cls, noise: str = "normal") -> "PriorFamily":
        return cls("improper_uniform", noise=noise)

    @property
    def center(self) -> float:
        return self.y if self.kind == "normal" else 0.5


def posterior_params(priors: PriorFamily, xi, x):
    """Posterior mean and precision of the state given signal ``x``."""
    if priors.noise != "normal":
        if priors.kind == "normal":
            raise UnsupportedError("normal prior with non-normal noise has no conjugate posterior")
        raise UnsupportedError("non-normal noise posterior is not normal; use posterior_expect")
    xi = np.asarray(xi, dtype=float)
    if np.any(xi <= 0):
        raise DomainError("noise precision must be positive")
    if priors.kind == "normal":
        prec = priors.eta + xi
        mean = (priors.eta * priors.y + xi * np.asarray(x, dtype=float)) / prec
    else:
        prec = xi + 0.0 * np.asarray(x, dtype=float)
        mean = np.asarray(x, dtype=float) + 0.0 * xi
    if np.ndim(mean) == 0:
        return float(mean), float(prec)
    return mean, prec


def noise_cdf(priors: PriorFamily, z, xi):
    """Distribution function ``Q_xi(z)`` of one noise term."""
    z = np.asarray(z, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if priors.noise == "normal":
        out = norm_cdf(np.sqrt(xi) * z)
    else:
        s = _LOGISTIC_SCALE / np.sqrt(xi)
        out = 0.5 * (1.0 + np.tanh(0.5 * z / s))
    return float(out) if np.ndim(out) == 0 else out


def noise_pdf(priors: PriorFamily, z, xi):
    z = np.asarray(z, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if priors.noise == "normal":
        out = np.sqrt(xi) * norm_pdf(np.sqrt(xi) * z)
    else:
        s = _LOGISTIC_SCALE / np.sqrt(xi)
        out = 0.25 / s / np.cosh(0.5 * z / s) ** 2
    return float(out) if np.ndim(out) == 0 else out


def opponent_mass(priors: PriorFamily, xi, kappa, theta):
    """Share of opponents playing 1 under ``s[kappa]`` at state ``theta``.

    Equals ``1 - Q_xi(kappa - theta)``; ``kappa = -inf`` gives 1 and
    ``kappa = +inf`` gives 0 exactly.
    """
    kappa = np.asarray(kappa, dtype=float)
    theta = np.asarray(theta, dtype=float)
    with np.errstate(invalid="ignore"):
        out = 1.0 - noise_cdf(priors, kappa - theta, xi)
    out = np.where(np.isneginf(kappa), 1.0, np.where(np.isposinf(kappa), 0.0, out))
    return float(out) if np.ndim(out) == 0 else out


def posterior_cdf(priors: PriorFamily, xi, x, theta):
    """``P_xi(state <= theta | x)``."""
    if priors.noise == "normal":
        mean, prec = posterior_params(priors, xi, x)
        return norm_cdf((np.asarray(theta) - mean) * np.sqrt(prec))
    # improper prior: posterior is the noise law reflected around x
    return noise_cdf(priors, np.asarray(theta) - np.asarray(x), xi)


def posterior_expect(
    priors: PriorFamily,
    g: Callable[[np.ndarray], np.ndarray],
    xi: float,
    x: float,
    tol: float = QUAD_TOL,
    breakpoints: Sequence[float] = (),
) -> float:
    """``E_xi[g(state) | x]`` by adaptive quadrature."""
    if priors.noise == "normal":
        mean, prec = posterior_params(priors, xi, x)
        return expect_normal(g, mean, 1.0 / math.sqrt(prec), tol, breakpoints)
    if priors.kind == "normal":
        raise UnsupportedError("normal prior with non-normal noise is not supported")
    s = _LOGISTIC_SCALE / math.sqrt(xi)
    lo, hi = x - _LOGISTIC_TRUNCATION * s, x + _LOGISTIC_TRUNCATION * s
    cuts = sorted(c for c in breakpoints if lo < c < hi)
    knots = [lo, *cuts, hi]
    total = []
    for a, b in zip(knots[:-1], knots[1:]):
        eps = 1e-12 * max(1.0, abs(a), abs(b))
        total.append(
            integrate_adaptive(
                lambda t, a=a, b=b, eps=eps: g(np.clip(t, a + eps, b - eps)) * noise_pdf(priors, t - x, xi),
                (a, b),
                tol / (len(knots) - 1),
            )
        )
    return math.fsum(total)


# --------------------------------------------------------------------------
# ambiguity sets


@dataclass(frozen=True)
class AmbiguitySet:
    """Compact set of noise precisions.

    ``own`` indexes the precision of the player's signal. In product mode
    ``opp`` indexes the opponents' precision separately; otherwise both are
    the same ``xi``.
    """

    own: Interval
    opp: Interval | None = None

    def __post_init__(self):
        for iv in (self.own, self.opp):
            if iv is not None and not iv.lo > 0:
                raise DomainError(f"precisions must be positive, got [{iv.lo}, {iv.hi}]")

    @classmethod
    def interval(cls, lo: float, hi: float) -> "AmbiguitySet":
        return cls(Interval(lo, hi))

    @classmethod
    def singleton(cls, xi: float) -> "AmbiguitySet":
        return cls(Interval(xi, xi))

    @classmethod
    def product(cls, own, opp) -> "AmbiguitySet":
        own = own if isinstance(own, Interval) else Interval(*own)
        opp = opp if isinstance(opp, Interval) else Interval(*opp)
        return cls(own, opp)

    @property
    def is_product(self) -> bool:
        return self.opp is not None

    @property
    def is_singleton(self) -> bool:
        return self.own.is_degenerate and (self.opp is None or self.opp.is_degenerate)

    @property
    def lo(self) -> float:
        return self.own.lo

    @property
    def hi(self) -> float:
        return self.own.hi

    def sample(self, n: int) -> list:
        """Grid of ``n`` precisions (pairs in product mode)."""
        own = self.own.grid(n)
        if not self.is_product:
            return [float(v) for v in own]
        opp = self.opp.grid(n)
        return [(float(a), float(b)) for a in own for b in opp]

    def smallest(self) -> float:
        return min(self.own.lo, self.opp.lo) if self.is_product else self.own.lo


def split_xi(xi) -> tuple:
    """``(own, opp)`` precision from a scalar or a pair."""
    if isinstance(xi, tuple):
        return xi
    return xi, xi


# --------------------------------------------------------------------------
# payoff models


ClosedForm = Callable[[PriorFamily, int, object, object, object, object], object]


@dataclass(frozen=True)
class PayoffModel:
    """Payoff ``u(a, l, theta)`` plus metadata.

    ``u`` must broadcast over numpy arrays in ``l`` and ``theta``.
    ``breakpoints(kappa, xi_opp)`` lists states where the interim integrand
    jumps when opponents play ``s[kappa]``. ``closed_form`` is an optional
    vectorized fast path ``(priors, a, xi_own, xi_opp, x, kappa) -> value``
    returning ``None`` when it does not cover ``priors``.
    ``state_independent`` maps an action to ``f(l)`` when ``u(a, l, .) = f(l)``.
    """

    u: Callable
    name: str = "custom"
    safe_action: int | None = None
    safe_value: float | None = None
    params: Mapping = field(default_factory=dict)
    theta_bounds: tuple[float, float] | None = None
    breakpoints: Callable[[float, float], Sequence[float]] | None = None
    closed_form: ClosedForm | None = None
    state_independent: Mapping[int, Callable] = field(default_factory=dict)
    center: float | None = None

    def __post_init__(self):
        if self.safe_action is not None:
            if self.safe_action not in (0, 1):
                raise DomainError("safe_action must be 0 or 1")
            if self.safe_value is None:
                v = np.asarray(self.u(self.safe_action, 0.5, 0.0), dtype=float)
                object.__setattr__(self, "safe_value", float(v))

    def payoff(self, a: int, l, theta):
        return self.u(a, l, theta)

    def xi_invariant_action(self) -> int | None:
        """Action whose diagonal interim payoff does not depend on ``xi``."""
        if self.safe_action is not None:
            return self.safe_action
        if self.state_independent:
            return min(self.state_independent)
        return None


def linear_model() -> PayoffModel:
    """Investment game: ``u(1, l, theta) = theta + l - 1``, action 0 pays 0."""
    from .interim import linear_closed_form

    def u(a, l, theta):
        l = np.asarray(l, dtype=float)
        theta = np.asarray(theta, dtype=float)
        if a == 0:
            return np.zeros(np.broadcast(l, theta).shape)
        return theta + l - 1.0

    return PayoffModel(
        u=u,
        name="linear",
        safe_action=0,
        safe_value=0.0,
        closed_form=linear_closed_form,
    )


def piecewise_linear_model(
    u1_const: float = 0.0,
    u1_l: float = 0.0,
    u1_theta: Sequence[tuple[float, float]] = ((0.0, 0.0), (1.0, 1.0)),
    u0_const: float = 0.0,
    u0_l: float = 0.0,
    u0_theta: Sequence[tuple[float, float]] = ((0.0, 0.0), (1.0, 0.0)),
    name: str = "custom",
) -> PayoffModel:
    """User model ``u(a, l, theta) = const_a + l_a * l + g_a(theta)``.

    ``g_a`` interpolates the ``(theta, value)`` knots linearly and extends
    with the edge slopes beyond the outermost knots.
    """
    tables = {}
    for a, knots in ((0, u0_theta), (1, u1_theta)):
        pts = sorted((float(t), float(v)) for t, v in knots)
        if len(pts) < 2:
            raise DomainError("piecewise-linear payoff needs at least two theta knots")
        tables[a] = (np.array([p[0] for p in pts]), np.array([p[1] for p in pts]))
    consts = {0: (float(u0_const), float(u0_l)), 1: (float(u1_const), float(u1_l))}

    def g(a, theta):
        ts, vs = tables[a]
        out = np.interp(theta, ts, vs)
        lo_slope = (vs[1] - vs[0]) / (ts[1] - ts[0])
        hi_slope = (vs[-1] - vs[-2]) / (ts[-1] - ts[-2])
        out = np.where(theta < ts[0], vs[0] + lo_slope * (theta - ts[0]), out)
        return np.where(theta > ts[-1], vs[-1] + hi_slope * (theta - ts[-1]), out)

    def u(a, l, theta):
        l = np.asarray(l, dtype=float)
        theta = np.asarray(theta, dtype=float)
        c, cl = consts[a]
        return c + cl * l + g(a, theta)

    def closed_form(priors, a, xi_own, xi_opp, x, kappa):
        if priors.noise != "normal":
            return None
        mean, prec = posterior_params(priors, xi_own, x)
        sd = 1.0 / np.sqrt(prec)
        with np.errstate(invalid="ignore"):
            share = norm_cdf((mean - np.asarray(kappa, dtype=float)) / np.sqrt(1.0 / prec + 1.0 / np.asarray(xi_opp, dtype=float)))
        share = np.where(np.isneginf(kappa), 1.0, np.where(np.isposinf(kappa), 0.0, share))
        c, cl = consts[a]
        return c + cl * share + expect_piecewise_affine(tables[a], mean, sd)

    safe = None
    for a in (0, 1):
        ts, vs = tables[a]
        if consts[a][1] == 0.0 and np.all(vs == vs[0]):
            safe = a
            break
    return PayoffModel(
        u=u,
        name=name,
        safe_action=safe,
        params={"u1_const": u1_const, "u1_l": u1_l, "u0_const": u0_const, "u0_l": u0_l},
        closed_form=closed_form,
    )


def expect_piecewise_affine(table, mean, sd):
    """``E[g(t)]`` for ``t ~ N(mean, sd^2)`` and ``g`` the linear interpolant of
    ``table = (knots, values)`` extended with its edge slopes."""
    ts, vs = table
    slopes = np.diff(vs) / np.diff(ts)
    edges = np.concatenate([[-np.inf], ts[1:-1], [np.inf]])
    total = 0.0
    for i, beta in enumerate(slopes):
        alpha = vs[i] - beta * ts[i]
        total = total + normal_partial_affine(mean, sd, edges[i], edges[i + 1], alpha, beta)
    return total


def preset(name: str, **params) -> PayoffModel:
    """Build a named preset: ``linear``, ``currency``, ``debt``, ``synthetic``, ``bankrun`` or ``custom``."""
    from . import regime

    if name == "linear":
        return linear_model()
    if name == "currency":
        return regime.currency_model(**params).payoff_model()
    if name == "debt":
        return regime.debt_model(**params).payoff_model()
    if name == "synthetic":
        return regime.synthetic_model(**params).payoff_model()
    if name == "bankrun":
        return regime.bankrun_model(**params)
    if name == "custom":
        return piecewise_linear_model(**params)
    raise DomainError(f"unknown model preset {name!r}")


# --------------------------------------------------------------------------
# assumption validation


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    passed: bool
    detail: str = ""
    certified: bool = True


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[AssumptionCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> AssumptionCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self) -> list[AssumptionCheck]:
        return [c for c in self.checks if not c.passed]

    def summary(self) -> str:
        lines = []
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            note = "" if c.certified else " (sampled, not certified)"
            lines.append(f"{c.name}: {status}{note}" + (f" - {c.detail}" if c.detail else ""))
        return "\n".join(lines)


@dataclass(frozen=True)
class SamplingGrid:
    """Finite samples used by :func:`validate_assumptions`."""

    l: np.ndarray
    theta: np.ndarray
    x: np.ndarray
    xi: np.ndarray
    kappa: np.ndarray

    @classmethod
    def default(cls, center: float, ambiguity: AmbiguitySet, half_width: float = 5.0, n: int = 21) -> "SamplingGrid":
        lo = min(ambiguity.own.lo, ambiguity.opp.lo if ambiguity.is_product else np.inf)
        hi = max(ambiguity.own.hi, ambiguity.opp.hi if ambiguity.is_product else -np.inf)
        xs = np.linspace(center - half_width, center + half_width, n)
        return cls(
            l=np.linspace(0.0, 1.0, n),
            theta=np.linspace(center - half_width, center + half_width, 4 * n + 1),
            x=xs,
            xi=np.unique(np.geomspace(lo, hi, 5)) if hi > lo else np.array([lo]),
            kappa=np.concatenate([[-np.inf], xs[::4], [np.inf]]),
        )


_SLACK = 1e-12


def _monotone(values: np.ndarray, axis: int, increasing: bool) -> tuple[bool, float]:
    d = np.diff(values, axis=axis)
    worst = float(-d.min()) if increasing else float(d.max())
    return worst <= _SLACK, worst


def validate_assumptions(
    model: PayoffModel,
    priors: PriorFamily,
    ambiguity: AmbiguitySet,
    grid: SamplingGrid | None = None,
) -> ValidationReport:
    """Sampled checks of A1-A5.

    A1/A2 check weak monotonicity of each action's payoff in ``l`` and in
    ``theta``. A3 checks posterior distribution functions are ordered in the
    signal. A4 only checks finiteness of sampled interim payoffs and is
    reported as not certified. A5 checks the dominance-region payoff signs at
    declared (or probed) extreme states and the interim sign at extreme
    signals.
    """
    from .interim import interim_payoff

    center = model.center if model.center is not None else priors.center
    if grid is None:
        grid = SamplingGrid.default(center, ambiguity)
    L, T = np.meshgrid(grid.l, grid.theta, indexing="ij")
    checks = []

    u1 = np.asarray(model.u(1, L, T), dtype=float)
    u0 = np.asarray(model.u(0, L, T), dtype=float)
    ok1, w1 = _monotone(u1, 0, True)
    ok0, w0 = _monotone(u0, 0, False)
    detail = "" if ok1 and ok0 else (
        "u(1,l,theta) decreases in l" if not ok1 else "u(0,l,theta) increases in l"
    ) + f" (worst step {max(w1, w0):.3g})"
    checks.append(AssumptionCheck("A1", ok1 and ok0, detail))

    ok1, w1 = _monotone(u1, 1, True)
    ok0, w0 = _monotone(u0, 1, False)
    detail = "" if ok1 and ok0 else (
        "u(1,l,theta) decreases in theta" if not ok1 else "u(0,l,theta) increases in theta"
    ) + f" (worst step {max(w1, w0):.3g})"
    checks.append(AssumptionCheck("A2", ok1 and ok0, detail))

    xis = [float(v) for v in grid.xi]
    worst = 0.0
    for xi in xis:
        cdfs = np.array([np.asarray(posterior_cdf(priors, xi, x, grid.theta)) for x in grid.x])
        # rows ordered by increasing signal: cdf must weakly fall
        worst = max(worst, float(np.diff(cdfs, axis=0).max()))
    checks.append(AssumptionCheck("A3", worst <= _SLACK, "" if worst <= _SLACK else f"cdf rises by {worst:.3g}"))

    bad = None
    for xi in xis:
        for a in (0, 1):
            for k in grid.kappa:
                vals = [interim_payoff(model, priors, a, xi, float(x), float(k)) for x in grid.x[::4]]
                if not np.all(np.isfinite(vals)):
                    bad = (a, xi, k)
                    break
    checks.append(
        AssumptionCheck(
            "A4",
            bad is None,
            "sampled interim payoffs finite" if bad is None else f"non-finite payoff at a,xi,kappa={bad}",
            certified=False,
        )
    )

    post_sd = max(
        1.0 / math.sqrt((priors.eta or 0.0) + min(xis)),
        1.0 / math.sqrt(min(xis)),
    )
    if model.theta_bounds is not None:
        th_lo, th_hi = model.theta_bounds
    else:
        th_lo = grid.theta[0] - 10.0 * post_sd
        th_hi = grid.theta[-1] + 10.0 * post_sd
    d_lo = float(model.u(1, 1.0, th_lo) - model.u(0, 1.0, th_lo))
    d_hi = float(model.u(1, 0.0, th_hi) - model.u(0, 0.0, th_hi))
    problems = []
    if not d_lo < 0:
        problems.append(f"u(1,1,{th_lo:.3g})-u(0,1,{th_lo:.3g}) = {d_lo:.3g} is not negative")
    if not d_hi > 0:
        problems.append(f"u(1,0,{th_hi:.3g})-u(0,0,{th_hi:.3g}) = {d_hi:.3g} is not positive")
    if not problems:
        x_lo = min(th_lo, grid.x[0]) - 10.0 * post_sd
        x_hi = max(th_hi, grid.x[-1]) + 10.0 * post_sd
        for xi in xis:
            g_lo = interim_payoff(model, priors, 1, xi, x_lo, -np.inf) - interim_payoff(model, priors, 0, xi, x_lo, -np.inf)
            g_hi = interim_payoff(model, priors, 1, xi, x_hi, np.inf) - interim_payoff(model, priors, 0, xi, x_hi, np.inf)
            if not g_lo < 0:
                problems.append(f"payoff gap at signal {x_lo:.3g} is {g_lo:.3g}")
            if not g_hi > 0:
                problems.append(f"payoff gap at signal {x_hi:.3g} is {g_hi:.3g}")
    checks.append(AssumptionCheck("A5", not problems, "; ".join(problems)))
    return ValidationReport(tuple(checks))

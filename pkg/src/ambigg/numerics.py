"""Special functions, root isolation, interval minimization and quadrature.

Everything here is a pure function of its arguments. Callbacks passed with
``vectorized=True`` must accept and return numpy arrays.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import special

from .errors import DomainError, EvaluationError

ROOT_TOL = 1e-10
QUAD_TOL = 1e-10
MIN_TOL = 1e-9
KAPPA_SCAN = 512
XI_SCAN = 256
TRUNCATION_SDS = 8.0

_INV_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_EPS = np.finfo(float).eps


class IntegrationWarning(UserWarning):
    """Adaptive quadrature hit its recursion limit before meeting tolerance."""


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise DomainError(f"interval bounds must be finite, got [{lo}, {hi}]")
        if lo > hi:
            raise DomainError(f"interval lower bound {lo} exceeds upper bound {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def is_degenerate(self) -> bool:
        return self.lo == self.hi

    def grid(self, n: int) -> np.ndarray:
        if self.is_degenerate:
            return np.array([self.lo])
        return np.linspace(self.lo, self.hi, n)

    def __contains__(self, x) -> bool:
        return self.lo <= x <= self.hi

    def __iter__(self):
        return iter((self.lo, self.hi))


def as_interval(window) -> Interval:
    if isinstance(window, Interval):
        return window
    lo, hi = window
    return Interval(lo, hi)


@dataclass(frozen=True)
class RootSet:
    """Sorted roots of a scalar function on a window.

    ``tangential[i]`` is True when root ``i`` was found as a touching zero
    without a sign change (best effort only).
    """

    roots: tuple[float, ...]
    residual_tol: float
    scan_points: int
    residuals: tuple[float, ...] = ()
    tangential: tuple[bool, ...] = ()
    jumps: tuple[float, ...] = field(default=())

    def __len__(self):
        return len(self.roots)

    def __iter__(self):
        return iter(self.roots)

    def __getitem__(self, i):
        return self.roots[i]

    @property
    def min(self) -> float:
        return self.roots[0]

    @property
    def max(self) -> float:
        return self.roots[-1]


class Minimum(NamedTuple):
    argmin: float
    min: float


# --------------------------------------------------------------------------
# special functions


def std_normal(z):
    """Standard normal density and distribution function at ``z``."""
    z = np.asarray(z, dtype=float)
    pdf = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    cdf = special.ndtr(z)
    if pdf.ndim == 0:
        return float(pdf), float(cdf)
    return pdf, cdf


def norm_cdf(z):
    out = special.ndtr(z)
    return float(out) if np.ndim(out) == 0 else out


def norm_pdf(z):
    z = np.asarray(z, dtype=float)
    out = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    return float(out) if out.ndim == 0 else out


def std_normal_quantile(p: float) -> float:
    """Inverse of the standard normal distribution function."""
    p = float(p)
    if not 0.0 < p < 1.0:
        raise DomainError(f"quantile needs 0 < p < 1, got {p}")
    z = float(special.ndtri(p))
    # one Newton polish step; ndtri is already close to full precision
    pdf, cdf = std_normal(z)
    if pdf > 0.0:
        step = (cdf - p) / pdf
        if abs(step) < 1e-6:
            z -= step
    return z


def normal_partial_affine(mean, sd, lo, hi, alpha, beta):
    """``E[(alpha + beta * t) 1{lo < t <= hi}]`` for ``t ~ N(mean, sd^2)``.

    Broadcasts; ``lo``/``hi`` may be infinite.
    """
    mean = np.asarray(mean, dtype=float)
    sd = np.asarray(sd, dtype=float)
    with np.errstate(invalid="ignore"):
        zl = (np.asarray(lo, dtype=float) - mean) / sd
        zh = (np.asarray(hi, dtype=float) - mean) / sd
    mass = special.ndtr(zh) - special.ndtr(zl)
    # pdf is 0 at +-inf; guard the inf*0 that numpy would produce
    dens = np.where(np.isfinite(zh), norm_pdf(np.where(np.isfinite(zh), zh, 0.0)), 0.0) - np.where(
        np.isfinite(zl), norm_pdf(np.where(np.isfinite(zl), zl, 0.0)), 0.0
    )
    out = alpha * mass + beta * (mean * mass - sd * dens)
    return float(out) if np.ndim(out) == 0 else out


# --------------------------------------------------------------------------
# evaluation helpers


def _evaluate(f, xs: np.ndarray, vectorized: bool) -> np.ndarray:
    if vectorized:
        vals = np.asarray(f(xs), dtype=float)
        if vals.shape != xs.shape:
            vals = np.broadcast_to(vals, xs.shape).astype(float)
    else:
        vals = np.array([f(float(x)) for x in xs], dtype=float)
    bad = ~np.isfinite(vals)
    if bad.any():
        raise EvaluationError("non-finite function value", float(xs[np.argmax(bad)]))
    return vals


def _scalar(f, x: float) -> float:
    v = float(f(x))
    if not math.isfinite(v):
        raise EvaluationError("non-finite function value", x)
    return v


# --------------------------------------------------------------------------
# roots


def refine_root(
    f: Callable[[float], float],
    a: float,
    b: float,
    fa: float | None = None,
    fb: float | None = None,
    tol: float = ROOT_TOL,
    max_iter: int = 300,
) -> tuple[float, float]:
    """Bracketed root refinement: Illinois secant steps guarded by bisection.

    Requires ``f(a)`` and ``f(b)`` of opposite sign (or one of them zero).
    Iterates until the bracket collapses to adjacent floating point numbers,
    so the returned residual is as small as the evaluation noise allows.
    Returns ``(root, f(root))``.
    """
    if fa is None:
        fa = _scalar(f, a)
    if fb is None:
        fb = _scalar(f, b)
    if fa == 0.0:
        return a, 0.0
    if fb == 0.0:
        return b, 0.0
    if fa * fb > 0.0:
        raise ValueError(f"no sign change on [{a}, {b}]")
    width = abs(b - a)
    for it in range(max_iter):
        if abs(b - a) <= 4.0 * np.spacing(max(abs(a), abs(b))):
            break
        if it % 4 == 3:
            # guard: force a bisection unless the last steps halved the bracket
            force = abs(b - a) > 0.5 * width
            width = abs(b - a)
        else:
            force = False
        c = 0.5 * (a + b)
        if not force:
            s = b - fb * (b - a) / (fb - fa)
            if min(a, b) < s < max(a, b):
                c = s
        fc = _scalar(f, c)
        if fc == 0.0:
            return c, 0.0
        if fc * fb < 0.0:
            a, fa = b, fb
        else:
            # Illinois: damp the retained endpoint so it cannot stall
            fa *= 0.5
        b, fb = c, fc
    fa_true = _scalar(f, a)
    if abs(fa_true) < abs(fb):
        return a, fa_true
    return b, fb


def _golden(f, a: float, b: float, tol: float, max_iter: int = 200) -> tuple[float, float]:
    c = b - _INV_GOLDEN * (b - a)
    d = a + _INV_GOLDEN * (b - a)
    fc, fd = _scalar(f, c), _scalar(f, d)
    for _ in range(max_iter):
        if abs(b - a) <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_GOLDEN * (b - a)
            fc = _scalar(f, c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_GOLDEN * (b - a)
            fd = _scalar(f, d)
    return (c, fc) if fc <= fd else (d, fd)


def find_roots(
    f: Callable,
    window,
    scan_points: int = KAPPA_SCAN,
    tol: float = ROOT_TOL,
    *,
    vectorized: bool = False,
    extra_points: Sequence[float] | np.ndarray | None = None,
    tangential: bool = True,
) -> RootSet:
    """Isolate every sign change of ``f`` on a scan grid and refine it.

    ``extra_points`` are merged into the uniform grid (used for a dense core
    inside a wide window). A grid point where ``f`` is exactly zero is itself
    a root. Touching zeros without a sign change are searched for at interior
    local minima of ``|f|`` and reported with ``tangential=True``.
    """
    window = as_interval(window)
    if scan_points < 2:
        raise ValueError("scan_points must be at least 2")
    grid = window.grid(scan_points)
    if extra_points is not None:
        extra = np.asarray(extra_points, dtype=float)
        extra = extra[(extra >= window.lo) & (extra <= window.hi)]
        grid = np.unique(np.concatenate([grid, extra]))
    vals = _evaluate(f, grid, vectorized)
    scalar_f = (lambda x: float(np.asarray(f(np.array([x])))[0])) if vectorized else f

    roots, resid, tang, jumps = [], [], [], []
    sgn = np.sign(vals)
    for i, v in enumerate(vals):
        if v == 0.0:
            roots.append(float(grid[i]))
            resid.append(0.0)
            tang.append(False)
    cells = np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]
    for i in cells:
        r, fr = refine_root(scalar_f, float(grid[i]), float(grid[i + 1]), float(vals[i]), float(vals[i + 1]), tol)
        if abs(fr) > max(tol, math.sqrt(tol)):
            jumps.append(r)
            continue
        roots.append(r)
        resid.append(abs(fr))
        tang.append(False)

    if tangential and len(grid) >= 3:
        a = np.abs(vals)
        for i in range(1, len(grid) - 1):
            if sgn[i] == 0 or sgn[i - 1] * sgn[i] <= 0 or sgn[i] * sgn[i + 1] <= 0:
                continue
            if not (a[i] <= a[i - 1] and a[i] <= a[i + 1]):
                continue
            x, fx = _golden(lambda t: abs(_scalar(scalar_f, t)), float(grid[i - 1]), float(grid[i + 1]), 1e-13)
            if fx <= tol:
                roots.append(x)
                resid.append(fx)
                tang.append(True)

    order = np.argsort(roots)
    return RootSet(
        roots=tuple(float(roots[k]) for k in order),
        residual_tol=tol,
        scan_points=len(grid),
        residuals=tuple(float(resid[k]) for k in order),
        tangential=tuple(bool(tang[k]) for k in order),
        jumps=tuple(jumps),
    )


def expand_bracket(
    h: Callable[[float], float],
    center: float,
    width: float = 1.0,
    limit: float = 1e6,
) -> tuple[float, float]:
    """Double outward from ``center`` until ``h(lo) < 0 < h(hi)``.

    Assumes ``h`` is eventually negative on the left and positive on the
    right. Raises ``ValueError`` when either side passes ``limit``.
    """
    lo_step = hi_step = width
    lo, hi = center - lo_step, center + hi_step
    while _scalar(h, lo) >= 0.0:
        lo_step *= 2.0
        lo = center - lo_step
        if lo < -limit:
            raise ValueError(f"no negative value of h above {-limit}")
    while _scalar(h, hi) <= 0.0:
        hi_step *= 2.0
        hi = center + hi_step
        if hi > limit:
            raise ValueError(f"no positive value of h below {limit}")
    return lo, hi


# --------------------------------------------------------------------------
# minimization


def minimize_on_interval(
    f: Callable,
    window,
    scan_points: int = XI_SCAN,
    tol: float = MIN_TOL,
    *,
    vectorized: bool = False,
) -> Minimum:
    """Global-ish minimum of ``f`` on ``window``: grid scan, then golden section.

    Both endpoints are always part of the grid. The golden-section search runs
    on the two cells adjacent to the best grid point; the smaller of the grid
    and refined values is returned. Ties on the grid resolve to the smallest
    abscissa.
    """
    window = as_interval(window)
    if scan_points < 2:
        raise ValueError("scan_points must be at least 2")
    if window.is_degenerate:
        x = window.lo
        return Minimum(x, _scalar(f, x) if not vectorized else float(_evaluate(f, np.array([x]), True)[0]))
    grid = window.grid(scan_points)
    vals = _evaluate(f, grid, vectorized)
    i = int(np.argmin(vals))
    best = Minimum(float(grid[i]), float(vals[i]))
    scalar_f = (lambda x: float(np.asarray(f(np.array([x])))[0])) if vectorized else f
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    x, fx = _golden(scalar_f, float(lo), float(hi), tol)
    if fx < best.min:
        best = Minimum(x, fx)
    return best


def maximize_on_interval(f, window, scan_points: int = XI_SCAN, tol: float = MIN_TOL, *, vectorized: bool = False) -> Minimum:
    """Mirror of :func:`minimize_on_interval`; returns ``(argmax, max)``."""
    if vectorized:
        res = minimize_on_interval(lambda x: -np.asarray(f(x)), window, scan_points, tol, vectorized=True)
    else:
        res = minimize_on_interval(lambda x: -f(x), window, scan_points, tol)
    return Minimum(res.argmin, -res.min)


# --------------------------------------------------------------------------
# quadrature


def integrate_adaptive(
    f: Callable[[np.ndarray], np.ndarray],
    window,
    tol: float = QUAD_TOL,
    *,
    max_depth: int = 48,
    initial_panels: int = 16,
) -> float:
    """Adaptive Simpson quadrature of a vectorized integrand.

    All panels of one refinement level are evaluated in a single call to
    ``f``. A panel is accepted when its two-half estimate differs from the
    whole-panel estimate by at most ``15 * local_tol``; the accepted value
    includes the Richardson correction. Emits :class:`IntegrationWarning`
    when ``max_depth`` is reached with panels still unconverged.
    """
    window = as_interval(window)
    a, b = window.lo, window.hi
    if a == b:
        return 0.0
    edges = np.linspace(a, b, initial_panels + 1)
    A, B = edges[:-1], edges[1:]
    M = 0.5 * (A + B)
    pts = np.concatenate([A, M, B[-1:]])
    fv = _evaluate(f, pts, True)
    n = initial_panels
    FA = fv[:n]
    FM = fv[n : 2 * n]
    FB = np.concatenate([FA[1:], fv[2 * n :]])
    S = (B - A) / 6.0 * (FA + 4.0 * FM + FB)
    TOL = np.full(n, tol / n)
    parts: list[float] = []
    depth = 0
    while A.size:
        depth += 1
        L = 0.5 * (A + M)
        R = 0.5 * (M + B)
        fv = _evaluate(f, np.concatenate([L, R]), True)
        FL, FR = fv[: A.size], fv[A.size :]
        SL = (M - A) / 6.0 * (FA + 4.0 * FL + FM)
        SR = (B - M) / 6.0 * (FM + 4.0 * FR + FB)
        err = SL + SR - S
        # panels whose difference is at rounding level cannot improve
        done = np.abs(err) <= np.maximum(15.0 * TOL, 64 * _EPS * (np.abs(SL) + np.abs(SR)))
        if depth >= max_depth:
            if not done.all():
                warnings.warn(
                    f"adaptive Simpson reached depth {max_depth} on {int((~done).sum())} panels",
                    IntegrationWarning,
                    stacklevel=2,
                )
            done[:] = True
        parts.extend((SL + SR + err / 15.0)[done].tolist())
        keep = ~done
        if not keep.any():
            break
        A, M, B = A[keep], M[keep], B[keep]
        FA, FM, FB = FA[keep], FM[keep], FB[keep]
        L, R, FL, FR = L[keep], R[keep], FL[keep], FR[keep]
        SL, SR, T = SL[keep], SR[keep], TOL[keep] / 2.0
        A = np.concatenate([A, M])
        B, M = np.concatenate([M, B]), np.concatenate([L, R])
        FA, FB = np.concatenate([FA, FM]), np.concatenate([FM, FB])
        FM = np.concatenate([FL, FR])
        S = np.concatenate([SL, SR])
        TOL = np.concatenate([T, T])
    return math.fsum(parts)


def expect_normal(
    g: Callable[[np.ndarray], np.ndarray],
    mean: float,
    sd: float,
    tol: float = QUAD_TOL,
    breakpoints: Sequence[float] = (),
) -> float:
    """``E[g(T)]`` for ``T ~ N(mean, sd^2)`` by adaptive Simpson.

    The integral is truncated to ``mean +/- 8 sd`` and split at every
    breakpoint inside that range, so integrands that jump there converge.
    """
    lo = mean - TRUNCATION_SDS * sd
    hi = mean + TRUNCATION_SDS * sd
    cuts = sorted(float(c) for c in breakpoints if lo < c < hi)
    knots = [lo, *cuts, hi]
    inv = 1.0 / sd
    norm = inv / math.sqrt(2.0 * math.pi)

    def piece(a: float, b: float):
        # endpoints are probed just inside the piece so a jump located exactly
        # at a knot never leaks the neighbouring branch into this piece
        eps = 1e-12 * max(1.0, abs(a), abs(b))
        lo_in, hi_in = a + eps, b - eps

        def integrand(t):
            z = (t - mean) * inv
            return g(np.clip(t, lo_in, hi_in)) * norm * np.exp(-0.5 * z * z)

        return integrand

    pieces = len(knots) - 1
    return math.fsum(
        integrate_adaptive(piece(knots[i], knots[i + 1]), (knots[i], knots[i + 1]), tol / pieces)
        for i in range(pieces)
    )

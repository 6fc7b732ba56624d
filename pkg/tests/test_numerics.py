import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from ambigg.errors import DomainError, EvaluationError
from ambigg.numerics import (
    IntegrationWarning,
    Interval,
    expand_bracket,
    expect_normal,
    find_roots,
    integrate_adaptive,
    maximize_on_interval,
    minimize_on_interval,
    norm_cdf,
    normal_partial_affine,
    refine_root,
    std_normal,
    std_normal_quantile,
)


@pytest.mark.parametrize("p", [1e-12, 1e-4, 0.025, 0.3, 0.5, 0.77, 0.975, 1 - 1e-9])
def test_quantile_against_mpmath(p):
    mpmath.mp.dps = 50
    ref = float(-mpmath.sqrt(2) * mpmath.erfinv(1 - 2 * mpmath.mpf(p)))
    assert std_normal_quantile(p) == pytest.approx(ref, rel=1e-13, abs=1e-15)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, float("nan")])
def test_quantile_domain(p):
    with pytest.raises(DomainError):
        std_normal_quantile(p)


@given(st.floats(-30, 30))
def test_cdf_against_mpmath(z):
    ref = float(mpmath.ncdf(z))
    assert norm_cdf(z) == pytest.approx(ref, rel=1e-12, abs=1e-300)


def test_std_normal_pair():
    pdf, cdf = std_normal(0.0)
    assert pdf == pytest.approx(1 / math.sqrt(2 * math.pi))
    assert cdf == 0.5


def test_interval_validation():
    with pytest.raises(DomainError):
        Interval(1.0, 0.0)
    with pytest.raises(DomainError):
        Interval(0.0, math.inf)
    iv = Interval(0.0, 2.0)
    assert 1.0 in iv and 3.0 not in iv
    assert iv.grid(5).tolist() == [0.0, 0.5, 1.0, 1.5, 2.0]
    assert Interval(1.0, 1.0).is_degenerate


def test_refine_root_to_machine_precision():
    r, fr = refine_root(lambda x: x**3 - 2.0, 0.0, 2.0, -2.0, 6.0, 1e-14)
    assert r == pytest.approx(2 ** (1 / 3), abs=4e-16)
    assert abs(fr) < 1e-14


def test_find_roots_cubic():
    roots = find_roots(lambda x: (x + 2) * (x - 0.5) * (x - 3), (-5, 5), 101)
    assert np.allclose(roots.roots, [-2, 0.5, 3], atol=1e-12)
    assert not any(roots.tangential)


def test_find_roots_grid_zero_and_tangency():
    roots = find_roots(lambda x: x * (x - 1.3) ** 2, (-1, 2), 31)
    assert roots.roots[0] == 0.0
    assert roots.tangential[-1] and roots.roots[-1] == pytest.approx(1.3, abs=1e-6)


def test_find_roots_flags_jump():
    roots = find_roots(lambda x: 1.0 if x > 0.3 else -1.0, (-1, 1), 20)
    assert len(roots) == 0 and len(roots.jumps) == 1


def test_find_roots_extra_points_resolve_narrow_pair():
    f = lambda x: (x - 0.001) * (x + 0.001) + 0.0 * x
    coarse = find_roots(f, (-100, 100), 10, tangential=False)
    dense = find_roots(f, (-100, 100), 10, extra_points=np.linspace(-0.01, 0.01, 41), tangential=False)
    assert len(coarse) == 0 and len(dense) == 2


def test_non_finite_evaluation_raises():
    with pytest.raises(EvaluationError) as exc:
        find_roots(lambda x: math.nan if x > 0.5 else x, (0, 1), 11)
    assert exc.value.x > 0.5


def test_expand_bracket():
    lo, hi = expand_bracket(lambda x: x - 100.0, 0.0)
    assert lo < 100.0 < hi
    with pytest.raises(ValueError):
        expand_bracket(lambda x: -1.0, 0.0, limit=1e3)


def test_minimize_interior_and_boundary():
    m = minimize_on_interval(lambda x: (x - 0.3) ** 2, (0, 1), 11)
    assert m.argmin == pytest.approx(0.3, abs=1e-7)
    b = minimize_on_interval(lambda x: x, (0.56, 1.1), 7)
    assert b.argmin == 0.56 and b.min == 0.56
    M = maximize_on_interval(lambda x: -(x - 2.0) ** 2, (0, 5), 9)
    assert M.argmin == pytest.approx(2.0, abs=1e-7) and M.min == pytest.approx(0.0, abs=1e-14)


def test_minimize_ties_take_smallest():
    m = minimize_on_interval(lambda x: 0.0, (0, 1), 5)
    assert m.argmin == 0.0


@given(st.floats(-5, 5), st.floats(0.01, 5), st.integers(0, 6))
def test_integrate_polynomials(a, w, deg):
    b = a + w
    got = integrate_adaptive(lambda t: t**deg, (a, b), 1e-12)
    exact = (b ** (deg + 1) - a ** (deg + 1)) / (deg + 1)
    assert got == pytest.approx(exact, rel=1e-10, abs=1e-10)


def test_integrate_smooth_and_warns_on_unresolved_jump():
    assert integrate_adaptive(np.exp, (0, 1), 1e-12) == pytest.approx(math.e - 1, abs=1e-11)
    with pytest.warns(IntegrationWarning):
        integrate_adaptive(lambda t: np.where(t > 1 / 3, 1.0, 0.0), (0, 1), 1e-14, max_depth=12)


def test_expect_normal_step_at_breakpoint():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        got = expect_normal(lambda t: np.where(t <= 0.7, 1.0, 0.0), 0.2, 0.5, 1e-12, (0.7,))
    assert got == pytest.approx(norm_cdf((0.7 - 0.2) / 0.5), abs=1e-11)


@given(
    st.floats(-3, 3),
    st.floats(0.1, 3),
    st.floats(-4, 4),
    st.floats(0.0, 3),
    st.floats(-2, 2),
    st.floats(-2, 2),
)
def test_partial_affine_against_quadrature(m, s, lo, w, alpha, beta):
    hi = lo + w
    exact = normal_partial_affine(m, s, lo, hi, alpha, beta)
    quad = expect_normal(lambda t: np.where((t > lo) & (t <= hi), alpha + beta * t, 0.0), m, s, 1e-12, (lo, hi))
    assert exact == pytest.approx(quad, abs=1e-9)


def test_partial_affine_infinite_limits():
    assert normal_partial_affine(1.5, 2.0, -np.inf, np.inf, 0.0, 1.0) == pytest.approx(1.5)
    assert normal_partial_affine(0.0, 1.0, -np.inf, 0.0, 1.0, 0.0) == pytest.approx(0.5)

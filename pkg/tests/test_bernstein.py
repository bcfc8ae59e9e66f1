import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexcolloc.bernstein import (
    BernsteinForm,
    Monotonicity,
    NotMonotonicError,
    Polynomial,
    SubdivisionBudgetError,
    bernstein_basis_eval,
    bernstein_matrix,
    bernstein_to_monomial,
    binomial,
    degree_elevate,
    hull_bounds,
    is_monotonic,
    is_tight_on,
    monomial_to_bernstein,
    rescale_to_unit,
    tight_partition,
)
from flexcolloc.problems import appendix_a_polynomials

GRID = np.linspace(0.0, 1.0, 10_001)

coeff_lists = st.lists(
    st.floats(-1.0, 1.0, allow_nan=False, allow_infinity=False), min_size=1, max_size=16
)


def sampled_range(p, a=0.0, b=1.0):
    y = p(a + (b - a) * GRID)
    return y.min(), y.max()


# --- basis -----------------------------------------------------------------

def test_basis_examples():
    assert bernstein_basis_eval(4, 0, 0.0) == 1.0
    assert bernstein_basis_eval(2, 1, 0.5) == pytest.approx(0.5, abs=1e-15)


def test_basis_rejects_bad_arguments():
    with pytest.raises(ValueError):
        bernstein_basis_eval(3, 4, 0.5)
    with pytest.raises(ValueError):
        bernstein_basis_eval(3, -1, 0.5)
    with pytest.raises(ValueError):
        bernstein_basis_eval(3, 1, 1.5)


@given(st.integers(0, 20), st.floats(0.0, 1.0))
def test_partition_of_unity(n, t):
    total = math.fsum(bernstein_basis_eval(n, j, t) for j in range(n + 1))
    assert abs(total - 1.0) <= 1e-12


def test_binomial_matches_math_comb():
    for n in range(57):
        for k in range(n + 1):
            assert binomial(n, k) == math.comb(n, k)
    assert binomial(5, 7) == 0.0


# --- conversions -----------------------------------------------------------

def test_conversion_examples():
    assert monomial_to_bernstein(Polynomial([2.5])).coeffs == (2.5,)
    assert monomial_to_bernstein(Polynomial([0, 0, 1])).coeffs == (0.0, 0.0, 1.0)
    assert monomial_to_bernstein(Polynomial([0, 1])).coeffs == (0.0, 1.0)


def test_matrix_structure():
    B = bernstein_matrix(6)
    assert np.allclose(np.triu(B, 1), 0.0)
    assert np.all(B[:, 0] == 1.0)
    # Each row of B is a convex-combination weight for alpha -> beta of 1.
    assert not B.flags.writeable


@settings(max_examples=200)
@given(coeff_lists)
def test_round_trip_evaluation(coeffs):
    p = Polynomial(coeffs)
    b = monomial_to_bernstein(p)
    t = np.random.default_rng(len(coeffs)).uniform(0, 1, 1000)
    assert np.max(np.abs(b(t) - p(t))) <= 1e-10
    assert b.coeffs[0] == pytest.approx(p(0.0), abs=1e-12)
    assert b.coeffs[-1] == pytest.approx(float(p(1.0)), abs=1e-10)
    back = bernstein_to_monomial(b)
    assert np.allclose(back.coeffs, p.coeffs, atol=1e-8)


def test_degree_elevate_examples():
    assert degree_elevate(BernsteinForm([3.0]), 3).coeffs == pytest.approx((3.0,) * 4)
    assert degree_elevate(BernsteinForm([0.0, 1.0]), 2).coeffs == pytest.approx((0.0, 0.5, 1.0))
    b = BernsteinForm([0.2, -1.0, 0.7])
    assert degree_elevate(b, 2).coeffs == pytest.approx(b.coeffs)
    with pytest.raises(ValueError):
        degree_elevate(b, 1)


@given(coeff_lists, st.integers(0, 4))
def test_degree_elevate_preserves_values(coeffs, extra):
    b = monomial_to_bernstein(Polynomial(coeffs))
    e = degree_elevate(b, b.degree + extra)
    t = np.linspace(0, 1, 51)
    assert np.max(np.abs(e(t) - b(t))) <= 1e-9


# --- hull bounds -----------------------------------------------------------

def test_hull_examples():
    h = hull_bounds(BernsteinForm([0.3, 0.3, 0.3]))
    assert (h.lower, h.upper, h.tight) == (0.3, 0.3, True)
    h = hull_bounds(BernsteinForm([0.0, 0.5, 1.0]))
    assert (h.lower, h.upper, h.tight_lower, h.tight_upper) == (0.0, 1.0, True, True)
    h = hull_bounds(BernsteinForm([0.0, 2.0, 1.0]))
    assert h.tight_lower and not h.tight_upper


@settings(max_examples=300)
@given(coeff_lists)
def test_hull_contains_sampled_range(coeffs):
    p = Polynomial(coeffs)
    h = hull_bounds(monomial_to_bernstein(p))
    lo, hi = sampled_range(p)
    assert h.lower <= lo + 1e-12 and hi <= h.upper + 1e-12


@settings(max_examples=300)
@given(coeff_lists)
def test_tightness_is_sound(coeffs):
    p = Polynomial(coeffs)
    b = monomial_to_bernstein(p)
    h = hull_bounds(b)
    lo, hi = sampled_range(p)
    ends = (b.coeffs[0], b.coeffs[-1])
    if h.tight_lower:
        assert lo >= h.lower - 1e-10
        assert min(abs(h.lower - e) for e in ends) <= 1e-12 * max(1.0, max(map(abs, b.coeffs)))
    if h.tight_upper:
        assert hi <= h.upper + 1e-10
        assert min(abs(h.upper - e) for e in ends) <= 1e-12 * max(1.0, max(map(abs, b.coeffs)))


# --- rescaling and monotonicity -----------------------------------------------

def test_rescale_examples():
    assert rescale_to_unit(Polynomial([0, 1]), 0.0, 0.5).coeffs == (0.0, 0.5)
    p = Polynomial([0.3, -1.2, 2.0])
    assert rescale_to_unit(p, 0.0, 1.0).coeffs == p.coeffs
    assert rescale_to_unit(Polynomial([0, 0, 1]), 1.0, 1.0).coeffs == (1.0, 2.0, 1.0)
    with pytest.raises(ValueError):
        rescale_to_unit(p, 0.0, 0.0)


@given(coeff_lists, st.floats(-2, 2), st.floats(0.01, 3))
def test_rescale_matches_composition(coeffs, a, h):
    p = Polynomial(coeffs)
    q = rescale_to_unit(p, a, h)
    s = np.linspace(0, 1, 17)
    scale = max(1.0, float(np.max(np.abs(p(a + h * s)))))
    assert np.max(np.abs(q(s) - p(a + h * s))) <= 1e-9 * scale * (1 + abs(a) + h) ** len(coeffs)


def test_monotonic_examples():
    assert is_monotonic(Polynomial([0, 1])) is Monotonicity.NON_DECREASING
    assert is_monotonic(Polynomial([0, 0, 1]), (-1, 1)) is Monotonicity.NEITHER
    assert is_monotonic(Polynomial([4.0])) is Monotonicity.NON_DECREASING
    cubic, _ = appendix_a_polynomials()
    assert is_monotonic(cubic, (-1, 1)) is Monotonicity.NON_INCREASING
    # Grid oracle for the same claim.
    t = np.linspace(-1, 1, 10_001)
    assert np.all(np.diff(cubic(t)) <= 1e-14)
    with pytest.raises(ValueError):
        is_monotonic(Polynomial([0, 1]), (1, 1))


# --- tight partitions -----------------------------------------------------

def assert_pieces_tight(p, partition):
    for a, b in partition.pieces:
        q = rescale_to_unit(p, a, b - a)
        h = hull_bounds(monomial_to_bernstein(q))
        assert h.tight
        lo, hi = sampled_range(p, a, b)
        assert h.lower >= lo - 1e-10 and h.upper <= hi + 1e-10


def test_linear_needs_one_piece():
    part = tight_partition(Polynomial([0, 1]))
    assert part.breakpoints == (0.0, 1.0)
    assert len(part) == 1


def test_appendix_fixtures_are_monotonic_but_not_tight():
    for p in appendix_a_polynomials():
        assert is_monotonic(p, (-1, 1)) is not Monotonicity.NEITHER
        assert not is_tight_on(p, -1.0, 2.0)


def test_appendix_fixtures_partition():
    cubic, octic = appendix_a_polynomials()
    part = tight_partition(cubic, (-1, 1))
    assert 2 <= len(part) <= 64
    assert_pieces_tight(cubic, part)
    part = tight_partition(octic, (-1, 1))
    assert 2 <= len(part) <= 64
    assert_pieces_tight(octic, part)


def test_partition_errors():
    with pytest.raises(NotMonotonicError):
        tight_partition(Polynomial([0, 0, 1]), (-1, 1))
    _, octic = appendix_a_polynomials()
    with pytest.raises(SubdivisionBudgetError):
        tight_partition(octic, (-1, 1), max_subdivisions=1)


@st.composite
def monotonic_polys(draw):
    """Antiderivatives of squared random polynomials (p' = q^2 >= 0)."""
    q = np.array(draw(st.lists(st.floats(-1, 1, allow_nan=False), min_size=1, max_size=5)))
    sq = np.convolve(q, q)
    p = np.concatenate([[draw(st.floats(-1, 1))], sq / np.arange(1, sq.size + 1)])
    sign = draw(st.sampled_from([1.0, -1.0]))
    return Polynomial(sign * p)


@settings(max_examples=200, deadline=None)
@given(monotonic_polys())
def test_partition_terminates_on_monotonic(p):
    part = tight_partition(p)
    assert len(part) <= 64
    assert part.breakpoints[0] == 0.0 and part.breakpoints[-1] == 1.0
    for a, b in part.pieces:
        assert is_tight_on(p, a, b - a)

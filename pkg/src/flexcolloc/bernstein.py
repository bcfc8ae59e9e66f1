"""Bernstein forms of univariate polynomials and their convex-hull bounds.

A polynomial on [0, 1] written in the Bernstein basis lies inside the range
of its coefficients. The bound is tight on a side when the extreme
coefficient is the first or the last one, because those equal p(0) and p(1).
Monotonic polynomials are not always tight, but splitting their interval
into finitely many pieces makes every piece tight; :func:`tight_partition`
finds such a split.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import solve_triangular


class NotMonotonicError(ValueError):
    pass


class SubdivisionBudgetError(RuntimeError):
    pass


def binomial(n: int, k: int) -> float:
    """C(n, k) as a float, via the multiplicative recurrence.

    The recurrence runs on Python integers (each partial product is itself a
    binomial coefficient, so the division is exact), which keeps the result
    exact for every n whose coefficients fit in a double.
    """
    if k < 0 or k > n:
        return 0.0
    k = min(k, n - k)
    c = 1
    for i in range(1, k + 1):
        c = c * (n - k + i) // i
    return float(c)


@dataclass(frozen=True)
class Polynomial:
    """Polynomial in monomial coefficients, lowest degree first."""

    coeffs: tuple

    def __init__(self, coeffs):
        coeffs = tuple(float(c) for c in np.ravel(coeffs))
        if not coeffs:
            raise ValueError("a polynomial needs at least one coefficient")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.full_like(t, self.coeffs[-1])
        for c in self.coeffs[-2::-1]:
            out = out * t + c
        return out

    def derivative(self) -> "Polynomial":
        if self.degree == 0:
            return Polynomial([0.0])
        return Polynomial([k * c for k, c in enumerate(self.coeffs) if k > 0])


@dataclass(frozen=True)
class BernsteinForm:
    coeffs: tuple

    def __init__(self, coeffs):
        coeffs = tuple(float(c) for c in np.ravel(coeffs))
        if not coeffs:
            raise ValueError("a Bernstein form needs at least one coefficient")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        n = self.degree
        basis = np.stack([bernstein_basis(n, j, t) for j in range(n + 1)])
        return np.tensordot(np.array(self.coeffs), basis, axes=1)


@dataclass(frozen=True)
class HullBounds:
    lower: float
    upper: float
    tight_lower: bool
    tight_upper: bool

    @property
    def tight(self) -> bool:
        return self.tight_lower and self.tight_upper


@dataclass(frozen=True)
class Partition:
    breakpoints: tuple

    @property
    def pieces(self) -> list:
        b = self.breakpoints
        return list(zip(b[:-1], b[1:]))

    def __len__(self) -> int:
        return len(self.breakpoints) - 1


class Monotonicity(enum.Enum):
    NON_DECREASING = "non-decreasing"
    NON_INCREASING = "non-increasing"
    NEITHER = "neither"


def bernstein_basis(n: int, j: int, t):
    """Vectorized b_{n,j}(t) = C(n, j) t^j (1 - t)^(n - j), no range checks."""
    t = np.asarray(t, dtype=float)
    return binomial(n, j) * t**j * (1.0 - t) ** (n - j)


def bernstein_basis_eval(n: int, j: int, t: float) -> float:
    """Evaluate the Bernstein basis polynomial b_{n,j} at ``t`` in [0, 1]."""
    if not 0 <= j <= n:
        raise ValueError(f"basis index {j} outside 0..{n}")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t = {t} outside [0, 1]")
    return float(bernstein_basis(n, j, t))


@lru_cache(maxsize=None)
def _bernstein_matrix(n: int) -> np.ndarray:
    B = np.zeros((n + 1, n + 1))
    for j in range(n + 1):
        for k in range(j + 1):
            B[j, k] = binomial(j, k) / binomial(n, k)
    B.setflags(write=False)
    return B


def bernstein_matrix(n: int) -> np.ndarray:
    """Lower-triangular B with beta = B @ alpha for degree ``n``."""
    return _bernstein_matrix(n)


def monomial_to_bernstein(p: Polynomial) -> BernsteinForm:
    return BernsteinForm(bernstein_matrix(p.degree) @ np.array(p.coeffs))


def bernstein_to_monomial(b: BernsteinForm) -> Polynomial:
    B = bernstein_matrix(b.degree)
    return Polynomial(solve_triangular(B, np.array(b.coeffs), lower=True))


def degree_elevate(b: BernsteinForm, target_degree: int) -> BernsteinForm:
    if target_degree < b.degree:
        raise ValueError(
            f"cannot elevate degree {b.degree} form to lower degree {target_degree}"
        )
    alpha = np.zeros(target_degree + 1)
    alpha[: b.degree + 1] = bernstein_to_monomial(b).coeffs
    return monomial_to_bernstein(Polynomial(alpha))


def _is_extreme(value: float, extreme: float, scale: float) -> bool:
    return abs(value - extreme) <= 1e-12 * scale


def hull_bounds(b: BernsteinForm) -> HullBounds:
    beta = np.array(b.coeffs)
    lo, hi = float(beta.min()), float(beta.max())
    scale = max(1.0, float(np.abs(beta).max()))
    ends = (beta[0], beta[-1])
    return HullBounds(
        lower=lo,
        upper=hi,
        tight_lower=_is_extreme(min(ends), lo, scale),
        tight_upper=_is_extreme(max(ends), hi, scale),
    )


def rescale_to_unit(p: Polynomial, a: float, h: float) -> Polynomial:
    """Return q with q(s) = p(a + h s), so [a, a + h] maps onto [0, 1]."""
    if not h > 0:
        raise ValueError(f"step h must be positive, got {h}")
    # Horner on polynomials in s: q <- q * (a + h s) + alpha_k.
    q = np.array([p.coeffs[-1]])
    lin = np.array([a, h])
    for c in p.coeffs[-2::-1]:
        q = np.convolve(q, lin)
        q[0] += c
    return Polynomial(q)


def _real_roots(p: Polynomial) -> np.ndarray:
    coeffs = np.array(p.coeffs, dtype=float)
    # Leading terms at round-off scale only contribute roots far outside any
    # interval of interest, and they overflow the companion matrix.
    scale = np.max(np.abs(coeffs), initial=0.0)
    keep = np.flatnonzero(np.abs(coeffs) > np.finfo(float).eps * scale)
    coeffs = coeffs[: keep[-1] + 1] if keep.size else coeffs[:0]
    if coeffs.size <= 1:
        return np.empty(0)
    # np.roots takes the companion-matrix eigenvalues (highest degree first).
    r = np.roots(coeffs[::-1])
    return np.sort(r[np.abs(r.imag) <= 1e-9 * np.maximum(1.0, np.abs(r))].real)


def is_monotonic(p: Polynomial, interval=(0.0, 1.0)) -> Monotonicity:
    """Classify the sign of p' on ``interval``.

    The derivative is sampled between consecutive real roots; values within
    ``1e-12`` of zero count for either direction. Constants report
    non-decreasing.
    """
    a, b = float(interval[0]), float(interval[1])
    if not b > a:
        raise ValueError(f"degenerate interval [{a}, {b}]")
    dp = p.derivative()
    roots = _real_roots(dp)
    cuts = np.concatenate([[a], roots[(roots > a) & (roots < b)], [b]])
    mids = 0.5 * (cuts[:-1] + cuts[1:])
    vals = dp(mids)
    if np.all(vals >= -1e-12):
        return Monotonicity.NON_DECREASING
    if np.all(vals <= 1e-12):
        return Monotonicity.NON_INCREASING
    return Monotonicity.NEITHER


def is_tight_on(p: Polynomial, a: float, h: float) -> bool:
    return hull_bounds(monomial_to_bernstein(rescale_to_unit(p, a, h))).tight


def tight_partition(p: Polynomial, interval=(0.0, 1.0), max_subdivisions: int = 64) -> Partition:
    """Split a monotonic polynomial's interval into tightly bounded pieces.

    Greedy left-to-right sweep: from the current left end, try the whole
    remaining interval and halve the step until the piece is tight.

    Raises
    ------
    NotMonotonicError
        If ``p`` is not monotonic on ``interval``.
    SubdivisionBudgetError
        If more than ``max_subdivisions`` pieces (or an exhausted halving
        sequence) would be needed.
    """
    ta, tb = float(interval[0]), float(interval[1])
    if is_monotonic(p, (ta, tb)) is Monotonicity.NEITHER:
        raise NotMonotonicError("tight_partition requires a monotonic polynomial")
    span = tb - ta
    breaks = [ta]
    left = ta
    while left < tb:
        if len(breaks) > max_subdivisions:
            raise SubdivisionBudgetError(
                f"more than {max_subdivisions} pieces needed on [{ta}, {tb}]"
            )
        h = tb - left
        while not is_tight_on(p, left, h):
            h *= 0.5
            if h < 1e-15 * span:
                raise SubdivisionBudgetError(f"step underflow at t = {left}")
        left = tb if h == tb - left else left + h
        breaks.append(left)
    if len(breaks) - 1 > max_subdivisions:
        raise SubdivisionBudgetError(f"more than {max_subdivisions} pieces needed")
    return Partition(tuple(breaks))

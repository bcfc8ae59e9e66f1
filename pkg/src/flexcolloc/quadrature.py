"""Gaussian node sets, barycentric interpolation and adaptive Gauss-Kronrod.

Node sets live on the reference interval [-1, 1]. Radau nodes include the
left endpoint; Lobatto nodes include both endpoints.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class QuadratureError(RuntimeError):
    """Raised when adaptive integration fails to reach the requested tolerance."""


@dataclass(frozen=True)
class NodeSet:
    kind: str
    nodes: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return len(self.nodes)


def legendre(n: int, x):
    """Evaluate the Legendre polynomial P_n and its derivative at ``x``.

    Uses the three-term recurrence. Returns ``(P_n(x), P_n'(x))``.
    """
    x = np.asarray(x, dtype=float)
    p_prev = np.ones_like(x)
    if n == 0:
        return p_prev, np.zeros_like(x)
    p = x.copy()
    dp_prev = np.zeros_like(x)
    dp = np.ones_like(x)
    for k in range(1, n):
        p_next = ((2 * k + 1) * x * p - k * p_prev) / (k + 1)
        dp_next = dp_prev + (2 * k + 1) * p
        p_prev, p = p, p_next
        dp_prev, dp = dp, dp_next
    return p, dp


def _jacobi_eigen_nodes(m: int, alpha: float, beta: float) -> np.ndarray:
    """Roots of the Jacobi polynomial P_m^(alpha, beta) from its Jacobi matrix."""
    if m == 0:
        return np.empty(0)
    k = np.arange(m, dtype=float)
    s = 2 * k + alpha + beta
    diag = (beta**2 - alpha**2) / (s * (s + 2))
    k = np.arange(1, m, dtype=float)
    s = 2 * k + alpha + beta
    off = np.sqrt(
        4 * k * (k + alpha) * (k + beta) * (k + alpha + beta) / (s**2 * (s + 1) * (s - 1))
    )
    jac = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    return np.sort(np.linalg.eigvalsh(jac))


def lgr_nodes(n: int) -> NodeSet:
    """Legendre-Gauss-Radau nodes and weights with the fixed node at -1.

    The nodes are the ``n`` roots of ``P_{n-1} + P_n``. The quadrature is
    exact for polynomials of degree ``2n - 2``.
    """
    if n < 1:
        raise ValueError(f"LGR node count must be >= 1, got {n}")
    if n == 1:
        return NodeSet("LGR", np.array([-1.0]), np.array([2.0]))
    interior = _jacobi_eigen_nodes(n - 1, 0.0, 1.0)
    for _ in range(2):
        p0, dp0 = legendre(n - 1, interior)
        p1, dp1 = legendre(n, interior)
        interior = interior - (p0 + p1) / (dp0 + dp1)
    nodes = np.concatenate([[-1.0], interior])
    p, _ = legendre(n - 1, nodes)
    weights = (1.0 - nodes) / (n**2 * p**2)
    weights[0] = 2.0 / n**2
    return NodeSet("LGR", nodes, weights)


def lgl_nodes(m: int) -> NodeSet:
    """Legendre-Gauss-Lobatto nodes and weights (``m`` points, both endpoints).

    Exact for polynomials of degree ``2m - 3``.
    """
    if m < 2:
        raise ValueError(f"LGL node count must be >= 2, got {m}")
    interior = _jacobi_eigen_nodes(m - 2, 1.0, 1.0)
    n = m - 1
    for _ in range(2):
        p, dp = legendre(n, interior)
        d2p = (2 * interior * dp - n * (n + 1) * p) / (1 - interior**2)
        interior = interior - dp / d2p
    nodes = np.concatenate([[-1.0], interior, [1.0]])
    p, _ = legendre(n, nodes)
    weights = 2.0 / (n * (n + 1) * p**2)
    return NodeSet("LGL", nodes, weights)


def barycentric_weights(points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    diff = points[:, None] - points[None, :]
    np.fill_diagonal(diff, 1.0)
    return 1.0 / np.prod(diff, axis=1)


def differentiation_matrix(points: np.ndarray, bary: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    diff = points[:, None] - points[None, :]
    np.fill_diagonal(diff, 1.0)
    D = (bary[None, :] / bary[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


@dataclass(frozen=True)
class InterpolationGrid:
    """Interpolation points on [-1, 1] with barycentric weights and D."""

    points: np.ndarray
    weights: np.ndarray = field(init=False)
    D: np.ndarray = field(init=False)

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        if np.any(np.diff(points) <= 0):
            raise ValueError("interpolation points must be strictly increasing")
        object.__setattr__(self, "points", points)
        bary = barycentric_weights(points)
        object.__setattr__(self, "weights", bary)
        object.__setattr__(self, "D", differentiation_matrix(points, bary))

    def __len__(self) -> int:
        return len(self.points)

    @property
    def degree(self) -> int:
        return len(self.points) - 1

    def matrix(self, tau) -> np.ndarray:
        """Matrix ``L`` with ``L @ values`` equal to the interpolant at ``tau``."""
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        diff = tau[:, None] - self.points[None, :]
        exact = diff == 0.0
        diff[exact] = 1.0
        L = self.weights[None, :] / diff
        L /= L.sum(axis=1, keepdims=True)
        rows = exact.any(axis=1)
        L[rows] = exact[rows].astype(float)
        return L


def state_grid(n: int) -> InterpolationGrid:
    """The ``n`` LGR points plus the endpoint +1 (degree-``n`` interpolation)."""
    return InterpolationGrid(np.concatenate([lgr_nodes(n).nodes, [1.0]]))


def input_grid(n: int) -> InterpolationGrid:
    """The ``n`` LGR points alone (degree ``n - 1`` interpolation)."""
    return InterpolationGrid(lgr_nodes(n).nodes)


def interpolate(grid: InterpolationGrid, values, tau):
    """Barycentric Lagrange evaluation of grid ``values`` at ``tau``.

    ``values`` has the grid points along its first axis; trailing axes are
    carried through. A scalar ``tau`` gives a result without the point axis.
    """
    values = np.asarray(values, dtype=float)
    if values.shape[0] != len(grid):
        raise ValueError(f"expected {len(grid)} values, got {values.shape[0]}")
    L = grid.matrix(tau)
    out = np.tensordot(L, values, axes=(1, 0))
    return out[0] if np.ndim(tau) == 0 else out


# Gauss-Kronrod 7-15 abscissae and weights on [-1, 1] (non-negative half).
_GK15_NODES = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_GK15_WEIGHTS = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_G7_WEIGHTS = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

GK15_NODES = np.concatenate([-_GK15_NODES[:-1], _GK15_NODES[::-1]])
GK15_WEIGHTS = np.concatenate([_GK15_WEIGHTS[:-1], _GK15_WEIGHTS[::-1]])
G7_WEIGHTS = np.zeros(15)
G7_WEIGHTS[1:14:2] = np.concatenate([_G7_WEIGHTS, _G7_WEIGHTS[-2::-1]])


def _gk15(f, a: float, b: float, vectorized: bool):
    half = 0.5 * (b - a)
    x = 0.5 * (a + b) + half * GK15_NODES
    if vectorized:
        fx = np.asarray(f(x), dtype=float)
    else:
        fx = np.array([f(xi) for xi in x], dtype=float)
    if not np.all(np.isfinite(fx)):
        raise QuadratureError(f"non-finite integrand on [{a}, {b}]")
    kronrod = half * (GK15_WEIGHTS @ fx)
    gauss = half * (G7_WEIGHTS @ fx)
    return kronrod, abs(kronrod - gauss)


def integrate_adaptive(
    f: Callable,
    a: float,
    b: float,
    rel_tol: float = 1e-10,
    abs_tol: float = 1e-12,
    max_splits: int = 10_000,
    vectorized: bool = False,
) -> tuple[float, float]:
    """Adaptive Gauss-Kronrod (7-15) integration of ``f`` over ``[a, b]``.

    The segment with the largest error estimate is bisected until the summed
    estimate falls below ``max(abs_tol, rel_tol * |value|)``.

    Parameters
    ----------
    f : callable
        Integrand. With ``vectorized=True`` it receives an array of 15
        abscissae per call.
    a, b : float
        Integration limits, ``a < b``.

    Returns
    -------
    value, error_estimate : float
    """
    if not a < b:
        raise ValueError(f"need a < b, got [{a}, {b}]")
    value, err = _gk15(f, a, b, vectorized)
    heap = [(-err, a, b, value)]
    total, total_err = value, err
    splits = 0
    while total_err > max(abs_tol, rel_tol * abs(total)):
        if splits >= max_splits:
            raise QuadratureError(
                f"no convergence after {max_splits} splits (estimate {total_err:.3e})"
            )
        neg_err, lo, hi, seg = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            raise QuadratureError("segment too small to bisect")
        v1, e1 = _gk15(f, lo, mid, vectorized)
        v2, e2 = _gk15(f, mid, hi, vectorized)
        heapq.heappush(heap, (-e1, lo, mid, v1))
        heapq.heappush(heap, (-e2, mid, hi, v2))
        splits += 1
        # Re-sum to avoid drift from repeated add/subtract.
        total = math.fsum(item[3] for item in heap)
        total_err = math.fsum(-item[0] for item in heap)
    return total, total_err

"""Radau collocation of dynamic optimization problems on flexible meshes.

Each sub-interval carries a degree-``n`` state interpolant on the LGR points
plus ``tau = 1`` and a degree ``n - 1`` input interpolant on the LGR points.
Interface states are shared between neighbouring intervals, so the state
trajectory is continuous by construction. Path bounds are enforced in one of
three ways: on the interpolation samples, on the Bernstein coefficients of
each interval polynomial (fixed mesh), or on the Bernstein coefficients with
the interior breakpoints as extra decision variables.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import autodiff as ad
from .bernstein import bernstein_matrix
from .nlp import INF, NlpProblem
from .quadrature import InterpolationGrid, input_grid, lgr_nodes, state_grid

MIN_LENGTH_FRACTION = 1e-3


class ConstraintMode(enum.Enum):
    SAMPLE_POINTS = "a"
    BERNSTEIN_FIXED = "b"
    BERNSTEIN_FLEXIBLE = "c"

    @classmethod
    def parse(cls, value) -> "ConstraintMode":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        for mode in cls:
            if key in (mode.value, mode.name.lower(), mode.name.lower().replace("_", "-")):
                return mode
        raise ValueError(f"unknown constraint mode {value!r}")


@dataclass(frozen=True)
class DopDefinition:
    """A dynamic optimization problem on a fixed horizon ``[t0, tf]``.

    Callbacks receive sequences indexed by component. In the assembled
    problem every component is an array over collocation points (possibly a
    :class:`~flexcolloc.autodiff.Dual`), so callbacks must use NumPy-style
    elementwise operations and return a sequence of components.

    - ``boundary_cost(x0, xf)`` -> scalar
    - ``running_cost(x, u, t)`` -> scalar per point
    - ``boundary_conditions(x0, xf)`` -> ``n_b`` components
    - ``dynamics(xdot, x, u, t)`` -> ``n_r`` residual components
    """

    n_x: int
    n_u: int
    t0: float
    tf: float
    running_cost: Callable
    dynamics: Callable
    boundary_conditions: Callable
    x_lower: np.ndarray
    x_upper: np.ndarray
    u_lower: np.ndarray
    u_upper: np.ndarray
    boundary_cost: Optional[Callable] = None
    x_initial_guess: Optional[np.ndarray] = None
    x_final_guess: Optional[np.ndarray] = None
    name: str = "dop"

    def __post_init__(self):
        for attr, size in (("x_lower", self.n_x), ("x_upper", self.n_x),
                           ("u_lower", self.n_u), ("u_upper", self.n_u)):
            arr = np.asarray(getattr(self, attr), dtype=float).reshape(-1)
            if arr.shape != (size,):
                raise ValueError(f"{attr} must have {size} entries, got {arr.shape}")
            object.__setattr__(self, attr, arr)
        if np.any(self.x_lower > self.x_upper) or np.any(self.u_lower > self.u_upper):
            raise ValueError("box lower bound exceeds upper bound")
        if not self.tf > self.t0:
            raise ValueError("horizon must satisfy t0 < tf")

    def boundary_cost_value(self, x0, xf):
        if self.boundary_cost is None:
            return 0.0
        return self.boundary_cost(x0, xf)


@dataclass(frozen=True)
class FlexibleMesh:
    """Nominal partition of ``[t0, tf]`` with per-interval flexibility."""

    nominal: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        nominal = np.asarray(self.nominal, dtype=float)
        phi = np.broadcast_to(np.asarray(self.phi, dtype=float), (len(nominal) - 1,)).copy()
        if len(nominal) < 2 or np.any(np.diff(nominal) <= 0):
            raise ValueError("nominal breakpoints must be strictly increasing")
        if np.any(phi < 0) or np.any(phi >= 1):
            raise ValueError("flexibility parameters must lie in [0, 1)")
        object.__setattr__(self, "nominal", nominal)
        object.__setattr__(self, "phi", phi)

    @classmethod
    def uniform(cls, t0: float, tf: float, n_h: int, phi=0.0) -> "FlexibleMesh":
        if n_h < 1:
            raise ValueError("need at least one sub-interval")
        return cls(np.linspace(t0, tf, n_h + 1), phi)

    @property
    def n_h(self) -> int:
        return len(self.nominal) - 1

    @property
    def t0(self) -> float:
        return float(self.nominal[0])

    @property
    def tf(self) -> float:
        return float(self.nominal[-1])

    def length_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Bounds on each interval length ``dt_i - dt_{i-1}``."""
        nominal_len = np.diff(self.nominal)
        span = self.tf - self.t0
        lo = (1 - self.phi) * nominal_len
        hi = self.phi * span + (1 - self.phi) * nominal_len
        lo = np.maximum(lo, MIN_LENGTH_FRACTION * span)
        return lo, hi

    def breakpoint_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Box on the interior breakpoints implied by the length bounds."""
        lo, hi = self.length_bounds()
        cum_lo, cum_hi = np.cumsum(lo)[:-1], np.cumsum(hi)[:-1]
        rev_lo = np.cumsum(lo[::-1])[::-1][1:]
        rev_hi = np.cumsum(hi[::-1])[::-1][1:]
        lower = np.maximum(self.t0 + cum_lo, self.tf - rev_hi)
        upper = np.minimum(self.t0 + cum_hi, self.tf - rev_lo)
        # Equal bounds (phi = 0) must stay exactly equal despite rounding.
        fixed = np.isclose(lower, upper, rtol=0, atol=1e-13 * (self.tf - self.t0))
        lower[fixed] = upper[fixed] = self.nominal[1:-1][fixed]
        return lower, upper

    def is_feasible(self, breaks, tol: float = 1e-9) -> bool:
        breaks = np.asarray(breaks, dtype=float)
        lengths = np.diff(breaks)
        lo, hi = self.length_bounds()
        return bool(np.all(lengths >= lo - tol) and np.all(lengths <= hi + tol))


def gamma(tau, t_prev, t_cur):
    """Affine map from ``tau`` in [-1, 1] to ``t`` in [t_prev, t_cur]."""
    if not np.all(ad.value(t_cur) > ad.value(t_prev)):
        raise ValueError("degenerate sub-interval")
    return 0.5 * (t_cur - t_prev) * tau + 0.5 * (t_prev + t_cur)


def bernstein_transfer_matrix(grid: InterpolationGrid) -> np.ndarray:
    """Matrix ``C`` mapping interpolation values to Bernstein coefficients.

    ``C = B V^{-1}`` with ``V`` the monomial Vandermonde matrix of the grid
    points rescaled to [0, 1].
    """
    s = 0.5 * np.asarray(grid.points) + 0.5
    V = np.vander(s, len(s), increasing=True)
    if np.linalg.cond(V) > 1e14:
        raise np.linalg.LinAlgError("Vandermonde matrix is numerically singular")
    return bernstein_matrix(len(s) - 1) @ np.linalg.inv(V)


@dataclass(frozen=True)
class DecisionLayout:
    """Flat positions of states, inputs and breakpoints in the NLP vector.

    ``state_index[i, j, k]`` is the position of component ``k`` of the
    state at point ``j`` of interval ``i``; the last point of interval ``i``
    aliases the first point of interval ``i + 1``.
    """

    n_h: int
    n: int
    n_x: int
    n_u: int
    flexible: bool
    state_index: np.ndarray = field(init=False, repr=False)
    input_index: np.ndarray = field(init=False, repr=False)
    mesh_index: np.ndarray = field(init=False, repr=False)
    size: int = field(init=False)

    def __post_init__(self):
        n_h, n, n_x, n_u = self.n_h, self.n, self.n_x, self.n_u
        node = np.arange(n_h)[:, None] * n + np.arange(n + 1)[None, :]
        state = node[:, :, None] * n_x + np.arange(n_x)[None, None, :]
        n_state = (n_h * n + 1) * n_x
        inp = n_state + (np.arange(n_h)[:, None, None] * n + np.arange(n)[None, :, None]) * n_u \
            + np.arange(n_u)[None, None, :]
        n_input = n_h * n * n_u
        n_mesh = n_h - 1 if self.flexible else 0
        mesh = n_state + n_input + np.arange(n_mesh)
        object.__setattr__(self, "state_index", state)
        object.__setattr__(self, "input_index", inp)
        object.__setattr__(self, "mesh_index", mesh)
        object.__setattr__(self, "size", n_state + n_input + n_mesh)

    @property
    def n_state_vars(self) -> int:
        return (self.n_h * self.n + 1) * self.n_x

    @property
    def n_input_vars(self) -> int:
        return self.n_h * self.n * self.n_u

    @property
    def n_mesh_vars(self) -> int:
        return len(self.mesh_index)

    def pack(self, states, inputs, breaks=None) -> np.ndarray:
        """Inverse of unpacking: ``states`` (n_h, n+1, n_x), ``inputs`` (n_h, n, n_u)."""
        z = np.zeros(self.size)
        z[self.state_index] = states
        z[self.input_index] = inputs
        if self.flexible and breaks is not None:
            z[self.mesh_index] = np.asarray(breaks)[1:-1]
        return z


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-polynomial state and input trajectories."""

    breaks: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    n: int

    @property
    def n_h(self) -> int:
        return len(self.breaks) - 1

    @property
    def n_x(self) -> int:
        return self.states.shape[-1]

    @property
    def n_u(self) -> int:
        return self.inputs.shape[-1]

    @property
    def t0(self) -> float:
        return float(self.breaks[0])

    @property
    def tf(self) -> float:
        return float(self.breaks[-1])

    def _grids(self):
        return _grids(self.n)

    def to_tau(self, i: int, t):
        a, b = self.breaks[i], self.breaks[i + 1]
        return (2.0 * np.asarray(t, dtype=float) - (a + b)) / (b - a)

    def interval_state(self, i: int, t) -> np.ndarray:
        """State of interval ``i``'s polynomial at ``t``; shape (len(t), n_x)."""
        sg, _, _ = self._grids()
        return sg.matrix(self.to_tau(i, t)) @ self.states[i]

    def interval_input(self, i: int, t) -> np.ndarray:
        _, ig, _ = self._grids()
        return ig.matrix(self.to_tau(i, t)) @ self.inputs[i]

    def interval_state_derivative(self, i: int, t) -> np.ndarray:
        sg, _, _ = self._grids()
        scale = 2.0 / (self.breaks[i + 1] - self.breaks[i])
        return sg.matrix(self.to_tau(i, t)) @ (sg.D @ self.states[i]) * scale

    def locate(self, t) -> np.ndarray:
        """Interval index of each time; breakpoints belong to the right."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.searchsorted(self.breaks, t, side="right") - 1
        return np.clip(idx, 0, self.n_h - 1)

    def _piecewise(self, fn, t, width):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((t_arr.size, width))
        idx = self.locate(t_arr)
        for i in np.unique(idx):
            mask = idx == i
            out[mask] = fn(i, t_arr[mask])
        return out[0] if np.ndim(t) == 0 else out

    def state(self, t):
        return self._piecewise(self.interval_state, t, self.n_x)

    def input(self, t):
        return self._piecewise(self.interval_input, t, self.n_u)

    def state_derivative(self, t):
        return self._piecewise(self.interval_state_derivative, t, self.n_x)

    def samples(self, per_interval: int = 200) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Dense samples ``(t, x, u)`` with ``per_interval`` points per interval."""
        ts, xs, us = [], [], []
        for i in range(self.n_h):
            a, b = self.breaks[i], self.breaks[i + 1]
            last = i == self.n_h - 1
            t = np.linspace(a, b, per_interval, endpoint=last) if last else \
                a + (b - a) * np.arange(per_interval) / per_interval
            ts.append(t)
            xs.append(self.interval_state(i, t))
            us.append(self.interval_input(i, t))
        return np.concatenate(ts), np.vstack(xs), np.vstack(us)

    def to_dict(self) -> dict:
        return {
            "degree": self.n,
            "breaks": self.breaks.tolist(),
            "states": self.states.tolist(),
            "inputs": self.inputs.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Trajectory":
        return cls(
            breaks=np.asarray(data["breaks"], dtype=float),
            states=np.asarray(data["states"], dtype=float),
            inputs=np.asarray(data["inputs"], dtype=float),
            n=int(data["degree"]),
        )


_GRID_CACHE: dict = {}


def _grids(n: int):
    """State grid, input grid and LGR quadrature weights for degree ``n``."""
    if n not in _GRID_CACHE:
        _GRID_CACHE[n] = (state_grid(n), input_grid(n), lgr_nodes(n).weights)
    return _GRID_CACHE[n]


@dataclass
class TranscribedProblem(NlpProblem):
    """The discretized NLP together with what is needed to decode it."""

    dop: Optional[DopDefinition] = None
    mesh: Optional[FlexibleMesh] = None
    mode: ConstraintMode = ConstraintMode.BERNSTEIN_FIXED
    layout: Optional[DecisionLayout] = None
    degree: int = 1

    def trajectory(self, z) -> Trajectory:
        return extract_trajectory(self.layout, z, self.mesh)

    def breakpoints(self, z) -> np.ndarray:
        return _breaks(self.layout, z, self.mesh)

    def initial_guess(self, breaks=None, warm: Optional[Trajectory] = None) -> np.ndarray:
        """Starting point on ``breaks``, optionally sampled from ``warm``."""
        return _initial_guess(self.dop, self.layout, self.mesh, breaks, warm)


def _breaks(layout: DecisionLayout, z, mesh: FlexibleMesh):
    if layout.flexible:
        return ad.concatenate([[mesh.t0], z[layout.mesh_index], [mesh.tf]])
    return mesh.nominal


def extract_trajectory(layout: DecisionLayout, z, mesh: FlexibleMesh) -> Trajectory:
    z = np.asarray(z, dtype=float)
    if z.shape != (layout.size,):
        raise ValueError(f"solution has {z.size} entries, layout expects {layout.size}")
    return Trajectory(
        breaks=np.asarray(_breaks(layout, z, mesh), dtype=float),
        states=z[layout.state_index],
        inputs=z[layout.input_index],
        n=layout.n,
    )


def _components(arr, count):
    return [arr[..., k] for k in range(count)]


def _as_flat(parts, nvars):
    pieces = []
    for p in parts:
        if isinstance(p, ad.Dual):
            pieces.append(p.reshape(-1))
        else:
            pieces.append(np.ravel(np.asarray(p, dtype=float)))
    return ad.concatenate(pieces, nvars=nvars) if pieces else np.empty(0)


def assemble(dop: DopDefinition, n: int, mesh: FlexibleMesh, mode) -> TranscribedProblem:
    """Transcribe ``dop`` into an NLP with degree-``n`` Radau collocation."""
    mode = ConstraintMode.parse(mode)
    if n < 1:
        raise ValueError("collocation degree must be >= 1")
    if not (np.isclose(mesh.t0, dop.t0) and np.isclose(mesh.tf, dop.tf)):
        raise ValueError("mesh does not span the problem horizon")
    if mode is not ConstraintMode.BERNSTEIN_FLEXIBLE:
        mesh = replace(mesh, phi=np.zeros(mesh.n_h))
    flexible = mode is ConstraintMode.BERNSTEIN_FLEXIBLE and mesh.n_h > 1
    layout = DecisionLayout(mesh.n_h, n, dop.n_x, dop.n_u, flexible)
    sg, ig, w = _grids(n)
    tau_c = sg.points[:n]
    D_c = sg.D[:n]
    n_x, n_u = dop.n_x, dop.n_u
    nv = layout.size

    def unpack(z):
        X = z[layout.state_index]
        U = z[layout.input_index]
        breaks = _breaks(layout, z, mesh)
        a, b = breaks[:-1], breaks[1:]
        h = b - a
        return X, U, a, b, h

    def objective(z):
        X, U, a, b, h = unpack(z)
        x0 = _components(X[0, 0], n_x)
        xf = _components(X[-1, n], n_x)
        t = (0.5 * h)[..., None] * tau_c[None, :] + (0.5 * (a + b))[..., None]
        Xc = X[:, :n, :]
        ell = dop.running_cost(_components(Xc, n_x), _components(U, n_u), t)
        ell = ell * np.ones((mesh.n_h, n)) if not isinstance(ell, ad.Dual) else ell
        quad = (ell @ w) * (0.5 * h)
        return dop.boundary_cost_value(x0, xf) + quad.sum()

    def eq_constraints(z):
        X, U, a, b, h = unpack(z)
        x0 = _components(X[0, 0], n_x)
        xf = _components(X[-1, n], n_x)
        bc = dop.boundary_conditions(x0, xf)
        Xdot = D_c @ X
        Xdot = Xdot * (2.0 / h)[:, None, None]
        t = (0.5 * h)[..., None] * tau_c[None, :] + (0.5 * (a + b))[..., None]
        Xc = X[:, :n, :]
        res = dop.dynamics(_components(Xdot, n_x), _components(Xc, n_x),
                           _components(U, n_u), t)
        res = [r if isinstance(r, ad.Dual) else np.broadcast_to(r, (mesh.n_h, n)) for r in res]
        return _as_flat(list(bc) + list(res), nv)

    lower = np.full(nv, -np.inf)
    upper = np.full(nv, np.inf)
    ineq_parts = []  # (kind, interval, component) descriptors for bookkeeping
    ineq_lo, ineq_up = [], []
    x_bounded = np.flatnonzero((np.abs(dop.x_lower) < INF) | (np.abs(dop.x_upper) < INF))
    u_bounded = np.flatnonzero((np.abs(dop.u_lower) < INF) | (np.abs(dop.u_upper) < INF))
    Cx = bernstein_transfer_matrix(sg)
    Cu = bernstein_transfer_matrix(ig)

    if mode is ConstraintMode.SAMPLE_POINTS:
        lower[layout.state_index] = np.broadcast_to(dop.x_lower, layout.state_index.shape)
        upper[layout.state_index] = np.broadcast_to(dop.x_upper, layout.state_index.shape)
        lower[layout.input_index] = np.broadcast_to(dop.u_lower, layout.input_index.shape)
        upper[layout.input_index] = np.broadcast_to(dop.u_upper, layout.input_index.shape)
    else:
        # Endpoint Bernstein coefficients equal the samples at tau = -1 and
        # tau = 1, so those rows become plain variable bounds. Keeping them
        # as general rows duplicates boundary conditions that sit on the box
        # edge and leaves the active constraints linearly dependent.
        x_rows = _interior_rows(sg)
        u_rows = _interior_rows(ig)
        x_ends = [j for j in (0, n) if j not in x_rows]
        u_ends = [j for j in (0, n - 1) if j not in u_rows]
        for k in x_bounded:
            idx = layout.state_index[:, x_ends, k]
            lower[idx] = np.maximum(lower[idx], dop.x_lower[k])
            upper[idx] = np.minimum(upper[idx], dop.x_upper[k])
        for k in u_bounded:
            idx = layout.input_index[:, u_ends, k]
            lower[idx] = np.maximum(lower[idx], dop.u_lower[k])
            upper[idx] = np.minimum(upper[idx], dop.u_upper[k])
        for i in range(mesh.n_h):
            for k in x_bounded:
                if x_rows.size:
                    ineq_parts.append(("x", i, k))
                    ineq_lo.append(np.full(x_rows.size, dop.x_lower[k]))
                    ineq_up.append(np.full(x_rows.size, dop.x_upper[k]))
            for k in u_bounded:
                if u_rows.size:
                    ineq_parts.append(("u", i, k))
                    ineq_lo.append(np.full(u_rows.size, dop.u_lower[k]))
                    ineq_up.append(np.full(u_rows.size, dop.u_upper[k]))

    length_rows = np.empty(0, dtype=int)
    if flexible:
        blo, bup = mesh.breakpoint_bounds()
        lower[layout.mesh_index] = blo
        upper[layout.mesh_index] = bup
        # A length between two pinned breakpoints is a constant; keeping the
        # row would duplicate the bounds (phi = 0 recovers the fixed mesh).
        pinned = np.concatenate([[True], blo == bup, [True]])
        length_rows = np.flatnonzero(~(pinned[:-1] & pinned[1:]))
        if length_rows.size:
            lo_len, hi_len = mesh.length_bounds()
            ineq_lo.append(lo_len[length_rows])
            ineq_up.append(hi_len[length_rows])

    n_bern = len(ineq_parts)

    def ineq_constraints(z):
        X, U, a, b, h = unpack(z)
        rows = []
        if n_bern:
            BX = Cx[x_rows] @ X
            BU = Cu[u_rows] @ U
            for kind, i, k in ineq_parts:
                rows.append(BX[i, :, k] if kind == "x" else BU[i, :, k])
        if length_rows.size:
            rows.append(h[length_rows])
        return _as_flat(rows, nv)

    has_ineq = bool(ineq_lo)
    z0 = _initial_guess(dop, layout, mesh)
    # Sample-point bounds apply directly to the guess; it is clipped in solve().
    return TranscribedProblem(
        n=nv,
        objective=objective,
        z0=z0,
        eq_constraints=eq_constraints,
        ineq_constraints=ineq_constraints if has_ineq else None,
        ineq_lower=np.concatenate(ineq_lo) if has_ineq else np.empty(0),
        ineq_upper=np.concatenate(ineq_up) if has_ineq else np.empty(0),
        lower=lower,
        upper=upper,
        dop=dop,
        mesh=mesh,
        mode=mode,
        layout=layout,
        degree=n,
    )


def _interior_rows(grid: InterpolationGrid) -> np.ndarray:
    """Bernstein rows that are not a single endpoint sample of ``grid``."""
    m = grid.points.size
    rows = np.arange(m)
    keep = np.ones(m, dtype=bool)
    if grid.points[0] == -1.0:
        keep[0] = False
    if grid.points[-1] == 1.0:
        keep[-1] = False
    return rows[keep]


def _initial_guess(
    dop: DopDefinition,
    layout: DecisionLayout,
    mesh: FlexibleMesh,
    breaks=None,
    warm: Optional[Trajectory] = None,
) -> np.ndarray:
    """Starting point on ``breaks`` (nominal by default).

    Without ``warm`` the states linearly interpolate the known boundary
    states (zeros elsewhere) and the inputs are zero. With ``warm`` both are
    sampled from that trajectory.
    """
    sg, ig, _ = _grids(layout.n)
    breaks = mesh.nominal if breaks is None else np.asarray(breaks, dtype=float)
    mid, half = 0.5 * (breaks[:-1] + breaks[1:]), 0.5 * np.diff(breaks)
    t_x = half[:, None] * sg.points[None, :] + mid[:, None]
    t_u = half[:, None] * ig.points[None, :] + mid[:, None]
    if warm is not None:
        # Evaluate interval by interval so shared endpoints take the value
        # of the interval that ends there, matching the aliasing.
        states = np.stack([warm.state(t_x[i]) for i in range(layout.n_h)])
        states[1:, 0] = states[:-1, -1]
        inputs = np.stack([warm.input(t_u[i]) for i in range(layout.n_h)])
        return layout.pack(states, inputs, breaks)
    x_a = np.zeros(dop.n_x) if dop.x_initial_guess is None else np.asarray(dop.x_initial_guess, float)
    x_b = np.zeros(dop.n_x) if dop.x_final_guess is None else np.asarray(dop.x_final_guess, float)
    known = np.isfinite(x_a) & np.isfinite(x_b)
    x_a, x_b = np.where(known, x_a, 0.0), np.where(known, x_b, 0.0)
    s = (t_x - dop.t0) / (dop.tf - dop.t0)
    states = x_a + s[..., None] * (x_b - x_a)
    inputs = np.zeros((layout.n_h, layout.n, dop.n_u))
    return layout.pack(states, inputs, breaks)


def reduce_path_constraint(
    dop: DopDefinition,
    g: Callable,
    g_lower: Sequence[float],
    g_upper: Sequence[float],
) -> DopDefinition:
    """Rewrite ``g_lower <= g(xdot, x, u, t) <= g_upper`` with slack inputs.

    The returned problem has ``len(g_lower)`` extra inputs ``s`` bounded by
    ``[g_lower, g_upper]`` and extra dynamics rows ``g - s = 0``.
    """
    g_lower = np.atleast_1d(np.asarray(g_lower, dtype=float))
    g_upper = np.atleast_1d(np.asarray(g_upper, dtype=float))
    if g_lower.shape != g_upper.shape:
        raise ValueError("g_lower and g_upper differ in size")
    if np.any(g_lower > g_upper):
        raise ValueError("g_lower exceeds g_upper")
    n_g = g_lower.size
    n_u = dop.n_u
    g_lower = np.where(np.isfinite(g_lower), g_lower, -INF)
    g_upper = np.where(np.isfinite(g_upper), g_upper, INF)

    def running_cost(x, u, t):
        return dop.running_cost(x, u[:n_u], t)

    def dynamics(xdot, x, u, t):
        base = list(dop.dynamics(xdot, x, u[:n_u], t))
        gv = list(g(xdot, x, u[:n_u], t))
        if len(gv) != n_g:
            raise ValueError(f"g returned {len(gv)} components, expected {n_g}")
        return base + [gk - sk for gk, sk in zip(gv, u[n_u:])]

    return replace(
        dop,
        n_u=n_u + n_g,
        running_cost=running_cost,
        dynamics=dynamics,
        u_lower=np.concatenate([dop.u_lower, g_lower]),
        u_upper=np.concatenate([dop.u_upper, g_upper]),
        name=f"{dop.name}+slack",
    )

"""Benchmark problems and fixture polynomials."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.optimize import lsq_linear, minimize

from . import autodiff as ad
from .bernstein import Polynomial
from .assessment import assess
from .nlp import INF, NlpProblem, solve
from .quadrature import InterpolationGrid, integrate_adaptive, lgl_nodes, state_grid
from .transcription import (
    ConstraintMode,
    DopDefinition,
    FlexibleMesh,
    Trajectory,
    assemble,
    bernstein_transfer_matrix,
)

# Bryson-Denham: double integrator bouncing off a wall at r = bound.
BD_BOUND = 0.2

# Cart-pole swing-up constants from the standard trajectory-optimization
# tutorial example. The cart position box is replaced by [0, 1].
CARTPOLE = {
    "cart_mass": 1.0,        # kg
    "pole_mass": 0.3,        # kg
    "pole_length": 0.5,      # m
    "gravity": 9.81,         # m/s^2
    "horizon": 2.0,          # s
    "distance": 1.0,         # m, final cart position
    "max_force": 20.0,       # N
    "position_lower": 0.0,   # m
    "position_upper": 1.0,   # m
}


def bryson_denham(bound: float = BD_BOUND) -> DopDefinition:
    """Minimize 1/2 int u^2 with r'' = u, r(0) = r(1) = 0, v(0) = 1, v(1) = -1, r <= bound."""

    def running_cost(x, u, t):
        return 0.5 * u[0] * u[0]

    def dynamics(xdot, x, u, t):
        return [xdot[0] - x[1], xdot[1] - u[0]]

    def boundary_conditions(x0, xf):
        return [x0[0], x0[1] - 1.0, xf[0], xf[1] + 1.0]

    return DopDefinition(
        n_x=2, n_u=1, t0=0.0, tf=1.0,
        running_cost=running_cost,
        dynamics=dynamics,
        boundary_conditions=boundary_conditions,
        x_lower=[-INF, -INF], x_upper=[bound, INF],
        u_lower=[-INF], u_upper=[INF],
        x_initial_guess=np.array([0.0, 1.0]),
        x_final_guess=np.array([0.0, -1.0]),
        name="bryson-denham",
    )


def bryson_denham_cost(bound: float = BD_BOUND) -> float:
    """Closed-form optimal cost of :func:`bryson_denham`.

    Three regimes: unconstrained (bound >= 1/4, cost 2), a single touch point
    at t = 1/2 (1/6 <= bound < 1/4) and a boundary arc (bound < 1/6, cost
    4 / (9 bound)). The touch-point cost follows from the cubic on [0, 1/2]
    with r(0) = 0, v(0) = 1, r(1/2) = bound, v(1/2) = 0.
    """
    if bound >= 0.25:
        return 2.0
    if bound >= 1.0 / 6.0:
        b = 4.0 - 16.0 * bound
        a = -4.0 + 12.0 * bound
        u0, u1 = 2.0 * a, 2.0 * a + 3.0 * b
        # 1/2 int_0^1 u^2 = int_0^{1/2} u^2 for the symmetric solution.
        return 0.5 * (u0 * u0 + u0 * u1 + u1 * u1) / 3.0
    return 4.0 / (9.0 * bound)


def bryson_denham_solution(bound: float = BD_BOUND) -> Trajectory:
    """Closed-form optimal trajectory of :func:`bryson_denham` as a piecewise cubic.

    The optimal position is a cubic on each piece of ``[0, 1]`` (one piece,
    two pieces split at the touch point, or three with a boundary arc), so
    it is stored exactly as a degree-3 :class:`Trajectory`.
    """
    if bound <= 0:
        raise ValueError("bound must be positive")
    if bound >= 0.25:
        breaks = np.array([0.0, 1.0])
        pieces = [lambda t: (t - t * t, 1 - 2 * t, -2.0 + 0 * t)]
    elif bound >= 1.0 / 6.0:
        a, b = -4.0 + 12.0 * bound, 4.0 - 16.0 * bound

        def left(t):
            return t + a * t**2 + b * t**3, 1 + 2 * a * t + 3 * b * t**2, 2 * a + 6 * b * t

        def right(t):
            r, v, u = left(1.0 - t)
            return r, -v, u

        breaks = np.array([0.0, 0.5, 1.0])
        pieces = [left, right]
    else:
        e = 3.0 * bound

        def left(t):
            s = 1 - t / e
            return bound * (1 - s**3), s * s, -2.0 / e * s

        def right(t):
            r, v, u = left(1.0 - t)
            return r, -v, u

        def arc(t):
            return bound + 0 * t, 0 * t, 0 * t

        breaks = np.array([0.0, e, 1.0 - e, 1.0])
        pieces = [left, arc, right]
    sg = state_grid(3)
    ig = InterpolationGrid(sg.points[:3])
    states, inputs = [], []
    for (lo, hi), fn in zip(zip(breaks[:-1], breaks[1:]), pieces):
        r, v, _ = fn(0.5 * (hi - lo) * sg.points + 0.5 * (hi + lo))
        _, _, u = fn(0.5 * (hi - lo) * ig.points + 0.5 * (hi + lo))
        states.append(np.stack([r, v], axis=1))
        inputs.append(np.asarray(u)[:, None])
    return Trajectory(breaks=breaks, states=np.array(states), inputs=np.array(inputs), n=3)


def bryson_denham_reference(
    n: int = 12, n_h: int = 16, phi: float = 0.5, bound: float = BD_BOUND, tol: float = 1e-10,
) -> float:
    """Cost of a fine-mesh flexible-Bernstein solve of :func:`bryson_denham`.

    The solve starts from :func:`bryson_denham_solution` sampled on the
    nominal mesh, which keeps it to a handful of SQP iterations even for
    large meshes. The cost is assessed on the continuous trajectory.
    """
    dop = bryson_denham(bound)
    mesh = FlexibleMesh.uniform(dop.t0, dop.tf, n_h, phi)
    problem = assemble(dop, n, mesh, ConstraintMode.BERNSTEIN_FLEXIBLE)
    z0 = problem.initial_guess(warm=bryson_denham_solution(bound))
    sol = solve(problem, tol=tol, max_iter=500, z0=z0)
    if not sol.converged:
        raise RuntimeError(f"reference solve failed: {sol.message}")
    return assess(problem.trajectory(sol.z), dop).cost


def cart_pole(constants: Optional[dict] = None) -> DopDefinition:
    """Cart-pole swing-up from hanging rest to inverted rest, cost int u^2.

    States are (q1, q2, q1', q2'): cart position, pole angle (0 hanging
    down), and their rates.
    """
    c = dict(CARTPOLE if constants is None else constants)
    m1, m2, ell, g = c["cart_mass"], c["pole_mass"], c["pole_length"], c["gravity"]
    T, d = c["horizon"], c["distance"]

    def accelerations(x, u):
        q2, dq2 = x[1], x[3]
        s, co = np.sin(q2), np.cos(q2)
        f = u[0]
        q1dd = (ell * m2 * s * dq2 * dq2 + f + m2 * g * co * s) / (m1 + m2 * (1.0 - co * co))
        q2dd = -(ell * m2 * co * s * dq2 * dq2 + f * co + (m1 + m2) * g * s) / (
            ell * m1 + ell * m2 * (1.0 - co * co)
        )
        return q1dd, q2dd

    def running_cost(x, u, t):
        return u[0] * u[0]

    def dynamics(xdot, x, u, t):
        q1dd, q2dd = accelerations(x, u)
        return [xdot[0] - x[2], xdot[1] - x[3], xdot[2] - q1dd, xdot[3] - q2dd]

    def boundary_conditions(x0, xf):
        return [x0[0], x0[1], x0[2], x0[3],
                xf[0] - d, xf[1] - np.pi, xf[2], xf[3]]

    return DopDefinition(
        n_x=4, n_u=1, t0=0.0, tf=T,
        running_cost=running_cost,
        dynamics=dynamics,
        boundary_conditions=boundary_conditions,
        x_lower=[c["position_lower"], -INF, -INF, -INF],
        x_upper=[c["position_upper"], INF, INF, INF],
        u_lower=[-c["max_force"]], u_upper=[c["max_force"]],
        x_initial_guess=np.zeros(4),
        x_final_guess=np.array([d, np.pi, 0.0, 0.0]),
        name="cart-pole",
    )


def cart_pole_energy(x, constants: Optional[dict] = None):
    """Total mechanical energy (zero at hanging rest)."""
    c = CARTPOLE if constants is None else constants
    m1, m2, ell, g = c["cart_mass"], c["pole_mass"], c["pole_length"], c["gravity"]
    q2, dq1, dq2 = x[..., 1], x[..., 2], x[..., 3]
    vx = dq1 + ell * dq2 * np.cos(q2)
    vy = ell * dq2 * np.sin(q2)
    kinetic = 0.5 * m1 * dq1**2 + 0.5 * m2 * (vx**2 + vy**2)
    potential = -m2 * g * ell * np.cos(q2)
    return kinetic + potential + m2 * g * ell


def appendix_a_polynomials() -> tuple[Polynomial, Polynomial]:
    """Monotonic polynomials on [-1, 1] whose full-interval hull is not tight.

    Each interpolates the listed values on the Radau state grid of matching
    size (LGR points plus tau = 1).
    """
    data = (
        [1.0, 0.4, -0.2, -1.0],
        [-1.0, -0.8, -0.6, -0.4, -0.2, 0.0, 0.2, 0.8, 1.0],
    )
    polys = []
    for values in data:
        points = state_grid(len(values) - 1).points
        V = np.vander(points, len(values), increasing=True)
        polys.append(Polynomial(np.linalg.solve(V, values)))
    return polys[0], polys[1]


APPENDIX_A_DATA = (
    (1.0, 0.4, -0.2, -1.0),
    (-1.0, -0.8, -0.6, -0.4, -0.2, 0.0, 0.2, 0.8, 1.0),
)


@dataclass
class SineApproxProblem(NlpProblem):
    """Piecewise least-squares fit of sin(2 pi t) on [0, 1].

    Decision vector: the values of each piece at its ``n_p + 1`` Lobatto
    points (interval-major), followed by the interior breakpoints when the
    mesh is flexible.
    """

    degree: int = 1
    n_h: int = 3
    flexible: bool = False
    mesh: Optional[FlexibleMesh] = None
    constrained: bool = True
    bound_mode: str = "bernstein"

    def breakpoints(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.flexible:
            return np.concatenate([[0.0], z[-(self.n_h - 1):], [1.0]])
        return self.mesh.nominal.copy()

    def values(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return z[: self.n_h * (self.degree + 1)].reshape(self.n_h, self.degree + 1)

    def curve(self, z) -> Callable:
        grid = InterpolationGrid(lgl_nodes(self.degree + 1).nodes)
        breaks = self.breakpoints(z)
        vals = self.values(z)

        def y(t):
            t = np.atleast_1d(np.asarray(t, dtype=float))
            idx = np.clip(np.searchsorted(breaks, t, side="right") - 1, 0, self.n_h - 1)
            out = np.empty_like(t)
            for i in range(self.n_h):
                mask = idx == i
                if mask.any():
                    a, b = breaks[i], breaks[i + 1]
                    out[mask] = grid.matrix((2 * t[mask] - a - b) / (b - a)) @ vals[i]
            return out

        return y

    def l2_error(self, z, rel_tol: float = 1e-10, abs_tol: float = 1e-15) -> float:
        """L2 norm of sin(2 pi t) - y(t), integrated piece by piece."""
        grid = InterpolationGrid(lgl_nodes(self.degree + 1).nodes)
        breaks = self.breakpoints(z)
        vals = self.values(z)
        total = 0.0
        for i in range(self.n_h):
            a, b = breaks[i], breaks[i + 1]

            def err2(t, a=a, b=b, v=vals[i]):
                y = grid.matrix((2 * t - a - b) / (b - a)) @ v
                return (np.sin(2 * np.pi * t) - y) ** 2

            val, _ = integrate_adaptive(err2, a, b, rel_tol, abs_tol, vectorized=True)
            total += val
        return float(np.sqrt(total))

    def fit_piece(self, a: float, b: float) -> tuple[np.ndarray, float]:
        """Exact minimizer of the discretized objective on one piece [a, b].

        With the breakpoints fixed the pieces decouple and each one is a
        linear least-squares problem. Bernstein bounds are simple bounds on
        the coefficients beta = C y, so bounded-variable least squares solves
        it to machine precision. Returns the interpolation values and the
        piece's share of the objective.
        """
        L, nodes, weights, C = _sine_operators(self.degree)
        sw = np.sqrt(weights * 0.5 * (b - a))
        target = sw * np.sin(2 * np.pi * (0.5 * (b - a) * nodes + 0.5 * (a + b)))
        A = sw[:, None] * L
        if not self.constrained:
            y = np.linalg.lstsq(A, target, rcond=None)[0]
        elif self.bound_mode == "samples":
            y = lsq_linear(A, target, bounds=(-1.0, 1.0), method="bvls", tol=1e-15).x
        else:
            Cinv = np.linalg.inv(C)
            beta = lsq_linear(A @ Cinv, target, bounds=(-1.0, 1.0), method="bvls", tol=1e-15).x
            y = Cinv @ beta
        r = target - A @ y
        return y, float(r @ r)

    def fit_breaks(self, breaks) -> tuple[np.ndarray, float]:
        """Decision vector and objective for fixed breakpoints."""
        breaks = np.asarray(breaks, dtype=float)
        vals, cost = [], 0.0
        for a, b in zip(breaks[:-1], breaks[1:]):
            y, c = self.fit_piece(a, b)
            vals.append(y)
            cost += c
        z = np.concatenate(vals + ([breaks[1:-1]] if self.flexible else []))
        return z, cost

    def fit(self, grid: int = 25) -> np.ndarray:
        """Globally fit the approximation by variable projection.

        The inner problem (values for fixed breakpoints) is solved exactly
        by :meth:`fit_piece`. On a flexible mesh the interior breakpoints
        are then searched: a ``grid`` x ``grid`` scan of the admissible box
        followed by Nelder-Mead from the three best scan points, with
        infeasible meshes rejected.
        """
        if not self.flexible:
            return self.fit_breaks(self.mesh.nominal)[0]
        blo, bup = self.mesh.breakpoint_bounds()
        lo_len, hi_len = self.mesh.length_bounds()

        def feasible(inner):
            lengths = np.diff(np.concatenate([[self.mesh.t0], inner, [self.mesh.tf]]))
            return (np.all(inner >= blo) and np.all(inner <= bup)
                    and np.all(lengths >= lo_len) and np.all(lengths <= hi_len))

        def outer(inner):
            inner = np.asarray(inner, dtype=float)
            if not feasible(inner):
                return np.inf
            return self.fit_breaks(np.concatenate([[self.mesh.t0], inner, [self.mesh.tf]]))[1]

        axes = [np.linspace(l, u, grid) for l, u in zip(blo, bup)]
        cands = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(blo))
        costs = np.array([outer(c) for c in cands])
        best_inner, best = self.mesh.nominal[1:-1], outer(self.mesh.nominal[1:-1])
        for k in np.argsort(costs)[:3]:
            if not np.isfinite(costs[k]):
                continue
            res = minimize(outer, cands[k], method="Nelder-Mead",
                           options={"xatol": 1e-10, "fatol": 1e-8 * costs[k], "maxiter": 2000})
            if res.fun < best:
                best_inner, best = res.x, res.fun
        full = np.concatenate([[self.mesh.t0], best_inner, [self.mesh.tf]])
        return self.fit_breaks(full)[0]

    def bound_violation(self, z, samples: int = 2000) -> float:
        y = self.curve(z)(np.linspace(0.0, 1.0, samples))
        return float(max(0.0, np.max(np.abs(y)) - 1.0))


def sine_approximation(
    n_p: int,
    mesh_mode: str = "equispaced",
    constrained: bool = True,
    phi: float = 0.5,
    bound_mode: str = "bernstein",
) -> SineApproxProblem:
    """Three-piece approximation of sin(2 pi t) with -1 <= y <= 1.

    ``bound_mode`` is ``"bernstein"`` (coefficients of each piece) or
    ``"samples"`` (values at the interpolation points only). The objective
    uses ``n_p + 3`` Lobatto points per piece, one more than the
    interpolation order plus two.
    """
    if n_p < 1:
        raise ValueError("polynomial degree must be >= 1")
    if mesh_mode not in ("equispaced", "flexible"):
        raise ValueError(f"unknown mesh mode {mesh_mode!r}")
    n_h = 3
    flexible = mesh_mode == "flexible"
    mesh = FlexibleMesh.uniform(0.0, 1.0, n_h, phi if flexible else 0.0)
    interp = InterpolationGrid(lgl_nodes(n_p + 1).nodes)
    n_q = n_p + 2
    quad = lgl_nodes(n_q + 1)
    L = interp.matrix(quad.nodes)
    m = n_h * (n_p + 1)
    nv = m + (n_h - 1 if flexible else 0)

    def breaks_of(z):
        if flexible:
            return ad.concatenate([[0.0], z[m:], [1.0]])
        return mesh.nominal

    def objective(z):
        Y = z[:m].reshape(n_h, n_p + 1)
        br = breaks_of(z)
        a, b = br[:-1], br[1:]
        h = b - a
        t = (0.5 * h)[:, None] * quad.nodes[None, :] + (0.5 * (a + b))[:, None]
        yq = Y @ L.T
        r = np.sin(2 * np.pi * t) - yq
        return ((r * r) @ quad.weights * (0.5 * h)).sum()

    ineq_rows = []
    lo, up = [], []
    lower = np.full(nv, -np.inf)
    upper = np.full(nv, np.inf)
    if constrained and bound_mode == "bernstein":
        ineq_rows.append("bernstein")
        lo.append(np.full(m, -1.0))
        up.append(np.full(m, 1.0))
    elif constrained and bound_mode == "samples":
        lower[:m], upper[:m] = -1.0, 1.0
    elif constrained:
        raise ValueError(f"unknown bound mode {bound_mode!r}")
    if flexible:
        ineq_rows.append("lengths")
        lo_len, hi_len = mesh.length_bounds()
        lo.append(lo_len)
        up.append(hi_len)
        blo, bup = mesh.breakpoint_bounds()
        lower[m:], upper[m:] = blo, bup
    C = bernstein_transfer_matrix(interp)

    def ineq(z):
        rows = []
        if "bernstein" in ineq_rows:
            rows.append((z[:m].reshape(n_h, n_p + 1) @ C.T).reshape(-1))
        if "lengths" in ineq_rows:
            br = breaks_of(z)
            rows.append(br[1:] - br[:-1])
        return ad.concatenate(rows, nvars=nv)

    # Start from the interpolant of the target on the nominal mesh,
    # pulled inside the bounds.
    br0 = mesh.nominal
    t0 = 0.5 * np.diff(br0)[:, None] * interp.points[None, :] + 0.5 * (br0[:-1] + br0[1:])[:, None]
    y0 = np.sin(2 * np.pi * t0)
    if constrained:
        y0 = 0.9 * y0
    z0 = np.concatenate([y0.reshape(-1), br0[1:-1] if flexible else []])
    return SineApproxProblem(
        n=nv,
        objective=objective,
        z0=z0,
        ineq_constraints=ineq if ineq_rows else None,
        ineq_lower=np.concatenate(lo) if lo else np.empty(0),
        ineq_upper=np.concatenate(up) if up else np.empty(0),
        lower=lower,
        upper=upper,
        degree=n_p,
        n_h=n_h,
        flexible=flexible,
        mesh=mesh,
        constrained=constrained,
        bound_mode=bound_mode,
    )


@lru_cache(maxsize=None)
def _sine_operators(n_p: int):
    interp = InterpolationGrid(lgl_nodes(n_p + 1).nodes)
    quad = lgl_nodes(n_p + 3)
    return interp.matrix(quad.nodes), quad.nodes, quad.weights, bernstein_transfer_matrix(interp)


REGISTRY = {
    "bryson-denham": bryson_denham,
    "cart-pole": cart_pole,
    "sine-approx": sine_approximation,
}


def get_problem(name: str):
    try:
        return REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; known: {sorted(REGISTRY)}") from None

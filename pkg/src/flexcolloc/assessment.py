"""Solution-quality criteria measured on the continuous-time trajectory.

Three numbers summarise a solution: the cost, the L2 size of any box
violation, and the average L2 norm of the dynamics residual. All integrals
are taken one sub-interval at a time with adaptive Gauss-Kronrod
quadrature, so input jumps and derivative kinks at breakpoints never sit
inside an integration panel.

Any object exposing ``breaks``, ``n_x``, ``n_u`` and the per-interval
evaluators ``interval_state``, ``interval_input`` and
``interval_state_derivative`` (see :class:`~flexcolloc.transcription.Trajectory`)
can be assessed.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .quadrature import integrate_adaptive
from .transcription import DopDefinition

# Integration stops this far (relative to the horizon) short of each
# breakpoint, where the piecewise derivative is not defined.
ENDPOINT_NUDGE = 1e-14


def violation(y, lower, upper):
    """Distance of ``y`` outside ``[lower, upper]`` (zero inside)."""
    if np.any(np.asarray(lower) > np.asarray(upper)):
        raise ValueError("violation bounds cross")
    y = np.asarray(y, dtype=float)
    return np.maximum(lower - y, 0.0) + np.maximum(y - upper, 0.0)


@dataclass
class AssessmentReport:
    """Cost, inequality violation and dynamic violation of a trajectory.

    The ``interval_*`` lists hold the same quantities restricted to each
    sub-interval. Costs add up across intervals; norms do not (the totals
    combine squared integrals before taking roots).
    """

    cost: float
    inequality_violation: float
    dynamic_violation: float
    interval_cost: list = field(default_factory=list)
    interval_inequality_violation: list = field(default_factory=list)
    interval_dynamic_violation: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _integrate_intervals(fn, breaks, width, rel_tol, abs_tol):
    """Integrate ``fn(i, t) -> (len(t), width)`` over each sub-interval.

    Returns an array of shape (n_h, width).
    """
    span = breaks[-1] - breaks[0]
    eps = ENDPOINT_NUDGE * span
    out = np.zeros((len(breaks) - 1, width))
    for i in range(len(breaks) - 1):
        a, b = breaks[i] + eps, breaks[i + 1] - eps
        for k in range(width):
            def f(t, i=i, k=k):
                return fn(i, t)[:, k]

            out[i, k], _ = integrate_adaptive(f, a, b, rel_tol, abs_tol, vectorized=True)
    return out


def _columns(values, count):
    return [values[:, k] for k in range(count)]


def _stack_components(parts, size):
    return np.stack([np.broadcast_to(np.asarray(p, dtype=float), (size,)) for p in parts], axis=1)


def assess(traj, dop: DopDefinition, rel_tol: float = 1e-10, abs_tol: float = 1e-12) -> AssessmentReport:
    """Evaluate the three criteria for ``traj`` as a solution of ``dop``.

    Raises
    ------
    QuadratureError
        If an adaptive integral does not reach the tolerances.
    """
    breaks = np.asarray(traj.breaks, dtype=float)
    n_x, n_u = dop.n_x, dop.n_u

    def running(i, t):
        x = traj.interval_state(i, t)
        u = traj.interval_input(i, t)
        val = dop.running_cost(_columns(x, n_x), _columns(u, n_u), t)
        return np.broadcast_to(np.asarray(val, dtype=float), t.shape)[:, None]

    def box_sq(i, t):
        x = traj.interval_state(i, t)
        u = traj.interval_input(i, t)
        vx = violation(x, dop.x_lower, dop.x_upper)
        vu = violation(u, dop.u_lower, dop.u_upper)
        return np.hstack([vu, vx]) ** 2

    def residual_sq(i, t):
        x = traj.interval_state(i, t)
        u = traj.interval_input(i, t)
        xdot = traj.interval_state_derivative(i, t)
        r = dop.dynamics(_columns(xdot, n_x), _columns(x, n_x), _columns(u, n_u), t)
        return _stack_components(r, t.size) ** 2

    cost_i = _integrate_intervals(running, breaks, 1, rel_tol, abs_tol)[:, 0]
    x0 = _columns(traj.interval_state(0, np.array([breaks[0]])), n_x)
    xf = _columns(traj.interval_state(len(breaks) - 2, np.array([breaks[-1]])), n_x)
    boundary = float(np.ravel(dop.boundary_cost_value([c[0] for c in x0], [c[0] for c in xf]))[0])

    # Only bounded components can be violated; skip the others.
    bounded = np.concatenate([
        (np.abs(dop.u_lower) < 1e20) | (np.abs(dop.u_upper) < 1e20),
        (np.abs(dop.x_lower) < 1e20) | (np.abs(dop.x_upper) < 1e20),
    ])
    if bounded.any():
        sq = _integrate_intervals(
            lambda i, t: box_sq(i, t)[:, bounded], breaks, int(bounded.sum()), rel_tol, abs_tol)
    else:
        sq = np.zeros((len(breaks) - 1, 0))
    ineq_total = float(np.sum(np.sqrt(sq.sum(axis=0))))
    ineq_i = np.sqrt(sq).sum(axis=1)

    n_r = residual_sq(0, np.array([0.5 * (breaks[0] + breaks[1])])).shape[1]
    rsq = _integrate_intervals(residual_sq, breaks, n_r, rel_tol, abs_tol)
    dyn_total = float(np.sum(np.sqrt(rsq.sum(axis=0)))) / n_x
    dyn_i = np.sqrt(rsq).sum(axis=1) / n_x

    return AssessmentReport(
        cost=math.fsum(cost_i) + boundary,
        inequality_violation=ineq_total,
        dynamic_violation=dyn_total,
        interval_cost=[float(c) for c in cost_i],
        interval_inequality_violation=[float(v) for v in ineq_i],
        interval_dynamic_violation=[float(v) for v in dyn_i],
    )

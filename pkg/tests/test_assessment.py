import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flexcolloc.assessment import ENDPOINT_NUDGE, AssessmentReport, assess, violation
from flexcolloc.nlp import INF, solve
from flexcolloc.problems import bryson_denham
from flexcolloc.transcription import DopDefinition, FlexibleMesh, assemble


class StubTrajectory:
    """Closed-form trajectory; refuses derivative evaluation at breakpoints."""

    def __init__(self, breaks, x, u, xdot):
        self.breaks = np.asarray(breaks, dtype=float)
        self._x, self._u, self._xdot = x, u, xdot

    def interval_state(self, i, t):
        return np.atleast_2d(self._x(np.asarray(t))).T

    def interval_input(self, i, t):
        return np.atleast_2d(self._u(np.asarray(t))).T

    def interval_state_derivative(self, i, t):
        t = np.asarray(t)
        assert np.all((t > self.breaks[i]) & (t < self.breaks[i + 1])), "derivative at a breakpoint"
        return np.atleast_2d(self._xdot(t)).T


def scalar_dop(upper=INF, lower=-INF):
    return DopDefinition(
        n_x=1, n_u=1, t0=0.0, tf=1.0,
        running_cost=lambda x, u, t: u[0] * u[0],
        dynamics=lambda xd, x, u, t: [xd[0] - u[0]],
        boundary_conditions=lambda x0, xf: [],
        x_lower=[lower], x_upper=[upper], u_lower=[-INF], u_upper=[INF],
    )


def test_violation_examples():
    assert violation(0.5, 0.0, 1.0) == 0.0
    assert violation(1.3, 0.0, 1.0) == pytest.approx(0.3)
    assert violation(-0.2, 0.0, 1.0) == pytest.approx(0.2)
    with pytest.raises(ValueError):
        violation(0.0, 1.0, 0.0)


@given(st.floats(-10, 10), st.floats(-5, 5), st.floats(0, 5))
def test_violation_is_distance_to_box(y, lo, width):
    hi = lo + width
    assert violation(y, lo, hi) == pytest.approx(abs(y - min(max(y, lo), hi)), abs=1e-12)


def test_constant_feasible_trajectory():
    traj = StubTrajectory([0.0, 0.5, 1.0], lambda t: 0.1 + 0 * t, lambda t: 0 * t, lambda t: 0 * t)
    rep = assess(traj, scalar_dop(upper=0.2))
    assert (rep.cost, rep.inequality_violation, rep.dynamic_violation) == (0.0, 0.0, 0.0)
    assert len(rep.interval_cost) == 2


def manufactured(depth):
    return StubTrajectory(
        [0.0, 1.0],
        lambda t: 0.2 + depth * np.sin(np.pi * t),
        lambda t: depth * np.pi * np.cos(np.pi * t),
        lambda t: depth * np.pi * np.cos(np.pi * t),
    )


def test_manufactured_violation_norm():
    rep = assess(manufactured(0.1), scalar_dop(upper=0.2))
    assert rep.inequality_violation == pytest.approx(0.1 / math.sqrt(2), rel=1e-10)
    assert rep.dynamic_violation <= 1e-12
    # int (0.1 pi cos(pi t))^2 = 0.01 pi^2 / 2
    assert rep.cost == pytest.approx(0.01 * np.pi**2 / 2, rel=1e-10)


def test_violation_scales_linearly():
    one = assess(manufactured(0.1), scalar_dop(upper=0.2)).inequality_violation
    two = assess(manufactured(0.2), scalar_dop(upper=0.2)).inequality_violation
    assert two == pytest.approx(2 * one, rel=1e-10)


def test_dynamic_violation_averages_over_states():
    # r = xdot - u with xdot = u + 1 on [0, 1]: ||r||_2 = 1 for the single state.
    traj = StubTrajectory([0.0, 0.3, 1.0], lambda t: t, lambda t: 0 * t, lambda t: 1 + 0 * t)
    rep = assess(traj, scalar_dop())
    assert rep.dynamic_violation == pytest.approx(1.0, rel=1e-12)
    assert sum(v**2 for v in rep.interval_dynamic_violation) == pytest.approx(1.0, rel=1e-12)


def test_derivative_never_evaluated_at_breakpoints():
    # The stub asserts if it sees a breakpoint; success means the nudge works.
    traj = StubTrajectory([0.0, 0.25, 0.5, 1.0], lambda t: t * t, lambda t: 2 * t, lambda t: 2 * t)
    rep = assess(traj, scalar_dop())
    assert rep.dynamic_violation <= 1e-12
    assert 0 < ENDPOINT_NUDGE < 1e-12


def test_report_is_flat_and_nonnegative():
    rep = assess(manufactured(0.1), scalar_dop(upper=0.2))
    d = rep.to_dict()
    assert set(d) >= {"cost", "inequality_violation", "dynamic_violation"}
    assert AssessmentReport(**d) == rep
    assert min(rep.inequality_violation, rep.dynamic_violation) >= 0


@pytest.mark.parametrize("mode", ["b", "c"])
def test_bryson_denham_bernstein_modes_have_no_violation(mode):
    dop = bryson_denham()
    prob = assemble(dop, 3, FlexibleMesh.uniform(0, 1, 3, 0.5), mode)
    sol = solve(prob)
    assert sol.converged
    rep = assess(prob.trajectory(sol.z), dop)
    assert rep.inequality_violation <= 1e-9
    assert rep.cost == pytest.approx(sol.objective, rel=1e-8)


def test_exact_collocated_solution_has_no_dynamic_violation():
    # x' = u with u linear is reproduced exactly by degree-3 collocation.
    dop = DopDefinition(
        n_x=1, n_u=1, t0=0.0, tf=1.0,
        running_cost=lambda x, u, t: (u[0] - 2 * t) ** 2,
        dynamics=lambda xd, x, u, t: [xd[0] - u[0]],
        boundary_conditions=lambda x0, xf: [x0[0]],
        x_lower=[-INF], x_upper=[INF], u_lower=[-INF], u_upper=[INF],
    )
    prob = assemble(dop, 3, FlexibleMesh.uniform(0, 1, 2), "b")
    sol = solve(prob, tol=1e-12)
    rep = assess(prob.trajectory(sol.z), dop)
    assert rep.dynamic_violation <= 1e-8
    assert rep.cost <= 1e-10

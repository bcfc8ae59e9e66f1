"""Dense smooth nonlinear programs and an SQP solver front-end.

The solver is SciPy's SLSQP (sequential least-squares QP with a BFGS
Lagrangian Hessian and an l1 merit line search). Derivatives come from
:mod:`flexcolloc.autodiff`; multipliers and the KKT residual are recovered
afterwards from the active set so callers get uniform diagnostics.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize, nnls

from .autodiff import gradient, jacobian

log = logging.getLogger(__name__)

INF = 1e20


def _finite(b) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    return np.where(b >= INF, np.inf, np.where(b <= -INF, -np.inf, b))


@dataclass
class NlpProblem:
    """minimize f(z) s.t. c_E(z) = 0, lo_I <= c_I(z) <= up_I, lo <= z <= up."""

    n: int
    objective: Callable
    z0: np.ndarray
    eq_constraints: Optional[Callable] = None
    ineq_constraints: Optional[Callable] = None
    ineq_lower: np.ndarray = field(default_factory=lambda: np.empty(0))
    ineq_upper: np.ndarray = field(default_factory=lambda: np.empty(0))
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    differentiable: bool = True

    def __post_init__(self):
        self.z0 = np.asarray(self.z0, dtype=float).copy()
        if self.z0.shape != (self.n,):
            raise ValueError(f"z0 has shape {self.z0.shape}, expected ({self.n},)")
        self.lower = np.full(self.n, -np.inf) if self.lower is None else _finite(self.lower)
        self.upper = np.full(self.n, np.inf) if self.upper is None else _finite(self.upper)
        self.ineq_lower = _finite(self.ineq_lower)
        self.ineq_upper = _finite(self.ineq_upper)
        if np.any(self.lower > self.upper):
            raise ValueError("variable bounds cross")
        if np.any(self.ineq_lower > self.ineq_upper):
            raise ValueError("inequality bounds cross")

    def eq(self, z):
        if self.eq_constraints is None:
            return np.empty(0)
        return self.eq_constraints(z)

    def ineq(self, z):
        if self.ineq_constraints is None:
            return np.empty(0)
        return self.ineq_constraints(z)

    def grad(self, z) -> np.ndarray:
        return gradient(self.objective, z, self.differentiable)

    def eq_jac(self, z) -> np.ndarray:
        if self.eq_constraints is None:
            return np.zeros((0, self.n))
        return jacobian(self.eq_constraints, z, self.differentiable)

    def ineq_jac(self, z) -> np.ndarray:
        if self.ineq_constraints is None:
            return np.zeros((0, self.n))
        return jacobian(self.ineq_constraints, z, self.differentiable)

    def violation(self, z) -> float:
        """Largest equality, inequality or bound violation at ``z``."""
        z = np.asarray(z, dtype=float)
        parts = [0.0]
        ce = np.ravel(self.eq(z))
        if ce.size:
            parts.append(np.max(np.abs(ce)))
        ci = np.ravel(self.ineq(z))
        if ci.size:
            parts.append(np.max(np.maximum(self.ineq_lower - ci, ci - self.ineq_upper)))
        parts.append(np.max(np.maximum(self.lower - z, z - self.upper), initial=0.0))
        return float(max(parts))


@dataclass
class NlpSolution:
    z: np.ndarray
    status: str
    objective: float
    eq_multipliers: np.ndarray
    ineq_multipliers: np.ndarray
    bound_multipliers: np.ndarray
    kkt_residual: float
    violation: float
    iterations: int
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def _check(values, what):
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise FloatingPointError(f"{what} returned a non-finite value")
    return values


def _multipliers(g, Je, Ji, ci, lo_i, up_i, z, lo, up, act_tol):
    """Least-squares multipliers with sign conditions on the active set.

    Sign convention: grad f = Je^T y + Ji^T mu + nu, with mu, nu >= 0 on
    active lower bounds and <= 0 on active upper bounds.
    """
    n = g.size
    cols, kinds = [], []
    for k in range(Je.shape[0]):
        cols.append(Je[k])
        kinds.append(("e", k, 0.0))
    for k in range(Ji.shape[0]):
        if np.isfinite(lo_i[k]) and ci[k] - lo_i[k] <= act_tol * max(1.0, abs(lo_i[k])):
            cols.append(Ji[k]); kinds.append(("i", k, 1.0))
        elif np.isfinite(up_i[k]) and up_i[k] - ci[k] <= act_tol * max(1.0, abs(up_i[k])):
            cols.append(-Ji[k]); kinds.append(("i", k, -1.0))
    eye = np.eye(n)
    for k in range(n):
        if np.isfinite(lo[k]) and z[k] - lo[k] <= act_tol * max(1.0, abs(lo[k])):
            cols.append(eye[k]); kinds.append(("b", k, 1.0))
        elif np.isfinite(up[k]) and up[k] - z[k] <= act_tol * max(1.0, abs(up[k])):
            cols.append(-eye[k]); kinds.append(("b", k, -1.0))
    y_e = np.zeros(Je.shape[0])
    mu = np.zeros(Ji.shape[0])
    nu = np.zeros(n)
    if not cols:
        return y_e, mu, nu, g.copy()
    A = np.array(cols).T
    free = np.array([k[0] == "e" for k in kinds])
    # Free (equality) multipliers are split into positive and negative parts
    # so that a single NNLS solve enforces the inequality signs.
    A_split = np.hstack([A, -A[:, free]])
    coef, _ = nnls(A_split, g, maxiter=50 * A_split.shape[1])
    lam = coef[: A.shape[1]].copy()
    lam[free] -= coef[A.shape[1]:]
    for (kind, k, sgn), l in zip(kinds, lam):
        if kind == "e":
            y_e[k] = l
        elif kind == "i":
            mu[k] = sgn * l
        else:
            nu[k] = sgn * l
    return y_e, mu, nu, g - A @ lam


def solve(
    problem: NlpProblem,
    tol: float = 1e-8,
    max_iter: int = 500,
    z0: Optional[np.ndarray] = None,
    feas_tol: float = 1e-8,
) -> NlpSolution:
    """Solve ``problem`` from ``z0`` (defaults to ``problem.z0``).

    The objective and each constraint row are divided by
    ``max(1, |value at z0|)`` before the solver sees them. ``tol`` is the
    SQP stopping tolerance on the scaled objective. The status is
    ``converged`` when the iteration stopped normally and the largest scaled
    constraint violation is below ``feas_tol``; ``infeasible`` when that
    violation is exceeded; ``max_iter`` otherwise.

    Inequality rows are handed to the QP with a margin of ``0.01 * feas_tol``
    so a returned point may violate them by that much.

    The KKT residual of the returned point is always reported. It is not
    part of the status test: when a breakpoint sits exactly on a touch
    point the active constraints are linearly dependent, multipliers need
    not exist, and the residual stays large at a genuine minimizer.
    """
    p = problem
    z_start = np.array(p.z0 if z0 is None else z0, dtype=float)
    z_start = np.clip(z_start, p.lower, p.upper)
    f0 = float(_check(p.objective(z_start), "objective"))
    ce0 = np.ravel(_check(p.eq(z_start), "equality constraints"))
    ci0 = np.ravel(_check(p.ineq(z_start), "inequality constraints"))
    sf = max(1.0, abs(f0))
    se = np.maximum(1.0, np.abs(ce0))
    si = np.maximum(1.0, np.abs(ci0))

    lo_i, up_i = p.ineq_lower, p.ineq_upper
    as_eq = np.isfinite(lo_i) & (lo_i == up_i)
    has_lo = np.isfinite(lo_i) & ~as_eq
    has_up = np.isfinite(up_i) & ~as_eq

    # Inequalities implied by equalities (a Bernstein row pinned by boundary
    # conditions on the box edge) are consistent only up to round-off, which
    # the QP subproblem can read as infeasible. A margin well inside
    # ``feas_tol`` absorbs that.
    margin = 0.01 * feas_tol
    cache: dict = {}

    def _cached(key, fn, z):
        zk = z.tobytes()
        hit = cache.get(key)
        if hit is not None and hit[0] == zk:
            return hit[1]
        val = fn(z)
        cache[key] = (zk, val)
        return val

    def fun(z):
        return float(_check(p.objective(z), "objective")) / sf

    def jac(z):
        return _cached("g", p.grad, z) / sf

    def ce(z):
        return np.concatenate([
            np.ravel(_check(p.eq(z), "equality constraints")) / se,
            (np.ravel(_cached("ci", p.ineq, z))[as_eq] - lo_i[as_eq]) / si[as_eq],
        ])

    def ce_jac(z):
        Ji = _cached("Ji", p.ineq_jac, z)
        return np.vstack([p.eq_jac(z) / se[:, None], Ji[as_eq] / si[as_eq, None]])

    def ci(z):
        c = np.ravel(_check(_cached("ci", p.ineq, z), "inequality constraints"))
        return margin + np.concatenate([
            (c[has_lo] - lo_i[has_lo]) / si[has_lo],
            (up_i[has_up] - c[has_up]) / si[has_up],
        ])

    def ci_jac(z):
        Ji = _cached("Ji", p.ineq_jac, z)
        return np.vstack([Ji[has_lo] / si[has_lo, None], -Ji[has_up] / si[has_up, None]])

    cons = []
    if ce0.size or as_eq.any():
        cons.append({"type": "eq", "fun": ce, "jac": ce_jac})
    if has_lo.any() or has_up.any():
        cons.append({"type": "ineq", "fun": ci, "jac": ci_jac})
    bounds = list(zip(
        np.where(np.isfinite(p.lower), p.lower, None),
        np.where(np.isfinite(p.upper), p.upper, None),
    ))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = minimize(
            fun, z_start, jac=jac, method="SLSQP", bounds=bounds, constraints=cons,
            options={"ftol": tol, "maxiter": max_iter},
        )
    z = np.asarray(res.x, dtype=float)
    log.debug("SLSQP: %s after %d iterations", res.message, res.nit)

    g = p.grad(z) / sf
    Je = p.eq_jac(z) / se[:, None] if ce0.size else np.zeros((0, p.n))
    ci_z = np.ravel(p.ineq(z))
    Ji = p.ineq_jac(z) if ci_z.size else np.zeros((0, p.n))
    act_tol = max(1e-5, 10 * tol)
    y_e, mu, nu, resid = _multipliers(
        g, Je, Ji / si[:, None], ci_z / si, lo_i / si, up_i / si,
        z, p.lower, p.upper, act_tol,
    )
    kkt = float(np.max(np.abs(resid), initial=0.0))
    viol = _scaled_violation(p, z, se, si)
    if not np.all(np.isfinite(z)) or viol > feas_tol:
        status = "infeasible"
    elif res.success:
        status = "converged"
    else:
        status = "max_iter"
    return NlpSolution(
        z=z,
        status=status,
        objective=float(p.objective(z)),
        eq_multipliers=y_e * sf / se,
        ineq_multipliers=mu * sf / si,
        bound_multipliers=nu * sf,
        kkt_residual=kkt,
        violation=viol,
        iterations=int(res.nit),
        message=str(res.message),
    )


def _scaled_violation(p: NlpProblem, z, se, si) -> float:
    parts = [0.0]
    ce = np.ravel(p.eq(z))
    if ce.size:
        parts.append(np.max(np.abs(ce) / se))
    ci = np.ravel(p.ineq(z))
    if ci.size:
        parts.append(np.max(np.maximum(p.ineq_lower - ci, ci - p.ineq_upper) / si))
    parts.append(np.max(np.maximum(p.lower - z, z - p.upper), initial=0.0))
    return float(max(parts))

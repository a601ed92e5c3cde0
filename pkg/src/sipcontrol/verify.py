"""Dense-grid constraint verification and independent value oracles.

The solver only enforces constraints at finitely many sampled times; the
verifier re-checks the recovered trajectory on a dense grid against the
original for-all-t constraints, and the collocation oracle provides a value
estimate computed by an entirely different discretization (piecewise-linear
control, trapezoidal cost, constraints at every grid node) through an
external convex solver.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import quadrature
from .dynamics import matrix_exponential, trajectory_on_grid
from .errors import OracleError
from .problem import OcpProblem


@dataclass
class ViolationReport:
    grid_points: int
    max_state_violation: float   # signed; <= 0 means satisfied
    argmax_time: float
    max_control_violation: float
    terminal_residual: float
    certified_bound: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "grid_points": self.grid_points,
            "max_state_violation": self.max_state_violation,
            "argmax_time": self.argmax_time,
            "max_control_violation": self.max_control_violation,
            "terminal_residual": self.terminal_residual,
            "certified_bound": self.certified_bound,
        }


def verify_dense(p: OcpProblem, alpha, grid_n: int = 10000,
                 certified: bool = False) -> ViolationReport:
    """Evaluate all constraint rows at grid_n+1 equispaced times.

    The optional certified bound inflates the grid maximum of each state row
    by half a grid step times a bound on the row's time derivative, giving a
    rigorous inter-sample estimate.
    """
    alpha = np.atleast_2d(np.asarray(alpha, dtype=float))
    ts = np.linspace(0.0, p.horizon, grid_n + 1)
    X = trajectory_on_grid(p.system, p.basis, p.x0, alpha, ts)
    U = alpha @ p.basis.sample(ts)

    max_state = -np.inf
    argmax_t = 0.0
    residual_rows = []
    if p.state_set.n_ineq:
        res = X @ p.state_set.H.T - p.state_set.h  # (grid+1, k)
        residual_rows.append((res, p.state_set.H))
        flat = np.argmax(res)
        i, _ = np.unravel_index(flat, res.shape)
        max_state = float(np.max(res))
        argmax_t = float(ts[i])
    if p.state_set.n_eq:
        res = np.abs(X @ p.state_set.Heq.T - p.state_set.heq)
        v = float(np.max(res))
        if v > max_state:
            max_state = v
            argmax_t = float(ts[np.unravel_index(np.argmax(res), res.shape)[0]])

    over = U - p.control_upper[:, None]
    under = p.control_lower[:, None] - U
    max_control = float(max(np.max(over), np.max(under)))

    terminal_residual = float(p.terminal_set.max_violation(X[-1]))

    certified_bound = None
    if certified and residual_rows:
        dX = X @ p.system.A.T + U.T @ p.system.B.T
        h = 0.5 * p.horizon / grid_n
        bound = -np.inf
        for res, H in residual_rows:
            rates = np.abs(dX @ H.T)
            bound = max(bound, float(np.max(np.max(res, axis=0) + h * np.max(rates, axis=0))))
        certified_bound = bound

    return ViolationReport(
        grid_points=grid_n,
        max_state_violation=float(max_state),
        argmax_time=argmax_t,
        max_control_violation=max_control,
        terminal_residual=terminal_residual,
        certified_bound=certified_bound,
    )


def _psd_sqrt(M: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ V.T


def oracle_collocation(p: OcpProblem, grid_n: int = 2000):
    """Dense time-discretized QP as an independent value estimate.

    Piecewise-linear control on a uniform grid, exact LTI propagation between
    nodes, trapezoidal cost, constraints at every node.  Solved with cvxpy so
    the optimization path shares nothing with the in-repo QP solver.  Used by
    tests and the acceptance suite, not by the solver itself.
    """
    import cvxpy as cp

    if grid_n < 10:
        raise OracleError("collocation oracle needs at least 10 grid intervals")
    d, m = p.system.n_states, p.system.n_inputs
    A, B = p.system.A, p.system.B
    dt = p.horizon / grid_n
    ts = np.linspace(0.0, p.horizon, grid_n + 1)

    Ad = matrix_exponential(A, dt)
    glx, glw = quadrature.panel_rule()
    tau = 0.5 * dt * (glx + 1.0)
    w = 0.5 * dt * glw
    B1 = sum(wi * matrix_exponential(A, dt - ti) @ B * (1.0 - ti / dt)
             for wi, ti in zip(w, tau))
    B2 = sum(wi * matrix_exponential(A, dt - ti) @ B * (ti / dt)
             for wi, ti in zip(w, tau))

    X = cp.Variable((grid_n + 1, d))
    U = cp.Variable((grid_n + 1, m))
    cons = [X[0] == p.x0,
            X[1:] == X[:-1] @ Ad.T + U[:-1] @ B1.T + U[1:] @ B2.T,
            U >= p.control_lower[None, :],
            U <= p.control_upper[None, :]]
    if p.state_set.n_ineq:
        cons.append(X @ p.state_set.H.T <= p.state_set.h[None, :])
    if p.state_set.n_eq:
        cons.append(X @ p.state_set.Heq.T == p.state_set.heq[None, :])
    if p.terminal_set.n_ineq:
        cons.append(p.terminal_set.H @ X[-1] <= p.terminal_set.h)
    if p.terminal_set.n_eq:
        cons.append(p.terminal_set.Heq @ X[-1] == p.terminal_set.heq)

    trap = np.full(grid_n + 1, dt)
    trap[0] = trap[-1] = 0.5 * dt
    sqrt_trap = np.sqrt(trap)
    Rhalf = np.linalg.cholesky(p.cost.R).T
    cost = cp.sum_squares(cp.multiply(sqrt_trap[:, None], U @ Rhalf.T))
    if np.any(p.cost.Q):
        Qhalf = _psd_sqrt(p.cost.Q)
        cost = cost + cp.sum_squares(cp.multiply(sqrt_trap[:, None], X @ Qhalf.T))
    if np.any(p.cost.Pf):
        Pfhalf = _psd_sqrt(p.cost.Pf)
        cost = cost + cp.sum_squares(Pfhalf @ X[-1])

    prob = cp.Problem(cp.Minimize(cost), cons)
    try:
        prob.solve(solver=cp.CLARABEL)
    except (cp.error.SolverError, cp.error.DCPError):
        prob.solve(solver=cp.OSQP, eps_abs=1e-9, eps_rel=1e-9, max_iter=200000)
    if prob.status not in ("optimal", "optimal_inaccurate"):
        raise OracleError("collocation oracle failed with status %r" % prob.status)
    return float(prob.value), (ts, X.value, U.value)

"""Finite-dimensional QP behind the sampled-constraint value function.

For a time tuple xi = (t_1, ..., t_{mN}) the QP minimizes the exact
continuous-time cost over coefficient matrices, subject to the state and
control constraints *at the sampled times only* plus the terminal rows at
t = T (always enforced exactly).  Its optimal value is the quantity the outer
global search maximizes over xi.
"""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from . import quadrature
from .dynamics import PropagationCache, matrix_exponential
from .errors import ConstructionError
from .problem import OcpProblem

_ROW_EPS = 1e-14


@dataclass(frozen=True)
class TimeSampleVector:
    """The outer decision variable: mN constraint times in [0, T]."""

    times: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "times", np.atleast_1d(np.asarray(self.times, dtype=float)))

    @staticmethod
    def clamped(times, horizon: float) -> "TimeSampleVector":
        t = np.clip(np.asarray(times, dtype=float), 0.0, horizon)
        return TimeSampleVector(t)


@dataclass
class QpModel:
    """cost(v) = v' H v + f' v + c, with tagged linear rows.

    The decision vector is vec(alpha) followed by the shooting knot states
    (the first n_alpha entries are the coefficients); the cost involves only
    the coefficient block, while the equality rows pin each knot state to
    the trajectory, which keeps every constraint row well scaled even when
    exp(A T) is enormous.
    """

    hessian: np.ndarray
    linear: np.ndarray
    constant: float
    G_in: np.ndarray
    h_in: np.ndarray
    G_eq: np.ndarray
    h_eq: np.ndarray
    tags: List[str]
    n_inputs: int
    n_funcs: int
    n_alpha: int = 0
    # Original (pre-normalization) row norms; a normalized residual r on row
    # i corresponds to a violation of r * scale_in[i] in the constraint's own
    # units.  Row norms grow like the state transition matrix, so these spread
    # over many orders of magnitude for unstable systems.
    scale_in: np.ndarray = None
    scale_eq: np.ndarray = None
    # Rows whose coefficient part vanished entirely; the model is infeasible
    # iff any of their right-hand sides is violated by zero.
    infeasible_reason: Optional[str] = None


class Transcriber:
    """Caches the xi-independent pieces (Hessian, cost kernels, propagation).

    The Hessian and the Q/Pf kernels do not depend on xi or on the initial
    state, so one Transcriber serves a whole outer run and, via
    :meth:`set_x0`, a whole receding-horizon loop.
    """

    def __init__(self, problem: OcpProblem, cache: Optional[PropagationCache] = None):
        self.problem = problem
        self.cache = cache or PropagationCache(problem.system, problem.basis)
        m = problem.system.n_inputs
        n = problem.basis.n_funcs
        gram = problem.basis.gram()

        # Control-energy block: channel-major vec layout makes it kron(R, P).
        hess = np.kron(problem.cost.R, gram)

        q_zero = not np.any(problem.cost.Q)
        pf_zero = not np.any(problem.cost.Pf)

        op_T = self.cache.operator(problem.horizon)
        self._expAT = op_T.expAt
        self._MT = op_T.M

        d = problem.system.n_states
        self._SQ = np.zeros((m * n, m * n))
        self._CQ = np.zeros((m * n, d))  # int M' Q e^{At} dt
        self._c0 = np.zeros((d, d))      # int e^{A't} Q e^{At} dt
        if not q_zero:
            pts, wts = quadrature.composite_nodes(
                0.0, problem.horizon, quadrature.panel_count(n))
            Q = problem.cost.Q
            for t, w in zip(pts, wts):
                op = self.cache.operator(float(t))
                QM = Q @ op.M
                self._SQ += w * (op.M.T @ QM)
                self._CQ += w * (op.M.T @ (Q @ op.expAt))
                self._c0 += w * (op.expAt.T @ (Q @ op.expAt))
            hess = hess + 0.5 * (self._SQ + self._SQ.T)
        if not pf_zero:
            Pf = problem.cost.Pf
            PfM = Pf @ self._MT
            hess = hess + self._MT.T @ PfM
            self._CQ = self._CQ + self._MT.T @ (Pf @ self._expAT)
            self._c0 = self._c0 + self._expAT.T @ (Pf @ self._expAT)

        self.hessian = 0.5 * (hess + hess.T)
        self.n_alpha = m * n

        # Multiple-shooting grid: segments short enough that the transition
        # matrix over one segment stays modestly sized, so constraint rows
        # (and hence achievable absolute feasibility) never inherit the
        # full-horizon growth of an unstable system.
        A = problem.system.A
        T = problem.horizon
        n_seg = 64
        for J in range(1, 65):
            if np.linalg.norm(matrix_exponential(A, T / J), 2) <= 50.0:
                n_seg = J
                break
        self.n_segments = n_seg
        self.knots = np.linspace(0.0, T, n_seg + 1)
        # per-segment transition matrix and coefficient response
        self._links = [self.cache.segment_operator(self.knots[j], self.knots[j + 1])
                       for j in range(n_seg)]

        self.set_x0(problem.x0)

    def set_x0(self, x0) -> None:
        x0 = np.asarray(x0, dtype=float)
        self.x0 = x0
        self.linear = 2.0 * (self._CQ @ x0)
        self.constant = float(x0 @ (self._c0 @ x0))

    # -- assembly -----------------------------------------------------------

    def assemble(self, times) -> QpModel:
        """Build the QP for one time tuple (rows normalized to unit norm)."""
        p = self.problem
        if isinstance(times, TimeSampleVector):
            times = times.times
        times = np.clip(np.asarray(times, dtype=float), 0.0, p.horizon)

        m, n = p.system.n_inputs, p.basis.n_funcs
        d = p.system.n_states
        na = self.n_alpha
        J = self.n_segments
        nv = na + J * d  # coefficients + one knot state per segment end
        rows_in, rhs_in, rows_eq, rhs_eq, tags = [], [], [], [], []
        scale_in, scale_eq = [], []
        infeasible_reason = None

        def add_in(G, h, tag):
            nonlocal infeasible_reason
            for g_row, b in zip(np.atleast_2d(G), np.atleast_1d(h)):
                nrm = np.linalg.norm(g_row)
                if nrm < _ROW_EPS:
                    if b < -1e-10:
                        infeasible_reason = "constant row violated (%s)" % tag
                    continue
                rows_in.append(g_row / nrm)
                rhs_in.append(b / nrm)
                scale_in.append(nrm)
                tags.append(tag)

        def add_eq(G, h, tag):
            nonlocal infeasible_reason
            for g_row, b in zip(np.atleast_2d(G), np.atleast_1d(h)):
                nrm = np.linalg.norm(g_row)
                if nrm < _ROW_EPS:
                    if abs(b) > 1e-10:
                        infeasible_reason = "constant equality violated (%s)" % tag
                    continue
                rows_eq.append(g_row / nrm)
                rhs_eq.append(b / nrm)
                scale_eq.append(nrm)
                tags.append(tag)

        delta = p.horizon / J

        def state_rows(H, t):
            """Rows of H x(t) over the full decision vector, plus the free
            term that moves to the right-hand side."""
            j = min(int(t / delta), J - 1)
            eA, Ms = self.cache.segment_operator(self.knots[j], float(t))
            rows = np.zeros((H.shape[0], nv))
            rows[:, :na] = H @ Ms
            if j == 0:
                return rows, H @ (eA @ self.x0)
            lo = na + (j - 1) * d
            rows[:, lo:lo + d] = H @ eA
            return rows, np.zeros(H.shape[0])

        for t in times:
            if p.state_set.n_ineq:
                rows, free = state_rows(p.state_set.H, t)
                add_in(rows, p.state_set.h - free, "state@%.12g" % t)
            if p.state_set.n_eq:
                rows, free = state_rows(p.state_set.Heq, t)
                add_eq(rows, p.state_set.heq - free, "state@%.12g" % t)
            psi = p.basis.evaluate(float(t))
            for i in range(m):
                row = np.zeros(nv)
                row[i * n:(i + 1) * n] = psi
                add_in(row, p.control_upper[i], "control@%.12g" % t)
                add_in(-row, -p.control_lower[i], "control@%.12g" % t)

        # terminal rows act on the last knot state, x(T) itself
        lo = na + (J - 1) * d
        if p.terminal_set.n_ineq:
            rows = np.zeros((p.terminal_set.n_ineq, nv))
            rows[:, lo:lo + d] = p.terminal_set.H
            add_in(rows, p.terminal_set.h, "terminal")
        if p.terminal_set.n_eq:
            rows = np.zeros((p.terminal_set.n_eq, nv))
            rows[:, lo:lo + d] = p.terminal_set.Heq
            add_eq(rows, p.terminal_set.heq, "terminal")

        # shooting links: each knot state equals the propagated trajectory
        for j in range(J):
            eA, C = self._links[j]
            rows = np.zeros((d, nv))
            rows[:, :na] = -C
            rows[:, na + j * d:na + (j + 1) * d] = np.eye(d)
            if j == 0:
                rhs = eA @ self.x0
            else:
                rows[:, na + (j - 1) * d:na + j * d] = -eA
                rhs = np.zeros(d)
            add_eq(rows, rhs, "link@%.12g" % self.knots[j + 1])

        hess = np.zeros((nv, nv))
        hess[:na, :na] = self.hessian
        lin = np.zeros(nv)
        lin[:na] = self.linear

        return QpModel(
            hessian=hess,
            linear=lin,
            constant=self.constant,
            G_in=np.array(rows_in).reshape(-1, nv),
            h_in=np.array(rhs_in),
            G_eq=np.array(rows_eq).reshape(-1, nv),
            h_eq=np.array(rhs_eq),
            tags=tags,
            n_inputs=m,
            n_funcs=n,
            n_alpha=na,
            scale_in=np.array(scale_in),
            scale_eq=np.array(scale_eq),
            infeasible_reason=infeasible_reason,
        )

    def check_sample_length(self, times) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        if times.size != self.problem.n_var:
            raise ConstructionError(
                "time tuple must have length m*N = %d, got %d"
                % (self.problem.n_var, times.size))
        return times


def cost_quadratic(problem: OcpProblem, cache: Optional[PropagationCache] = None):
    """(Hessian, linear, constant) with cost(vec) = vec' H vec + f' vec + c."""
    tr = Transcriber(problem, cache)
    return tr.hessian, tr.linear, tr.constant


def assemble_qp(problem: OcpProblem, times, cache: Optional[PropagationCache] = None) -> QpModel:
    """One-off QP assembly for a sampled time tuple."""
    return Transcriber(problem, cache).assemble(times)

"""LTI propagation: matrix exponential, variation-of-constants operators, trajectories.

The state under a basis-parameterized control u(t) = alpha @ Psi(t) is affine in
the coefficient matrix:

    x(t) = exp(A t) x0 + M(t) vec(alpha),

where column (i*N + j) of M(t) is the convolution of basis function j through
input channel i.  M is evaluated by composite Gauss-Legendre quadrature with a
breakpoint cache so that queries at arbitrary t cost a single local panel.
"""

from dataclasses import dataclass

import numpy as np

from . import quadrature
from .basis import BasisSet
from .errors import ConstructionError, DomainError, NumericalError

# Pade-13 coefficients and the associated scaling threshold (1-norm).
_PADE13_B = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
)
_PADE13_THETA = 5.371920351148152

_TIME_EPS = 1e-12


@dataclass(frozen=True)
class LtiSystem:
    """x' = A x + B u with A (d x d) and B (d x m)."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ConstructionError("A must be square, got shape %s" % (A.shape,))
        if B.ndim != 2 or B.shape[0] != A.shape[0]:
            raise ConstructionError(
                "B must have %d rows, got shape %s" % (A.shape[0], (B.shape,))
            )
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
            raise ConstructionError("system matrices must be finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True)
class PropagationOperator:
    """exp(A t) and the coefficient-to-forced-response map M(t)."""

    time: float
    expAt: np.ndarray
    M: np.ndarray


def matrix_exponential(A: np.ndarray, t: float = 1.0) -> np.ndarray:
    """exp(A t) by scaling-and-squaring with the order-13 Pade approximant."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise DomainError("matrix exponential needs a square matrix")
    if not (np.all(np.isfinite(A)) and np.isfinite(t)):
        raise DomainError("non-finite input to matrix exponential")
    M = A * float(t)
    norm = np.linalg.norm(M, 1)
    squarings = 0
    if norm > _PADE13_THETA:
        squarings = int(np.ceil(np.log2(norm / _PADE13_THETA)))
        M = M / 2.0**squarings
    b = _PADE13_B
    ident = np.eye(M.shape[0])
    M2 = M @ M
    M4 = M2 @ M2
    M6 = M4 @ M2
    U = M @ (M6 @ (b[13] * M6 + b[11] * M4 + b[9] * M2)
             + b[7] * M6 + b[5] * M4 + b[3] * M2 + b[1] * ident)
    V = (M6 @ (b[12] * M6 + b[10] * M4 + b[8] * M2)
         + b[6] * M6 + b[4] * M4 + b[2] * M2 + b[0] * ident)
    R = np.linalg.solve(V - U, V + U)
    for _ in range(squarings):
        R = R @ R
    return R


class PropagationCache:
    """Precomputed propagation data for one (system, basis) pair.

    Breakpoints split [0, T] into the same panels used by the quadrature
    engine; the per-basis forced responses at the breakpoints are built once
    by a stable forward recursion.  A query at arbitrary t then needs only
    the partial panel [s_k, t].
    """

    def __init__(self, system: LtiSystem, basis: BasisSet):
        self.system = system
        self.basis = basis
        self.horizon = basis.horizon
        A, B = system.A, system.B
        d = system.n_states
        n = basis.n_funcs
        K = quadrature.panel_count(n)
        self.n_panels = K
        self.dt = self.horizon / K
        self._glx, self._glw = quadrature.panel_rule()

        # exp(A s_k) at the breakpoints.
        e_step = matrix_exponential(A, self.dt)
        self.exp_break = np.empty((K + 1, d, d))
        self.exp_break[0] = np.eye(d)
        for k in range(K):
            self.exp_break[k + 1] = e_step @ self.exp_break[k]

        # Node layout is identical in every panel, so the kernels
        # exp(A (s_{k+1} - tau_n)) are panel-independent.
        off = 0.5 * self.dt * (self._glx + 1.0)
        kernels = np.stack([matrix_exponential(A, self.dt - o) for o in off])
        wts = 0.5 * self.dt * self._glw
        self._off = off
        self._kernels = kernels
        self._wts = wts
        self._e_step = e_step

        nodes = (np.arange(K)[:, None] * self.dt + off[None, :]).ravel()
        psi = basis.sample(nodes).reshape(n, K, off.size)

        # Forced responses v_j(s_k) = int_0^{s_k} psi_j(tau) exp(A(s_k - tau)) dtau.
        self.v_break = np.zeros((K + 1, n, d, d))
        for k in range(K):
            local = np.einsum("jn,nab->jab", psi[:, k, :] * wts, kernels)
            self.v_break[k + 1] = np.einsum("ab,jbc->jac", e_step, self.v_break[k]) + local

        self._B = B
        self._A = A
        self._query_cache: dict = {}
        self._seg_cache: dict = {}
        self._seg_tables: dict = {}

    def _segment_table(self, a: float, k_needed: int):
        """Breakpoint recursion started at `a`: exp(A k dt) and the forced
        responses over [a, a + k dt], extended lazily to `k_needed` panels."""
        tab = self._seg_tables.get(a)
        if tab is None:
            d = self.system.n_states
            n = self.basis.n_funcs
            tab = ([np.eye(d)], [np.zeros((n, d, d))])
            self._seg_tables[a] = tab
        exps, vs = tab
        while len(exps) <= k_needed:
            k = len(exps) - 1
            tau = a + k * self.dt + self._off
            psi = self.basis.sample(tau)
            local = np.einsum("jn,nab->jab", psi * self._wts, self._kernels)
            vs.append(np.einsum("ab,jbc->jac", self._e_step, vs[k]) + local)
            exps.append(self._e_step @ exps[k])
        return tab

    def segment_operator(self, a: float, t: float):
        """exp(A (t-a)) and the forced-response map over [a, t].

        The pair satisfies x(t) = exp(A (t-a)) x(a) + M_seg vec(alpha) for
        the basis-parameterized control.  Used by the multiple-shooting
        transcription: over a short segment neither factor inherits the full
        exp(A T) growth, which keeps constraint rows well scaled even for
        unstable systems.
        """
        a, t = float(a), float(t)
        if t < a - _TIME_EPS:
            raise DomainError("segment end %g before start %g" % (t, a))
        key = (a, t)
        hit = self._seg_cache.get(key)
        if hit is not None:
            return hit
        d = self.system.n_states
        n = self.basis.n_funcs
        span = max(t - a, 0.0)
        if span <= _TIME_EPS:
            out = (np.eye(d), np.zeros((d, self.system.n_inputs * n)))
            self._seg_cache[key] = out
            return out
        A = self._A
        k = int(span / self.dt)
        delta = span - k * self.dt
        if delta < _TIME_EPS and k > 0:
            delta = 0.0
        exps, vs = self._segment_table(a, k)
        if delta > 0.0:
            e_delta = matrix_exponential(A, delta)
            expAt = e_delta @ exps[k]
            tau = a + k * self.dt + 0.5 * delta * (self._glx + 1.0)
            wts = 0.5 * delta * self._glw
            kernels = np.stack([matrix_exponential(A, t - s) for s in tau])
            psi = self.basis.sample(tau)
            W = (np.einsum("ab,jbc->jac", e_delta, vs[k])
                 + np.einsum("jn,nab->jab", psi * wts, kernels))
        else:
            expAt = exps[k].copy()
            W = vs[k]
        M = np.einsum("jab,bi->aij", W, self._B).reshape(
            d, self.system.n_inputs * n)
        if not np.all(np.isfinite(M)):
            raise NumericalError("propagation quadrature produced non-finite values")
        out = (expAt, M)
        self._seg_cache[key] = out
        return out

    def operator(self, t: float) -> PropagationOperator:
        """exp(A t) and M(t) at an arbitrary t in [0, horizon]."""
        t = float(t)
        if t < -_TIME_EPS or t > self.horizon * (1 + 1e-12) + _TIME_EPS:
            raise DomainError("time %g outside [0, %g]" % (t, self.horizon))
        t = min(max(t, 0.0), self.horizon)
        hit = self._query_cache.get(t)
        if hit is not None:
            return hit

        k = min(int(t / self.dt), self.n_panels)
        delta = t - k * self.dt
        if delta < _TIME_EPS and k > 0:
            delta = 0.0
        A = self._A
        if delta > 0.0:
            e_delta = matrix_exponential(A, delta)
            expAt = e_delta @ self.exp_break[k]
            tau = k * self.dt + 0.5 * delta * (self._glx + 1.0)
            wts = 0.5 * delta * self._glw
            kernels = np.stack([matrix_exponential(A, t - s) for s in tau])
            psi = self.basis.sample(tau)
            W = (np.einsum("ab,jbc->jac", e_delta, self.v_break[k])
                 + np.einsum("jn,nab->jab", psi * wts, kernels))
        else:
            expAt = self.exp_break[k].copy()
            W = self.v_break[k]

        M = np.einsum("jab,bi->aij", W, self._B).reshape(
            self.system.n_states, self.system.n_inputs * self.basis.n_funcs
        )
        if not np.all(np.isfinite(M)):
            raise NumericalError("propagation quadrature produced non-finite values")
        op = PropagationOperator(t, expAt, M)
        self._query_cache[t] = op
        return op


def propagation_operator(system: LtiSystem, basis: BasisSet, t: float) -> PropagationOperator:
    """One-off variant of :meth:`PropagationCache.operator`."""
    return PropagationCache(system, basis).operator(t)


def state_at(system, basis, x0, alpha, t, cache: PropagationCache = None) -> np.ndarray:
    """x(t) = exp(A t) x0 + M(t) vec(alpha)."""
    if cache is None:
        cache = PropagationCache(system, basis)
    op = cache.operator(t)
    vec = np.asarray(alpha, dtype=float).reshape(-1)
    return op.expAt @ np.asarray(x0, dtype=float) + op.M @ vec


def trajectory_on_grid(system, basis, x0, alpha, ts) -> np.ndarray:
    """States at the (uniform) grid `ts` by stepwise exact LTI propagation.

    Returns an array of shape (len(ts), d).  Used by the verifier and the
    trajectory exports, where thousands of grid points make per-query
    operators needlessly slow.
    """
    ts = np.asarray(ts, dtype=float)
    steps = np.diff(ts)
    if steps.size == 0:
        return np.asarray(x0, dtype=float)[None, :].copy()
    dt = steps[0]
    if np.max(np.abs(steps - dt)) > 1e-9 * max(dt, 1.0):
        raise DomainError("trajectory grid must be uniform")
    A, B = system.A, system.B
    glx, glw = quadrature.panel_rule()
    off = 0.5 * dt * (glx + 1.0)
    wts = 0.5 * dt * glw
    e_step = matrix_exponential(A, dt)
    kernels_B = np.stack([matrix_exponential(A, dt - o) @ B for o in off])

    nodes = (ts[:-1, None] + off[None, :]).ravel()
    psi = basis.sample(nodes)
    u = (np.asarray(alpha, dtype=float) @ psi).reshape(system.n_inputs, steps.size, off.size)
    forced = np.einsum("n,nam,mkn->ka", wts, kernels_B, u)

    out = np.empty((ts.size, system.n_states))
    out[0] = np.asarray(x0, dtype=float)
    for k in range(steps.size):
        out[k + 1] = e_step @ out[k] + forced[k]
    return out

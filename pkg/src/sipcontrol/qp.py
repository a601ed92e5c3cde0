"""Strictly convex QP solver for the sampled-constraint inner problem.

A Mehrotra predictor-corrector interior-point method on the full augmented
KKT system supplies a near-optimal iterate and an active-set guess; an
active-set polish step then solves the working-set KKT system essentially
exactly and certifies nonnegative multipliers.  The polish is what makes
the solver usable on unstable systems: constraint rows inherit the norm of
the state transition matrix (up to ~1e9 on the pendulum benchmark), so a
normalized residual of 1e-8 — the best any interior-point iteration
delivers on such degenerate row bundles — can be an O(1) violation in the
constraint's own units.  Active rows must therefore be satisfied to near
machine precision, which only an equality solve with iterative refinement
achieves.  Infeasibility is detected through a Farkas-type certificate
built from the diverging dual iterates.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .transcription import QpModel

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITER = "max_iter"
UNBOUNDED = "unbounded"

KKT_TOL = 1e-8
PINF_TOL = 1e-6
# Feasibility demanded in the constraint's original units (normalized
# residual times the stored row scale).
FEAS_ABS = 1e-6

_IPM_MAX_ITER = 60
_REG_DELTA = 1e-10
_REFINE_STEPS = 3
_POLISH_DELTA = 1e-12
_RANK_TOL = 1e-10
_STEP_FRACTION = 0.99


@dataclass
class QpSolution:
    alpha: np.ndarray           # (m, N) coefficient matrix
    objective: float            # value including the x0-dependent constant
    status: str
    kkt_residuals: Dict[str, float] = field(default_factory=dict)
    active_rows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    multipliers_in: np.ndarray = field(default_factory=lambda: np.zeros(0))
    multipliers_eq: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0

    @property
    def vec(self) -> np.ndarray:
        return self.alpha.reshape(-1)


def _scales(model, n_in, n_eq):
    si = model.scale_in if model.scale_in is not None and len(model.scale_in) \
        else np.ones(n_in)
    se = model.scale_eq if model.scale_eq is not None and len(model.scale_eq) \
        else np.ones(n_eq)
    return np.asarray(si, dtype=float), np.asarray(se, dtype=float)


def solve_qp(model: QpModel, warm_start: Optional[np.ndarray] = None,
             max_iter: int = _IPM_MAX_ITER) -> QpSolution:
    """Minimize v' H v + f' v + c subject to the model's rows.

    Deterministic; the minimizer is unique (strict convexity).  A warm start
    is accepted for interface compatibility, but the interior-point iteration
    always starts from its own least-squares point, so the result and the
    iterate path are warm-start independent by construction.
    """
    n = model.hessian.shape[0]
    P = 2.0 * model.hessian
    q = model.linear.astype(float)
    shape = (model.n_inputs, model.n_funcs)
    n_alpha = model.n_alpha or shape[0] * shape[1]

    def pack(x, status, kkt=None, active=None, z=None, y=None, iters=0):
        obj = float(x @ model.hessian @ x + model.linear @ x + model.constant)
        return QpSolution(
            alpha=x[:n_alpha].reshape(shape), objective=obj, status=status,
            kkt_residuals=kkt or {}, iterations=iters,
            active_rows=np.asarray(active if active is not None else [], dtype=int),
            multipliers_in=z if z is not None else np.zeros(model.G_in.shape[0]),
            multipliers_eq=y if y is not None else np.zeros(model.G_eq.shape[0]),
        )

    if model.infeasible_reason is not None:
        return pack(np.zeros(n), INFEASIBLE)

    G, h = model.G_in, model.h_in
    E, b = model.G_eq, model.h_eq
    n_in, n_eq = G.shape[0], E.shape[0]
    sc_in, sc_eq = _scales(model, n_in, n_eq)

    if n_in == 0:
        # purely (equality-)constrained: one exact KKT solve
        x, y_eq = _solve_equality_kkt(P, q, E, b)
        kkt = _kkt_residuals(P, q, G, h, E, b, x, np.zeros(0), y_eq)
        status = OPTIMAL if max(kkt.values()) <= KKT_TOL else MAX_ITER
        return pack(x, status, kkt, [], np.zeros(0), y_eq)

    # -- augmented KKT machinery -------------------------------------------
    dim = n + n_eq + n_in
    K = np.zeros((dim, dim))
    K[:n, :n] = P
    if n_eq:
        K[n:n + n_eq, :n] = E
        K[:n, n:n + n_eq] = E.T
    K[n + n_eq:, :n] = G
    K[:n, n + n_eq:] = G.T
    diag = np.arange(dim)

    def factor(w):
        K[n + n_eq + np.arange(n_in), n + n_eq + np.arange(n_in)] = -w
        Kr = K.copy()
        Kr[diag[:n], diag[:n]] += _REG_DELTA
        Kr[diag[n:], diag[n:]] -= _REG_DELTA
        return lu_factor(Kr)

    def refine(fac, rhs):
        sol = lu_solve(fac, rhs)
        for _ in range(_REFINE_STEPS):
            sol = sol + lu_solve(fac, rhs - K @ sol)
        return sol

    # starting point: least-squares KKT solve with unit scaling, then shift
    # the slack/multiplier estimates into the positive orthant
    fac = factor(np.ones(n_in))
    sol = refine(fac, np.concatenate([-q, b, h]))
    x = sol[:n]
    y = sol[n:n + n_eq]
    z_tilde = sol[n + n_eq:]
    s_tilde = -z_tilde
    shift = -np.min(s_tilde)
    s = s_tilde + (1.0 + shift) if shift >= 0 else s_tilde.copy()
    shift = -np.min(z_tilde)
    z = z_tilde + (1.0 + shift) if shift >= 0 else z_tilde.copy()

    status = MAX_ITER
    it = 0
    polish_attempts = 0
    kkt = _kkt_residuals(P, q, G, h, E, b, x, z, y)
    for it in range(1, max_iter + 1):
        r_dual = P @ x + q + G.T @ z + (E.T @ y if n_eq else 0.0)
        r_prim = G @ x + s - h
        r_eq = E @ x - b if n_eq else np.zeros(0)
        mu = float(s @ z) / n_in

        kkt = _kkt_residuals(P, q, G, h, E, b, x, z, y)
        if mu <= 1e-8 and polish_attempts < 8:
            polish_attempts += 1
            polished = _polish(P, q, G, h, E, b, x, z, s, sc_in)
            if polished is not None:
                x_p, z_p, y_p, kkt_p, feas = polished
                if max(kkt_p.values()) <= KKT_TOL and feas <= 10.0 * FEAS_ABS:
                    return pack(x_p, OPTIMAL, kkt_p, np.where(z_p > 0)[0],
                                z_p, y_p, it)

        # Farkas-type certificate from diverging duals
        ynorm = max(np.max(z, initial=0.0), np.max(np.abs(y), initial=0.0))
        if ynorm > 1e5:
            zn = z / ynorm
            yn = y / ynorm if n_eq else y
            resid = np.max(np.abs(G.T @ zn + (E.T @ yn if n_eq else 0.0)))
            gap = float(h @ zn + (b @ yn if n_eq else 0.0))
            if resid <= PINF_TOL and gap <= -PINF_TOL:
                return pack(x, INFEASIBLE, iters=it)

        try:
            fac = factor(s / z)
        except np.linalg.LinAlgError:
            break

        def kkt_step(rs):
            sol = refine(fac, np.concatenate([-r_dual, -r_eq, -r_prim + rs / z]))
            dx = sol[:n]
            dy = sol[n:n + n_eq]
            dz = sol[n + n_eq:]
            ds = -(rs + s * dz) / z
            return dx, dy, dz, ds

        # predictor
        dx, dy, dz, ds = kkt_step(s * z)
        a_aff = min(_max_step(s, ds), _max_step(z, dz))
        mu_aff = float((s + a_aff * ds) @ (z + a_aff * dz)) / n_in
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0

        # corrector
        dx, dy, dz, ds = kkt_step(s * z + ds * dz - sigma * mu)
        a = min(1.0, _STEP_FRACTION * min(_max_step(s, ds), _max_step(z, dz)))
        x = x + a * dx
        s = s + a * ds
        z = z + a * dz
        if n_eq:
            y = y + a * dy

    polished = _polish(P, q, G, h, E, b, x, z, s, sc_in)
    feas = _orig_feasibility(G, h, E, b, x, sc_in, sc_eq)
    if polished is not None:
        x_p, z_p, y_p, kkt_p, feas_p = polished
        if max(kkt_p.values()) <= max(kkt.values(), default=np.inf) or feas_p < feas:
            x, z, y, kkt, feas = x_p, z_p, y_p, kkt_p, feas_p

    if max(kkt.values()) <= KKT_TOL and feas <= 10.0 * FEAS_ABS:
        status = OPTIMAL
    else:
        status = MAX_ITER
    active = np.where(z > np.maximum(np.abs(h - G @ x), 1e-16))[0]
    return pack(x, status, kkt, active, z, y, it)


def _max_step(v, dv):
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, np.min(-v[neg] / dv[neg])))


def _solve_equality_kkt(P, q, E, b):
    n = P.shape[0]
    k = E.shape[0] if E is not None else 0
    if k == 0:
        return np.linalg.solve(P + 1e-14 * np.eye(n), -q), np.zeros(0)
    K = np.block([[P, E.T], [E, -1e-10 * np.eye(k)]])
    rhs = np.concatenate([-q, b])
    sol = np.linalg.solve(K, rhs)
    K0 = np.block([[P, E.T], [E, np.zeros((k, k))]])
    for _ in range(3):
        sol = sol + np.linalg.solve(K, rhs - K0 @ sol)
    return sol[:n], sol[n:]


def _orig_feasibility(G, h, E, b, x, sc_in, sc_eq):
    """Worst constraint violation measured in original (pre-scaling) units."""
    worst = 0.0
    if G.shape[0]:
        worst = float(np.max(np.maximum(G @ x - h, 0.0) * sc_in, initial=0.0))
    if E.shape[0]:
        worst = max(worst, float(np.max(np.abs(E @ x - b) * sc_eq, initial=0.0)))
    return worst


def _kkt_residuals(P, q, G, h, E, b, x, z, y):
    """Scaled stationarity / feasibility / complementarity residuals."""
    grad = P @ x + q
    if G.shape[0]:
        grad = grad + G.T @ z
    if E.shape[0]:
        grad = grad + E.T @ y
    sd = max(1.0, np.max(np.abs(P @ x), initial=0.0), np.max(np.abs(q), initial=0.0),
             np.max(np.abs(G.T @ z), initial=0.0) if G.shape[0] else 0.0)
    dual = float(np.max(np.abs(grad), initial=0.0) / sd)
    primal = 0.0
    comp = 0.0
    if G.shape[0]:
        sp = max(1.0, float(np.max(np.abs(h), initial=0.0)))
        slack = h - G @ x
        primal = float(max(0.0, np.max(-slack, initial=0.0))) / sp
        sc = max(1.0, float(np.max(z, initial=0.0)))
        comp = float(np.max(np.abs(z * slack), initial=0.0)) / sc
    if E.shape[0]:
        sp_eq = max(1.0, float(np.max(np.abs(b), initial=0.0)))
        primal = max(primal, float(np.max(np.abs(E @ x - b), initial=0.0)) / sp_eq)
    return {"primal": primal, "dual": dual, "complementarity": comp}


def _select_prioritized(rows, E, rel_tol: float = _RANK_TOL):
    """Indices (into rows) of a numerically independent row subset.

    Rows must be unit-normalized and already sorted by priority (most
    important first); a Gram-Schmidt sweep keeps each row whose component
    orthogonal to the equality rows and the rows kept so far exceeds
    rel_tol.  Sampled time tuples routinely produce bundles of nearly
    identical rows; members below the threshold would make the reduced KKT
    system singular, and the priority order guarantees the kept member of
    each bundle is the binding one (for near-duplicate rows the tightest
    right-hand side dominates the rest).
    """
    from scipy.linalg import qr

    n = rows.shape[1]
    if E.shape[0]:
        Qe, _ = qr(E.T, mode="economic")
        Q = Qe
    else:
        Q = np.zeros((n, 0))
    kept = []
    for i, row in enumerate(rows):
        v = row - Q @ (Q.T @ row)
        v = v - Q @ (Q.T @ v)
        nv = float(np.linalg.norm(v))
        if nv > rel_tol:
            kept.append(i)
            Q = np.hstack([Q, (v / nv)[:, None]])
    return np.asarray(kept, dtype=int)


def _refined_kkt_solve(P, q, A_act, b_act, n, ka):
    """Working-set KKT solve, refined with extended-precision residuals.

    The working set can be ill-conditioned (near-duplicate rows survive the
    rank filter at separations down to _RANK_TOL), so residuals are
    accumulated in long double; refinement stops once they stall.
    """
    rhs = np.concatenate([-q, b_act])
    K0 = np.block([[P, A_act.T], [A_act, np.zeros((ka, ka))]])
    Kr = K0.copy()
    ii = np.arange(n, n + ka)
    Kr[ii, ii] -= _POLISH_DELTA
    fac = lu_factor(Kr)
    sol = lu_solve(fac, rhs)
    K0_ld = K0.astype(np.longdouble)
    rhs_ld = rhs.astype(np.longdouble)
    prev = np.inf
    for _ in range(10):
        resid = np.asarray(rhs_ld - K0_ld @ sol.astype(np.longdouble),
                           dtype=float)
        norm = float(np.max(np.abs(resid), initial=0.0))
        if norm >= 0.5 * prev or norm == 0.0:
            break
        prev = norm
        sol = sol + lu_solve(fac, resid)
    return sol


def _nnls_multipliers(P, q, G_act, E, x):
    """Nonnegative multipliers certifying stationarity at x.

    The unconstrained KKT multipliers are ill-determined when the working
    set is nearly dependent (arbitrary components along the near-null space,
    including large wrong-signed ones), so the clean certificate comes from
    a tiny nonnegative least-squares fit instead.
    """
    from scipy.optimize import nnls

    target = -(P @ x + q)
    cols = [G_act.T]
    if E.shape[0]:
        cols += [E.T, -E.T]
    C = np.hstack(cols)
    try:
        w, _ = nnls(C, target)
    except RuntimeError:
        return None
    k = G_act.shape[0]
    nu = w[:k]
    y = w[k:k + E.shape[0]] - w[k + E.shape[0]:] if E.shape[0] else np.zeros(0)
    return nu, y


def _polish(P, q, G, h, E, b, x0, z, s, sc_in, max_passes: int = 200):
    """Exact solve on the active set guessed from the interior-point iterate.

    Each pass selects an independent subset of the candidate rows in order
    of current violation (measured in original units), solves the reduced
    KKT system with extended-precision refinement, then exchanges:
    wrong-signed multipliers drop their rows, and violated rows are added.
    The violation-first selection order is what makes near-duplicate row
    bundles safe: the kept representative is the binding member, so the
    dropped ones are satisfied automatically.  On a repeated working set
    the exchange falls back to the lowest index (Bland-style), which breaks
    degenerate cycles.  Returns (x, z, y, kkt, worst original-units
    violation), or None if no pass produces a clean solve.
    """
    n = P.shape[0]
    n_in = G.shape[0]
    n_eq = E.shape[0]
    active = set(int(i) for i in np.where(z > s)[0])
    # per-row normalized add threshold equivalent to FEAS_ABS original units
    add_tol = np.maximum(1e-14, FEAS_ABS / sc_in)
    seen = set()
    bland = False
    x_p = x0.copy()
    best = None

    for _ in range(max_passes):
        cand = np.array(sorted(active), dtype=int)
        if cand.size:
            order = np.argsort(-(G[cand] @ x_p - h[cand]) * sc_in[cand],
                               kind="stable")
            cand = cand[order]
            idx = cand[_select_prioritized(G[cand], E)]
        else:
            idx = np.zeros(0, dtype=int)
        key = frozenset(int(i) for i in idx)
        if key in seen:
            bland = True
        seen.add(key)

        k = idx.size
        A_act = np.vstack([G[idx], E]) if n_eq else G[idx]
        b_act = np.concatenate([h[idx], b]) if n_eq else h[idx]
        try:
            sol = _refined_kkt_solve(P, q, A_act, b_act, n, k + n_eq)
        except np.linalg.LinAlgError:
            return best
        x_p = sol[:n]
        nu = sol[n:n + k]

        neg = np.where(nu < -1e-7 * max(1.0, np.max(np.abs(nu), initial=0.0)))[0]
        if neg.size:
            if bland:
                active.discard(int(idx[neg[0]]))
            else:
                for j in neg:
                    active.discard(int(idx[j]))
            continue
        resid = G @ x_p - h
        viol = np.where(resid > add_tol)[0]
        grow = np.array([r for r in viol if r not in active], dtype=int)
        if grow.size:
            if bland:
                r = grow[0]
            else:
                r = grow[np.argmax(resid[grow] * sc_in[grow])]
            active.add(int(r))
            continue
        if viol.size and not bland:
            # violated rows are active but were dropped by the selection;
            # the next pass reselects with them at the top of the priority
            # order
            continue

        fitted = _nnls_multipliers(P, q, G[idx], E, x_p) if k else \
            (np.zeros(0), sol[n + k:])
        if fitted is None:
            z_p = np.zeros(n_in)
            z_p[idx] = np.maximum(nu, 0.0)
            y_p = sol[n + k:]
        else:
            z_p = np.zeros(n_in)
            z_p[idx] = fitted[0]
            y_p = fitted[1]
        kkt = _kkt_residuals(P, q, G, h, E, b, x_p, z_p, y_p)
        feas = _orig_feasibility(G, h, E, b, x_p, sc_in, np.ones(n_eq))
        result = (x_p, z_p, y_p, kkt, feas)
        if best is None or feas < best[4]:
            best = result
        if not viol.size or bland:
            return best
    return best

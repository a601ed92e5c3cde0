"""Problem data model: costs, polytopic constraint sets, horizon, validation."""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .basis import BasisSet
from .dynamics import LtiSystem
from .errors import ConstructionError

PSD_TOL = 1e-10
PD_TOL = 1e-10
SYM_TOL = 1e-10


@dataclass(frozen=True)
class CostSpec:
    """Quadratic cost: running x'Qx + u'Ru, terminal x'Pf x."""

    Q: np.ndarray
    R: np.ndarray
    Pf: np.ndarray

    def __post_init__(self):
        for name in ("Q", "R", "Pf"):
            m = np.atleast_2d(np.asarray(getattr(self, name), dtype=float))
            if m.shape[0] != m.shape[1]:
                raise ConstructionError("%s must be square" % name)
            object.__setattr__(self, name, m)


@dataclass(frozen=True)
class Polytope:
    """{z : H z <= h} intersected with optional equality rows Heq z = heq."""

    H: np.ndarray
    h: np.ndarray
    Heq: Optional[np.ndarray] = None
    heq: Optional[np.ndarray] = None

    def __post_init__(self):
        has_ineq = self.H is not None and np.size(self.H)
        H = np.atleast_2d(np.asarray(self.H, dtype=float)) if has_ineq else np.zeros((0, 0))
        h = np.atleast_1d(np.asarray(self.h, dtype=float)) if has_ineq else np.zeros(0)
        if H.shape[0] != h.shape[0]:
            raise ConstructionError("polytope H and h row counts differ")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "h", h)
        if self.Heq is not None:
            Heq = np.atleast_2d(np.asarray(self.Heq, dtype=float))
            heq = np.atleast_1d(np.asarray(self.heq, dtype=float))
            if Heq.shape[0] != heq.shape[0]:
                raise ConstructionError("polytope Heq and heq row counts differ")
            object.__setattr__(self, "Heq", Heq)
            object.__setattr__(self, "heq", heq)

    @property
    def n_ineq(self) -> int:
        return self.H.shape[0]

    @property
    def n_eq(self) -> int:
        return 0 if self.Heq is None else self.Heq.shape[0]

    @property
    def equality_only(self) -> bool:
        return self.n_ineq == 0 and self.n_eq > 0

    def max_violation(self, z: np.ndarray) -> float:
        """Largest signed residual (positive means violated)."""
        worst = -np.inf
        if self.n_ineq:
            worst = max(worst, float(np.max(self.H @ z - self.h)))
        if self.n_eq:
            worst = max(worst, float(np.max(np.abs(self.Heq @ z - self.heq))))
        return worst

    @staticmethod
    def box(lower, upper) -> "Polytope":
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        d = lower.size
        eye = np.eye(d)
        return Polytope(np.vstack([eye, -eye]), np.concatenate([upper, -lower]))

    @staticmethod
    def point(z) -> "Polytope":
        z = np.atleast_1d(np.asarray(z, dtype=float))
        return Polytope(np.zeros((0, z.size)), np.zeros(0), np.eye(z.size), z)


@dataclass(frozen=True)
class OcpProblem:
    """A full finite-horizon instance over basis-parameterized controls."""

    system: LtiSystem
    basis: BasisSet
    cost: CostSpec
    state_set: Polytope
    terminal_set: Polytope
    control_lower: np.ndarray
    control_upper: np.ndarray
    x0: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.control_lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.control_upper, dtype=float))
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        if lo.size != self.system.n_inputs or hi.size != self.system.n_inputs:
            raise ConstructionError("control box size must match the number of inputs")
        if x0.size != self.system.n_states:
            raise ConstructionError("x0 size must match the number of states")
        object.__setattr__(self, "control_lower", lo)
        object.__setattr__(self, "control_upper", hi)
        object.__setattr__(self, "x0", x0)

    @property
    def horizon(self) -> float:
        return self.basis.horizon

    @property
    def n_var(self) -> int:
        """Dimension of the coefficient matrix and of the sampled time tuple."""
        return self.system.n_inputs * self.basis.n_funcs

    def with_x0(self, x0) -> "OcpProblem":
        return OcpProblem(self.system, self.basis, self.cost, self.state_set,
                          self.terminal_set, self.control_lower, self.control_upper, x0)


@dataclass
class ValidationReport:
    ok: bool = True
    errors: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    slater: str = "not probed"
    slater_alpha: Optional[np.ndarray] = None

    def reject(self, msg: str):
        self.ok = False
        self.errors.append(msg)


def _sym_check(name, m, report, strict=False):
    if np.max(np.abs(m - m.T), initial=0.0) > SYM_TOL * max(1.0, np.max(np.abs(m), initial=0.0)):
        report.reject("%s must be symmetric" % name)
        return
    eig = np.linalg.eigvalsh(0.5 * (m + m.T))
    low = float(eig[0]) if eig.size else 0.0
    if strict and low < PD_TOL:
        report.reject("%s must be positive definite (smallest eigenvalue %.3e)" % (name, low))
    elif not strict and low < -PSD_TOL:
        report.reject("%s must be positive semidefinite (smallest eigenvalue %.3e)" % (name, low))


def validate(p: OcpProblem, slater_grid: int = 64, probe_slater: bool = True) -> ValidationReport:
    """Check the data assumptions and probe strict feasibility.

    Deterministic and side-effect free.  The Slater probe solves a phase-1 LP
    over a uniform time grid; failure to find a strictly feasible coefficient
    matrix is flagged, not fatal (the probe is best-effort, not a certificate).
    """
    report = ValidationReport()
    d = p.system.n_states

    _sym_check("Q", p.cost.Q, report)
    _sym_check("Pf", p.cost.Pf, report)
    _sym_check("R", p.cost.R, report, strict=True)
    if p.cost.Q.shape[0] != d or p.cost.Pf.shape[0] != d:
        report.reject("Q and Pf must be %d x %d" % (d, d))
    if p.cost.R.shape[0] != p.system.n_inputs:
        report.reject("R must be %d x %d" % (p.system.n_inputs, p.system.n_inputs))

    if np.any(p.control_upper - p.control_lower <= 0):
        report.reject("control box must have nonempty interior")

    zero = np.zeros(d)
    if p.state_set.n_ineq and np.any(p.state_set.H @ zero >= p.state_set.h):
        report.reject("state set must contain 0 in its interior")
    if p.terminal_set.equality_only:
        report.warnings.append("interior check skipped for equality-only terminal set")
    elif p.terminal_set.n_ineq and np.any(p.terminal_set.H @ zero >= p.terminal_set.h):
        report.reject("terminal set must contain 0 in its interior")

    if report.ok and p.state_set.n_ineq:
        _check_containment(p, report)

    if report.ok and probe_slater:
        _slater_probe(p, slater_grid, report)

    return report


def _check_containment(p: OcpProblem, report: ValidationReport):
    """Terminal set must sit inside the state set (LP support check per row)."""
    from scipy.optimize import linprog

    t = p.terminal_set
    if t.equality_only and t.Heq.shape[0] == t.Heq.shape[1]:
        # A point given by a square equality system: just test membership.
        z = np.linalg.lstsq(t.Heq, t.heq, rcond=None)[0]
        if p.state_set.max_violation(z) > 1e-9:
            report.reject("terminal set is not contained in the state set")
        return
    for a, b in zip(p.state_set.H, p.state_set.h):
        res = linprog(-a, A_ub=t.H if t.n_ineq else None, b_ub=t.h if t.n_ineq else None,
                      A_eq=t.Heq, b_eq=t.heq, bounds=[(None, None)] * a.size,
                      method="highs")
        if res.status == 3:  # unbounded support -> certainly escapes the state set
            report.reject("terminal set is not contained in the state set")
            return
        if res.success and -res.fun > b + 1e-9:
            report.reject("terminal set is not contained in the state set")
            return


def _slater_probe(p: OcpProblem, grid_n: int, report: ValidationReport):
    from scipy.optimize import linprog

    from .transcription import Transcriber

    tr = Transcriber(p)
    model = tr.assemble(np.linspace(0.0, p.horizon, grid_n))
    n = model.G_in.shape[1]
    # Maximize the margin s with G v + s <= g, equality rows exact.
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_ub = np.hstack([model.G_in, np.ones((model.G_in.shape[0], 1))])
    A_eq = b_eq = None
    if model.G_eq.shape[0]:
        A_eq = np.hstack([model.G_eq, np.zeros((model.G_eq.shape[0], 1))])
        b_eq = model.h_eq
    res = linprog(c, A_ub=A_ub, b_ub=model.h_in, A_eq=A_eq, b_eq=b_eq,
                  bounds=[(None, None)] * n + [(None, 1.0)], method="highs")
    if res.success and res.x[-1] > 1e-9:
        report.slater = "verified on %d-point grid (margin %.3e)" % (grid_n, res.x[-1])
        report.slater_alpha = res.x[:model.n_alpha].reshape(
            p.system.n_inputs, p.basis.n_funcs)
    else:
        report.slater = "Slater unverified"

"""Problem-definition files: a strict TOML schema for the solver inputs.

The loader maps a document onto (OcpProblem, SaConfig, optional MpcConfig,
output options) and rejects unknown keys with dotted-path diagnostics, so a
typo never silently falls back to a default.  The writer materializes the
bundled benchmarks into the same format.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import tomli

from .basis import custom_basis, fourier_basis
from .dynamics import LtiSystem
from .errors import ValidationError
from .mpc import MpcConfig
from .outer import SaConfig
from .problem import CostSpec, OcpProblem, Polytope

_TOP_KEYS = {"system", "horizon", "x0", "cost", "basis", "constraints",
             "sa", "mpc", "outputs"}


@dataclass
class OutputOptions:
    directory: Optional[str] = None
    plots: bool = True
    grid: int = 10000


@dataclass
class LoadedProblem:
    problem: OcpProblem
    sa: SaConfig
    mpc: Optional[MpcConfig]
    outputs: OutputOptions


def _reject_unknown(table: dict, allowed: set, path: str) -> None:
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ValidationError(
            "unknown key%s %s under '%s' (allowed: %s)"
            % ("s" if len(unknown) > 1 else "",
               ", ".join(repr(k) for k in unknown), path,
               ", ".join(sorted(allowed))))


def _matrix(table: dict, key: str, path: str, required: bool = True):
    if key not in table:
        if required:
            raise ValidationError("missing required key '%s.%s'" % (path, key))
        return None
    try:
        M = np.asarray(table[key], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError("'%s.%s' is not a numeric array: %s"
                              % (path, key, exc)) from exc
    if M.ndim != 2:
        raise ValidationError("'%s.%s' must be a nested (row-major) array of "
                              "rows, got %d dimension(s)" % (path, key, M.ndim))
    return M


def _vector(table: dict, key: str, path: str, required: bool = True):
    if key not in table:
        if required:
            raise ValidationError("missing required key '%s.%s'" % (path, key))
        return None
    try:
        v = np.asarray(table[key], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError("'%s.%s' is not a numeric array: %s"
                              % (path, key, exc)) from exc
    if v.ndim != 1:
        raise ValidationError("'%s.%s' must be a flat numeric array"
                              % (path, key))
    return v


def _polytope(table: dict, path: str) -> Polytope:
    _reject_unknown(table, {"H", "h", "Heq", "heq"}, path)
    H = _matrix(table, "H", path, required=False)
    h = _vector(table, "h", path, required=False)
    Heq = _matrix(table, "Heq", path, required=False)
    heq = _vector(table, "heq", path, required=False)
    if (H is None) != (h is None):
        raise ValidationError("'%s' needs H and h together" % path)
    if (Heq is None) != (heq is None):
        raise ValidationError("'%s' needs Heq and heq together" % path)
    return Polytope(H=H, h=h, Heq=Heq, heq=heq)


def parse_problem(doc: dict, source: str = "<memory>") -> LoadedProblem:
    """Map a parsed TOML document onto solver objects (strict schema)."""
    _reject_unknown(doc, _TOP_KEYS, source)
    for key in ("system", "horizon", "x0", "cost", "basis", "constraints"):
        if key not in doc:
            raise ValidationError("missing required section or key '%s' in %s"
                                  % (key, source))

    sys_tab = doc["system"]
    _reject_unknown(sys_tab, {"A", "B"}, "system")
    system = LtiSystem(_matrix(sys_tab, "A", "system"),
                       _matrix(sys_tab, "B", "system"))

    horizon = doc["horizon"]
    if not isinstance(horizon, (int, float)) or horizon <= 0:
        raise ValidationError("'horizon' must be a positive number")
    horizon = float(horizon)

    x0 = _vector(doc, "x0", source)

    cost_tab = doc["cost"]
    _reject_unknown(cost_tab, {"Q", "R", "Pf"}, "cost")
    d = system.n_states
    Q = _matrix(cost_tab, "Q", "cost", required=False)
    Pf = _matrix(cost_tab, "Pf", "cost", required=False)
    cost = CostSpec(Q=np.zeros((d, d)) if Q is None else Q,
                    R=_matrix(cost_tab, "R", "cost"),
                    Pf=np.zeros((d, d)) if Pf is None else Pf)

    basis_tab = doc["basis"]
    _reject_unknown(basis_tab, {"kind", "n", "scale_by_horizon"}, "basis")
    kind = basis_tab.get("kind", "fourier")
    n_funcs = basis_tab.get("n")
    if not isinstance(n_funcs, int) or n_funcs < 1:
        raise ValidationError("'basis.n' must be a positive integer")
    if kind != "fourier":
        raise ValidationError("'basis.kind' %r is not supported in problem "
                              "files (use \"fourier\")" % kind)
    basis = fourier_basis(n_funcs, horizon,
                          scale_by_horizon=basis_tab.get("scale_by_horizon", True))

    cons_tab = doc["constraints"]
    _reject_unknown(cons_tab, {"state", "terminal", "control_lower",
                               "control_upper"}, "constraints")
    state_set = _polytope(cons_tab.get("state", {}), "constraints.state")
    terminal_set = _polytope(cons_tab.get("terminal", {}), "constraints.terminal")
    lower = _vector(cons_tab, "control_lower", "constraints")
    upper = _vector(cons_tab, "control_upper", "constraints")

    problem = OcpProblem(system=system, basis=basis, cost=cost,
                         state_set=state_set, terminal_set=terminal_set,
                         control_lower=lower, control_upper=upper, x0=x0)

    sa_tab = doc.get("sa", {})
    _reject_unknown(sa_tab, {"iterations", "seed", "initial_temperature",
                             "cooling_factor", "proposal_sigma0",
                             "sigma_decay", "parallel_candidates"}, "sa")
    sa = SaConfig(**sa_tab)

    mpc = None
    if "mpc" in doc:
        mpc_tab = doc["mpc"]
        _reject_unknown(mpc_tab, {"resample_interval", "loop_steps",
                                  "iterations", "clf_samples"}, "mpc")
        step_sa = sa if "iterations" not in mpc_tab else SaConfig(
            **{**sa_tab, "iterations": mpc_tab["iterations"]})
        mpc = MpcConfig(resample_interval=mpc_tab["resample_interval"],
                        loop_steps=mpc_tab["loop_steps"], sa=step_sa,
                        clf_samples=mpc_tab.get("clf_samples", 0))

    out_tab = doc.get("outputs", {})
    _reject_unknown(out_tab, {"directory", "plots", "grid"}, "outputs")
    outputs = OutputOptions(directory=out_tab.get("directory"),
                            plots=out_tab.get("plots", True),
                            grid=out_tab.get("grid", 10000))
    if not isinstance(outputs.grid, int) or outputs.grid < 2:
        raise ValidationError("'outputs.grid' must be an integer >= 2")

    return LoadedProblem(problem=problem, sa=sa, mpc=mpc, outputs=outputs)


def load_problem_file(path: str) -> LoadedProblem:
    try:
        with open(path, "rb") as fh:
            doc = tomli.load(fh)
    except FileNotFoundError as exc:
        raise ValidationError("problem file not found: %s" % path) from exc
    except tomli.TOMLDecodeError as exc:
        raise ValidationError("cannot parse %s: %s" % (path, exc)) from exc
    return parse_problem(doc, source=path)


def _fmt_matrix(M) -> str:
    rows = ", ".join(
        "[" + ", ".join("%.17g" % v for v in row) + "]" for row in np.atleast_2d(M))
    return "[" + rows + "]"


def _fmt_vector(v) -> str:
    return "[" + ", ".join("%.17g" % x for x in np.asarray(v)) + "]"


def write_problem_file(path: str, problem: OcpProblem, sa: SaConfig,
                       mpc: Optional[MpcConfig] = None) -> None:
    """Serialize a problem (plus solver configs) into the TOML schema."""
    # top-level keys must precede the first table header
    lines = ["horizon = %.17g" % problem.horizon,
             "x0 = " + _fmt_vector(problem.x0),
             "",
             "[system]",
             "A = " + _fmt_matrix(problem.system.A),
             "B = " + _fmt_matrix(problem.system.B),
             "",
             "[cost]",
             "Q = " + _fmt_matrix(problem.cost.Q),
             "R = " + _fmt_matrix(problem.cost.R),
             "Pf = " + _fmt_matrix(problem.cost.Pf),
             "",
             "[basis]",
             'kind = "fourier"',
             "n = %d" % problem.basis.n_funcs,
             "scale_by_horizon = %s"
             % ("true" if problem.basis.scale_by_horizon else "false"),
             "",
             "[constraints]",
             "control_lower = " + _fmt_vector(problem.control_lower),
             "control_upper = " + _fmt_vector(problem.control_upper)]
    for name, poly in (("state", problem.state_set),
                       ("terminal", problem.terminal_set)):
        block = []
        if poly.n_ineq:
            block += ["H = " + _fmt_matrix(poly.H), "h = " + _fmt_vector(poly.h)]
        if poly.n_eq:
            block += ["Heq = " + _fmt_matrix(poly.Heq),
                      "heq = " + _fmt_vector(poly.heq)]
        if block:
            lines += ["", "[constraints.%s]" % name] + block

    lines += ["", "[sa]",
              "iterations = %d" % sa.iterations,
              "seed = %d" % sa.seed,
              "cooling_factor = %.17g" % sa.cooling_factor,
              "proposal_sigma0 = %.17g" % sa.proposal_sigma0,
              "sigma_decay = %.17g" % sa.sigma_decay]
    if sa.initial_temperature is not None:
        lines.append("initial_temperature = %.17g" % sa.initial_temperature)
    if sa.parallel_candidates != 1:
        lines.append("parallel_candidates = %d" % sa.parallel_candidates)

    if mpc is not None:
        lines += ["", "[mpc]",
                  "resample_interval = %.17g" % mpc.resample_interval,
                  "loop_steps = %d" % mpc.loop_steps,
                  "iterations = %d" % mpc.sa.iterations]
        if mpc.clf_samples:
            lines.append("clf_samples = %d" % mpc.clf_samples)

    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")

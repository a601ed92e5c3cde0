"""Command-line interface.

Four commands share one reporting pipeline:

* ``solve``   -- run the solver on a problem file
* ``bench``   -- run a bundled benchmark (and materialize its problem file)
* ``verify``  -- re-check exported coefficients on a dense grid
* ``mpc``     -- run the receding-horizon closed loop

Every run writes delimited artifacts (trajectory.csv, history.csv,
coefficients.csv, summary.json) into the output directory and, unless
disabled, renders SVG figures next to them.  Exit codes: 0 success, 2 bad
input, 3 infeasible, 4 numerical failure.
"""

import json
import os
import platform
import sys
import time

import click
import numpy as np

from . import __version__, benchmarks
from .dynamics import trajectory_on_grid
from .errors import (ConstructionError, DomainError, InfeasibleError,
                     NumericalError, OracleError, SipControlError,
                     ValidationError)
from .mpc import MpcConfig, simulate_mpc
from .outer import SaConfig, run_sa
from .probfile import load_problem_file, write_problem_file
from .problem import OcpProblem, validate
from .verify import oracle_collocation, verify_dense

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERICAL = 4

_TRAJECTORY_POINTS = 2000  # intervals; the grid has 2001 nodes
_FMT = "%.17g"


def _fail(code: int, message: str) -> None:
    click.echo("error: %s" % message, err=True)
    sys.exit(code)


def _guarded(fn):
    """Map package exceptions onto the documented exit codes."""
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ValidationError, ConstructionError, DomainError) as exc:
            _fail(EXIT_INPUT, str(exc))
        except InfeasibleError as exc:
            _fail(EXIT_INFEASIBLE, str(exc))
        except (NumericalError, OracleError) as exc:
            _fail(EXIT_NUMERICAL, str(exc))
        except SipControlError as exc:
            _fail(EXIT_NUMERICAL, str(exc))
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _provenance() -> dict:
    import scipy

    return {
        "package": "sipcontrol",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "platform": platform.platform(),
    }


def _write_summary(out_dir: str, payload: dict) -> None:
    payload = dict(payload)
    payload["provenance"] = _provenance()
    path = os.path.join(out_dir, "summary.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_trajectory(out_dir: str, p: OcpProblem, alpha: np.ndarray) -> np.ndarray:
    ts = np.linspace(0.0, p.horizon, _TRAJECTORY_POINTS + 1)
    X = trajectory_on_grid(p.system, p.basis, p.x0, alpha, ts)
    U = alpha @ p.basis.sample(ts)
    header = ",".join(["t"] + ["x%d" % (i + 1) for i in range(X.shape[1])]
                      + ["u%d" % (j + 1) for j in range(U.shape[0])])
    data = np.column_stack([ts, X, U.T])
    np.savetxt(os.path.join(out_dir, "trajectory.csv"), data,
               fmt=_FMT, delimiter=",", header=header, comments="")
    return ts


def _write_coefficients(out_dir: str, alpha: np.ndarray) -> None:
    np.savetxt(os.path.join(out_dir, "coefficients.csv"),
               np.atleast_2d(alpha), fmt=_FMT, delimiter=",")


def _write_history(out_dir: str, history) -> None:
    path = os.path.join(out_dir, "history.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("iteration,objective,accepted,temperature\n")
        for n, G, accepted, temp in history:
            fh.write("%d,%s,%d,%s\n" % (n, _FMT % G, int(bool(accepted)),
                                        _FMT % temp))


def _report_run(out_dir: str, p: OcpProblem, rep, grid: int, plots: bool,
                oracle: bool, extra: dict) -> None:
    os.makedirs(out_dir, exist_ok=True)
    ts = _write_trajectory(out_dir, p, rep.best_alpha)
    _write_coefficients(out_dir, rep.best_alpha)
    _write_history(out_dir, rep.history)

    violation = verify_dense(p, rep.best_alpha, grid_n=grid)
    oracle_value = None
    if oracle:
        oracle_value, _ = oracle_collocation(p)

    summary = {
        "objective": rep.G_max,
        "best_times": [float(t) for t in rep.best_xi],
        "qp_stats": rep.qp_stats,
        "sa": {
            "iterations": rep.config.iterations,
            "seed": rep.config.seed,
            "cooling_factor": rep.config.cooling_factor,
            "proposal_sigma0": rep.config.proposal_sigma0,
            "sigma_decay": rep.config.sigma_decay,
        },
        "verification": violation.to_dict(),
        "oracle_value": oracle_value,
        "wall_time": rep.wall_time,
    }
    summary.update(extra)
    _write_summary(out_dir, summary)

    if plots:
        from . import plots as figs

        X = trajectory_on_grid(p.system, p.basis, p.x0, rep.best_alpha, ts)
        U = rep.best_alpha @ p.basis.sample(ts)
        figs.save_state_figure(os.path.join(out_dir, "states.svg"), p, ts, X)
        figs.save_control_figure(os.path.join(out_dir, "controls.svg"), p, ts, U)
        figs.save_history_figure(os.path.join(out_dir, "history.svg"),
                                 rep.history, oracle_value)

    click.echo("objective %.9g  (worst dense-grid state violation %.3g)"
               % (rep.G_max, violation.max_state_violation))
    click.echo("artifacts written to %s" % out_dir)


def _sa_override(sa: SaConfig, iters, seed) -> SaConfig:
    kwargs = {
        "iterations": sa.iterations if iters is None else iters,
        "seed": sa.seed if seed is None else seed,
        "initial_temperature": sa.initial_temperature,
        "cooling_factor": sa.cooling_factor,
        "proposal_sigma0": sa.proposal_sigma0,
        "sigma_decay": sa.sigma_decay,
        "parallel_candidates": sa.parallel_candidates,
    }
    return SaConfig(**kwargs)


@click.group()
@click.version_option(__version__)
def main() -> None:
    """Finite-horizon LTI optimal control with for-all-time constraints."""


@main.command()
@click.argument("problem_file", type=click.Path())
@click.option("--seed", type=int, default=None, help="Override the annealing seed.")
@click.option("--iters", type=int, default=None, help="Override the iteration count.")
@click.option("--grid", type=int, default=None, help="Dense verification grid size.")
@click.option("--out-dir", type=click.Path(), default=None,
              help="Artifact directory (default: from the problem file or ./sipcontrol_out).")
@click.option("--oracle", is_flag=True, help="Also solve the collocation oracle.")
@click.option("--plots/--no-plots", default=None, help="Render SVG figures.")
@_guarded
def solve(problem_file, seed, iters, grid, out_dir, oracle, plots):
    """Solve the problem described by PROBLEM_FILE."""
    loaded = load_problem_file(problem_file)
    validate(loaded.problem)
    sa = _sa_override(loaded.sa, iters, seed)
    rep = run_sa(loaded.problem, sa)
    out = out_dir or loaded.outputs.directory or "sipcontrol_out"
    use_plots = loaded.outputs.plots if plots is None else plots
    use_grid = grid if grid is not None else loaded.outputs.grid
    _report_run(out, loaded.problem, rep, use_grid, use_plots, oracle,
                {"command": "solve", "problem_file": os.path.abspath(problem_file)})


@main.command()
@click.argument("name", type=click.Choice(sorted(benchmarks.BENCHMARKS)))
@click.option("--basis", type=int, default=None, help="Number of basis functions.")
@click.option("--seed", type=int, default=None, help="Override the annealing seed.")
@click.option("--iters", type=int, default=None, help="Override the iteration count.")
@click.option("--grid", type=int, default=10000, help="Dense verification grid size.")
@click.option("--out-dir", type=click.Path(), default=None,
              help="Artifact directory (default: ./sipcontrol_out/NAME).")
@click.option("--oracle", is_flag=True, help="Also solve the collocation oracle.")
@click.option("--plots/--no-plots", default=True, help="Render SVG figures.")
@_guarded
def bench(name, basis, seed, iters, grid, out_dir, oracle, plots):
    """Run the bundled benchmark NAME and write its problem file alongside."""
    p = benchmarks.BENCHMARKS[name]() if basis is None \
        else benchmarks.BENCHMARKS[name](basis)
    sa = benchmarks.default_sa_config(name, iterations=iters)
    if seed is not None:
        sa = _sa_override(sa, None, seed)
    out = out_dir or os.path.join("sipcontrol_out", name)
    os.makedirs(out, exist_ok=True)
    write_problem_file(os.path.join(out, "problem.toml"), p, sa)
    rep = run_sa(p, sa)
    _report_run(out, p, rep, grid, plots, oracle,
                {"command": "bench", "benchmark": name})


@main.command()
@click.argument("problem_file", type=click.Path())
@click.argument("coefficients", type=click.Path())
@click.option("--grid", type=int, default=10000, help="Dense verification grid size.")
@click.option("--out-dir", type=click.Path(), default=None,
              help="Artifact directory (default: print only).")
@click.option("--certified", is_flag=True,
              help="Add the derivative-inflated inter-sample bound.")
@_guarded
def verify(problem_file, coefficients, grid, out_dir, certified):
    """Re-check exported COEFFICIENTS against PROBLEM_FILE on a dense grid."""
    loaded = load_problem_file(problem_file)
    p = loaded.problem
    validate(p)
    try:
        alpha = np.loadtxt(coefficients, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ValidationError("cannot read coefficients from %s: %s"
                              % (coefficients, exc)) from exc
    expected = (p.system.n_inputs, p.basis.n_funcs)
    if alpha.shape != expected:
        raise ValidationError("coefficient matrix must have shape %s, got %s"
                              % (expected, alpha.shape))
    report = verify_dense(p, alpha, grid_n=grid, certified=certified)
    click.echo(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "verification.json"), "w",
                  encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    if report.max_state_violation > 0 or report.max_control_violation > 0:
        sys.exit(EXIT_INFEASIBLE)


@main.command()
@click.argument("problem_file", type=click.Path())
@click.option("--seed", type=int, default=None, help="Override the annealing seed.")
@click.option("--iters", type=int, default=None,
              help="Override the per-step iteration count.")
@click.option("--out-dir", type=click.Path(), default=None,
              help="Artifact directory (default: ./sipcontrol_out).")
@click.option("--plots/--no-plots", default=True, help="Render SVG figures.")
@_guarded
def mpc(problem_file, seed, iters, out_dir, plots):
    """Run the receding-horizon loop configured in PROBLEM_FILE."""
    loaded = load_problem_file(problem_file)
    validate(loaded.problem)
    if loaded.mpc is None:
        raise ValidationError("problem file has no [mpc] section")
    cfg = loaded.mpc
    if seed is not None or iters is not None:
        cfg = MpcConfig(resample_interval=cfg.resample_interval,
                        loop_steps=cfg.loop_steps,
                        sa=_sa_override(cfg.sa, iters, seed),
                        terminal_feedback=cfg.terminal_feedback,
                        clf_samples=cfg.clf_samples)
    t0 = time.perf_counter()
    trace = simulate_mpc(loaded.problem, cfg)
    wall = time.perf_counter() - t0

    out = out_dir or loaded.outputs.directory or "sipcontrol_out"
    os.makedirs(out, exist_ok=True)
    header = ",".join(["t"] + ["x%d" % (i + 1)
                               for i in range(trace.states.shape[1])])
    np.savetxt(os.path.join(out, "closed_loop.csv"),
               np.column_stack([trace.times, trace.states]),
               fmt=_FMT, delimiter=",", header=header, comments="")
    summary = {
        "command": "mpc",
        "problem_file": os.path.abspath(problem_file),
        "status": trace.status,
        "steps": len(trace.step_alphas),
        "values": trace.values,
        "stage_costs": trace.stage_costs,
        "descent_residuals": trace.residuals,
        "descent_pass_fraction": trace.descent_pass_fraction(),
        "clf_pass_fraction": trace.clf_pass_fraction,
        "final_state_norm": float(np.linalg.norm(trace.states[-1])),
        "wall_time": wall,
    }
    _write_summary(out, summary)
    if plots:
        from . import plots as figs

        figs.save_closed_loop_figure(os.path.join(out, "closed_loop.svg"),
                                     trace.times, trace.states)
    click.echo("closed loop %s: %d steps, descent pass fraction %.2f"
               % (trace.status, len(trace.step_alphas),
                  trace.descent_pass_fraction()))
    click.echo("artifacts written to %s" % out)
    if trace.status != "completed":
        sys.exit(EXIT_INFEASIBLE)


if __name__ == "__main__":
    main()

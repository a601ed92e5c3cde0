"""Outer global search: simulated annealing over the constraint time tuple.

Each iteration proposes a perturbed time tuple, evaluates the sampled-QP
value through the transcriber, and keeps the running maximum together with
its minimizing coefficient matrix.  The random walk itself moves by a
Metropolis rule (maximization orientation); the reported solution always
comes from the best-so-far record, never from the walk state.
"""

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import ConstructionError, InfeasibleError
from .problem import OcpProblem
from .qp import OPTIMAL, solve_qp
from .transcription import Transcriber

THREADS_ENV = "SIPCONTROL_THREADS"


@dataclass(frozen=True)
class SaConfig:
    iterations: int = 250
    seed: int = 0
    initial_temperature: Optional[float] = None  # None: 0.1*|G(xi0)| with floor 1e-3
    cooling_factor: float = 0.97
    proposal_sigma0: float = 0.1  # fraction of the horizon
    sigma_decay: float = 0.995
    parallel_candidates: int = 1

    def __post_init__(self):
        if self.iterations < 0:
            raise ConstructionError("iterations must be nonnegative")
        if not (0.0 < self.cooling_factor < 1.0):
            raise ConstructionError("cooling_factor must lie in (0, 1)")
        if self.initial_temperature is not None and self.initial_temperature <= 0:
            raise ConstructionError("initial_temperature must be positive")
        if self.proposal_sigma0 <= 0 or not (0.0 < self.sigma_decay <= 1.0):
            raise ConstructionError("bad proposal schedule")
        if self.parallel_candidates < 1:
            raise ConstructionError("parallel_candidates must be >= 1")


@dataclass
class SolveReport:
    best_xi: np.ndarray
    best_alpha: np.ndarray
    G_max: float
    history: List[Tuple[int, float, bool, float]] = field(default_factory=list)
    qp_stats: dict = field(default_factory=dict)
    wall_time: float = 0.0
    config: Optional[SaConfig] = None


def propose(times: np.ndarray, sigma: float, horizon: float,
            rng: np.random.Generator) -> np.ndarray:
    """Gaussian per-coordinate perturbation, reflected at the [0, T] boundary."""
    cand = times + rng.normal(0.0, sigma, size=times.shape) if sigma > 0 else times.copy()
    folded = np.mod(cand, 2.0 * horizon)
    return np.where(folded > horizon, 2.0 * horizon - folded, folded)


def _pool_size() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def run_sa(problem: OcpProblem, cfg: SaConfig,
           transcriber: Optional[Transcriber] = None,
           initial_xi: Optional[np.ndarray] = None) -> SolveReport:
    """Best-so-far simulated annealing maximization of the sampled-QP value.

    Fully reproducible for a fixed seed.  Infeasible samples are rejected
    outright (a sampled relaxation of a feasible problem should never be
    infeasible, so they indicate numerics) and logged in ``qp_stats``.
    """
    start = time.perf_counter()
    tr = transcriber or Transcriber(problem)
    horizon = problem.horizon
    n_var = problem.n_var
    rng = np.random.default_rng(cfg.seed)

    if initial_xi is not None:
        xi = np.clip(np.asarray(initial_xi, dtype=float), 0.0, horizon)
        if xi.size != n_var:
            raise ConstructionError("initial xi must have length %d" % n_var)
    else:
        xi = np.linspace(0.0, horizon, n_var)

    def evaluate(sample, warm):
        sol = solve_qp(tr.assemble(sample), warm_start=warm)
        return sol

    n_solves = 0
    n_infeasible = 0
    total_qp_iters = 0

    sol0 = evaluate(xi, None)
    n_solves += 1
    total_qp_iters += sol0.iterations
    feasible0 = sol0.status == OPTIMAL
    if not feasible0:
        n_infeasible += 1

    history: List[Tuple[int, float, bool, float]] = []
    G_cur = sol0.objective if feasible0 else -np.inf
    G_max = G_cur
    best_xi, best_alpha = xi.copy(), sol0.alpha.copy()
    current_xi = xi
    warm = sol0.vec if feasible0 else None
    any_feasible = feasible0

    temp = cfg.initial_temperature
    if temp is None:
        temp = max(0.1 * abs(G_cur), 1e-3) if feasible0 else 1e-3
    history.append((0, sol0.objective if feasible0 else float("nan"), feasible0, temp))

    pool_size = min(_pool_size(), cfg.parallel_candidates)
    pool = ThreadPoolExecutor(pool_size) if pool_size > 1 else None
    try:
        for n in range(1, cfg.iterations + 1):
            sigma = cfg.proposal_sigma0 * horizon * cfg.sigma_decay**n
            cands = [propose(current_xi, sigma, horizon, rng)
                     for _ in range(cfg.parallel_candidates)]
            if pool is not None:
                sols = list(pool.map(lambda c: evaluate(c, warm), cands))
            else:
                sols = [evaluate(c, warm) for c in cands]
            n_solves += len(sols)
            total_qp_iters += sum(s.iterations for s in sols)
            feas = [(c, s) for c, s in zip(cands, sols) if s.status == OPTIMAL]
            n_infeasible += len(sols) - len(feas)

            if not feas:
                history.append((n, float("nan"), False, temp))
                temp *= cfg.cooling_factor
                continue
            any_feasible = True
            cand_xi, cand_sol = max(feas, key=lambda cs: cs[1].objective)
            G_n = cand_sol.objective

            accept = G_n >= G_cur or rng.random() < np.exp(
                min(0.0, (G_n - G_cur) / max(temp, 1e-300)))
            if accept:
                current_xi = cand_xi
                G_cur = G_n
                warm = cand_sol.vec
            if G_n >= G_max:
                G_max = G_n
                best_xi = cand_xi.copy()
                best_alpha = cand_sol.alpha.copy()
            history.append((n, G_n, accept, temp))
            temp *= cfg.cooling_factor
    finally:
        if pool is not None:
            pool.shutdown()

    if not any_feasible:
        raise InfeasibleError("no feasible sample found in %d iterations"
                              % cfg.iterations)

    return SolveReport(
        best_xi=best_xi,
        best_alpha=best_alpha,
        G_max=G_max,
        history=history,
        qp_stats={
            "solves": n_solves,
            "infeasible": n_infeasible,
            "mean_qp_iterations": total_qp_iters / max(n_solves, 1),
        },
        wall_time=time.perf_counter() - start,
        config=cfg,
    )

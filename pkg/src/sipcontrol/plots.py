"""Figure rendering for run reports (SVG files next to the CSV output).

All figures use the non-interactive matplotlib backend so the CLI works in
headless environments.
"""

from typing import Optional, Sequence

import matplotlib
import numpy as np

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .problem import OcpProblem  # noqa: E402


def save_state_figure(path: str, p: OcpProblem, ts: np.ndarray,
                      X: np.ndarray) -> None:
    """States versus time, with each state-box constraint line overlaid."""
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    for i in range(X.shape[1]):
        ax.plot(ts, X[:, i], label="x%d" % (i + 1), linewidth=1.4)
    if p.state_set.n_ineq:
        # draw a level line for every pure single-state bound row
        for row, bound in zip(p.state_set.H, p.state_set.h):
            nz = np.nonzero(row)[0]
            if nz.size == 1:
                ax.axhline(bound / row[nz[0]], color="k", linestyle="--",
                           linewidth=0.8, alpha=0.6)
    ax.set_xlabel("t")
    ax.set_ylabel("state")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def save_control_figure(path: str, p: OcpProblem, ts: np.ndarray,
                        U: np.ndarray) -> None:
    """Controls versus time with the box bounds."""
    fig, ax = plt.subplots(figsize=(7.0, 3.6))
    for j in range(U.shape[0]):
        ax.plot(ts, U[j], label="u%d" % (j + 1), linewidth=1.4)
    for j in range(p.system.n_inputs):
        ax.axhline(p.control_upper[j], color="k", linestyle="--",
                   linewidth=0.8, alpha=0.6)
        ax.axhline(p.control_lower[j], color="k", linestyle="--",
                   linewidth=0.8, alpha=0.6)
    ax.set_xlabel("t")
    ax.set_ylabel("control")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def save_history_figure(path: str, history: Sequence,
                        oracle_value: Optional[float] = None) -> None:
    """Best-so-far objective over annealing iterations."""
    its = [n for n, G, _, _ in history if np.isfinite(G)]
    vals = [G for _, G, _, _ in history if np.isfinite(G)]
    best = np.maximum.accumulate(vals) if vals else []
    fig, ax = plt.subplots(figsize=(7.0, 3.6))
    ax.plot(its, vals, ".", markersize=2.5, alpha=0.4, label="sampled value")
    if len(best):
        ax.plot(its, best, "-", linewidth=1.6, label="best so far")
    if oracle_value is not None:
        ax.axhline(oracle_value, color="k", linestyle="--", linewidth=0.8,
                   label="collocation oracle")
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def save_closed_loop_figure(path: str, times: np.ndarray,
                            states: np.ndarray) -> None:
    """Closed-loop state sequence at the resampling boundaries."""
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    for i in range(states.shape[1]):
        ax.plot(times, states[:, i], "o-", markersize=3,
                label="x%d" % (i + 1), linewidth=1.2)
    ax.set_xlabel("t")
    ax.set_ylabel("state")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)

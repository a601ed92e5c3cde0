"""Bundled benchmark problems.

Bryson-Denham uses the data of the classical statement (analytic optimum 8
for the bound 1/9).  The cart-pendulum benchmark reproduces the published
linearization; the pendulum moment of inertia, gravity, control bound and
terminal set are recorded defaults (the original experiment leaves them
unspecified), so it targets qualitative behavior: feasibility for all time
and stabilization to a small terminal ball.
"""

import numpy as np

from .basis import fourier_basis
from .dynamics import LtiSystem
from .outer import SaConfig
from .problem import CostSpec, OcpProblem, Polytope

GRAVITY = 9.81

# Pendulum defaults not stated with the published data.
PENDULUM_CONTROL_BOUND = 10.0
PENDULUM_TERMINAL_BOX = 0.02
PENDULUM_STATE_MARGIN = 0.98  # sampled enforcement keeps a guard band inside eps
PENDULUM_EPS = (0.5, 0.07, 0.5, 0.1)


def bryson_denham(n_basis: int = 51, bound: float = 1.0 / 9.0,
                  control_limit: float = 20.0) -> OcpProblem:
    """Double integrator, cost int u^2, path bound x1 <= 1/9, x(1) = (0, -1)."""
    system = LtiSystem([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]])
    d = 2
    return OcpProblem(
        system=system,
        basis=fourier_basis(n_basis, 1.0),
        cost=CostSpec(np.zeros((d, d)), [[1.0]], np.zeros((d, d))),
        state_set=Polytope([[1.0, 0.0]], [bound]),
        terminal_set=Polytope.point([0.0, -1.0]),
        control_lower=[-control_limit],
        control_upper=[control_limit],
        x0=[0.0, 1.0],
    )


def pendulum_matrices():
    m0, M, l = 0.2, 3.0, 1.5
    J0 = m0 * l**2 / 3.0
    p = m0 + M - m0**2 * l**2 / (J0 + m0 * l**2)
    k = m0 * GRAVITY * l / ((J0 + m0 * l**2) * p)
    A = np.array([
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, -k * m0 * l, 0.0, 0.0],
        [0.0, k * (m0 + M), 0.0, 0.0],
    ])
    B = np.array([[0.0], [0.0], [1.0 / p], [-m0 * l / ((J0 + m0 * l**2) * p)]])
    return A, B


def pendulum(n_basis: int = 51, horizon: float = 10.0,
             eps=PENDULUM_EPS, margin: float = PENDULUM_STATE_MARGIN,
             control_limit: float = PENDULUM_CONTROL_BOUND,
             terminal_box: float = PENDULUM_TERMINAL_BOX) -> OcpProblem:
    """Inverted pendulum on a cart, linearized about the upright position.

    The enforced state box is eps shrunk by ``margin`` so that the finitely
    sampled constraints leave room for inter-sample excursions within eps.
    """
    A, B = pendulum_matrices()
    eps = np.asarray(eps, dtype=float)
    enforced = margin * eps
    return OcpProblem(
        system=LtiSystem(A, B),
        basis=fourier_basis(n_basis, horizon),
        cost=CostSpec(np.zeros((4, 4)), [[1.0]], np.zeros((4, 4))),
        state_set=Polytope.box(-enforced, enforced),
        terminal_set=Polytope.box(-terminal_box * np.ones(4), terminal_box * np.ones(4)),
        control_lower=[-control_limit],
        control_upper=[control_limit],
        x0=[0.0, 0.035, 0.0, 0.0],
    )


BENCHMARKS = {
    "bryson-denham": bryson_denham,
    "pendulum": pendulum,
}


def default_sa_config(name: str, iterations=None, seed: int = 1) -> SaConfig:
    if name == "bryson-denham":
        return SaConfig(iterations=iterations or 250, seed=seed)
    if name == "pendulum":
        return SaConfig(iterations=iterations or 500, seed=seed)
    raise KeyError(name)

import numpy as np
import pytest

from sipcontrol.benchmarks import bryson_denham, pendulum
from sipcontrol.qp import (INFEASIBLE, KKT_TOL, OPTIMAL, QpSolution, solve_qp)
from sipcontrol.transcription import QpModel, Transcriber


def _random_model(rng, n=8, n_in=12, n_eq=2):
    A = rng.normal(size=(n, n))
    H = A @ A.T / n + np.eye(n)
    f = rng.normal(size=n)
    G = rng.normal(size=(n_in, n))
    G /= np.linalg.norm(G, axis=1, keepdims=True)
    h = rng.uniform(0.3, 1.0, size=n_in)  # 0 strictly feasible
    E = rng.normal(size=(n_eq, n))
    E /= np.linalg.norm(E, axis=1, keepdims=True)
    return QpModel(hessian=H, linear=f, constant=0.0,
                   G_in=G, h_in=h, G_eq=E, h_eq=np.zeros(n_eq),
                   tags=["row"] * (n_in + n_eq), n_inputs=1, n_funcs=n,
                   n_alpha=n, scale_in=np.ones(n_in), scale_eq=np.ones(n_eq))


def _cvxpy_reference(model):
    import cvxpy as cp

    n = model.hessian.shape[0]
    x = cp.Variable(n)
    cons = [model.G_in @ x <= model.h_in]
    if model.G_eq.shape[0]:
        cons.append(model.G_eq @ x == model.h_eq)
    prob = cp.Problem(cp.Minimize(cp.quad_form(x, model.hessian)
                                  + model.linear @ x), cons)
    prob.solve(solver=cp.CLARABEL)
    return float(prob.value) + model.constant


def test_matches_external_solver_on_random_instances():
    rng = np.random.default_rng(0)
    for _ in range(10):
        model = _random_model(rng)
        sol = solve_qp(model)
        assert sol.status == OPTIMAL
        ref = _cvxpy_reference(model)
        assert sol.objective == pytest.approx(ref, rel=1e-6, abs=1e-8)


def test_kkt_residuals_below_tolerance():
    rng = np.random.default_rng(1)
    for _ in range(5):
        sol = solve_qp(_random_model(rng))
        assert max(sol.kkt_residuals.values()) <= KKT_TOL


def test_benchmark_instances_solve_to_tolerance():
    for p, n_times in ((bryson_denham(11), 40), (pendulum(11), 60)):
        tr = Transcriber(p)
        sol = solve_qp(tr.assemble(np.linspace(0.0, p.horizon, n_times)))
        assert sol.status == OPTIMAL
        assert max(sol.kkt_residuals.values()) <= KKT_TOL


def test_warm_start_independence():
    rng = np.random.default_rng(2)
    model = _random_model(rng)
    base = solve_qp(model)
    for _ in range(3):
        warm = rng.normal(size=model.hessian.shape[0])
        again = solve_qp(model, warm_start=warm)
        assert np.max(np.abs(again.vec - base.vec)) <= 1e-7
        assert again.objective == pytest.approx(base.objective, abs=1e-9)


def test_determinism():
    rng = np.random.default_rng(3)
    model = _random_model(rng)
    a = solve_qp(model)
    b = solve_qp(model)
    assert np.array_equal(a.vec, b.vec)
    assert a.objective == b.objective


def test_infeasible_detection():
    n = 4
    G = np.vstack([np.eye(n)[:1], -np.eye(n)[:1]])
    model = QpModel(hessian=np.eye(n), linear=np.zeros(n), constant=0.0,
                    G_in=G, h_in=np.array([-1.0, -1.0]),  # x1 <= -1 and x1 >= 1
                    G_eq=np.zeros((0, n)), h_eq=np.zeros(0),
                    tags=["a", "b"], n_inputs=1, n_funcs=n, n_alpha=n,
                    scale_in=np.ones(2), scale_eq=np.zeros(0))
    sol = solve_qp(model)
    assert sol.status == INFEASIBLE


def test_flagged_infeasible_model_short_circuits():
    n = 3
    model = QpModel(hessian=np.eye(n), linear=np.zeros(n), constant=0.0,
                    G_in=np.zeros((0, n)), h_in=np.zeros(0),
                    G_eq=np.zeros((0, n)), h_eq=np.zeros(0),
                    tags=[], n_inputs=1, n_funcs=n, n_alpha=n,
                    infeasible_reason="constant row violated")
    assert solve_qp(model).status == INFEASIBLE


def test_equality_only_model():
    n = 3
    E = np.array([[1.0, 0.0, 0.0]])
    model = QpModel(hessian=np.eye(n), linear=np.zeros(n), constant=0.0,
                    G_in=np.zeros((0, n)), h_in=np.zeros(0),
                    G_eq=E, h_eq=np.array([0.5]),
                    tags=["eq"], n_inputs=1, n_funcs=n, n_alpha=n,
                    scale_in=np.zeros(0), scale_eq=np.ones(1))
    sol = solve_qp(model)
    assert sol.status == OPTIMAL
    assert sol.vec == pytest.approx([0.5, 0.0, 0.0])


def test_active_rows_and_multipliers_reported():
    rng = np.random.default_rng(4)
    model = _random_model(rng, n_eq=0)
    sol = solve_qp(model)
    assert isinstance(sol, QpSolution)
    slack = model.h_in - model.G_in @ sol.vec
    for i in sol.active_rows:
        assert slack[i] <= 1e-6
    assert np.all(sol.multipliers_in >= -1e-9)


def test_pendulum_real_unit_feasibility():
    # normalized residuals must translate into small violations in the
    # constraints' own units even for the unstable benchmark
    from sipcontrol.dynamics import state_at

    p = pendulum(11)
    tr = Transcriber(p)
    times = np.linspace(0.0, 10.0, 60)
    sol = solve_qp(tr.assemble(times))
    assert sol.status == OPTIMAL
    # enforced rows, evaluated by exact propagation in the original units
    worst = -np.inf
    for t in times:
        x = state_at(p.system, p.basis, p.x0, sol.alpha, float(t), tr.cache)
        worst = max(worst, float(np.max(p.state_set.H @ x - p.state_set.h)))
    assert worst <= 1e-5
    xT = state_at(p.system, p.basis, p.x0, sol.alpha, p.horizon, tr.cache)
    assert p.terminal_set.max_violation(xT) <= 1e-5

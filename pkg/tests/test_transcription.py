import numpy as np
import pytest

from sipcontrol.benchmarks import bryson_denham, pendulum
from sipcontrol.dynamics import state_at
from sipcontrol.errors import ConstructionError
from sipcontrol.transcription import (TimeSampleVector, Transcriber,
                                      assemble_qp, cost_quadratic)
from sipcontrol import quadrature


def test_time_sample_clamping():
    xi = TimeSampleVector.clamped([-0.5, 0.3, 2.0], 1.0)
    assert np.allclose(xi.times, [0.0, 0.3, 1.0])


def test_cost_matches_quadrature():
    p = bryson_denham(11)
    H, f, c = cost_quadratic(p)
    rng = np.random.default_rng(0)
    alpha = rng.normal(size=(1, 11))
    vec = alpha.reshape(-1)
    model_cost = vec @ H @ vec + f @ vec + c
    pts, wts = quadrature.composite_nodes(0.0, 1.0, 64)
    u = (alpha @ p.basis.sample(pts))[0]
    ref = float(np.sum(wts * u * u))
    assert model_cost == pytest.approx(ref, rel=1e-10)


def test_rows_are_unit_normalized_with_scales():
    p = pendulum(11)
    model = Transcriber(p).assemble(np.linspace(0.0, 10.0, 40))
    norms = np.linalg.norm(model.G_in, axis=1)
    assert np.allclose(norms, 1.0, atol=1e-12)
    assert model.scale_in.shape == (model.G_in.shape[0],)
    assert np.all(model.scale_in > 0)


def test_multiple_shooting_rows_stay_moderate():
    # single shooting would carry exp(A*10) ~ 1e9 into the rows
    p = pendulum(11)
    tr = Transcriber(p)
    assert tr.n_segments > 1
    model = tr.assemble(np.linspace(0.0, 10.0, 40))
    assert np.max(model.scale_in) < 1e3
    assert np.max(model.scale_eq) < 1e3


def test_knot_equalities_reproduce_the_trajectory():
    p = pendulum(11)
    tr = Transcriber(p)
    model = tr.assemble(np.linspace(0.0, 10.0, 25))
    rng = np.random.default_rng(1)
    alpha = 0.01 * rng.normal(size=(1, 11))
    # solve the (square, well-conditioned in sequence) link system for knots
    na, d, J = tr.n_alpha, p.system.n_states, tr.n_segments
    v = np.zeros(na + J * d)
    v[:na] = alpha.reshape(-1)
    x = np.asarray(p.x0, dtype=float)
    for j in range(J):
        eA, C = tr._links[j]
        x = eA @ x + C @ v[:na]
        v[na + j * d:na + (j + 1) * d] = x
    # equality rows must vanish on this vector (a random alpha lets the
    # unstable modes blow up, so the check is relative to the state size)
    resid = np.max(np.abs(model.G_eq @ v - model.h_eq))
    assert resid < 1e-12 * max(1.0, np.max(np.abs(v)))
    # and the final knot is x(T)
    ref = state_at(p.system, p.basis, p.x0, alpha, p.horizon, tr.cache)
    assert np.allclose(v[-d:], ref, rtol=1e-8, atol=1e-8)


def test_state_rows_evaluate_the_true_state():
    p = pendulum(11)
    tr = Transcriber(p)
    t_probe = 6.3
    model = tr.assemble([t_probe])
    rng = np.random.default_rng(2)
    alpha = 0.01 * rng.normal(size=(1, 11))
    na, d, J = tr.n_alpha, p.system.n_states, tr.n_segments
    v = np.zeros(na + J * d)
    v[:na] = alpha.reshape(-1)
    x = np.asarray(p.x0, dtype=float)
    for j in range(J):
        eA, C = tr._links[j]
        x = eA @ x + C @ v[:na]
        v[na + j * d:na + (j + 1) * d] = x
    x_probe = state_at(p.system, p.basis, p.x0, alpha, t_probe, tr.cache)
    rows = [i for i, tag in enumerate(model.tags) if tag.startswith("state@6.3")]
    res = (model.G_in[rows] @ v - model.h_in[rows]) * model.scale_in[rows]
    ref = p.state_set.H @ x_probe - p.state_set.h
    assert np.allclose(res, ref, atol=1e-8)


def test_control_rows_tagged_and_infeasible_zero_row_detected():
    p = bryson_denham(11)
    model = assemble_qp(p, [0.25, 0.75])
    assert any(tag.startswith("control@") for tag in model.tags)
    assert model.infeasible_reason is None


def test_check_sample_length():
    p = bryson_denham(11)
    tr = Transcriber(p)
    with pytest.raises(ConstructionError):
        tr.check_sample_length(np.zeros(4))
    assert tr.check_sample_length(np.zeros(11)).size == 11


def test_set_x0_updates_linear_term():
    p = pendulum(11)
    tr = Transcriber(p)
    m0 = tr.assemble([1.0])
    tr.set_x0([0.0, 0.01, 0.0, 0.0])
    m1 = tr.assemble([1.0])
    # x0 enters the first-segment right-hand sides and the first link row
    assert not np.allclose(m0.h_eq, m1.h_eq)

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.linalg import expm as scipy_expm

from sipcontrol.basis import fourier_basis
from sipcontrol.dynamics import (LtiSystem, PropagationCache,
                                 matrix_exponential, state_at,
                                 trajectory_on_grid)
from sipcontrol.errors import ConstructionError, DomainError


def test_matrix_exponential_matches_scipy():
    rng = np.random.default_rng(0)
    for _ in range(5):
        A = rng.normal(size=(4, 4))
        t = rng.uniform(0.1, 3.0)
        assert np.allclose(matrix_exponential(A, t), scipy_expm(A * t),
                           rtol=1e-12, atol=1e-12)


def test_matrix_exponential_double_integrator_exact():
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    E = matrix_exponential(A, 2.5)
    assert np.allclose(E, [[1.0, 2.5], [0.0, 1.0]], atol=1e-15)


def test_system_shape_validation():
    with pytest.raises(ConstructionError):
        LtiSystem([[0.0, 1.0]], [[1.0]])
    with pytest.raises(ConstructionError):
        LtiSystem([[0.0]], [[1.0], [0.0]])
    with pytest.raises(ConstructionError):
        LtiSystem([[np.inf]], [[1.0]])


def test_state_matches_ode_integration():
    rng = np.random.default_rng(1)
    A = rng.normal(size=(3, 3))
    B = rng.normal(size=(3, 2))
    system = LtiSystem(A, B)
    basis = fourier_basis(5, 2.0)
    alpha = rng.normal(size=(2, 5))
    x0 = rng.normal(size=3)

    def rhs(t, x):
        u = alpha @ basis.evaluate(min(t, 2.0))
        return A @ x + B @ u

    for t in (0.37, 1.0, 2.0):
        ref = solve_ivp(rhs, (0.0, t), x0, rtol=1e-12, atol=1e-12).y[:, -1]
        got = state_at(system, basis, x0, alpha, t)
        assert np.allclose(got, ref, rtol=1e-8, atol=1e-8)


def test_operator_queries_cached_and_bounded():
    system = LtiSystem([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]])
    basis = fourier_basis(3, 1.0)
    cache = PropagationCache(system, basis)
    op = cache.operator(0.5)
    assert cache.operator(0.5) is op
    with pytest.raises(DomainError):
        cache.operator(1.5)


def test_segment_operator_composes_to_global():
    rng = np.random.default_rng(2)
    A = rng.normal(size=(3, 3))
    system = LtiSystem(A, rng.normal(size=(3, 1)))
    basis = fourier_basis(7, 2.0)
    cache = PropagationCache(system, basis)
    alpha = rng.normal(size=(1, 7))
    x0 = rng.normal(size=3)
    a, t = 0.8, 1.7
    eA, Ms = cache.segment_operator(a, t)
    x_a = state_at(system, basis, x0, alpha, a, cache)
    x_t = eA @ x_a + Ms @ alpha.reshape(-1)
    ref = state_at(system, basis, x0, alpha, t, cache)
    assert np.allclose(x_t, ref, rtol=1e-10, atol=1e-10)


def test_segment_operator_zero_span_is_identity():
    system = LtiSystem([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]])
    cache = PropagationCache(system, fourier_basis(3, 1.0))
    eA, Ms = cache.segment_operator(0.25, 0.25)
    assert np.allclose(eA, np.eye(2))
    assert np.allclose(Ms, 0.0)


def test_trajectory_on_grid_matches_state_at():
    rng = np.random.default_rng(3)
    system = LtiSystem([[0.0, 1.0], [-1.0, -0.2]], [[0.0], [1.0]])
    basis = fourier_basis(5, 1.0)
    alpha = rng.normal(size=(1, 5))
    x0 = np.array([0.3, -0.1])
    ts = np.linspace(0.0, 1.0, 11)
    X = trajectory_on_grid(system, basis, x0, alpha, ts)
    cache = PropagationCache(system, basis)
    for k, t in enumerate(ts):
        assert np.allclose(X[k], state_at(system, basis, x0, alpha, t, cache),
                           rtol=1e-10, atol=1e-12)


def test_trajectory_grid_must_be_uniform():
    system = LtiSystem([[0.0]], [[1.0]])
    basis = fourier_basis(1, 1.0)
    with pytest.raises(DomainError):
        trajectory_on_grid(system, basis, [0.0], [[1.0]], [0.0, 0.1, 0.5])

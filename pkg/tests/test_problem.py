import numpy as np
import pytest

from sipcontrol.basis import fourier_basis
from sipcontrol.benchmarks import bryson_denham, pendulum
from sipcontrol.dynamics import LtiSystem
from sipcontrol.errors import ConstructionError
from sipcontrol.problem import CostSpec, OcpProblem, Polytope, validate


def _simple(cost=None, state=None, terminal=None):
    system = LtiSystem([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]])
    return OcpProblem(
        system=system,
        basis=fourier_basis(5, 1.0),
        cost=cost or CostSpec(np.zeros((2, 2)), [[1.0]], np.zeros((2, 2))),
        state_set=state if state is not None else Polytope.box([-2, -2], [2, 2]),
        terminal_set=terminal if terminal is not None else Polytope.box([-1, -1], [1, 1]),
        control_lower=[-5.0],
        control_upper=[5.0],
        x0=[0.1, 0.0],
    )


def test_polytope_box_and_point():
    box = Polytope.box([-1.0, -2.0], [1.0, 2.0])
    assert box.n_ineq == 4 and box.n_eq == 0
    assert box.max_violation(np.array([0.5, 0.0])) <= 0
    assert box.max_violation(np.array([1.5, 0.0])) == pytest.approx(0.5)
    pt = Polytope.point([0.0, -1.0])
    assert pt.equality_only
    assert pt.max_violation(np.array([0.0, -1.0])) == pytest.approx(0.0)


def test_polytope_accepts_none_blocks():
    p = Polytope(H=None, h=None)
    assert p.n_ineq == 0 and p.n_eq == 0


def test_polytope_shape_mismatch():
    with pytest.raises(ConstructionError):
        Polytope([[1.0, 0.0]], [1.0, 2.0])


def test_validate_accepts_benchmarks():
    for p in (bryson_denham(11), pendulum(11)):
        report = validate(p)
        assert report.ok, report.errors
        assert report.slater.startswith("verified")


def test_validate_rejects_asymmetric_cost():
    cost = CostSpec([[1.0, 0.5], [0.0, 1.0]], [[1.0]], np.zeros((2, 2)))
    report = validate(_simple(cost=cost), probe_slater=False)
    assert not report.ok


def test_validate_rejects_indefinite_R():
    cost = CostSpec(np.zeros((2, 2)), [[-1.0]], np.zeros((2, 2)))
    report = validate(_simple(cost=cost), probe_slater=False)
    assert not report.ok


def test_validate_rejects_terminal_escaping_state_set():
    terminal = Polytope.box([-5, -5], [5, 5])
    report = validate(_simple(terminal=terminal), probe_slater=False)
    assert not report.ok


def test_validate_requires_origin_interior():
    state = Polytope([[1.0, 0.0]], [-0.5])
    report = validate(_simple(state=state), probe_slater=False)
    assert not report.ok


def test_control_box_dimensions_checked():
    system = LtiSystem([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]])
    with pytest.raises(ConstructionError):
        OcpProblem(system=system, basis=fourier_basis(3, 1.0),
                   cost=CostSpec(np.zeros((2, 2)), [[1.0]], np.zeros((2, 2))),
                   state_set=Polytope.box([-1, -1], [1, 1]),
                   terminal_set=Polytope.box([-1, -1], [1, 1]),
                   control_lower=[-1.0, -1.0], control_upper=[1.0],
                   x0=[0.0, 0.0])


def test_with_x0_returns_updated_copy():
    p = _simple()
    p2 = p.with_x0([0.2, 0.3])
    assert np.allclose(p2.x0, [0.2, 0.3])
    assert np.allclose(p.x0, [0.1, 0.0])
    assert p2.system is p.system

import numpy as np
import pytest

from sipcontrol.benchmarks import bryson_denham
from sipcontrol.errors import OracleError
from sipcontrol.verify import ViolationReport, oracle_collocation, verify_dense


def test_zero_control_trajectory_report():
    p = bryson_denham(11)
    # alpha = 0: x(t) = (t, 1), which crosses the bound x1 <= 1/9 at t = 1/9
    rep = verify_dense(p, np.zeros((1, 11)), grid_n=2000)
    assert rep.max_state_violation == pytest.approx(1.0 - 1.0 / 9.0, rel=1e-6)
    assert rep.argmax_time == pytest.approx(1.0, abs=1e-6)
    # control identically zero: strictly inside the +-20 box
    assert rep.max_control_violation == pytest.approx(-20.0)
    # x(1) = (1, 1) vs the target point (0, -1)
    assert rep.terminal_residual == pytest.approx(2.0, rel=1e-9)


def test_certified_bound_dominates_grid_maximum():
    p = bryson_denham(11)
    rng = np.random.default_rng(0)
    alpha = rng.normal(size=(1, 11))
    rep = verify_dense(p, alpha, grid_n=500, certified=True)
    assert rep.certified_bound is not None
    assert rep.certified_bound >= rep.max_state_violation


def test_report_round_trips_to_dict():
    rep = ViolationReport(grid_points=10, max_state_violation=-0.1,
                          argmax_time=0.5, max_control_violation=-1.0,
                          terminal_residual=0.0)
    d = rep.to_dict()
    assert d["grid_points"] == 10
    assert d["max_state_violation"] == -0.1


def test_oracle_matches_analytic_optimum():
    p = bryson_denham(51)
    value, (ts, X, U) = oracle_collocation(p, grid_n=800)
    # analytic optimum of the classical instance is 8
    assert value == pytest.approx(8.0, rel=2e-3)
    assert ts.size == 801
    assert X.shape == (801, 2)
    assert np.max(X[:, 0]) <= 1.0 / 9.0 + 1e-6


def test_oracle_rejects_tiny_grids():
    with pytest.raises(OracleError):
        oracle_collocation(bryson_denham(11), grid_n=5)

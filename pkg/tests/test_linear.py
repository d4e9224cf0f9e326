import numpy as np
import pytest
from hypothesis import given

from toolselect import X_EQ, ArmParams, dynamics_rhs, linearize
from toolselect.validate import numeric_jacobians

from conftest import arm_params


def test_printed_entries():
    ss = linearize(ArmParams(0.2, 0.5, 0.35, 0.5, g=9.81))
    assert ss.A[3, 1] == pytest.approx(-29.43, abs=1e-12)
    assert ss.B[3, 1] == pytest.approx(24.0, abs=1e-12)


def test_closed_form_entries_hand_evaluated():
    m1, m2, l1, l2, g = 0.2, 0.4, 0.3, 0.5, 9.81
    ss = linearize(ArmParams(m1, m2, l1, l2, g))
    s = m1 + 3 * m2  # 1.4
    assert ss.A[2, 1] == pytest.approx(9 * 0.4 * 9.81 / (4 * 0.3 * 1.4))
    assert ss.B[2, 0] == pytest.approx(3 / (0.09 * 1.4))
    assert ss.B[2, 1] == pytest.approx(-3 * (0.9 + 1.0) / (2 * 0.09 * 0.5 * 1.4))
    assert ss.A[2, 0] == pytest.approx(-3 * (0.2 + 0.8) * 9.81 / (2 * 0.3 * s))


@given(arm_params)
def test_block_structure(params):
    ss = linearize(params)
    np.testing.assert_array_equal(ss.A[:2, 2:], np.eye(2))
    np.testing.assert_array_equal(ss.A[:2, :2], 0)
    np.testing.assert_array_equal(ss.A[2:, 2:], 0)
    np.testing.assert_array_equal(ss.B[:2], 0)
    assert ss.B[3, 0] == 0
    assert ss.A[3, 0] == 0
    assert ss.A[2, 0] < 0 and ss.A[3, 1] < 0
    np.testing.assert_array_equal(ss.x_eq, X_EQ)


def test_matches_numeric_jacobians_on_200_tools(rng):
    worst = 0.0
    for _ in range(200):
        params = ArmParams(*rng.uniform(0.1, 0.6, 4))
        ss = linearize(params)
        A_num, B_num = numeric_jacobians(params)
        worst = max(worst, np.abs(ss.A - A_num).max(), np.abs(ss.B - B_num).max())
    assert worst < 1e-5


@given(arm_params)
def test_solve_round_trip(params):
    ss = linearize(params)
    assert np.linalg.det(ss.A) != 0
    v = np.array([0.3, -1.2, 2.0, 0.7])
    np.testing.assert_allclose(ss.A @ ss.solve(v), v, atol=1e-10, rtol=0)


def test_local_accuracy_is_second_order(rng):
    for _ in range(20):
        params = ArmParams(*rng.uniform(0.1, 0.6, 4))
        ss = linearize(params)
        dX = rng.uniform(-1, 1, 4)
        dX *= 0.05 / np.abs(dX).max()
        dU = rng.uniform(-1, 1, 2)
        dU *= 0.1 / np.abs(dU).max()

        def err(scale):
            x = X_EQ + scale * dX
            u = scale * dU
            return np.abs(dynamics_rhs(params, x, u) - ss.xdot(x, u)).max()

        assert err(1.0) / err(0.5) >= 3.5


def test_singular_state_matrix_reported():
    from toolselect.linear import StateSpace

    ss = StateSpace(np.zeros((4, 4)), np.zeros((4, 2)))
    with pytest.raises(np.linalg.LinAlgError):
        ss.solve(np.ones(4))


def test_matrices_read_only(arm):
    ss = linearize(arm)
    with pytest.raises(ValueError):
        ss.A[0, 0] = 1.0

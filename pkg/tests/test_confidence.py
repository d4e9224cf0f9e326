import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from toolselect import (
    ArmParams,
    ControlConfidence,
    SingularConfidenceError,
    TaskKind,
    TaskSpec,
    confidence_scalar,
    control_confidence,
    default_task,
    linearize,
)
from toolselect.confidence import w_correction
from toolselect.validate import fd_hessian, model_free_energy, oracle_partials

from conftest import arm_params


@given(arm_params, st.sampled_from(list(TaskKind)), st.floats(0.01, 10.0))
def test_prior_shift_is_additive(params, kind, delta):
    ss = linearize(params)
    task = default_task(kind)
    base = control_confidence(kind, ss, task)
    shifted = control_confidence(kind, ss, task.replace(P_u=task.P_u + delta * np.eye(2)))
    scale = max(1.0, np.abs(base.pi_u).max())
    np.testing.assert_allclose(shifted.pi_u - base.pi_u, delta * np.eye(2), atol=1e-12 * scale)
    ev_base = np.linalg.eigvalsh(base.pi_u)
    ev_shift = np.linalg.eigvalsh(shifted.pi_u)
    np.testing.assert_allclose(ev_shift - ev_base, delta, atol=1e-9 * scale)
    if not base.singular:
        assert shifted.logdet > base.logdet


@pytest.mark.parametrize("kind", list(TaskKind), ids=lambda k: k.value)
def test_matches_fd_hessian_on_100_tools(kind, rng):
    task = default_task(kind)
    worst = 0.0
    for _ in range(100):
        ss = linearize(ArmParams(*rng.uniform(0.1, 0.6, 4)))
        pi = control_confidence(kind, ss, task).pi_u
        zero = np.zeros(2)
        F = model_free_energy(task, oracle_partials(kind, ss.A, ss.B), {"theta": zero, "theta_dot": zero, "theta_ddot": zero}, zero)
        H = fd_hessian(F, zero, 1e-3)
        worst = max(worst, np.abs(pi - H).max() / max(1.0, np.abs(H).max()))
    assert worst < 1e-5


def test_velocity_against_explicit_quadratic(rng):
    # E(U) = 1/2 (v0 + M U - vg)' Pv (.) + 1/2 (a0 + U)' Pa (.) + 1/2 U' Pu U
    params = ArmParams(*rng.uniform(0.1, 0.6, 4))
    ss = linearize(params)
    task = default_task(TaskKind.VELOCITY)
    M = -np.linalg.inv(ss.A)[:2] @ ss.B
    v0 = rng.normal(size=2)
    a0 = rng.normal(size=2)

    def E(u):
        dv = v0 + M @ u - task.theta_dot_goal
        da = a0 + u
        return 0.5 * (dv @ task.P_theta_dot @ dv + da @ task.P_theta_ddot @ da + u @ task.P_u @ u)

    H = fd_hessian(E, np.zeros(2), 1e-3)
    pi = control_confidence(TaskKind.VELOCITY, ss, task).pi_u
    np.testing.assert_allclose(pi, H, rtol=1e-5, atol=1e-5)


def test_prior_only_position():
    task = TaskSpec(TaskKind.POSITION, P_u=1.0)
    conf = control_confidence(TaskKind.POSITION, linearize(ArmParams(0.3, 0.3, 0.3, 0.3)), task)
    np.testing.assert_array_equal(conf.pi_u, np.eye(2))
    assert conf.logdet == 0.0


def test_acceleration_confidence_is_tool_independent(rng):
    task = default_task(TaskKind.ACCELERATION)
    values = [control_confidence(task.kind, linearize(ArmParams(*rng.uniform(0.1, 0.6, 4))), task).logdet
              for _ in range(50)]
    np.testing.assert_allclose(values, math.log(100.0), atol=1e-9)


def test_singular_posterior_reported():
    task = TaskSpec(TaskKind.ACCELERATION)
    conf = control_confidence(TaskKind.ACCELERATION, linearize(ArmParams(0.3, 0.3, 0.3, 0.3)), task)
    assert conf.singular
    assert conf.logdet == -math.inf
    with pytest.raises(SingularConfidenceError):
        confidence_scalar(conf)


@given(arm_params, st.sampled_from(list(TaskKind)))
def test_symmetric_and_constant(params, kind):
    ss = linearize(params)
    task = default_task(kind)
    a = control_confidence(kind, ss, task)
    b = control_confidence(kind, linearize(params), task)
    assert np.abs(a.pi_u - a.pi_u.T).max() < 1e-12
    assert a.pi_u.tobytes() == b.pi_u.tobytes()


def test_scalar_identity_and_diagonal():
    assert confidence_scalar(ControlConfidence(np.eye(2), 0.0)) == 0.0
    conf = ControlConfidence(np.diag([2.0, 5.0]), float(np.linalg.slogdet(np.diag([2.0, 5.0]))[1]))
    assert confidence_scalar(conf) == pytest.approx(math.log(2) + math.log(5), rel=1e-15)


def test_scalar_matches_direct_determinant(rng):
    from toolselect.confidence import posterior_precision
    from toolselect.tasks import task_partials

    for _ in range(20):
        params = ArmParams(*rng.uniform(0.1, 0.6, 4))
        task = default_task(TaskKind.POSITION)
        conf = control_confidence(task.kind, linearize(params), task)
        (a, b), (c, d) = conf.pi_u
        assert confidence_scalar(conf) == pytest.approx(math.log(a * d - b * c), rel=1e-9)


def test_w_correction_is_half_dimension(arm):
    conf = control_confidence(TaskKind.VELOCITY, linearize(arm), default_task(TaskKind.VELOCITY))
    assert w_correction(conf) == pytest.approx(1.0, rel=1e-12)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from toolselect import (
    X_EQ,
    ArmParams,
    SimConfig,
    SimulationError,
    TaskKind,
    TaskSpec,
    angular_accel,
    control_rate,
    default_task,
    free_energy,
    linearize,
    simulate,
    task_partials,
)
from toolselect.controller import kernel_args
from toolselect import _integrate
from toolselect.experiments import sample_tools
from toolselect.validate import fd_gradient, model_free_energy, oracle_partials, random_task

from conftest import arm_params

ZERO_TASKS = [TaskSpec(kind) for kind in TaskKind]


def test_position_partials(arm):
    p = task_partials(TaskKind.POSITION, linearize(arm))
    np.testing.assert_array_equal(p.dtheta_ddot_du, np.eye(2))
    assert p.dX_du.shape == (4, 2)


def test_velocity_partial_against_column_solves():
    ss = linearize(ArmParams(0.3, 0.5, 0.4, 0.5))
    p = task_partials(TaskKind.VELOCITY, ss)
    columns = [np.linalg.solve(ss.A, ss.B[:, j]) for j in range(2)]
    expected = -np.column_stack(columns)[:2]
    np.testing.assert_allclose(p.dtheta_dot_du, expected, rtol=1e-12, atol=1e-14)


@given(arm_params)
def test_acceleration_partial_simplifies(params):
    # A^2 A^-1 (Xdot_u - B) + A B = A Xdot_u, whose top block is I
    ss = linearize(params)
    p = task_partials(TaskKind.ACCELERATION, ss)
    D = np.vstack([np.eye(2), np.eye(2)])
    np.testing.assert_allclose(p.dtheta_ddot_du, (ss.A @ D)[:2], atol=1e-9)
    np.testing.assert_allclose(p.dtheta_ddot_du, np.eye(2), atol=1e-9)


def test_free_energy_at_goal_is_minus_half_logdet():
    for kind in TaskKind:
        task = default_task(kind).replace(eta_u=[0.2, -0.1])
        F = free_energy(task, task.theta_goal, task.theta_dot_goal, task.theta_ddot_goal, task.eta_u, 3.7)
        assert F == pytest.approx(-1.85, abs=1e-15)


def test_free_energy_quadruples_with_doubled_offset():
    task = default_task(TaskKind.POSITION)
    off = np.array([0.3, -0.2])
    z = np.zeros(2)
    f1 = free_energy(task, task.theta_goal + off, z, z, z, 0.0)
    f2 = free_energy(task, task.theta_goal + 2 * off, z, z, z, 0.0)
    assert f2 == pytest.approx(4 * f1, rel=1e-14)


def test_free_energy_task1_hand_value():
    task = default_task(TaskKind.POSITION)
    F = free_energy(task, [0, 0], [0, 0], [0, 0], [0.1, 0.1], 0.0)
    expected = 0.5 * (100 * (math.pi / 3) ** 2 + 100 * (math.pi / 6) ** 2 + 0.1**2 + 0.1**2)
    assert F == pytest.approx(expected, rel=1e-14)
    assert F == pytest.approx(68.5489, abs=1e-4)


@pytest.mark.parametrize("task", ZERO_TASKS, ids=lambda t: t.kind.value)
def test_zero_precisions_give_zero_rate(task, arm, rng):
    p = task_partials(task.kind, linearize(arm))
    rate = control_rate(task, p, *rng.normal(size=(4, 2)))
    np.testing.assert_array_equal(rate, 0.0)


@pytest.mark.parametrize("kind", list(TaskKind), ids=lambda k: k.value)
def test_stationary_at_goal(kind, arm):
    task = default_task(kind).replace(eta_u=[0.3, 0.4], theta_dot_goal=[0.5, 0.0] if kind is not TaskKind.VELOCITY else [0, 2])
    p = task_partials(kind, linearize(arm))
    rate = control_rate(task, p, task.theta_goal, task.theta_dot_goal, task.theta_ddot_goal, task.eta_u, 2.0)
    np.testing.assert_array_equal(rate, 0.0)


@pytest.mark.parametrize("kind", list(TaskKind), ids=lambda k: k.value)
def test_rate_matches_fd_gradient(kind, rng):
    worst = 0.0
    for _ in range(100):
        ss = linearize(ArmParams(*rng.uniform(0.1, 0.6, 4)))
        task = random_task(rng, kind)
        base = {"theta": rng.normal(size=2), "theta_dot": rng.normal(size=2), "theta_ddot": rng.normal(size=2)}
        u = rng.normal(size=2)
        rate = control_rate(task, task_partials(kind, ss), base["theta"], base["theta_dot"], base["theta_ddot"], u)
        fd = -fd_gradient(model_free_energy(task, oracle_partials(kind, ss.A, ss.B), base, u), u, 1e-6)
        worst = max(worst, np.abs(rate - fd).max() / max(1.0, np.abs(fd).max()))
    assert worst < 1e-5


def test_partials_kind_mismatch_rejected(arm):
    p = task_partials(TaskKind.VELOCITY, linearize(arm))
    with pytest.raises(ValueError):
        control_rate(default_task(TaskKind.POSITION), p, *np.zeros((4, 2)))


@pytest.mark.parametrize("kind", list(TaskKind), ids=lambda k: k.value)
def test_kernel_rhs_matches_python_rate(kind, rng):
    params = ArmParams(*rng.uniform(0.1, 0.6, 4))
    ss = linearize(params)
    task = random_task(rng, kind)
    p = task_partials(kind, ss)
    y = rng.normal(size=6)
    pert = rng.normal(size=2)
    out = np.empty(6)
    _integrate.closed_loop_rhs(y, *kernel_args(params, task, p, SimConfig(gamma=1.7), pert), out)
    a = angular_accel(params, y[:4], y[4:] + pert)
    np.testing.assert_allclose(out[:4], np.r_[y[2:4], a], rtol=1e-13)
    np.testing.assert_allclose(out[4:], control_rate(task, p, y[:2], y[2:4], a, y[4:], 1.7), rtol=1e-12, atol=1e-12)


def _scipy_oracle(params, task, cfg, pert=(0.0, 0.0)):
    p = task_partials(task.kind, linearize(params))
    pert = np.asarray(pert)

    def rhs(t, y):
        a = angular_accel(params, y[:4], y[4:] + pert)
        return np.r_[y[2:4], a, control_rate(task, p, y[:2], y[2:4], a, y[4:], cfg.gamma)]

    sol = solve_ivp(rhs, (0, cfg.horizon), np.r_[cfg.x0, cfg.u0], t_eval=cfg.grid(), rtol=1e-11, atol=1e-12,
                    method="DOP853")
    return sol.y.T


@pytest.mark.parametrize("kind", list(TaskKind), ids=lambda k: k.value)
def test_simulate_matches_scipy(kind):
    params = ArmParams(0.35, 0.3, 0.3, 0.35)
    task = default_task(kind)
    ref = _scipy_oracle(params, task, SimConfig(), (-0.4, -0.4))
    tr = simulate(params, linearize(params), task, SimConfig(), (-0.4, -0.4))
    np.testing.assert_allclose(np.c_[tr.x, tr.u], ref, atol=1e-4)
    tight = simulate(params, linearize(params), task, SimConfig(rtol=1e-10, atol=1e-12), (-0.4, -0.4))
    np.testing.assert_allclose(np.c_[tight.x, tight.u], ref, atol=1e-7)


@pytest.mark.parametrize("task", ZERO_TASKS, ids=lambda t: t.kind.value)
def test_zero_precision_freezes_controller(task, arm):
    tr = simulate(arm, linearize(arm), task, SimConfig())
    assert np.all(tr.u == np.array([0.1, 0.1]))


def test_grid_contract(arm):
    tr = simulate(arm, linearize(arm), default_task(TaskKind.VELOCITY))
    assert tr.t.size == 101
    for series in (tr.x, tr.u, tr.theta_ddot, tr.f):
        assert series.shape[0] == 101
    np.testing.assert_allclose(np.diff(tr.t), 0.05, rtol=0, atol=1e-15)
    assert tr.t[-1] == pytest.approx(5.0)


@settings(max_examples=10, deadline=None)
@given(st.sampled_from([(1.0, 0.1), (2.0, 0.05), (0.5, 0.025), (3.0, 0.2)]))
def test_grid_length_follows_config(case):
    horizon, dt = case
    cfg = SimConfig(horizon=horizon, dt_out=dt)
    params = ArmParams(0.3, 0.3, 0.3, 0.3)
    tr = simulate(params, linearize(params), default_task(TaskKind.POSITION), cfg)
    assert tr.t.size == round(horizon / dt) + 1


def test_bad_grid_rejected():
    with pytest.raises(ValueError):
        SimConfig(horizon=1.0, dt_out=0.3)
    with pytest.raises(ValueError):
        SimConfig(horizon=-1.0)


def test_determinism(arm):
    a = simulate(arm, linearize(arm), default_task(TaskKind.ACCELERATION), perturbation=(-0.8, -0.8))
    b = simulate(arm, linearize(arm), default_task(TaskKind.ACCELERATION), perturbation=(-0.8, -0.8))
    for name in ("t", "x", "u", "theta_ddot", "f"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()


def test_recorded_free_energy_matches_pointwise(arm):
    task = default_task(TaskKind.POSITION)
    tr = simulate(arm, linearize(arm), task)
    i = 37
    expected = free_energy(task, tr.theta[i], tr.theta_dot[i], tr.theta_ddot[i], tr.u[i], tr.logdet_pi)
    assert tr.f[i] == pytest.approx(expected, rel=1e-13)


def test_high_confidence_tool_settles_near_goal():
    from toolselect import control_confidence

    task = default_task(TaskKind.POSITION)
    tools = [t.params for t in sample_tools(20, seed=0)]
    best = max(tools, key=lambda p: control_confidence(task.kind, linearize(p), task).logdet)
    tr = simulate(best, linearize(best), task)
    assert np.linalg.norm(tr.theta[-1] - task.theta_goal) < 0.15


def test_failure_reports_time(arm):
    with pytest.raises(SimulationError) as info:
        simulate(arm, linearize(arm), default_task(TaskKind.ACCELERATION), SimConfig(max_steps=50))
    assert info.value.reason == "step budget exhausted"
    assert 0.0 <= info.value.t_fail < 5.0


def test_divergence_reported():
    params = ArmParams(0.3, 0.3, 0.3, 0.3)
    task = default_task(TaskKind.POSITION)
    with pytest.raises(SimulationError):
        simulate(params, linearize(params), task, SimConfig(gamma=-50.0, horizon=50.0))

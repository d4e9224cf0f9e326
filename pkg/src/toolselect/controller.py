"""Task-based active-inference controller on the nonlinear arm."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from toolselect import _integrate
from toolselect.confidence import control_confidence
from toolselect.dynamics import ArmParams, accel_scalar
from toolselect.linear import X_EQ, StateSpace
from toolselect.tasks import (
    TaskKind,
    TaskPartials,
    TaskSpec,
    default_task,
    task_partials,
)

__all__ = [
    "SimConfig",
    "SimulationError",
    "TaskKind",
    "TaskPartials",
    "TaskSpec",
    "Trajectory",
    "control_rate",
    "default_task",
    "free_energy",
    "simulate",
    "task_partials",
]


class SimulationError(RuntimeError):
    def __init__(self, reason: str, t_fail: float):
        super().__init__(f"integration failed at t={t_fail:.6g}s: {reason}")
        self.reason = reason
        self.t_fail = t_fail


@dataclass(frozen=True)
class SimConfig:
    horizon: float = 5.0
    dt_out: float = 0.05
    x0: tuple[float, ...] = tuple(X_EQ)
    u0: tuple[float, float] = (0.1, 0.1)
    gamma: float = 1.0
    rtol: float = 1e-6
    atol: float = 1e-8
    max_steps: int = 2_000_000

    def __post_init__(self):
        if not (self.horizon > 0 and self.dt_out > 0):
            raise ValueError("horizon and dt_out must be positive")
        steps = self.horizon / self.dt_out
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError("horizon must be an integral multiple of dt_out")
        if len(self.x0) != 4 or len(self.u0) != 2:
            raise ValueError("x0 needs 4 entries and u0 needs 2")
        object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        object.__setattr__(self, "u0", tuple(float(v) for v in self.u0))

    @property
    def n_points(self) -> int:
        return int(round(self.horizon / self.dt_out)) + 1

    def grid(self) -> np.ndarray:
        return np.arange(self.n_points) * self.dt_out


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    theta_ddot: np.ndarray
    f: np.ndarray
    logdet_pi: float = 0.0
    n_steps: int = field(default=0, compare=False)

    @property
    def theta(self) -> np.ndarray:
        return self.x[:, :2]

    @property
    def theta_dot(self) -> np.ndarray:
        return self.x[:, 2:]


def _quad(dev, P):
    return np.einsum("...i,ij,...j->...", dev, P, dev)


def performance_terms(task: TaskSpec, theta, theta_dot, theta_ddot):
    """Sum of the active precision-weighted goal deviations (vectorized)."""
    values = {"theta": theta, "theta_dot": theta_dot, "theta_ddot": theta_ddot}
    total = 0.0
    for term in task.kind.active_terms:
        dev = np.asarray(values[term], dtype=float) - task.goal(term)
        total = total + _quad(dev, task.precision(term))
    return total


def control_cost(task: TaskSpec, u):
    return _quad(np.asarray(u, dtype=float) - task.eta_u, task.P_u)


def free_energy(task: TaskSpec, theta, theta_dot, theta_ddot, u, logdet_pi: float) -> float:
    """Instantaneous free energy in nats (constant terms dropped).

    Inputs may carry a leading time axis, in which case an array is returned.
    """
    perf = performance_terms(task, theta, theta_dot, theta_ddot)
    return 0.5 * (perf + control_cost(task, u) - logdet_pi)


def control_rate(
    task: TaskSpec,
    partials: TaskPartials,
    theta,
    theta_dot,
    theta_ddot,
    u,
    gamma: float = 1.0,
) -> np.ndarray:
    """Gradient-descent torque rate ``-gamma dF/du`` under the task's partials."""
    if partials.kind is not task.kind:
        raise ValueError(f"partials for {partials.kind.value} given to a {task.kind.value} task")
    values = {"theta": theta, "theta_dot": theta_dot, "theta_ddot": theta_ddot}
    grad = task.P_u @ (np.asarray(u, dtype=float) - task.eta_u)
    for term, d_du in partials.by_term().items():
        dev = np.asarray(values[term], dtype=float) - task.goal(term)
        grad = grad + d_du.T @ task.precision(term) @ dev
    return -gamma * grad


def kernel_args(params: ArmParams, task: TaskSpec, partials: TaskPartials, cfg: SimConfig, perturbation):
    prec = np.stack([task.P_theta, task.P_theta_dot, task.P_theta_ddot, task.P_u])
    goals = np.stack([task.theta_goal, task.theta_dot_goal, task.theta_ddot_goal])
    return (
        params.as_array(),
        np.ascontiguousarray(partials.gains()),
        np.ascontiguousarray(prec),
        np.ascontiguousarray(goals),
        np.array(task.eta_u, dtype=float),
        float(cfg.gamma),
        np.asarray(perturbation, dtype=float).reshape(2).copy(),
    )


def grid_accel(params: ArmParams, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    out = np.empty((x.shape[0], 2))
    for i in range(x.shape[0]):
        out[i] = accel_scalar(
            params.m1, params.m2, params.l1, params.l2, params.g,
            x[i, 0], x[i, 1], x[i, 2], x[i, 3], u[i, 0], u[i, 1],
        )
    return out


def simulate(
    params: ArmParams,
    ss: StateSpace,
    task: TaskSpec,
    cfg: SimConfig | None = None,
    perturbation=(0.0, 0.0),
) -> Trajectory:
    """Integrate the coupled arm + controller system and sample it on the grid.

    The controller sees the plant's true joint acceleration (at the perturbed
    torque) but uses the linear model's partials. The perturbation acts on
    the plant only. Raises :class:`SimulationError` on integrator failure.
    """
    cfg = cfg or SimConfig()
    partials = task_partials(task.kind, ss)
    logdet = control_confidence(task.kind, ss, task).logdet
    args = kernel_args(params, task, partials, cfg, perturbation)
    y0 = np.array([*cfg.x0, *cfg.u0], dtype=float)
    t = cfg.grid()
    samples, status, t_fail, n_steps = _integrate.dopri5(
        y0, t, cfg.rtol, cfg.atol, cfg.max_steps, *args
    )
    if status != _integrate.OK:
        raise SimulationError(_integrate.STATUS_TEXT[status], float(t_fail))
    x = samples[:, :4]
    u = samples[:, 4:]
    pert = np.asarray(perturbation, dtype=float).reshape(2)
    theta_ddot = grid_accel(params, x, u + pert)
    if math.isfinite(logdet):
        f = free_energy(task, x[:, :2], x[:, 2:], theta_ddot, u, logdet)
    else:
        f = np.full(t.shape, np.inf)
    return Trajectory(t, x, u, theta_ddot, np.asarray(f, dtype=float), logdet, int(n_steps))

"""Task definitions and the model-implied partial derivatives shared by the
controller and the confidence computation."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from toolselect.linear import StateSpace

I2 = np.eye(2)
O2 = np.zeros((2, 2))

# zero-jerk assumption: d(x_dot)/du stacked as [I; I]
XDOT_PARTIAL = np.vstack([I2, I2])


class TaskKind(enum.Enum):
    POSITION = "position"
    VELOCITY = "velocity"
    ACCELERATION = "acceleration"

    @property
    def number(self) -> int:
        return list(TaskKind).index(self) + 1

    @classmethod
    def parse(cls, value) -> "TaskKind":
        if isinstance(value, TaskKind):
            return value
        text = str(value).strip().lower()
        for kind in cls:
            if text in (kind.value, str(kind.number), f"task{kind.number}"):
                return kind
        raise ValueError(f"unknown task kind {value!r}")

    @property
    def active_terms(self) -> tuple[str, ...]:
        """Which goal deviations enter this task's free energy and update rule."""
        return _ACTIVE_TERMS[self]


_ACTIVE_TERMS = {
    TaskKind.POSITION: ("theta", "theta_dot", "theta_ddot"),
    TaskKind.VELOCITY: ("theta_dot", "theta_ddot"),
    TaskKind.ACCELERATION: ("theta_ddot",),
}


def _vec2(v) -> np.ndarray:
    arr = np.array(v, dtype=float).reshape(2)
    arr.setflags(write=False)
    return arr


def _mat2(m) -> np.ndarray:
    arr = np.array(m, dtype=float)
    if arr.ndim == 0:
        arr = arr * I2
    elif arr.ndim == 1:
        arr = np.diag(arr)
    arr = arr.reshape(2, 2)
    arr.setflags(write=False)
    return arr


def _zero2():
    return np.zeros(2)


def _zero22():
    return np.zeros((2, 2))


@dataclass(frozen=True)
class TaskSpec:
    """Goals, goal precisions and control prior for one task.

    Precisions may be given as scalars (times identity), diagonals, or full
    2x2 matrices; they are stored as read-only 2x2 arrays.
    """

    kind: TaskKind
    theta_goal: np.ndarray = field(default_factory=_zero2)
    theta_dot_goal: np.ndarray = field(default_factory=_zero2)
    theta_ddot_goal: np.ndarray = field(default_factory=_zero2)
    P_theta: np.ndarray = field(default_factory=_zero22)
    P_theta_dot: np.ndarray = field(default_factory=_zero22)
    P_theta_ddot: np.ndarray = field(default_factory=_zero22)
    P_u: np.ndarray = field(default_factory=_zero22)
    eta_u: np.ndarray = field(default_factory=_zero2)

    def __post_init__(self):
        object.__setattr__(self, "kind", TaskKind.parse(self.kind))
        for name in ("theta_goal", "theta_dot_goal", "theta_ddot_goal", "eta_u"):
            vec = _vec2(getattr(self, name))
            if not np.all(np.isfinite(vec)):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, vec)
        for name in ("P_theta", "P_theta_dot", "P_theta_ddot", "P_u"):
            mat = _mat2(getattr(self, name))
            if not np.all(np.isfinite(mat)) or not np.allclose(mat, mat.T, rtol=0, atol=1e-12):
                raise ValueError(f"{name} must be a finite symmetric matrix")
            if np.linalg.eigvalsh(mat).min() < -1e-12:
                raise ValueError(f"{name} must be positive semidefinite")
            object.__setattr__(self, name, mat)

    def goal(self, term: str) -> np.ndarray:
        return getattr(self, f"{term}_goal")

    def precision(self, term: str) -> np.ndarray:
        return getattr(self, f"P_{term}")

    def replace(self, **changes) -> "TaskSpec":
        values = {name: getattr(self, name) for name in self.__dataclass_fields__}
        values.update(changes)
        return TaskSpec(**values)


def default_task(kind) -> TaskSpec:
    """The three benchmark tasks with their published goals and precisions."""
    kind = TaskKind.parse(kind)
    if kind is TaskKind.POSITION:
        return TaskSpec(
            kind,
            theta_goal=[math.pi / 3, math.pi / 6],
            P_theta=100.0,
            P_theta_dot=50.0,
            P_theta_ddot=1.0,
            P_u=1.0,
        )
    if kind is TaskKind.VELOCITY:
        return TaskSpec(kind, theta_dot_goal=[0.0, 2.0], P_theta_dot=50.0, P_theta_ddot=1.0, P_u=1.0)
    return TaskSpec(kind, theta_ddot_goal=[0.0, 0.1], P_theta_ddot=10.0, P_u=0.0)


@dataclass(frozen=True)
class TaskPartials:
    """Partials of the task variables with respect to the torque.

    Position carries ``dX_du`` (4x2, theta rows then theta_dot rows);
    Velocity carries ``dtheta_dot_du``; every kind carries ``dtheta_ddot_du``.
    """

    kind: TaskKind
    dtheta_ddot_du: np.ndarray
    dX_du: np.ndarray | None = None
    dtheta_dot_du: np.ndarray | None = None

    def by_term(self) -> dict[str, np.ndarray]:
        if self.kind is TaskKind.POSITION:
            return {
                "theta": self.dX_du[:2],
                "theta_dot": self.dX_du[2:],
                "theta_ddot": self.dtheta_ddot_du,
            }
        if self.kind is TaskKind.VELOCITY:
            return {"theta_dot": self.dtheta_dot_du, "theta_ddot": self.dtheta_ddot_du}
        return {"theta_ddot": self.dtheta_ddot_du}

    def gains(self) -> np.ndarray:
        """(3, 2, 2) stack for theta, theta_dot, theta_ddot; inactive terms zero."""
        terms = self.by_term()
        return np.stack([terms.get(t, O2) for t in ("theta", "theta_dot", "theta_ddot")])


def task_partials(kind, ss: StateSpace) -> TaskPartials:
    kind = TaskKind.parse(kind)
    if kind is TaskKind.POSITION:
        dX_du = ss.solve(XDOT_PARTIAL - ss.B)
        return TaskPartials(kind, dtheta_ddot_du=I2.copy(), dX_du=dX_du)
    if kind is TaskKind.VELOCITY:
        # x_dot held fixed: 0 = A dX/du + B
        dtheta_dot_du = -ss.solve(ss.B)[:2]
        return TaskPartials(kind, dtheta_ddot_du=I2.copy(), dtheta_dot_du=dtheta_dot_du)
    # x_ddot = A^2 (x - x_eq) + A B u + B u_dot, with du_dot/du = 0
    dX_du = ss.solve(XDOT_PARTIAL - ss.B)
    dXddot_du = ss.A @ ss.A @ dX_du + ss.A @ ss.B
    return TaskPartials(kind, dtheta_ddot_du=dXddot_du[:2])

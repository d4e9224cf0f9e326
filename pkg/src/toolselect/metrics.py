"""Task-error metric used for every study."""

import numpy as np

from toolselect.controller import Trajectory
from toolselect.tasks import TaskKind, TaskSpec

_TASK_VARIABLE = {
    TaskKind.POSITION: "theta",
    TaskKind.VELOCITY: "theta_dot",
    TaskKind.ACCELERATION: "theta_ddot",
}


def task_variable(kind: TaskKind) -> str:
    return _TASK_VARIABLE[kind]


def task_error(traj: Trajectory, task: TaskSpec) -> float:
    """Precision-weighted squared deviation of the task variable, summed over the grid."""
    term = task_variable(task.kind)
    dev = getattr(traj, term) - task.goal(term)
    return float(np.einsum("ti,ij,tj->", dev, task.precision(term), dev))

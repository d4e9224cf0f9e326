"""Confidence-aware control and tool selection for linearized 2DOF arms."""

from toolselect.dynamics import ArmParams, JointState, angular_accel, dynamics_rhs
from toolselect.linear import X_EQ, StateSpace, linearize
from toolselect.controller import (
    SimConfig,
    SimulationError,
    TaskKind,
    TaskPartials,
    TaskSpec,
    Trajectory,
    control_rate,
    default_task,
    free_energy,
    simulate,
    task_partials,
)
from toolselect.confidence import (
    ControlConfidence,
    SingularConfidenceError,
    confidence_scalar,
    control_confidence,
)
from toolselect.decision import (
    NoValidToolError,
    Objective,
    SelectionReport,
    integral_F,
    integral_J,
    select_tool,
)

__all__ = [
    "ArmParams",
    "JointState",
    "angular_accel",
    "dynamics_rhs",
    "X_EQ",
    "StateSpace",
    "linearize",
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
    "ControlConfidence",
    "SingularConfidenceError",
    "confidence_scalar",
    "control_confidence",
    "NoValidToolError",
    "Objective",
    "SelectionReport",
    "integral_F",
    "integral_J",
    "select_tool",
]

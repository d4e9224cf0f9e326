"""Tool-selection objectives and the argmin selector."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.integrate

from toolselect.confidence import control_confidence
from toolselect.controller import (
    SimConfig,
    SimulationError,
    Trajectory,
    control_cost,
    performance_terms,
    simulate,
)
from toolselect.dynamics import ArmParams
from toolselect.linear import linearize
from toolselect.metrics import task_error
from toolselect.tasks import TaskSpec


class Objective(enum.Enum):
    FREE_ENERGY = "F"
    QUADRATIC = "J"
    CONFIDENCE_ONLY = "confidence"

    @classmethod
    def parse(cls, value) -> "Objective":
        if isinstance(value, Objective):
            return value
        text = str(value).strip().lower()
        aliases = {
            "f": cls.FREE_ENERGY, "free_energy": cls.FREE_ENERGY, "free-energy": cls.FREE_ENERGY,
            "j": cls.QUADRATIC, "quadratic": cls.QUADRATIC,
            "confidence": cls.CONFIDENCE_ONLY, "confidence_only": cls.CONFIDENCE_ONLY,
            "confidence-only": cls.CONFIDENCE_ONLY,
        }
        if text not in aliases:
            raise ValueError(f"unknown objective {value!r}")
        return aliases[text]

    @property
    def needs_simulation(self) -> bool:
        return self is not Objective.CONFIDENCE_ONLY


class NoValidToolError(RuntimeError):
    pass


def integral_F(traj: Trajectory, logdet_pi: float | None = None) -> float:
    """Trapezoidal integral of the recorded free energy.

    ``logdet_pi`` rebases the confidence term if it differs from the one the
    trajectory was recorded with.
    """
    f = traj.f
    if logdet_pi is not None and logdet_pi != traj.logdet_pi:
        f = f + 0.5 * (traj.logdet_pi - logdet_pi)
    return float(scipy.integrate.trapezoid(f, traj.t))


def quadratic_integrand(traj: Trajectory, task: TaskSpec) -> np.ndarray:
    """``z' Q z + u' R u`` per sample, Q and R mirroring the task precisions."""
    return np.asarray(
        performance_terms(task, traj.theta, traj.theta_dot, traj.theta_ddot)
        + control_cost(task, traj.u),
        dtype=float,
    )


def integral_J(traj: Trajectory, task: TaskSpec) -> float:
    return float(scipy.integrate.trapezoid(quadratic_integrand(traj, task), traj.t))


@dataclass(frozen=True)
class ToolEvaluation:
    index: int
    params: ArmParams
    logdet: float
    F: float = math.nan
    J: float = math.nan
    task_error: float = math.nan
    reason: str = ""

    @property
    def valid(self) -> bool:
        return not self.reason

    def value(self, objective: Objective) -> float:
        if objective is Objective.FREE_ENERGY:
            return self.F
        if objective is Objective.QUADRATIC:
            return self.J
        return self.logdet


def evaluate_tool(
    index: int,
    params: ArmParams,
    task: TaskSpec,
    cfg: SimConfig,
    run_simulation: bool = True,
) -> ToolEvaluation:
    """Confidence and (optionally) simulated objective values for one tool."""
    ss = linearize(params)
    logdet = control_confidence(task.kind, ss, task).logdet
    if not run_simulation:
        reason = "" if math.isfinite(logdet) else "singular_confidence"
        return ToolEvaluation(index, params, logdet, reason=reason)
    try:
        traj = simulate(params, ss, task, cfg)
    except SimulationError as exc:
        return ToolEvaluation(index, params, logdet, reason=f"simulation_failed:{exc.reason}")
    reason = "" if math.isfinite(logdet) else "singular_confidence"
    return ToolEvaluation(
        index,
        params,
        logdet,
        F=integral_F(traj),
        J=integral_J(traj, task),
        task_error=task_error(traj, task),
        reason=reason,
    )


@dataclass(frozen=True)
class SelectionReport:
    objective: Objective
    evaluations: tuple[ToolEvaluation, ...]
    chosen_index: int
    excluded: dict[int, str] = field(default_factory=dict)

    @property
    def values(self) -> np.ndarray:
        return np.array([e.value(self.objective) for e in self.evaluations])

    @property
    def chosen(self) -> ToolEvaluation:
        return self.evaluations[self.chosen_index]


def choose(evaluations: Sequence[ToolEvaluation], objective: Objective) -> SelectionReport:
    """Argmin (argmax of logdet for confidence-only) over valid tools, lowest index on ties."""
    objective = Objective.parse(objective)
    excluded = {}
    best = None
    for ev in evaluations:
        reason = ev.reason
        if not reason and objective.needs_simulation and not math.isfinite(ev.value(objective)):
            reason = "non_finite_objective"
        if reason:
            excluded[ev.index] = reason
            continue
        key = -ev.logdet if objective is Objective.CONFIDENCE_ONLY else ev.value(objective)
        if best is None or key < best[0]:
            best = (key, ev.index)
    if best is None:
        raise NoValidToolError(f"no valid tool for objective {objective.value}: {excluded}")
    position = [ev.index for ev in evaluations].index(best[1])
    return SelectionReport(objective, tuple(evaluations), position, excluded)


def select_tool(
    tools: Iterable[ArmParams],
    task: TaskSpec,
    objective,
    cfg: SimConfig | None = None,
    map_fn: Callable = map,
) -> SelectionReport:
    """Evaluate every tool and pick one under the given objective.

    Confidence-only selection never runs the integrator.
    """
    objective = Objective.parse(objective)
    cfg = cfg or SimConfig()
    tools = list(tools)
    if not tools:
        raise NoValidToolError("empty tool list")
    run = objective.needs_simulation
    evaluations = list(
        map_fn(
            evaluate_tool,
            range(len(tools)),
            tools,
            [task] * len(tools),
            [cfg] * len(tools),
            [run] * len(tools),
        )
    )
    return choose(evaluations, objective)

"""Closed-form posterior precision of the control action."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from toolselect.linear import StateSpace
from toolselect.tasks import TaskKind, TaskPartials, TaskSpec, task_partials

SINGULAR_TOL = 1e-10


class SingularConfidenceError(ValueError):
    """Raised when a scalar confidence is requested for a singular posterior."""


@dataclass(frozen=True)
class ControlConfidence:
    pi_u: np.ndarray
    logdet: float

    @property
    def singular(self) -> bool:
        return not np.isfinite(self.logdet)

    @property
    def trace(self) -> float:
        return float(np.trace(self.pi_u))

    @property
    def min_eig(self) -> float:
        return float(np.linalg.eigvalsh(self.pi_u)[0])


def posterior_precision(task: TaskSpec, partials: TaskPartials) -> np.ndarray:
    """Curvature of the free energy in u for the task's active terms."""
    kind = task.kind
    if kind is TaskKind.POSITION:
        P_goal = scipy.linalg.block_diag(task.P_theta, task.P_theta_dot)
        dX = partials.dX_du
        pi = dX.T @ P_goal @ dX + task.P_theta_ddot + task.P_u
    elif kind is TaskKind.VELOCITY:
        M = partials.dtheta_dot_du
        pi = M.T @ task.P_theta_dot @ M + task.P_theta_ddot + task.P_u
    else:
        D = partials.dtheta_ddot_du
        pi = D.T @ task.P_theta_ddot @ D + task.P_u
    return 0.5 * (pi + pi.T)


def control_confidence(kind, ss: StateSpace, task: TaskSpec) -> ControlConfidence:
    """Posterior control precision and its log-determinant.

    A posterior whose smallest eigenvalue is at or below ``SINGULAR_TOL`` is
    returned with ``logdet = -inf``; callers decide whether to exclude it.
    """
    kind = TaskKind.parse(kind)
    if kind is not task.kind:
        task = task.replace(kind=kind)
    pi = posterior_precision(task, task_partials(kind, ss))
    if np.linalg.eigvalsh(pi)[0] <= SINGULAR_TOL:
        return ControlConfidence(pi, float("-inf"))
    sign, logdet = np.linalg.slogdet(pi)
    return ControlConfidence(pi, float(logdet))


def confidence_scalar(conf: ControlConfidence) -> float:
    if conf.singular:
        raise SingularConfidenceError("posterior control precision is singular")
    return float(conf.logdet)


def w_correction(conf: ControlConfidence, hessian_E: np.ndarray | None = None) -> float:
    """The dropped ``0.5 tr(Pi^-1 d2E/du2)`` term, for reporting only.

    With the curvature of E equal to the posterior precision this is exactly
    half the control dimension.
    """
    if conf.singular:
        raise SingularConfidenceError("posterior control precision is singular")
    H = conf.pi_u if hessian_E is None else np.asarray(hessian_E, dtype=float)
    return 0.5 * float(np.trace(np.linalg.solve(conf.pi_u, H)))

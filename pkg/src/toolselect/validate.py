"""Analytic identity suite: closed forms checked against numerical oracles.

Each check returns a :class:`CheckResult`; ``run_all`` drives the set used by
the ``validate`` subcommand. The oracles deliberately avoid the library's
linear solves (explicit inverses, raw finite differences) so a slip in the
closed forms cannot cancel out.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from toolselect.confidence import control_confidence
from toolselect.controller import control_rate, free_energy
from toolselect.dynamics import ArmParams, angular_accel, dynamics_rhs
from toolselect.linear import X_EQ, linearize
from toolselect.tasks import XDOT_PARTIAL, TaskKind, TaskSpec, default_task, task_partials

JACOBIAN_STEP = 1e-6
JACOBIAN_TOL = 1e-5
GRADIENT_STEP = 1e-6
GRADIENT_TOL = 1e-5
HESSIAN_STEP = 1e-3
HESSIAN_TOL = 1e-5


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    tolerance: float
    cases: int
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"[{status}] {self.name}: worst={self.worst:.3e} tol={self.tolerance:.1e} "
            f"cases={self.cases} ({self.seconds:.2f}s)"
        )


def random_params(rng: np.random.Generator, low=0.1, high=0.6) -> ArmParams:
    return ArmParams(*rng.uniform(low, high, size=4))


def numeric_jacobians(params: ArmParams, h: float = JACOBIAN_STEP):
    z0 = np.concatenate([X_EQ, np.zeros(2)])
    J = np.empty((4, 6))
    for i in range(6):
        e = np.zeros(6)
        e[i] = h
        zp, zm = z0 + e, z0 - e
        J[:, i] = (dynamics_rhs(params, zp[:4], zp[4:]) - dynamics_rhs(params, zm[:4], zm[4:])) / (2 * h)
    return J[:, :4], J[:, 4:]


def oracle_partials(kind: TaskKind, A: np.ndarray, B: np.ndarray) -> dict[str, np.ndarray]:
    """Task partials from an explicit inverse, independent of the library's LU path."""
    A_inv = np.linalg.inv(A)
    if kind is TaskKind.POSITION:
        dX = A_inv @ (XDOT_PARTIAL - B)
        return {"theta": dX[:2], "theta_dot": dX[2:], "theta_ddot": np.eye(2)}
    if kind is TaskKind.VELOCITY:
        return {"theta_dot": -(A_inv @ B)[:2], "theta_ddot": np.eye(2)}
    dX = A_inv @ (XDOT_PARTIAL - B)
    return {"theta_ddot": (A @ A @ dX + A @ B)[:2]}


def model_free_energy(task: TaskSpec, partials: dict, base: dict, u0: np.ndarray, logdet=0.0):
    """Free energy as a function of u with task variables moving along the linear model."""

    def F(u):
        du = np.asarray(u, dtype=float) - u0
        moved = {
            term: base[term] + (partials[term] @ du if term in partials else 0.0)
            for term in ("theta", "theta_dot", "theta_ddot")
        }
        return free_energy(task, moved["theta"], moved["theta_dot"], moved["theta_ddot"], u, logdet)

    return F


def fd_gradient(F: Callable, u: np.ndarray, h: float) -> np.ndarray:
    g = np.empty(u.size)
    for i in range(u.size):
        e = np.zeros(u.size)
        e[i] = h
        g[i] = (F(u + e) - F(u - e)) / (2 * h)
    return g


def fd_hessian(F: Callable, u: np.ndarray, h: float) -> np.ndarray:
    n = u.size
    H = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            ei = np.zeros(n)
            ej = np.zeros(n)
            ei[i] = h
            ej[j] = h
            H[i, j] = (F(u + ei + ej) - F(u + ei - ej) - F(u - ei + ej) + F(u - ei - ej)) / (4 * h * h)
    return H


def random_task(rng: np.random.Generator, kind: TaskKind) -> TaskSpec:
    def psd(scale):
        M = rng.normal(size=(2, 2))
        return scale * (M @ M.T) / 2 + 0.1 * np.eye(2)

    return TaskSpec(
        kind,
        theta_goal=rng.uniform(-1, 1, 2),
        theta_dot_goal=rng.uniform(-2, 2, 2),
        theta_ddot_goal=rng.uniform(-1, 1, 2),
        P_theta=psd(50.0),
        P_theta_dot=psd(20.0),
        P_theta_ddot=psd(2.0),
        P_u=psd(1.0),
        eta_u=rng.uniform(-0.5, 0.5, 2),
    )


def check_equilibrium(n: int = 200, seed: int = 1) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        params = random_params(rng)
        worst = max(worst, float(np.abs(angular_accel(params, X_EQ, [0.0, 0.0])).max()))
    return CheckResult("equilibrium zero dynamics (exact)", worst == 0.0, worst, 0.0, n)


def check_jacobians(n: int = 200, seed: int = 2, linearize_fn: Callable = linearize) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        params = random_params(rng)
        ss = linearize_fn(params)
        A_num, B_num = numeric_jacobians(params)
        worst = max(worst, float(np.abs(ss.A - A_num).max()), float(np.abs(ss.B - B_num).max()))
    return CheckResult("closed-form A, B vs finite-difference Jacobians", worst <= JACOBIAN_TOL, worst, JACOBIAN_TOL, n)


def check_gradients(n: int = 100, seed: int = 3, linearize_fn: Callable = linearize) -> CheckResult:
    """control_rate against the finite-difference gradient of the model-implied F.

    Error is measured relative to ``max(1, |gradient|)``.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    cases = 0
    for kind in TaskKind:
        for _ in range(n):
            params = random_params(rng)
            ss = linearize_fn(params)
            task = random_task(rng, kind)
            base = {
                "theta": rng.uniform(-2, 1, 2),
                "theta_dot": rng.uniform(-2, 2, 2),
                "theta_ddot": rng.uniform(-5, 5, 2),
            }
            u = rng.uniform(-1, 1, 2)
            gamma = rng.uniform(0.5, 2.0)
            rate = control_rate(task, task_partials(kind, ss), base["theta"], base["theta_dot"], base["theta_ddot"], u, gamma)
            F = model_free_energy(task, oracle_partials(kind, ss.A, ss.B), base, u)
            fd = -gamma * fd_gradient(F, u, GRADIENT_STEP)
            worst = max(worst, float(np.abs(rate - fd).max() / max(1.0, np.abs(fd).max())))
            cases += 1
    return CheckResult("control rate vs finite-difference free-energy gradient", worst <= GRADIENT_TOL, worst, GRADIENT_TOL, cases)


def check_hessians(n: int = 100, seed: int = 4, linearize_fn: Callable = linearize) -> CheckResult:
    """Closed-form posterior precision against the finite-difference curvature of F.

    Uses the published task precisions; error relative to ``max(1, |Pi|)``.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    cases = 0
    for kind in TaskKind:
        task = default_task(kind)
        for _ in range(n):
            params = random_params(rng)
            ss = linearize_fn(params)
            pi = control_confidence(kind, ss, task).pi_u
            base = {"theta": np.zeros(2), "theta_dot": np.zeros(2), "theta_ddot": np.zeros(2)}
            u = np.zeros(2)
            F = model_free_energy(task, oracle_partials(kind, ss.A, ss.B), base, u)
            H = fd_hessian(F, u, HESSIAN_STEP)
            worst = max(worst, float(np.abs(pi - H).max() / max(1.0, np.abs(H).max())))
            cases += 1
    return CheckResult("posterior control precision vs finite-difference Hessian", worst <= HESSIAN_TOL, worst, HESSIAN_TOL, cases)


def run_all(linearize_fn: Callable = linearize) -> list[CheckResult]:
    results = []
    for check in (
        check_equilibrium,
        lambda: check_jacobians(linearize_fn=linearize_fn),
        lambda: check_gradients(linearize_fn=linearize_fn),
        lambda: check_hessians(linearize_fn=linearize_fn),
    ):
        start = time.perf_counter()
        result = check()
        result.seconds = time.perf_counter() - start
        results.append(result)
    return results

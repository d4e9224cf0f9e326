"""Nonlinear equations of motion of a two-link arm in the vertical plane.

State is ``[theta1, theta2, theta1_dot, theta2_dot]`` (rad, rad/s), input is
the joint torque pair ``[T1, T2]`` (N m). Links are uniform rods hinged at
one end; joint 2 sits at the tip of link 1. Angles are measured from the
horizontal, so the arm hangs at rest at ``[-pi/2, -pi/2]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

G_DEFAULT = 9.81


@dataclass(frozen=True)
class ArmParams:
    """Physical description of one arm (one selectable tool)."""

    m1: float
    m2: float
    l1: float
    l2: float
    g: float = G_DEFAULT

    def __post_init__(self):
        for name in ("m1", "m2", "l1", "l2", "g"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and strictly positive, got {value!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.m1, self.m2, self.l1, self.l2, self.g], dtype=float)


@dataclass(frozen=True)
class JointState:
    theta: tuple[float, float]
    theta_dot: tuple[float, float]

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (*self.theta, *self.theta_dot)):
            raise ValueError("joint state entries must be finite")

    @classmethod
    def from_vector(cls, x) -> "JointState":
        x = np.asarray(x, dtype=float)
        return cls((float(x[0]), float(x[1])), (float(x[2]), float(x[3])))

    def __array__(self, dtype=None, copy=None):
        return np.array([*self.theta, *self.theta_dot], dtype=dtype or float)


@njit(cache=True)
def _cos(theta):
    # exactly zero at -pi/2, so the hanging equilibrium is an exact fixed point
    return math.sin(theta + 0.5 * math.pi)


@njit(cache=True)
def accel_scalar(m1, m2, l1, l2, g, th1, th2, w1, w2, t1, t2):
    # link-2 moment balance solved for theta2_ddot
    link2 = t2 - 0.5 * m2 * g * l2 * _cos(th2)
    a2 = 3.0 / (m2 * l2 * l2) * link2
    s = math.sin(th1 - th2)
    c = math.cos(th1 - th2)
    # the centripetal term of link 1 produces no moment about joint A,
    # so only link 2's appears here
    bracket = (
        t2
        - t1
        + 1.5 * l1 / l2 * c * link2
        + 0.5 * m2 * l1 * l2 * w2 * w2 * s
        + (0.5 * m1 + m2) * g * l1 * _cos(th1)
    )
    a1 = -bracket / ((m1 / 3.0 + m2) * l1 * l1)
    return a1, a2


def angular_accel(params: ArmParams, state, torque) -> np.ndarray:
    """Joint accelerations ``[theta1_ddot, theta2_ddot]`` at a state and torque."""
    x = np.asarray(state, dtype=float)
    u = np.asarray(torque, dtype=float)
    a1, a2 = accel_scalar(
        params.m1, params.m2, params.l1, params.l2, params.g, x[0], x[1], x[2], x[3], u[0], u[1]
    )
    return np.array([a1, a2])


def dynamics_rhs(params: ArmParams, state, torque, perturbation=(0.0, 0.0)) -> np.ndarray:
    """State derivative with an additive torque perturbation on both joints."""
    x = np.asarray(state, dtype=float)
    u = np.asarray(torque, dtype=float) + np.asarray(perturbation, dtype=float)
    return np.concatenate([x[2:4], angular_accel(params, x, u)])


def moment_residuals(params: ArmParams, state, torque, accel) -> np.ndarray:
    """Residuals of the raw moment balances about joints A and B.

    The joint-B reaction forces are reconstructed from link 2's force balance
    and the kinematic constraint of its centre of mass, so this is independent
    of the eliminated form used by :func:`angular_accel`.
    """
    m1, m2, l1, l2, g = params.m1, params.m2, params.l1, params.l2, params.g
    th1, th2, w1, w2 = np.asarray(state, dtype=float)
    t1, t2 = np.asarray(torque, dtype=float)
    a1, a2 = np.asarray(accel, dtype=float)
    x2_ddot = (
        -l1 * w1**2 * np.cos(th1) - l1 * a1 * np.sin(th1)
        - 0.5 * l2 * w2**2 * np.cos(th2) - 0.5 * l2 * a2 * np.sin(th2)
    )
    y2_ddot = (
        l1 * a1 * np.cos(th1) - l1 * w1**2 * np.sin(th1)
        + 0.5 * l2 * a2 * np.cos(th2) - 0.5 * l2 * w2**2 * np.sin(th2)
    )
    h_b = m2 * x2_ddot
    v_b = m2 * y2_ddot + m2 * g
    r1 = m1 * l1**2 * a1 / 3 - (
        t1 - t2 + h_b * l1 * np.sin(th1) - v_b * l1 * np.cos(th1) - 0.5 * m1 * g * l1 * np.cos(th1)
    )
    r2 = m2 * l2**2 * a2 / 3 - (t2 - 0.5 * m2 * g * l2 * np.cos(th2))
    return np.array([r1, r2])

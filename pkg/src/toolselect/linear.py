"""Closed-form linearization of the arm about the hanging equilibrium."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from toolselect.dynamics import ArmParams

X_EQ = np.array([-math.pi / 2, -math.pi / 2, 0.0, 0.0])


@dataclass(frozen=True)
class StateSpace:
    """Linear model ``x_dot = A (x - x_eq) + B u``."""

    A: np.ndarray
    B: np.ndarray
    x_eq: np.ndarray = field(default_factory=lambda: X_EQ.copy())

    def __post_init__(self):
        for arr in (self.A, self.B, self.x_eq):
            arr.setflags(write=False)

    def xdot(self, x, u) -> np.ndarray:
        return self.A @ (np.asarray(x, dtype=float) - self.x_eq) + self.B @ np.asarray(u, dtype=float)

    def solve(self, rhs) -> np.ndarray:
        """Return ``A^{-1} rhs`` via an LU factorization of A."""
        return scipy.linalg.lu_solve(self._lu, rhs)

    @property
    def _lu(self):
        lu = self.__dict__.get("_lu_cache")
        if lu is None:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
                lu = scipy.linalg.lu_factor(self.A, check_finite=True)
            if np.any(np.abs(np.diag(lu[0])) < 1e-14 * max(1.0, np.abs(self.A).max())):
                raise np.linalg.LinAlgError("state matrix A is singular")
            object.__setattr__(self, "_lu_cache", lu)
        return lu


def linearize(params: ArmParams) -> StateSpace:
    m1, m2, l1, l2, g = params.m1, params.m2, params.l1, params.l2, params.g
    scale = m1 + 3 * m2
    A = np.zeros((4, 4))
    A[0, 2] = A[1, 3] = 1.0
    # Jacobian of the nonlinear model; (m1/2 + m2) / (m1/3 + m2) gives the 3 (m1 + 2 m2) / 2 factor
    A[2, 0] = -3 * (m1 + 2 * m2) * g / (2 * l1 * scale)
    A[2, 1] = 9 * m2 * g / (4 * l1 * scale)
    A[3, 1] = -3 * g / (2 * l2)
    B = np.zeros((4, 2))
    B[2, 0] = 3 / (l1**2 * scale)
    B[2, 1] = -3 * (3 * l1 + 2 * l2) / (2 * l1**2 * l2 * scale)
    B[3, 1] = 3 / (m2 * l2**2)
    return StateSpace(A, B)

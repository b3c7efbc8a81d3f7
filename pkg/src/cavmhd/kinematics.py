"""Rigid-body kinematics: skew operator, rotation update, frame changes."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def skew(w) -> np.ndarray:
    """Matrix with ``skew(w) @ x == cross(w, x)``."""
    w1, w2, w3 = np.asarray(w, dtype=float)
    return np.array([[0.0, -w3, w2],
                     [w3, 0.0, -w1],
                     [-w2, w1, 0.0]])


def rodrigues(w, dt: float) -> np.ndarray:
    """``expm(dt * skew(w))`` in closed form."""
    w = np.asarray(w, dtype=float)
    theta = np.linalg.norm(w) * dt
    if theta == 0.0:
        return np.eye(3)
    K = skew(w / np.linalg.norm(w))
    return np.eye(3) + np.sin(theta) * K + (1.0 - np.cos(theta)) * (K @ K)


def polar_orthonormalize(Q: np.ndarray) -> np.ndarray:
    U, _, Vt = np.linalg.svd(Q)
    R = U @ Vt
    if np.linalg.det(R) < 0:
        U[:, -1] *= -1
        R = U @ Vt
    return R


@dataclass(frozen=True)
class RotationState:
    Q: np.ndarray = field(default_factory=lambda: np.eye(3))
    t: float = 0.0

    def orthogonality_error(self) -> float:
        return float(np.linalg.norm(self.Q.T @ self.Q - np.eye(3)))


def advance_rotation(state: RotationState, omega, dt: float) -> RotationState:
    """Advance ``dQ/dt = skew(w) Q`` over one step with piecewise-constant ``w``.

    ``omega`` is the body-frame angular velocity; the inertial one is
    ``Q omega`` and the step multiplies by its exponential on the left.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    w_inertial = state.Q @ np.asarray(omega, dtype=float)
    Q = rodrigues(w_inertial, dt) @ state.Q
    return RotationState(polar_orthonormalize(Q), state.t + dt)


def advance_rotation_inertial(state: RotationState, w_inertial, dt: float) -> RotationState:
    """Same update with the angular velocity given in the inertial frame."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    Q = rodrigues(w_inertial, dt) @ state.Q
    return RotationState(polar_orthonormalize(Q), state.t + dt)


def to_body_frame(y, y_c, Q, is_vector: bool = False) -> np.ndarray:
    """``x = Q^T (y - y_c)`` for points; vectors skip the shift."""
    y = np.asarray(y, dtype=float)
    shift = 0.0 if is_vector else np.asarray(y_c, dtype=float)
    return (y - shift) @ np.asarray(Q)


def to_inertial_frame(x, y_c, Q, is_vector: bool = False) -> np.ndarray:
    """``y = Q x + y_c`` for points; vectors skip the shift."""
    x = np.asarray(x, dtype=float)
    y = x @ np.asarray(Q).T
    return y if is_vector else y + np.asarray(y_c, dtype=float)

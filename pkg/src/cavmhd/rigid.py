"""Standalone rigid-body dynamics and consistency checks of the body's motion."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .state import SystemState, angular_momentum_M, total_linear_momentum


@dataclass(frozen=True)
class TorqueSample:
    tau: np.ndarray
    t: float

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=float)
        if tau.shape != (3,) or not np.all(np.isfinite(tau)):
            raise ValueError("torque must be a finite 3-vector")
        object.__setattr__(self, "tau", tau)


def euler_rigid_step(omega, I_c, tau, dt: float) -> np.ndarray:
    """One classical RK4 step of ``I_c w' = tau - w x (I_c w)`` (body frame, constant ``tau``)."""
    I = np.asarray(I_c, dtype=float)
    tau = np.zeros(3) if tau is None else np.asarray(tau, dtype=float)
    Iinv = np.linalg.inv(I)

    def rhs(w):
        return Iinv @ (tau - np.cross(w, I @ w))

    w = np.asarray(omega, dtype=float)
    k1 = rhs(w)
    k2 = rhs(w + 0.5 * dt * k1)
    k3 = rhs(w + 0.5 * dt * k2)
    k4 = rhs(w + dt * k3)
    return w + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def rigid_invariants(omega, I_c):
    """Kinetic energy ``w.I w / 2`` and angular momentum magnitude ``|I w|``."""
    I = np.asarray(I_c, dtype=float)
    w = np.asarray(omega, dtype=float)
    return 0.5 * float(w @ I @ w), float(np.linalg.norm(I @ w))


def momentum_form_residual(trajectory: Sequence[SystemState]) -> np.ndarray:
    """``dM/dt + omega x M`` along a trajectory, one 3-vector per snapshot.

    ``M = I_c omega + int rho x cross u`` is the body-frame angular momentum;
    derivatives are centered in the interior and one-sided at both ends.
    A frozen repeated state (all times equal) reports ``omega x M``.
    """
    if len(trajectory) < 2:
        raise ValueError("momentum_form_residual needs at least two snapshots")
    times = np.array([s.t for s in trajectory], dtype=float)
    M = np.array([angular_momentum_M(s) for s in trajectory])
    om = np.array([np.asarray(s.rigid.omega, float) for s in trajectory])
    if np.all(np.diff(times) == 0):
        dM = np.zeros_like(M)
    else:
        dM = np.gradient(M, times, axis=0)
    return dM + np.cross(om, M)


def linear_constraint_residual(state: SystemState) -> np.ndarray:
    """``m_B xi + int rho u``; zero when the body-fluid momentum constraint holds."""
    return total_linear_momentum(state)

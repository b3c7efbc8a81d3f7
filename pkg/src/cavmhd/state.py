"""Simulation state, parameters and the integrals read off a state."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .basis import MAGNETIC, SCALAR, VELOCITY, BasisSet
from .kinematics import RotationState


class PositivityError(ValueError):
    """Nodal density at or below the admissible floor."""

    def __init__(self, min_rho: float, msg: str = ""):
        super().__init__(msg or f"density positivity violated (min nodal rho = {min_rho:.3e})")
        self.min_rho = min_rho


@dataclass(frozen=True)
class PhysParams:
    a: float = 1.0
    gamma: float = 1.4
    mu: float = 0.1
    lam: float = 0.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("phys.a must be > 0")
        if not self.gamma > 1:
            raise ValueError("phys.gamma must satisfy gamma > 1")
        if not self.mu > 0:
            raise ValueError("phys.mu must be > 0")
        if not self.lam >= 0:
            raise ValueError("phys.lam must be >= 0")

    def check_weak_regime(self) -> bool:
        """Weak-solution diagnostics are only backed by theory for gamma > 3/2."""
        ok = self.gamma > 1.5
        if not ok:
            warnings.warn(f"gamma = {self.gamma} <= 3/2: outside the weak-solution regime",
                          stacklevel=2)
        return ok


@dataclass(frozen=True)
class RegParams:
    eps: float = 0.0
    delta: float = 0.0
    beta: float = 5.0

    def __post_init__(self):
        if self.eps < 0 or self.delta < 0:
            raise ValueError("reg.eps and reg.delta must be >= 0")

    def validate(self, gamma: float, delta_limit: bool = False) -> None:
        if self.delta > 0 and not self.beta > max(gamma, 4.0):
            raise ValueError(f"reg.beta must satisfy beta > max{{gamma, 4}} = {max(gamma, 4.0)} "
                             f"when delta > 0 (got {self.beta})")
        if delta_limit:
            bound = 4.0
            if gamma > 1.5:
                bound = max(4.0, 6 * gamma / (2 * gamma - 3))
            if not self.beta > bound:
                raise ValueError(f"reg.beta must exceed {bound} for the delta-limit study")


@dataclass(frozen=True)
class RigidParams:
    m_B: float
    I_c: np.ndarray
    m_F: float

    def __post_init__(self):
        I = np.asarray(self.I_c, dtype=float)
        if I.shape != (3, 3):
            raise ValueError("rigid.I_c must be 3x3")
        if not np.allclose(I, I.T, rtol=0, atol=1e-12 * max(1.0, np.abs(I).max())):
            raise ValueError("rigid.I_c must be symmetric")
        if np.linalg.eigvalsh(I).min() <= 0:
            raise ValueError("rigid.I_c must be positive definite")
        if not self.m_B > 0:
            raise ValueError("rigid.m_B must be > 0")
        if not self.m_F > 0:
            raise ValueError("fluid mass m_F must be > 0")
        object.__setattr__(self, "I_c", I)


@dataclass(frozen=True)
class FluidState:
    rho: np.ndarray  # density coefficients (cosine basis)
    v: np.ndarray    # (3, ...) relative velocity coefficients (sine basis)
    b: np.ndarray    # (3, ...) magnetic coefficients (wavevector layout)


@dataclass(frozen=True)
class RigidState:
    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))
    xi: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass(frozen=True)
class SystemState:
    basis: BasisSet
    fluid: FluidState
    rigid: RigidState
    rotation: RotationState
    phys: PhysParams
    reg: RegParams
    rigid_params: RigidParams
    t: float = 0.0

    def replace(self, **kw) -> "SystemState":
        return replace(self, **kw)

    # nodal views -------------------------------------------------------
    def rho_nodal(self) -> np.ndarray:
        return self.basis.inverse(self.fluid.rho, SCALAR)

    def v_nodal(self) -> np.ndarray:
        return self.basis.inverse_vector(self.fluid.v, (VELOCITY,) * 3)

    def b_nodal(self) -> np.ndarray:
        return self.basis.inverse_vector(self.fluid.b, MAGNETIC)

    def u_nodal(self) -> np.ndarray:
        return assemble_u(self.basis, self.fluid, self.rigid)

    @property
    def rho_bar(self) -> float:
        return float(self.fluid.rho[0, 0, 0])


def rigid_velocity(basis: BasisSet, omega, xi) -> np.ndarray:
    """Nodal ``omega x x + xi``."""
    om = np.asarray(omega, dtype=float)
    xi = np.asarray(xi, dtype=float)
    x = basis.x
    return np.stack([
        om[1] * x[2] - om[2] * x[1] + xi[0],
        om[2] * x[0] - om[0] * x[2] + xi[1],
        om[0] * x[1] - om[1] * x[0] + xi[2],
    ])


def assemble_u(basis: BasisSet, fluid: FluidState, rigid: RigidState,
               v_nodal: Optional[np.ndarray] = None) -> np.ndarray:
    if v_nodal is None:
        v_nodal = basis.inverse_vector(fluid.v, (VELOCITY,) * 3)
    return v_nodal + rigid_velocity(basis, rigid.omega, rigid.xi)


def total_mass(basis: BasisSet, rho: np.ndarray) -> float:
    return float(rho[0, 0, 0]) * basis.box.volume


def total_linear_momentum(state: SystemState) -> np.ndarray:
    """``int rho u dx + m_B xi``."""
    basis = state.basis
    m = state.rho_nodal() * state.u_nodal()
    return basis.integrate(m) + state.rigid_params.m_B * np.asarray(state.rigid.xi)


def angular_momentum_M(state: SystemState) -> np.ndarray:
    """``I_c omega + int rho x cross u dx``."""
    basis = state.basis
    m = state.rho_nodal() * state.u_nodal()
    xm = np.cross(basis.x, m, axis=0)
    return state.rigid_params.I_c @ np.asarray(state.rigid.omega) + basis.integrate(xm)


def enforce_linear_constraint(state: SystemState) -> SystemState:
    """Replace ``xi`` so that ``m_B xi + int rho u = 0`` exactly.

    ``u`` contains ``xi`` itself, so solve ``(m_B + int rho) xi = -int rho (v + omega x x)``
    with the quadrature mass (equal to ``m_F`` for the cosine density basis).
    """
    basis = state.basis
    rho = state.rho_nodal()
    w = state.v_nodal() + rigid_velocity(basis, state.rigid.omega, np.zeros(3))
    mass = float(basis.integrate(rho))
    xi = -basis.integrate(rho * w) / (state.rigid_params.m_B + mass)
    return state.replace(rigid=RigidState(np.array(state.rigid.omega, dtype=float), xi))


def rest_state(basis: BasisSet, rho_bar: float = 1.0, phys: Optional[PhysParams] = None,
               reg: Optional[RegParams] = None, m_B: float = 1.0, I_c=None) -> SystemState:
    """Uniform density, no motion, no field."""
    phys = phys or PhysParams()
    reg = reg or RegParams()
    rho = np.zeros(basis.shape)
    rho[0, 0, 0] = rho_bar
    I_c = np.eye(3) if I_c is None else np.asarray(I_c, dtype=float)
    rp = RigidParams(m_B=m_B, I_c=I_c, m_F=rho_bar * basis.box.volume)
    fluid = FluidState(rho, np.zeros((3,) + basis.shape), np.zeros((3,) + basis.shape))
    return SystemState(basis, fluid, RigidState(), RotationState(), phys, reg, rp)

"""Density, magnetic and momentum sub-solvers and the coupled Picard step.

Unknowns
--------
The momentum unknown is ``U = (omega, xi, v_hat)`` packed as one vector:
three angular components, three translational components, then the
retained sine coefficients of the relative velocity.  The discrete
evolution is the time-differentiated Galerkin identity

    d/dt (M_rho U) = N(rho, b, U)

stepped as ``(M_rho_new + theta dt D) U_new = M_rho_old U_old
- (1 - theta) dt D U_old + dt N``, where ``D`` is the exact diagonal of the
viscous form on the fluid block and everything else sits in ``N``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .basis import CURL, MAGNETIC, SCALAR, VELOCITY, BasisSet
from .kinematics import advance_rotation
from .operators import (curl, enthalpy, solenoidal_project, stress,
                        velocity_gradient, _skew_field)
from .state import (FluidState, PhysParams, PositivityError, RigidParams,
                    RigidState, SystemState, enforce_linear_constraint,
                    rigid_velocity)

POSITIVITY_FLOOR = 1e-8
RULES = {"backward_euler": 1.0, "trapezoidal": 0.5}
SUBSTEPS = ("continuity", "induction", "momentum")


class SolverError(RuntimeError):
    """Mass-operator solve did not reach the requested residual."""

    def __init__(self, residual: float, iterations: int):
        super().__init__(f"mass solve failed to converge: relative residual {residual:.3e} "
                         f"after {iterations} iterations")
        self.residual = residual
        self.iterations = iterations


class NonFiniteError(FloatingPointError):
    pass


@dataclass(frozen=True)
class StepConfig:
    dt: float
    picard_max: int = 2
    picard_tol: float = 1e-10
    imex: bool = True
    rule: str = "backward_euler"
    order: Tuple[str, ...] = SUBSTEPS
    enforce_constraint: bool = False
    solve_rtol: float = 1e-11
    solve_maxiter: int = 500

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError("dt must be > 0")
        if self.picard_max < 1:
            raise ValueError("picard_max must be >= 1")
        if self.rule not in RULES:
            raise ValueError(f"rule must be one of {sorted(RULES)}")
        if sorted(self.order) != sorted(SUBSTEPS):
            raise ValueError(f"order must be a permutation of {SUBSTEPS}")

    @property
    def theta(self) -> float:
        return RULES[self.rule]


# ---------------------------------------------------------------- packing
def pack(basis: BasisSet, omega, xi, v: np.ndarray) -> np.ndarray:
    return np.concatenate([np.asarray(omega, float), np.asarray(xi, float),
                           np.asarray(v)[basis.velocity_active]])


def unpack(basis: BasisSet, U: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    v = np.zeros((3,) + basis.shape)
    v[basis.velocity_active] = U[6:]
    return np.array(U[:3]), np.array(U[3:6]), v


def pair_rows(basis: BasisSet, f: np.ndarray) -> np.ndarray:
    """Quadrature pairing of a nodal vector density with every element of ``Y_n``."""
    rot = basis.integrate(np.cross(basis.x, f, axis=0))
    trans = basis.integrate(f)
    fluid = basis.velocity_weights * basis.forward_vector(f, (VELOCITY,) * 3)
    return np.concatenate([rot, trans, fluid[basis.velocity_active]])


def flux_rows(basis: BasisSet, phi: np.ndarray) -> np.ndarray:
    """Fluid rows of ``sum_nodes Phi : grad(psi) h^3`` for a nodal tensor ``Phi[i, a]``."""
    out = np.zeros((3,) + basis.shape)
    for i in range(3):
        for a in range(3):
            out[i] += basis.kappa[a] * basis.forward(phi[i, a], CURL[a])
    return basis.velocity_weights * out


def viscous_diagonal(basis: BasisSet, phys: PhysParams) -> np.ndarray:
    """Diagonal of the viscous form on sine modes: ``W (mu |k|^2 + (lam + mu/3) k_i^2)``."""
    d = np.stack([phys.mu * basis.kappa2 + (phys.lam + phys.mu / 3.0) * basis.kappa[i] ** 2
                  for i in range(3)])
    return np.where(basis.velocity_mask, basis.velocity_weights * d, 0.0)


def viscous_rows(basis: BasisSet, v: np.ndarray, phys: PhysParams) -> np.ndarray:
    """Fluid rows of ``sum_nodes S(grad v) : grad(psi) h^3``."""
    G = velocity_gradient(basis, v)
    return flux_rows(basis, stress(G, phys.mu, phys.lam))


def _rigid_unit_fields(basis: BasisSet) -> List[np.ndarray]:
    fields = []
    for r in range(3):
        e = np.zeros(3)
        e[r] = 1.0
        fields.append(rigid_velocity(basis, e, np.zeros(3)))
    for r in range(3):
        e = np.zeros(3)
        e[r] = 1.0
        fields.append(rigid_velocity(basis, np.zeros(3), e))
    return fields


# ---------------------------------------------------------------- mass operator
class GalerkinMomentumSystem:
    """``M_rho + c D`` on ``Y_n`` with a Schur-complement preconditioner.

    The preconditioner is the exact inverse of ``M_rho_bar + c D``: its
    fluid block is diagonal and the six rigid columns are eliminated
    through a 6x6 Schur complement.
    """

    def __init__(self, basis: BasisSet, rho_nodal: np.ndarray, rigid_params: RigidParams,
                 phys: PhysParams, c_implicit: float = 0.0):
        self.basis = basis
        self.rho = np.asarray(rho_nodal, dtype=float)
        self.rp = rigid_params
        self.c = float(c_implicit)
        self.d = viscous_diagonal(basis, phys)[basis.velocity_active]
        self.size = 6 + int(basis.velocity_active.sum())
        self._pre = None

    def mass(self, U: np.ndarray) -> np.ndarray:
        om, xi, v = unpack(self.basis, U)
        u = self.basis.inverse_vector(v, (VELOCITY,) * 3) + rigid_velocity(self.basis, om, xi)
        rows = pair_rows(self.basis, self.rho * u)
        rows[:3] += self.rp.I_c @ om
        rows[3:6] += self.rp.m_B * xi
        return rows

    def implicit(self, U: np.ndarray) -> np.ndarray:
        out = np.zeros_like(U)
        out[6:] = self.d * U[6:]
        return out

    def apply(self, U: np.ndarray) -> np.ndarray:
        out = self.mass(U)
        if self.c:
            out[6:] += self.c * self.d * U[6:]
        return out

    def _build_preconditioner(self):
        basis = self.basis
        rho_bar = float(np.mean(self.rho))
        act = basis.velocity_active
        W = np.broadcast_to(basis.velocity_weights, act.shape)[act]
        B = np.empty((W.size, 6))
        A = np.zeros((6, 6))
        for r, f in enumerate(_rigid_unit_fields(basis)):
            rows = pair_rows(basis, rho_bar * f)
            A[:, r] = rows[:6]
            B[:, r] = rows[6:]
        A[:3, :3] += self.rp.I_c
        A[3:, 3:] += self.rp.m_B * np.eye(3)
        A = 0.5 * (A + A.T)
        Dg = rho_bar * W + self.c * self.d
        S = A - B.T @ (B / Dg[:, None])
        self._pre = (B, Dg, np.linalg.inv(S))

    def precondition(self, R: np.ndarray) -> np.ndarray:
        if self._pre is None:
            self._build_preconditioner()
        B, Dg, Sinv = self._pre
        rF = R[6:]
        yR = Sinv @ (R[:6] - B.T @ (rF / Dg))
        yF = (rF - B @ yR) / Dg
        return np.concatenate([yR, yF])

    def solve(self, rhs: np.ndarray, x0: Optional[np.ndarray] = None, rtol: float = 1e-11,
              maxiter: int = 500) -> Tuple[np.ndarray, Dict]:
        n = self.size
        A = LinearOperator((n, n), matvec=self.apply, dtype=float)
        P = LinearOperator((n, n), matvec=self.precondition, dtype=float)
        count = [0]

        def cb(_):
            count[0] += 1

        bnorm = np.linalg.norm(rhs)
        if bnorm == 0:
            return np.zeros(n), {"iterations": 0, "residual": 0.0}
        x, status = cg(A, rhs, x0=x0, rtol=rtol, atol=0.0, maxiter=maxiter, M=P, callback=cb)
        res = float(np.linalg.norm(rhs - self.apply(x)) / bnorm)
        if status != 0 and res > 10 * rtol:
            raise SolverError(res, count[0])
        return x, {"iterations": count[0], "residual": res}


# ---------------------------------------------------------------- continuity
def _check_density(basis, rho_hat, rho_bar):
    m = float(np.min(basis.inverse(rho_hat, SCALAR)))
    if not m >= POSITIVITY_FLOOR * rho_bar:
        raise PositivityError(m)


def _transport_rate(basis: BasisSet, rho: np.ndarray, v_nodal: np.ndarray) -> np.ndarray:
    """Modal ``-div(rho v)`` truncated to the retained band."""
    rn = basis.inverse(rho, SCALAR)
    dv = sum(basis.dnodal(rn * v_nodal[a], a, "S") for a in range(3))
    out = basis.dealias(-basis.forward(dv, SCALAR))
    out[0, 0, 0] = 0.0  # flux of a wall-tangent velocity: no net mass change
    return out


def continuity_rate(basis: BasisSet, rho: np.ndarray, v: np.ndarray, eps: float) -> np.ndarray:
    """Semi-discrete ``rho_t = -div(rho v) + eps lap rho`` (modal)."""
    rate = -eps * basis.kappa2 * rho
    if np.any(v):
        rate = rate + _transport_rate(basis, rho, basis.inverse_vector(v, (VELOCITY,) * 3))
    return rate


def continuity_step(basis: BasisSet, rho: np.ndarray, v_bar: np.ndarray, eps: float,
                    dt: float, rule: str = "backward_euler", imex: bool = True) -> np.ndarray:
    """One step of ``rho_t + div(rho v_bar) = eps lap rho`` with frozen ``v_bar``.

    Transport is Heun (RK2); diffusion is an exact diagonal solve.  Backward
    Euler damps a cosine mode by ``1/(1 + eps |k|^2 dt)``, the trapezoidal
    rule by ``(1 - eps |k|^2 dt/2)/(1 + eps |k|^2 dt/2)``.
    """
    theta = RULES[rule]
    rho_bar = float(rho[0, 0, 0])
    _check_density(basis, rho, rho_bar)
    vb = basis.inverse_vector(v_bar, (VELOCITY,) * 3)
    moving = bool(np.any(v_bar))
    lam = eps * basis.kappa2

    def transport(r):
        if not moving:
            return np.zeros_like(r)
        return _transport_rate(basis, r, vb)

    def advance(r0, rate):
        if not imex:
            return r0 + dt * (rate - lam * r0)
        return ((1.0 - (1.0 - theta) * dt * lam) * r0 + dt * rate) / (1.0 + theta * dt * lam)

    t0 = transport(rho)
    pred = advance(rho, t0)
    out = advance(rho, 0.5 * (t0 + transport(pred))) if moving else pred
    out = basis.dealias(out)
    out[0, 0, 0] = rho[0, 0, 0]
    _check_density(basis, out, rho_bar)
    return out


# ---------------------------------------------------------------- induction
def _stretching(basis: BasisSet, b: np.ndarray, v_nodal: np.ndarray) -> np.ndarray:
    """Galerkin coefficients of ``curl(v x b)`` (weak form, ``v = 0`` on the wall)."""
    B = basis.inverse_vector(b, MAGNETIC)
    E = np.cross(v_nodal, B, axis=0)
    F = np.stack([basis.weights(CURL[j]) * basis.forward(E[j], CURL[j]) for j in range(3)])
    G = np.cross(basis.kappa, F, axis=0)
    W = basis.magnetic_weights
    G = np.divide(G, W, out=np.zeros_like(G), where=basis.magnetic_mask)
    return np.where(basis.active, G, 0.0)


def induction_step(b: np.ndarray, state: SystemState, dt: float, rule: str = "backward_euler",
                   velocity: Optional[np.ndarray] = None, imex: bool = True) -> np.ndarray:
    """One step of ``b_t = curl(v x b) - curl curl b`` in the body frame.

    The rigid-motion terms (frame rotation, rigid advection, rigid part of
    ``curl(u x b)``) cancel identically, so only the relative velocity
    ``velocity`` (nodal; defaults to the state's) enters.  Resistive decay
    is diagonal: ``1/(1 + |k|^2 dt)`` (backward Euler).
    """
    basis = state.basis
    theta = RULES[rule]
    vn = state.v_nodal() if velocity is None else np.asarray(velocity, float)
    moving = bool(np.any(vn))
    lam = basis.kappa2

    def rate(bb):
        return _stretching(basis, bb, vn) if moving else np.zeros_like(bb)

    def advance(b0, r):
        if not imex:
            return b0 + dt * (r - lam * b0)
        return ((1.0 - (1.0 - theta) * dt * lam) * b0 + dt * r) / (1.0 + theta * dt * lam)

    r0 = rate(b)
    pred = advance(b, r0)
    out = advance(b, 0.5 * (r0 + rate(pred))) if moving else pred
    return solenoidal_project(basis, out)


# ---------------------------------------------------------------- momentum
def momentum_forces(state: SystemState, imex: bool = True) -> np.ndarray:
    """Explicit right side ``N(rho, b, U)`` paired with every element of ``Y_n``.

    Pressure, stress and Lorentz force are written in divergence form, so
    their pairing with a rigid test motion vanishes; the rigid rows receive
    only the convective, Coriolis-type and gyroscopic contributions.
    """
    basis = state.basis
    phys, reg, rp = state.phys, state.reg, state.rigid_params
    om = np.asarray(state.rigid.omega, float)
    xi = np.asarray(state.rigid.xi, float)
    rho = state.rho_nodal()
    if not np.min(rho) > 0:
        raise PositivityError(float(np.min(rho)))
    v = state.v_nodal()
    u = v + rigid_velocity(basis, om, xi)

    # convection and eps-term with mass flux m = rho v + eps grad rho.
    # Fluid rows take the skew form 1/2 flux - 1/2 (m . grad) u + 1/2 u rho_t
    # with the scheme's own continuity rate, which cancels the fluid share
    # of -1/2 int rho_t |u|^2 without integrating non-band-limited |u|^2 by
    # parts.  Rigid rows keep the flux form, so P and M budgets stay exact.
    Gu = velocity_gradient(basis, state.fluid.v) + _skew_field(om, basis)
    ru = rho * v
    m = ru
    eps_force = None
    if reg.eps > 0:
        g = reg.eps * np.stack([basis.inverse(*basis.dmodal(state.fluid.rho, SCALAR, a))
                                for a in range(3)])
        m = ru + g
        eps_force = -np.einsum("a...,ia...->i...", g, Gu)
    rho_t = basis.inverse(continuity_rate(basis, state.fluid.rho, state.fluid.v, reg.eps), SCALAR)
    fluid = 0.5 * flux_rows(basis, u[:, None] * m[None, :])
    fluid += 0.5 * basis.velocity_weights * basis.forward_vector(
        u * rho_t - np.einsum("a...,ia...->i...", m, Gu), (VELOCITY,) * 3)

    f = -rho * np.cross(om[:, None, None, None], u, axis=0)
    rows = pair_rows(basis, f)
    if eps_force is not None:
        rows[:6] += pair_rows(basis, eps_force)[:6]
    rows[:3] += basis.integrate(np.cross(ru, u, axis=0))
    rows[:3] -= np.cross(om, rp.I_c @ om)
    rows[3:6] -= rp.m_B * np.cross(om, xi)

    # pressure via the enthalpy: grad p = rho grad h, h filtered to the retained band
    h = enthalpy(rho, phys.a, phys.gamma, reg.delta, reg.beta)
    hK = basis.inverse(basis.dealias(basis.forward(h, SCALAR)), SCALAR)
    gh = np.stack([basis.dnodal(hK, a, "C") for a in range(3)])
    force = -rho * gh
    if np.any(state.fluid.b):
        force += np.cross(curl(basis, state.fluid.b), state.b_nodal(), axis=0)
    fluid += basis.velocity_weights * basis.forward_vector(force, (VELOCITY,) * 3)

    K = viscous_rows(basis, state.fluid.v, phys)
    if imex:
        K = K - viscous_diagonal(basis, phys) * state.fluid.v
    fluid -= K

    rows[6:] += fluid[basis.velocity_active]
    return rows


def momentum_step(state: SystemState, forces: np.ndarray, dt: float,
                  rho_new: Optional[np.ndarray] = None, rule: str = "backward_euler",
                  imex: bool = True, rtol: float = 1e-11, maxiter: int = 500,
                  info: Optional[Dict] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Advance ``U`` with the mass operator of ``rho_new`` (modal; default: unchanged density)."""
    basis = state.basis
    theta = RULES[rule] if imex else 0.0
    U0 = pack(basis, state.rigid.omega, state.rigid.xi, state.fluid.v)
    old = GalerkinMomentumSystem(basis, state.rho_nodal(), state.rigid_params, state.phys)
    rhs = old.mass(U0) + dt * np.asarray(forces)
    if imex and theta < 1.0:
        rhs -= (1.0 - theta) * dt * old.implicit(U0)
    rho_n = state.rho_nodal() if rho_new is None else basis.inverse(rho_new, SCALAR)
    new = GalerkinMomentumSystem(basis, rho_n, state.rigid_params, state.phys,
                                 c_implicit=theta * dt if imex else 0.0)
    U, stats = new.solve(rhs, x0=U0, rtol=rtol, maxiter=maxiter)
    if info is not None:
        info.update(stats)
    om, xi, v = unpack(basis, U)
    return v, om, xi


# ---------------------------------------------------------------- coupled step
def _rel(a, b) -> float:
    na = np.linalg.norm(a - b)
    den = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if den == 0 else float(na / den)


def picard_update(new: SystemState, old: SystemState) -> float:
    """Largest relative change over the unknown fields between two iterates."""
    return max(_rel(new.fluid.rho, old.fluid.rho), _rel(new.fluid.v, old.fluid.v),
               _rel(new.fluid.b, old.fluid.b), _rel(new.rigid.omega, old.rigid.omega),
               _rel(new.rigid.xi, old.rigid.xi))


def _check_finite(state: SystemState):
    for name, arr in (("rho", state.fluid.rho), ("v", state.fluid.v), ("b", state.fluid.b),
                      ("omega", state.rigid.omega), ("xi", state.rigid.xi)):
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError(f"non-finite values in {name} at t = {state.t:.6g}")


def coupled_step(state: SystemState, cfg: StepConfig, return_info: bool = False):
    """One time step: Picard sweeps over continuity, induction and momentum.

    Each sweep takes the advecting velocity and the explicit forces from
    the previous iterate (the old state on the first sweep), so
    ``picard_max = 1`` is plain sequential operator splitting.
    """
    basis = state.basis
    dt = cfg.dt
    theta = cfg.theta
    trap = theta < 1.0
    N_old = momentum_forces(state, cfg.imex) if trap else None
    prev = state
    updates = []
    solves = []
    for sweep in range(cfg.picard_max):
        vbar = 0.5 * (state.fluid.v + prev.fluid.v) if trap else prev.fluid.v
        rho_new, b_new = prev.fluid.rho, prev.fluid.b
        v_new, om_new, xi_new = prev.fluid.v, prev.rigid.omega, prev.rigid.xi
        done = set()
        for op in cfg.order:
            if op == "continuity":
                rho_new = continuity_step(basis, state.fluid.rho, vbar, state.reg.eps, dt,
                                          cfg.rule, cfg.imex)
            elif op == "induction":
                vel = basis.inverse_vector(vbar, (VELOCITY,) * 3)
                b_new = induction_step(state.fluid.b, state, dt, cfg.rule, velocity=vel,
                                       imex=cfg.imex)
            else:
                b_e = b_new if "induction" in done else prev.fluid.b
                expl = prev.replace(fluid=FluidState(prev.fluid.rho, prev.fluid.v, b_e))
                forces = momentum_forces(expl, cfg.imex)
                if trap:
                    forces = 0.5 * (N_old + forces)
                rho_mass = rho_new if "continuity" in done else prev.fluid.rho
                stats: Dict = {}
                v_new, om_new, xi_new = momentum_step(
                    state, forces, dt, rho_new=rho_mass, rule=cfg.rule, imex=cfg.imex,
                    rtol=cfg.solve_rtol, maxiter=cfg.solve_maxiter, info=stats)
                solves.append(stats)
            done.add(op)
        new = state.replace(fluid=FluidState(rho_new, v_new, b_new),
                            rigid=RigidState(om_new, xi_new))
        upd = picard_update(new, prev)
        updates.append(upd)
        prev = new
        if upd < cfg.picard_tol:
            break

    om_mid = 0.5 * (np.asarray(state.rigid.omega) + np.asarray(prev.rigid.omega))
    out = prev.replace(rotation=advance_rotation(state.rotation, om_mid, dt), t=state.t + dt)
    if cfg.enforce_constraint:
        out = enforce_linear_constraint(out)
    _check_finite(out)
    if return_info:
        return out, {"picard_updates": updates, "solves": solves}
    return out


def stable_dt(state: SystemState, cfl: float) -> float:
    """Explicit-term CFL bound; diffusion is implicit and does not enter."""
    if not 0 < cfl <= 1:
        raise ValueError("cfl must lie in (0, 1]")
    basis = state.basis
    rho = state.rho_nodal()
    phys, reg = state.phys, state.reg
    c2 = phys.gamma * phys.a * rho ** (phys.gamma - 1.0)
    if reg.delta > 0:
        c2 = c2 + reg.beta * reg.delta * rho ** (reg.beta - 1.0)
    speed = (np.max(np.linalg.norm(state.u_nodal(), axis=0))
             + np.max(np.linalg.norm(state.b_nodal(), axis=0))
             + np.sqrt(np.max(c2))
             + np.linalg.norm(state.rigid.omega) * basis.box.diameter
             + np.linalg.norm(state.rigid.xi))
    return float(cfl * np.min(basis.spacing) / speed)

"""Monitored functionals: energy balance, higher-order norms, relative energy,
weak-form residuals, the renormalized density budget and invariants."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.integrate import simpson, trapezoid

from .basis import CURL, MAGNETIC, SCALAR, VELOCITY, BasisSet
from .operators import (curl, div, enthalpy, internal_energy_density, magnetic_divergence_modal,
                        pressure, pressure_derivative, stress, velocity_gradient, _skew_field)
from .state import (SystemState, angular_momentum_M, rigid_velocity, total_linear_momentum,
                    total_mass)


# ================================================================ energy
@dataclass(frozen=True)
class EnergyReport:
    t: float
    kinetic: float
    magnetic: float
    internal: float
    F: float
    viscous: float
    resistive: float
    eps_channel: float
    dissipation: float
    cumulative_dissipation: float
    F0: float
    rigid_kinetic: float

    @property
    def balance_residual(self) -> float:
        """``F(t) + int_0^t dissipation - F(0)``; nonpositive up to time-discretization error."""
        return self.F + self.cumulative_dissipation - self.F0


def dissipation_parts(state: SystemState):
    basis = state.basis
    phys, reg = state.phys, state.reg
    G = velocity_gradient(basis, state.fluid.v)
    visc = float(basis.integrate(np.sum(stress(G, phys.mu, phys.lam) * G, axis=(0, 1))))
    if np.any(state.fluid.b):
        J = curl(basis, state.fluid.b)
        res = float(basis.integrate(np.sum(J * J, axis=0)))
    else:
        res = 0.0
    epsd = 0.0
    if reg.eps > 0:
        rho = state.rho_nodal()
        g = np.stack([basis.inverse(*basis.dmodal(state.fluid.rho, SCALAR, a)) for a in range(3)])
        w = phys.a * phys.gamma * rho ** (phys.gamma - 2.0)
        if reg.delta > 0:
            w = w + reg.delta * reg.beta * rho ** (reg.beta - 2.0)
        epsd = float(reg.eps * basis.integrate(w * np.sum(g * g, axis=0)))
    return visc, res, epsd


def energy_report(state: SystemState, previous: Optional[EnergyReport] = None) -> EnergyReport:
    """Energy parts at ``state``; dissipation is accumulated from ``previous`` by the trapezoid rule."""
    basis = state.basis
    phys, reg, rp = state.phys, state.reg, state.rigid_params
    rho = state.rho_nodal()
    u = state.u_nodal()
    om = np.asarray(state.rigid.omega, float)
    xi = np.asarray(state.rigid.xi, float)
    rigid = 0.5 * float(om @ rp.I_c @ om) + 0.5 * rp.m_B * float(xi @ xi)
    kin = 0.5 * float(basis.integrate(rho * np.sum(u * u, axis=0))) + rigid
    B = state.b_nodal()
    mag = 0.5 * float(basis.integrate(np.sum(B * B, axis=0)))
    intl = float(basis.integrate(internal_energy_density(rho, phys.a, phys.gamma,
                                                         reg.delta, reg.beta)))
    F = kin + mag + intl
    visc, res, epsd = dissipation_parts(state)
    diss = visc + res + epsd
    if previous is None:
        cum, F0 = 0.0, F
    else:
        cum = previous.cumulative_dissipation + 0.5 * (state.t - previous.t) * (
            previous.dissipation + diss)
        F0 = previous.F0
    return EnergyReport(state.t, kin, mag, intl, F, visc, res, epsd, diss, cum, F0, rigid)


# ================================================================ norms
def modal_norm2(basis: BasisSet, c: np.ndarray, parities, order: int = 0) -> float:
    """``sum_k W_k (1 + |k|^2 + ... + |k|^(2 order)) |c_k|^2`` over the components of ``c``."""
    c = np.asarray(c, dtype=float)
    if c.ndim == 3:
        c = c[None]
        parities = [parities]
    weight = sum(basis.kappa2 ** j for j in range(order + 1))
    return float(sum(np.sum(basis.weights(p) * weight * c[i] ** 2)
                     for i, p in enumerate(parities)))


@dataclass(frozen=True)
class SobolevReport:
    t: float
    v_22: float           # full H^2 norm used as a proxy for the tangential seminorm
    rho_H2: float         # of rho - rho_bar
    rho_t_L2: float
    sqrt_rho_u: float
    sqrt_rho_u_t: float
    b_22: float
    b_t_L2: float
    E: float
    D: float
    D_rigid: float        # |xi|^2 + |omega|^2, reported apart from the dissipated channels
    stencil: str = "centered, (s[+1] - s[-1]) / (t[+1] - t[-1])"


def sobolev_report(window: Sequence[SystemState]) -> SobolevReport:
    """Discrete analogues of the higher-order functional on a 3-snapshot window."""
    if len(window) != 3:
        raise ValueError("sobolev_report needs exactly three consecutive snapshots")
    sm, s0, sp = window
    basis = s0.basis
    h = sp.t - sm.t
    if not h > 0:
        raise ValueError("snapshots must be strictly increasing in time")
    vp = (VELOCITY,) * 3
    drho = s0.fluid.rho.copy()
    drho[0, 0, 0] = 0.0
    rho_t = (sp.fluid.rho - sm.fluid.rho) / h
    v_t = (sp.fluid.v - sm.fluid.v) / h
    b_t = (sp.fluid.b - sm.fluid.b) / h
    om_t = (np.asarray(sp.rigid.omega) - np.asarray(sm.rigid.omega)) / h
    xi_t = (np.asarray(sp.rigid.xi) - np.asarray(sm.rigid.xi)) / h
    rp = s0.rigid_params
    rho = s0.rho_nodal()

    def body_l2(vel_nodal, om, xi):
        return (float(basis.integrate(rho * np.sum(vel_nodal ** 2, axis=0)))
                + float(om @ rp.I_c @ om) + rp.m_B * float(xi @ xi))

    u = s0.u_nodal()
    u_t = basis.inverse_vector(v_t, vp) + rigid_velocity(basis, om_t, xi_t)
    parts = dict(
        v_22=modal_norm2(basis, s0.fluid.v, vp, 2),
        rho_H2=modal_norm2(basis, drho, SCALAR, 2),
        rho_t_L2=modal_norm2(basis, rho_t, SCALAR, 0),
        sqrt_rho_u=body_l2(u, s0.rigid.omega, s0.rigid.xi),
        sqrt_rho_u_t=body_l2(u_t, om_t, xi_t),
        b_22=modal_norm2(basis, s0.fluid.b, MAGNETIC, 2),
        b_t_L2=modal_norm2(basis, b_t, MAGNETIC, 0),
    )
    E = sum(parts.values())
    u_t_S = parts["sqrt_rho_u_t"]
    D = (modal_norm2(basis, s0.fluid.v, vp, 3) + modal_norm2(basis, s0.fluid.b, MAGNETIC, 3)
         + parts["rho_H2"] + modal_norm2(basis, rho_t, SCALAR, 1)
         + modal_norm2(basis, v_t, vp, 1) + u_t_S + modal_norm2(basis, b_t, MAGNETIC, 1))
    om, xi = np.asarray(s0.rigid.omega), np.asarray(s0.rigid.xi)
    return SobolevReport(s0.t, D=D, D_rigid=float(om @ om + xi @ xi), E=E, **parts)


# ================================================================ relative energy
@dataclass(frozen=True)
class RelativeEnergyReport:
    t: float
    velocity: float
    pressure: float
    magnetic: float

    @property
    def total(self) -> float:
        return self.velocity + self.pressure + self.magnetic


def bregman_power(rho: np.ndarray, r: np.ndarray, gamma: float) -> np.ndarray:
    """``rho^g - r^g - g r^(g-1) (rho - r)`` without cancellation for ``rho`` close to ``r``."""
    rho = np.asarray(rho, float)
    r = np.asarray(r, float)
    z = rho / r - 1.0
    g = gamma
    big = g * np.log1p(np.where(np.abs(z) < 1e-3, 0.0, z))
    far = np.expm1(big) - g * z
    near = z * z * (g * (g - 1) / 2 + z * (g * (g - 1) * (g - 2) / 6
                                          + z * g * (g - 1) * (g - 2) * (g - 3) / 24))
    return r ** g * np.where(np.abs(z) < 1e-3, near, far)


def prolong(coarse: BasisSet, fine: BasisSet, c: np.ndarray) -> np.ndarray:
    """Embed coefficients of a coarse expansion into a finer basis on the same box."""
    if not np.allclose(coarse.lengths, fine.lengths):
        raise ValueError("prolongation needs identical boxes")
    if any(nc > nf for nc, nf in zip(coarse.shape, fine.shape)):
        raise ValueError("target basis must be at least as fine")
    out = np.zeros(c.shape[:-3] + fine.shape)
    n1, n2, n3 = coarse.shape
    out[..., :n1, :n2, :n3] = c
    return out


def prolong_state(state: SystemState, fine: BasisSet) -> SystemState:
    from .state import FluidState
    src = state.basis
    fl = state.fluid
    fluid = FluidState(prolong(src, fine, fl.rho), prolong(src, fine, fl.v), prolong(src, fine, fl.b))
    return state.replace(basis=fine, fluid=fluid)


def relative_energy(weak: SystemState, strong: SystemState) -> RelativeEnergyReport:
    """Relative energy of ``weak`` with respect to ``strong`` (evaluated on the finer grid)."""
    if weak.basis.shape != strong.basis.shape:
        fine = weak.basis if np.prod(weak.basis.shape) > np.prod(strong.basis.shape) else strong.basis
        if weak.basis is not fine:
            weak = prolong_state(weak, fine)
        if strong.basis is not fine:
            strong = prolong_state(strong, fine)
    basis = weak.basis
    phys, reg = strong.phys, strong.reg
    rho = weak.rho_nodal()
    r = strong.rho_nodal()
    du = weak.u_nodal() - strong.u_nodal()
    rp = strong.rigid_params
    dom = np.asarray(weak.rigid.omega) - np.asarray(strong.rigid.omega)
    dxi = np.asarray(weak.rigid.xi) - np.asarray(strong.rigid.xi)
    vel = 0.5 * float(basis.integrate(rho * np.sum(du * du, axis=0)))
    vel += 0.5 * float(dom @ rp.I_c @ dom) + 0.5 * rp.m_B * float(dxi @ dxi)
    pr = phys.a * bregman_power(rho, r, phys.gamma) / (phys.gamma - 1.0)
    if reg.delta > 0:
        pr = pr + reg.delta * bregman_power(rho, r, reg.beta) / (reg.beta - 1.0)
    prs = float(basis.integrate(pr))
    db = weak.b_nodal() - strong.b_nodal()
    mag = 0.5 * float(basis.integrate(np.sum(db * db, axis=0)))
    return RelativeEnergyReport(weak.t, vel, prs, mag)


# ================================================================ weak residuals
@dataclass(frozen=True)
class TestFunction:
    """Space-time test function ``psi(t) * phi(x)`` with ``psi = (t/T)^m (1 - t/T)^2``.

    ``kind`` is ``density`` (cosine mode ``k``), ``momentum`` (sine mode ``k``
    in component ``comp``, plus rigid parts ``omega``/``xi``) or ``magnetic``
    (solenoidal coefficient vector ``a`` at wavevector ``k``).
    """
    kind: str
    k: tuple
    m: int = 0
    comp: int = 0
    omega: tuple = (0.0, 0.0, 0.0)
    xi: tuple = (0.0, 0.0, 0.0)
    a: tuple = (0.0, 0.0, 0.0)

    def psi(self, t, T):
        s = np.asarray(t, float) / T
        return s ** self.m * (1 - s) ** 2

    def dpsi(self, t, T):
        s = np.asarray(t, float) / T
        d = -2 * (1 - s) * s ** self.m
        if self.m > 0:
            d = d + self.m * s ** (self.m - 1) * (1 - s) ** 2
        return d / T


def default_test_functions() -> List[TestFunction]:
    """Twenty low-mode test functions: 6 density, 8 momentum, 6 magnetic."""
    tf = [TestFunction("density", (1, 0, 0), 0), TestFunction("density", (0, 1, 1), 0),
          TestFunction("density", (1, 1, 0), 1), TestFunction("density", (2, 0, 1), 1),
          TestFunction("density", (0, 0, 2), 2), TestFunction("density", (1, 2, 1), 2),
          TestFunction("momentum", (1, 1, 1), 0, 0), TestFunction("momentum", (1, 2, 1), 1, 1),
          TestFunction("momentum", (2, 1, 1), 0, 2), TestFunction("momentum", (1, 1, 2), 2, 0),
          TestFunction("momentum", (1, 1, 1), 1, 2),
          TestFunction("momentum", (1, 1, 1), 0, 0, omega=(1.0, 0.0, 0.0)),
          TestFunction("momentum", (1, 1, 1), 1, 1, omega=(0.0, 0.0, 1.0), xi=(0.0, 1.0, 0.0)),
          TestFunction("momentum", (2, 2, 1), 0, 1, xi=(1.0, 0.0, 1.0))]
    # magnetic: a is made solenoidal for the wavevector when the basis is known
    tf += [TestFunction("magnetic", (1, 1, 0), 0, a=(1.0, -1.0, 0.0)),
           TestFunction("magnetic", (1, 1, 1), 0, a=(1.0, 0.0, -1.0)),
           TestFunction("magnetic", (0, 1, 1), 1, a=(0.0, 1.0, -1.0)),
           TestFunction("magnetic", (2, 1, 1), 1, a=(0.0, 1.0, -1.0)),
           TestFunction("magnetic", (1, 2, 1), 2, a=(1.0, 1.0, -1.0)),
           TestFunction("magnetic", (1, 0, 2), 0, a=(2.0, 0.0, -1.0))]
    return tf


def _unit_mode(basis: BasisSet, k) -> np.ndarray:
    c = np.zeros(basis.shape)
    c[tuple(k)] = 1.0
    return c


def _magnetic_test_coeffs(basis: BasisSet, tf: TestFunction) -> np.ndarray:
    from .operators import solenoidal_project
    c = np.zeros((3,) + basis.shape)
    for i in range(3):
        c[(i,) + tuple(tf.k)] = tf.a[i]
    c = solenoidal_project(basis, c)
    n = np.linalg.norm(c)
    if n == 0:
        raise ValueError(f"magnetic test function at k={tf.k} is empty after projection")
    return c / n


def _face_points(basis: BasisSet, axis: int, side: int):
    """Face midpoint grid ``x`` lists and the face element area."""
    xs = [basis.x1d[j] for j in range(3)]
    xs[axis] = np.array([side * basis.lengths[axis] / 2])
    others = [j for j in range(3) if j != axis]
    area = float(np.prod([basis.spacing[j] for j in others]))
    return xs, area


def _wall_term(state: SystemState, eta: np.ndarray) -> float:
    """``int_{dC} (n . w)(b . eta) dS`` for the rigid wall velocity ``w``."""
    basis = state.basis
    om = np.asarray(state.rigid.omega, float)
    xi = np.asarray(state.rigid.xi, float)
    if not (np.any(om) or np.any(xi)) or not np.any(state.fluid.b):
        return 0.0
    total = 0.0
    for axis in range(3):
        for side in (-1, 1):
            xs, area = _face_points(basis, axis, side)
            X = np.stack(np.meshgrid(*xs, indexing="ij"))
            w = np.cross(om[:, None, None, None], X, axis=0) + xi[:, None, None, None]
            wn = side * w[axis]
            bdot = 0.0
            for i in range(3):
                if i == axis:
                    continue  # normal components vanish on this face
                bi = basis.evaluate(state.fluid.b[i], MAGNETIC[i], *xs)
                ei = basis.evaluate(eta[i], MAGNETIC[i], *xs)
                bdot = bdot + bi * ei
            total += float(np.sum(wn * bdot) * area)
    return total


def _spatial_integrands(state: SystemState, tf: TestFunction, include_eps: bool = True):
    """Return ``(mass_pairing, flux_part)`` so that the residual integrand is
    ``-dpsi * mass_pairing + psi * flux_part``."""
    basis = state.basis
    phys, reg, rp = state.phys, state.reg, state.rigid_params
    rho = state.rho_nodal()
    if tf.kind == "density":
        phi = basis.inverse(_unit_mode(basis, tf.k), SCALAR)
        gphi = np.stack([basis.inverse(*basis.dmodal(_unit_mode(basis, tf.k), SCALAR, a))
                         for a in range(3)])
        v = state.v_nodal()
        mass = float(basis.integrate(rho * phi))
        flux = -float(basis.integrate(rho * np.sum(v * gphi, axis=0)))
        if include_eps and reg.eps > 0:
            grho = np.stack([basis.inverse(*basis.dmodal(state.fluid.rho, SCALAR, a))
                             for a in range(3)])
            flux += reg.eps * float(basis.integrate(np.sum(grho * gphi, axis=0)))
        return mass, flux

    if tf.kind == "momentum":
        vp = (VELOCITY,) * 3
        cphi = np.zeros((3,) + basis.shape)
        cphi[(tf.comp,) + tuple(tf.k)] = 1.0
        om_p = np.asarray(tf.omega, float)
        xi_p = np.asarray(tf.xi, float)
        phiC = basis.inverse_vector(cphi, vp)
        phi = phiC + rigid_velocity(basis, om_p, xi_p)
        Gphi = velocity_gradient(basis, cphi) + _skew_field(om_p, basis)
        divphi = div(basis, cphi, vp)
        om = np.asarray(state.rigid.omega, float)
        xi = np.asarray(state.rigid.xi, float)
        u = state.u_nodal()
        v = state.v_nodal()
        mass = (float(basis.integrate(rho * np.sum(u * phi, axis=0)))
                + float(om_p @ rp.I_c @ om) + rp.m_B * float(xi_p @ xi))
        flux = -float(basis.integrate(np.einsum("a...,i...,ia...->...", rho * v, u, Gphi)))
        flux += float(basis.integrate(rho * np.sum(np.cross(om[:, None, None, None], u, axis=0)
                                                   * phi, axis=0)))
        flux += float(om_p @ np.cross(om, rp.I_c @ om)) + rp.m_B * float(xi_p @ np.cross(om, xi))
        p = pressure(rho, phys.a, phys.gamma, reg.delta, reg.beta)
        flux -= float(basis.integrate(p * divphi))
        Gv = velocity_gradient(basis, state.fluid.v)
        flux += float(basis.integrate(np.sum(stress(Gv, phys.mu, phys.lam) * Gphi, axis=(0, 1))))
        if np.any(state.fluid.b):
            JxB = np.cross(curl(basis, state.fluid.b), state.b_nodal(), axis=0)
            # body force on the cavity modes only: Maxwell-stress form on rigid motions
            flux -= float(basis.integrate(np.sum(JxB * phiC, axis=0)))
        if include_eps and reg.eps > 0:
            grho = np.stack([basis.inverse(*basis.dmodal(state.fluid.rho, SCALAR, a))
                             for a in range(3)])
            Gu = Gv + _skew_field(om, basis)
            flux += reg.eps * float(basis.integrate(
                np.einsum("a...,ia...,i...->...", grho, Gu, phi)))
        return mass, flux

    if tf.kind == "magnetic":
        eta = _magnetic_test_coeffs(basis, tf)
        etan = basis.inverse_vector(eta, MAGNETIC)
        curl_eta = curl(basis, eta)
        B = state.b_nodal()
        mass = float(basis.integrate(np.sum(B * etan, axis=0)))
        if not np.any(state.fluid.b):
            return mass, 0.0
        from .operators import magnetic_gradient
        om = np.asarray(state.rigid.omega, float)
        w = rigid_velocity(basis, om, state.rigid.xi)
        Gb = magnetic_gradient(basis, state.fluid.b)
        rot = np.cross(om[:, None, None, None], B, axis=0) - np.einsum("a...,ia...->i...", w, Gb)
        u = state.u_nodal()
        J = curl(basis, state.fluid.b)
        flux = float(basis.integrate(np.sum(rot * etan, axis=0)))
        flux -= float(basis.integrate(np.sum(np.cross(u, B, axis=0) * curl_eta, axis=0)))
        flux += float(basis.integrate(np.sum(J * curl_eta, axis=0)))
        flux += _wall_term(state, eta)
        return mass, flux
    raise ValueError(f"unknown test function kind {tf.kind!r}")


def _time_integral(y, t):
    y = np.asarray(y, float)
    t = np.asarray(t, float)
    if len(t) < 3:
        return float(trapezoid(y, x=t))
    return float(simpson(y, x=t))


def weak_residuals(trajectory: Sequence[SystemState],
                   tests: Optional[Sequence[TestFunction]] = None,
                   T: Optional[float] = None) -> List[Dict]:
    """Residual of each weak identity for each test function over the trajectory.

    Time integrals use composite Simpson over the stored snapshots; the test
    functions vanish at ``T`` (the last snapshot time unless given).
    """
    tests = list(default_test_functions() if tests is None else tests)
    times = np.array([s.t for s in trajectory])
    T = float(times[-1] if T is None else T)
    t0 = times[0]
    rows = []
    for tf in tests:
        mass = np.empty(len(times))
        flux = np.empty(len(times))
        for j, s in enumerate(trajectory):
            mass[j], flux[j] = _spatial_integrands(s, tf)
        integrand = -tf.dpsi(times - t0, T - t0) * mass + tf.psi(times - t0, T - t0) * flux
        res = _time_integral(integrand, times) - tf.psi(0.0, T - t0) * mass[0]
        scale = max(abs(tf.psi(0.0, T - t0) * mass[0]),
                    _time_integral(np.abs(tf.dpsi(times - t0, T - t0) * mass), times), 1e-300)
        rows.append({"kind": tf.kind, "k": tf.k, "m": tf.m, "residual": float(res),
                     "scale": float(scale)})
    return rows


# ================================================================ density budget
def renormalized_budget(basis: BasisSet, times, rho_nodals, divv_nodals,
                        eps_terms=None) -> np.ndarray:
    """Residual of ``d/dt int rho log rho + int rho div v + eps int |grad rho|^2/rho = 0``
    integrated in time by the trapezoid rule; one value per snapshot."""
    times = np.asarray(times, float)
    S = np.array([basis.integrate(r * np.log(r)) for r in rho_nodals])
    src = np.array([basis.integrate(r * d) for r, d in zip(rho_nodals, divv_nodals)])
    if eps_terms is not None:
        src = src + np.asarray(eps_terms, float)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(times) * (src[1:] + src[:-1]))])
    return S - S[0] + cum


def entropy_budget(trajectory: Sequence[SystemState]) -> np.ndarray:
    basis = trajectory[0].basis
    times = [s.t for s in trajectory]
    rhos, divs, eps_t = [], [], []
    for s in trajectory:
        rho = s.rho_nodal()
        rhos.append(rho)
        divs.append(div(basis, s.fluid.v, (VELOCITY,) * 3))
        if s.reg.eps > 0:
            g = np.stack([basis.inverse(*basis.dmodal(s.fluid.rho, SCALAR, a)) for a in range(3)])
            eps_t.append(s.reg.eps * float(basis.integrate(np.sum(g * g, axis=0) / rho)))
        else:
            eps_t.append(0.0)
    return renormalized_budget(basis, times, rhos, divs, eps_t)


# ================================================================ invariants
INVARIANT_THRESHOLDS = {
    "mass_drift": 1e-10,
    "divb_modal": 1e-12,
    "divb_nodal": 1e-10,
    "P_norm": 1e-6,
    "Q_orth_err": 1e-10,
}


@dataclass
class InvariantReport:
    values: Dict[str, float]
    thresholds: Dict[str, float] = field(default_factory=lambda: dict(INVARIANT_THRESHOLDS))

    @property
    def violations(self) -> Dict[str, float]:
        return {k: v for k, v in self.values.items()
                if k in self.thresholds and not v <= self.thresholds[k]}

    @property
    def ok(self) -> bool:
        return not self.violations


def invariant_report(state: SystemState, reference: Optional[SystemState] = None) -> InvariantReport:
    """Conservation and constraint diagnostics.  ``reference`` supplies the
    initial mass and momenta (default: the fluid mass recorded in the
    rigid parameters and zero linear momentum)."""
    basis = state.basis
    m0 = state.rigid_params.m_F if reference is None else total_mass(basis, reference.fluid.rho)
    m = total_mass(basis, state.fluid.rho)
    divb_modal = float(np.max(np.abs(magnetic_divergence_modal(basis, state.fluid.b))))
    divb_nodal = float(np.max(np.abs(div(basis, state.fluid.b, MAGNETIC))))
    P = total_linear_momentum(state)
    P0 = np.zeros(3) if reference is None else total_linear_momentum(reference)
    M = angular_momentum_M(state)
    vals = {
        "mass_drift": abs(m - m0) / abs(m0),
        "divb_modal": divb_modal,
        "divb_nodal": divb_nodal,
        "P_norm": float(np.linalg.norm(P - P0)),
        "M_norm": float(np.linalg.norm(M)),
        "Q_orth_err": state.rotation.orthogonality_error(),
        "min_rho": float(np.min(state.rho_nodal())),
    }
    if reference is not None:
        vals["M_drift"] = abs(vals["M_norm"] - float(np.linalg.norm(angular_momentum_M(reference))))
    return InvariantReport(vals)

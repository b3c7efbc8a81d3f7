"""Differential and constitutive operators on the cavity bases.

Derivatives are always taken modally (exact for the expansion); products
are formed on the grid and passed through the 2/3-rule filter.
"""
from __future__ import annotations

from typing import Sequence, Tuple

import numpy as np

from .basis import CURL, MAGNETIC, SCALAR, VELOCITY, BasisSet, Parity
from .state import PositivityError, SystemState, rigid_velocity


# ---------------------------------------------------------------- helpers
def dealias_nodal(basis: BasisSet, f: np.ndarray, parity: Parity = SCALAR) -> np.ndarray:
    if not basis.res.dealias:
        return np.asarray(f, dtype=float)
    return basis.inverse(basis.dealias(basis.forward(f, parity)), parity)


def _dealias_vector(basis, f, parities):
    return np.stack([dealias_nodal(basis, f[i], p) for i, p in enumerate(parities)])


def magnetic_divergence_modal(basis: BasisSet, b: np.ndarray) -> np.ndarray:
    """Coefficient of the all-cosine mode of ``div b`` at every wavevector."""
    return np.sum(basis.kappa * b, axis=0)


# ---------------------------------------------------------------- first order
def grad(basis: BasisSet, c: np.ndarray, parity: Parity = SCALAR) -> np.ndarray:
    out = []
    for a in range(3):
        d, p = basis.dmodal(c, parity, a)
        out.append(basis.inverse(d, p))
    return np.stack(out)


def div(basis: BasisSet, c: np.ndarray, parities: Sequence[Parity] = (VELOCITY,) * 3) -> np.ndarray:
    """Nodal divergence of a vector expansion whose components may differ in parity."""
    total = 0.0
    for a in range(3):
        d, p = basis.dmodal(c[a], parities[a], a)
        total = total + basis.inverse(d, p)
    return total


def curl_modal(basis: BasisSet, b: np.ndarray) -> np.ndarray:
    """Coefficients of ``curl b`` (components in the CURL parities): ``-kappa x b``."""
    return -np.cross(basis.kappa, b, axis=0)


def curl_of_curl_field_modal(basis: BasisSet, j: np.ndarray) -> np.ndarray:
    """Coefficients of ``curl j`` for ``j`` in CURL parities (lands in MAGNETIC parities)."""
    return np.cross(basis.kappa, j, axis=0)


def curl(basis: BasisSet, b: np.ndarray) -> np.ndarray:
    return basis.inverse_vector(curl_modal(basis, b), CURL)


def laplacian(basis: BasisSet, c: np.ndarray) -> np.ndarray:
    """Diagonal modal Laplacian, valid for every parity of the bases."""
    return -basis.kappa2 * c


def velocity_gradient(basis: BasisSet, v: np.ndarray) -> np.ndarray:
    """Nodal ``G[i, a] = d v_i / d x_a`` for a sine-basis velocity."""
    G = np.empty((3, 3) + basis.shape)
    for i in range(3):
        for a in range(3):
            d, p = basis.dmodal(v[i], VELOCITY, a)
            G[i, a] = basis.inverse(d, p)
    return G


def magnetic_gradient(basis: BasisSet, b: np.ndarray) -> np.ndarray:
    """Nodal ``G[i, a] = d b_i / d x_a`` for a magnetic-basis field."""
    G = np.empty((3, 3) + basis.shape)
    for i in range(3):
        for a in range(3):
            d, p = basis.dmodal(b[i], MAGNETIC[i], a)
            G[i, a] = basis.inverse(d, p)
    return G


# ---------------------------------------------------------------- constitutive
def stress(G: np.ndarray, mu: float, lam: float) -> np.ndarray:
    """``mu (G + G^T) + (lam - 2 mu / 3) tr(G) I`` pointwise."""
    S = mu * (G + np.swapaxes(G, 0, 1))
    tr = np.trace(G, axis1=0, axis2=1)
    for i in range(3):
        S[i, i] += (lam - 2.0 * mu / 3.0) * tr
    return S


def stress_divergence(basis: BasisSet, v: np.ndarray, mu: float, lam: float) -> np.ndarray:
    """``div S(grad v) = mu lap v + (lam + mu/3) grad div v``, assembled modally."""
    out = mu * basis.inverse_vector(laplacian(basis, v), (VELOCITY,) * 3)
    coef = lam + mu / 3.0
    for i in range(3):
        for a in range(3):
            d, p = basis.dmodal(v[a], VELOCITY, a)
            d, p = basis.dmodal(d, p, i)
            out[i] += coef * basis.inverse(d, p)
    return out


def _check_positive(rho):
    m = float(np.min(rho))
    if not m > 0:
        raise PositivityError(m)


def pressure(rho: np.ndarray, a: float, gamma: float, delta: float = 0.0,
             beta: float = 1.0) -> np.ndarray:
    """``a rho^gamma + delta rho^beta`` on nodal data."""
    rho = np.asarray(rho, dtype=float)
    _check_positive(rho)
    lr = np.log(rho)
    p = a * np.exp(gamma * lr)
    if delta > 0:
        p = p + delta * np.exp(beta * lr)
    return p


def pressure_derivative(rho, a, gamma, delta=0.0, beta=1.0):
    rho = np.asarray(rho, dtype=float)
    _check_positive(rho)
    lr = np.log(rho)
    dp = a * gamma * np.exp((gamma - 1.0) * lr)
    if delta > 0:
        dp = dp + delta * beta * np.exp((beta - 1.0) * lr)
    return dp


def enthalpy(rho, a, gamma, delta=0.0, beta=1.0):
    """Derivative of the internal-energy density ``p/(gamma-1) + delta rho^beta/(beta-1)``."""
    rho = np.asarray(rho, dtype=float)
    _check_positive(rho)
    lr = np.log(rho)
    h = a * gamma / (gamma - 1.0) * np.exp((gamma - 1.0) * lr)
    if delta > 0:
        h = h + delta * beta / (beta - 1.0) * np.exp((beta - 1.0) * lr)
    return h


def internal_energy_density(rho, a, gamma, delta=0.0, beta=1.0):
    rho = np.asarray(rho, dtype=float)
    _check_positive(rho)
    lr = np.log(rho)
    e = a / (gamma - 1.0) * np.exp(gamma * lr)
    if delta > 0:
        e = e + delta / (beta - 1.0) * np.exp(beta * lr)
    return e


# ---------------------------------------------------------------- magnetic
def lorentz_force(basis: BasisSet, b: np.ndarray) -> np.ndarray:
    """Nodal ``(curl b) x b``; component ``i`` shares the parity of ``b_i``."""
    J = curl(basis, b)
    B = basis.inverse_vector(b, MAGNETIC)
    return _dealias_vector(basis, np.cross(J, B, axis=0), MAGNETIC)


def maxwell_stress_divergence(basis: BasisSet, b: np.ndarray) -> np.ndarray:
    """``div(b (x) b - |b|^2 I / 2)`` from nodal products and modal derivatives."""
    B = basis.inverse_vector(b, MAGNETIC)
    out = np.zeros((3,) + basis.shape)
    half_b2 = 0.5 * np.sum(B * B, axis=0)
    for i in range(3):
        for a in range(3):
            prod = B[i] * B[a]
            # b_i b_a: sine along i and a if i != a, cosine along i if i == a
            par = ["C", "C", "C"]
            if i != a:
                par[i] = "S"
                par[a] = "S"
            c = basis.forward(prod, tuple(par))
            if basis.res.dealias:
                c = basis.dealias(c)
            d, p = basis.dmodal(c, tuple(par), a)
            out[i] += basis.inverse(d, p)
        c = basis.forward(half_b2, SCALAR)
        if basis.res.dealias:
            c = basis.dealias(c)
        d, p = basis.dmodal(c, SCALAR, i)
        out[i] -= basis.inverse(d, p)
    return out


def solenoidal_project(basis: BasisSet, b: np.ndarray) -> np.ndarray:
    """``a - kappa (kappa . a) / |kappa|^2`` per wavevector, restricted to present components."""
    b = np.where(basis.magnetic_mask, b, 0.0)
    k2 = basis.kappa2
    kd = np.sum(basis.kappa * b, axis=0)
    scale = np.divide(kd, k2, out=np.zeros_like(kd), where=k2 > 0)
    return np.where(basis.magnetic_mask, b - basis.kappa * scale, 0.0)


# ---------------------------------------------------------------- transport
def rotation_terms(state: SystemState) -> Tuple[np.ndarray, np.ndarray]:
    """``rho omega x u`` and ``omega x b - (omega x x + xi) . grad b`` (nodal, filtered)."""
    basis = state.basis
    om = np.asarray(state.rigid.omega, dtype=float)
    rho = state.rho_nodal()
    u = state.u_nodal()
    mom = rho * np.cross(om[:, None, None, None], u, axis=0)
    mom = _dealias_vector(basis, mom, (SCALAR,) * 3)
    B = state.b_nodal()
    Gb = magnetic_gradient(basis, state.fluid.b)
    w = rigid_velocity(basis, om, state.rigid.xi)
    ind = np.cross(om[:, None, None, None], B, axis=0) - np.einsum("a...,ia...->i...", w, Gb)
    ind = _dealias_vector(basis, ind, MAGNETIC)
    return mom, ind


def convection_terms(state: SystemState) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``div(rho v (x) u)``, ``div(rho v)`` and ``b div u - b . grad u + u . grad b``."""
    basis = state.basis
    rho = state.rho_nodal()
    v = state.v_nodal()
    u = state.u_nodal()
    rv = np.stack([dealias_nodal(basis, rho * v[a], VELOCITY) for a in range(3)])
    cont = sum(basis.dnodal(rv[a], a, "S") for a in range(3))
    cont = dealias_nodal(basis, cont, SCALAR)

    mom = np.zeros((3,) + basis.shape)
    for i in range(3):
        for a in range(3):
            f = dealias_nodal(basis, rv[a] * u[i], SCALAR)
            mom[i] += basis.dnodal(f, a, "S")
    mom = _dealias_vector(basis, mom, (SCALAR,) * 3)

    Gv = velocity_gradient(basis, state.fluid.v)
    Gu = Gv.copy()
    Gu += _skew_field(state.rigid.omega, basis)
    divu = np.trace(Gv, axis1=0, axis2=1)
    B = state.b_nodal()
    Gb = magnetic_gradient(basis, state.fluid.b)
    ind = (B * divu - np.einsum("a...,ia...->i...", B, Gu)
           + np.einsum("a...,ia...->i...", u, Gb))
    ind = _dealias_vector(basis, ind, MAGNETIC)
    return mom, cont, ind


def _skew_field(omega, basis):
    """Gradient of ``omega x x`` broadcast onto the grid: ``G[i, a] = eps_{i b a} omega_b``."""
    om = np.asarray(omega, dtype=float)
    S = np.array([[0.0, -om[2], om[1]],
                  [om[2], 0.0, -om[0]],
                  [-om[1], om[0], 0.0]])
    return S[:, :, None, None, None] * np.ones((1, 1) + basis.shape)

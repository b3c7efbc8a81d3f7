import numpy as np
import pytest
from hypothesis import given, strategies as st

from cavmhd.basis import SCALAR, VELOCITY
from cavmhd.state import (FluidState, PhysParams, RegParams, RigidParams, RigidState,
                          angular_momentum_M, enforce_linear_constraint, rest_state,
                          total_linear_momentum, total_mass)

from conftest import make_basis, random_state


def test_phys_params_constraints():
    """[TRIVIAL] gamma > 1, a > 0, mu > 0, lam >= 0."""
    for kw in ({"gamma": 0.9}, {"a": 0.0}, {"mu": 0.0}, {"lam": -1.0}):
        with pytest.raises(ValueError):
            PhysParams(**kw)


def test_reg_params_beta_bound():
    """[PAPER] delta > 0 needs beta > max(gamma, 4)."""
    with pytest.raises(ValueError):
        RegParams(delta=1e-3, beta=4.0).validate(1.4)
    RegParams(delta=1e-3, beta=5.0).validate(1.4)


def test_rigid_params_validation():
    """[TRIVIAL] I_c symmetric positive definite, masses positive."""
    with pytest.raises(ValueError):
        RigidParams(1.0, np.diag([1.0, -1.0, 1.0]), 1.0)
    with pytest.raises(ValueError):
        RigidParams(0.0, np.eye(3), 1.0)


def test_assemble_u_translation(basis6):
    """[TRIVIAL] v = 0, omega = 0, xi = e1 gives u = e1 everywhere."""
    s = rest_state(basis6).replace(rigid=RigidState(np.zeros(3), np.array([1.0, 0, 0])))
    u = s.u_nodal()
    assert np.allclose(u[0], 1.0) and np.allclose(u[1:], 0.0)


def test_assemble_u_rotation(basis6):
    """[TRIVIAL] omega = e3 gives u = (-x2, x1, 0)."""
    s = rest_state(basis6).replace(rigid=RigidState(np.array([0, 0, 1.0]), np.zeros(3)))
    u = s.u_nodal()
    x = basis6.x
    assert np.allclose(u[0], -x[1]) and np.allclose(u[1], x[0]) and np.allclose(u[2], 0)


@given(seed=st.integers(0, 10**6))
def test_assemble_u_recovers_v(seed):
    """[TRIVIAL] u - omega x x - xi reproduces v nodally."""
    b = make_basis(6)
    s = random_state(b, seed=seed)
    om, xi = s.rigid.omega, s.rigid.xi
    w = np.cross(om[:, None, None, None], b.x, axis=0) + xi[:, None, None, None]
    assert np.max(np.abs(s.u_nodal() - w - s.v_nodal())) <= 1e-12


def test_total_mass_constant_and_modes(basis6):
    """[TRIVIAL] rho = c (plus any nonconstant cosine mode) has mass c V."""
    s = rest_state(basis6, rho_bar=2.0)
    V = basis6.box.volume
    assert total_mass(basis6, s.fluid.rho) == pytest.approx(2.0 * V)
    rho = s.fluid.rho.copy()
    rho[1, 2, 0] = 0.3
    assert total_mass(basis6, rho) == pytest.approx(2.0 * V)


@given(seed=st.integers(0, 10**6))
def test_total_mass_matches_quadrature(seed):
    """[DERIVED] modal mass equals grid quadrature of the nodal density."""
    b = make_basis(6)
    s = random_state(b, seed=seed)
    q = b.integrate(b.inverse(s.fluid.rho, SCALAR))
    assert total_mass(b, s.fluid.rho) == pytest.approx(q, rel=1e-12)


def test_linear_momentum_of_translation(basis6):
    """[TRIVIAL] rho = rho_bar, u = xi = e1 gives P = (m_F + m_B) e1."""
    s = rest_state(basis6, rho_bar=1.5, m_B=2.0)
    s = s.replace(rigid=RigidState(np.zeros(3), np.array([1.0, 0, 0])))
    P = total_linear_momentum(s)
    assert np.allclose(P, [(1.5 * basis6.box.volume + 2.0), 0, 0], rtol=1e-12)


def test_linear_momentum_quadrature(basis6):
    """[DERIVED] P equals direct quadrature of rho u plus m_B xi."""
    s = random_state(basis6, seed=4, constrain=False)
    rho = basis6.inverse(s.fluid.rho, SCALAR)
    u = basis6.inverse_vector(s.fluid.v, (VELOCITY,) * 3)
    om = s.rigid.omega
    u = u + np.cross(om[:, None, None, None], basis6.x, axis=0)
    ref = np.array([np.sum(rho * u[i]) for i in range(3)]) * basis6.cell_volume
    assert np.allclose(total_linear_momentum(s), ref, atol=1e-10)


def test_angular_momentum_zero_velocity(basis6):
    """[TRIVIAL] u = 0 and omega = 0 give M = 0 for any density."""
    s = random_state(basis6, seed=5, omega=(0, 0, 0), constrain=False)
    s = s.replace(fluid=FluidState(s.fluid.rho, 0 * s.fluid.v, s.fluid.b))
    assert np.allclose(angular_momentum_M(s), 0)


def test_angular_momentum_rigid_rotation():
    """[DERIVED] M = I_c e3 + rho_bar J e3 with the box moment (L1^2 + L2^2) V / 12,
    corrected to the midpoint rule's sum of x^2."""
    L = (1.0, 2.0, 1.5)
    b = make_basis((8, 8, 8), lengths=L)
    s = rest_state(b, rho_bar=1.3, I_c=np.diag([1.0, 2.0, 3.0]))
    s = s.replace(rigid=RigidState(np.array([0, 0, 1.0]), np.zeros(3)))
    # midpoint sum of x^2 over n cells of width h: n h^3 (n^2 - 1) / 12 per axis
    def mom2(Li, n):
        h = Li / n
        return h ** 3 * n * (n * n - 1) / 12.0
    V = np.prod(L)
    Jzz =(mom2(L[0], 8) / L[0] + mom2(L[1], 8) / L[1]) * V
    M = angular_momentum_M(s)
    assert M[2] == pytest.approx(3.0 + 1.3 * Jzz, rel=1e-12)
    assert np.allclose(M[:2], 0, atol=1e-12)
    # and the exact box integral is approached as the grid refines
    assert Jzz == pytest.approx((L[0] ** 2 + L[1] ** 2) * V / 12, rel=0.02)


@given(seed=st.integers(0, 10**6), c=st.floats(-3, 3))
def test_angular_momentum_linear_in_u(seed, c):
    """[TRIVIAL] for fixed rho, M - I_c omega is linear in (v, omega, xi)."""
    b = make_basis(6)
    s = random_state(b, seed=seed)
    s2 = s.replace(fluid=FluidState(s.fluid.rho, c * s.fluid.v, s.fluid.b),
                   rigid=RigidState(c * s.rigid.omega, c * s.rigid.xi))
    assert np.allclose(angular_momentum_M(s2), c * angular_momentum_M(s), atol=1e-12)


def test_enforce_constraint_at_rest(basis6):
    """[TRIVIAL] v = 0, omega = 0 gives xi = 0."""
    s = enforce_linear_constraint(rest_state(basis6))
    assert np.allclose(s.rigid.xi, 0)


@given(seed=st.integers(0, 10**6))
def test_enforce_constraint_zeroes_p(seed):
    """[TRIVIAL] after enforcement P = 0."""
    b = make_basis(6)
    s = enforce_linear_constraint(random_state(b, seed=seed, constrain=False))
    assert np.max(np.abs(total_linear_momentum(s))) <= 1e-12


def test_enforce_constraint_single_mode(basis8):
    """[DERIVED] uniform rho, omega = 0, v = sin-mode (1,1,1) in x: xi from the
    closed-form midpoint sums of the sines."""
    s = rest_state(basis8, rho_bar=1.0, m_B=2.0)
    v = np.zeros((3,) + basis8.shape)
    v[0, 1, 1, 1] = 0.4
    s = enforce_linear_constraint(s.replace(fluid=FluidState(s.fluid.rho, v, s.fluid.b)))
    n, L = 8, np.pi
    h = L / n
    ssum = np.sum(np.sin((np.arange(n) + 0.5) * h)) * h  # midpoint rule of int sin over [0, pi]
    m_F = basis8.box.volume
    assert s.rigid.xi[0] == pytest.approx(-0.4 * ssum ** 3 / (2.0 + m_F), rel=1e-12)
    assert ssum == pytest.approx(2.0, rel=1e-2)

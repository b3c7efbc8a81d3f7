import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cavmhd.diagnostics import (bregman_power, default_test_functions, energy_report,
                                invariant_report, relative_energy, renormalized_budget,
                                sobolev_report, weak_residuals)
from cavmhd.state import FluidState, PhysParams, RegParams, RigidState, rest_state

from conftest import make_basis, random_state


def _mom2(L, n):
    """Midpoint-rule sum of x^2 h over a centered interval of length L."""
    h = L / n
    return h ** 3 * n * (n * n - 1) / 12.0


def test_rest_energy():
    """[TRIVIAL] rest state: F = a rho_bar^gamma V / (gamma - 1), no kinetic or magnetic part."""
    b = make_basis(6)
    s = rest_state(b, rho_bar=1.5, phys=PhysParams(a=0.8, gamma=1.4))
    rep = energy_report(s)
    assert rep.F == pytest.approx(0.8 * 1.5 ** 1.4 * b.box.volume / 0.4, rel=1e-13)
    assert rep.kinetic == 0 and rep.magnetic == 0 and rep.dissipation == 0


def test_rigid_rotation_kinetic():
    """[DERIVED] v = b = 0, xi = 0, omega = e3: kinetic = I_33/2 + rho_bar/2 int (x1^2 + x2^2)."""
    L = (1.0, 2.0, 1.5)
    b = make_basis(8, lengths=L)
    s = rest_state(b, rho_bar=1.3, I_c=np.diag([1.0, 2.0, 3.0]))
    s = s.replace(rigid=RigidState(np.array([0, 0, 1.0]), np.zeros(3)))
    V = np.prod(L)
    J = (_mom2(L[0], 8) / L[0] + _mom2(L[1], 8) / L[1]) * V
    assert energy_report(s).kinetic == pytest.approx(1.5 + 0.5 * 1.3 * J, rel=1e-12)


@given(seed=st.integers(0, 10**6), delta=st.sampled_from([0.0, 1e-2]))
@settings(max_examples=10)
def test_energy_parts_sum(seed, delta):
    """[TRIVIAL] F is the sum of its parts; all parts are nonnegative."""
    b = make_basis(6)
    s = random_state(b, seed=seed)
    s = s.replace(reg=RegParams(eps=1e-2, delta=delta))
    rep = energy_report(s)
    assert rep.F == pytest.approx(rep.kinetic + rep.magnetic + rep.internal, rel=1e-12)
    for part in (rep.kinetic, rep.magnetic, rep.internal, rep.viscous, rep.resistive,
                 rep.eps_channel):
        assert part >= 0


def test_energy_accumulates_trapezoid(basis6):
    """[TRIVIAL] cumulative dissipation follows the trapezoid rule from the previous report."""
    s = random_state(basis6, seed=2)
    r0 = energy_report(s)
    r1 = energy_report(s.replace(t=0.5), r0)
    assert r1.cumulative_dissipation == pytest.approx(0.5 * r0.dissipation, rel=1e-14)
    assert r1.balance_residual == pytest.approx(0.5 * r0.dissipation, rel=1e-12)


def test_sobolev_rest_is_zero(basis6):
    """[TRIVIAL] rest trajectory gives E = 0."""
    s = rest_state(basis6)
    rep = sobolev_report([s, s.replace(t=0.1), s.replace(t=0.2)])
    assert rep.E == 0.0 and rep.D == 0.0


def test_sobolev_static_velocity_mode(basis6):
    """[DERIVED] one static sine mode c at k: v_22 = W_k (1 + |k|^2 + |k|^4) c^2."""
    b = basis6
    v = np.zeros((3,) + b.shape)
    k = (1, 2, 1)
    v[(1,) + k] = 0.3
    s = rest_state(b)
    s = s.replace(fluid=FluidState(s.fluid.rho, v, s.fluid.b))
    rep = sobolev_report([s, s.replace(t=0.1), s.replace(t=0.2)])
    k2 = b.kappa2[k]
    W = np.broadcast_to(b.velocity_weights, (3,) + b.shape)[(1,) + k]
    assert rep.v_22 == pytest.approx(W * (1 + k2 + k2 ** 2) * 0.09, rel=1e-12)
    assert rep.rho_t_L2 == 0 and rep.b_t_L2 == 0


def test_sobolev_needs_three_snapshots(basis6):
    """[TRIVIAL] the centered stencil needs a 3-snapshot window."""
    with pytest.raises(ValueError):
        sobolev_report([rest_state(basis6)] * 2)


def test_relative_energy_identical(basis8):
    """[TRIVIAL] E(s | s) = 0."""
    s = random_state(basis8, seed=4)
    assert relative_energy(s, s).total == 0.0


def test_relative_energy_same_density(basis8):
    """[TRIVIAL] rho = r with u != U: pressure part is exactly 0."""
    s = random_state(basis8, seed=4)
    t = s.replace(fluid=FluidState(s.fluid.rho, 0.5 * s.fluid.v, s.fluid.b))
    rep = relative_energy(s, t)
    assert rep.pressure == 0.0 and rep.velocity > 0


def test_relative_energy_constant_densities():
    """[DERIVED] rho = 2, r = 1, a = 1, gamma = 2: pressure part = V (4 - 2 - 1) / 1 = V."""
    b = make_basis(6)
    phys = PhysParams(a=1.0, gamma=2.0)
    rep = relative_energy(rest_state(b, rho_bar=2.0, phys=phys), rest_state(b, 1.0, phys=phys))
    assert rep.pressure == pytest.approx(b.box.volume, rel=1e-13)


@given(rho=st.floats(0.1, 5.0), r=st.floats(0.1, 5.0), g=st.floats(1.05, 6.0))
def test_bregman_matches_direct(rho, r, g):
    """[DERIVED] stable form equals the direct formula and is nonnegative (convexity)."""
    direct = rho ** g - r ** g - g * r ** (g - 1) * (rho - r)
    got = float(bregman_power(np.array(rho), np.array(r), g))
    assert got >= 0
    assert got == pytest.approx(direct, rel=1e-6, abs=1e-9 * max(1.0, r ** g))


@given(seed=st.integers(0, 10**6))
@settings(max_examples=10)
def test_relative_energy_nonnegative(seed):
    """[DERIVED] two random positive-density states have nonnegative parts."""
    b = make_basis(6)
    rep = relative_energy(random_state(b, seed=seed), random_state(b, seed=seed + 1))
    assert rep.velocity >= 0 and rep.pressure >= 0 and rep.magnetic >= 0 and rep.total > 0


def test_relative_energy_across_resolutions():
    """[TRIVIAL] a coarse state and its prolongation onto a finer grid have E = 0."""
    from cavmhd.diagnostics import prolong_state
    c, f = make_basis(6), make_basis(9)
    s = random_state(c, seed=1)
    assert relative_energy(s, prolong_state(s, f)).total < 1e-28


def test_weak_residuals_rest(basis6):
    """[TRIVIAL] rest trajectory: all twenty residuals vanish to round-off."""
    s = rest_state(basis6)
    traj = [s.replace(t=t) for t in np.linspace(0, 1, 11)]
    rows = weak_residuals(traj)
    assert len(rows) == 20 == len(default_test_functions())
    assert max(abs(r["residual"]) for r in rows) < 1e-12


def test_renormalized_budget_manufactured():
    """[DERIVED] uniform rho = exp(-t) with div v = 1 - t satisfies
    d/dt int rho log rho + int rho div v = 0; the trapezoid residual is O(dt^2)."""
    b = make_basis(4)
    errs = []
    for n in (50, 100):
        t = np.linspace(0, 1, n + 1)
        rhos = [np.full(b.shape, np.exp(-tt)) for tt in t]
        divs = [np.full(b.shape, 1 - tt) for tt in t]
        errs.append(np.max(np.abs(renormalized_budget(b, t, rhos, divs))) / b.box.volume)
    assert errs[1] < 2e-5 and np.log2(errs[0] / errs[1]) > 1.9


def test_entropy_budget_static(basis6):
    """[TRIVIAL] rho = rho_bar, v = 0 trajectory has zero residual."""
    from cavmhd.diagnostics import entropy_budget
    s = rest_state(basis6, rho_bar=1.3)
    assert np.allclose(entropy_budget([s.replace(t=t) for t in (0, 0.1, 0.2)]), 0, atol=1e-14)


def test_invariants_rest(basis6):
    """[TRIVIAL] fresh rest state reports zeros and passes every threshold."""
    rep = invariant_report(rest_state(basis6))
    for key in ("mass_drift", "divb_modal", "divb_nodal", "P_norm", "M_norm", "Q_orth_err"):
        assert rep.values[key] == 0.0
    assert rep.ok


def test_invariants_flag_corrupted_b(basis6):
    """[TRIVIAL] a non-solenoidal b (projection skipped) is flagged."""
    s = rest_state(basis6)
    bad = np.zeros((3,) + basis6.shape)
    bad[0, 1, 0, 0] = 0.5  # pure gradient mode
    s = s.replace(fluid=FluidState(s.fluid.rho, s.fluid.v, bad))
    rep = invariant_report(s)
    assert not rep.ok and "divb_modal" in rep.violations and "divb_nodal" in rep.violations

import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cavmhd.basis import (CURL, MAGNETIC, SCALAR, VELOCITY, BoxCavity, SpectralResolution,
                          dealias_cutoff, magnetic_constraint_matrix)
from cavmhd.operators import curl_modal

from conftest import make_basis


def direct_inverse(basis, c, parity):
    """O(N^2) synthesis by explicit sums of cos/sin products."""
    mats = []
    for p, s, kap in zip(parity, basis.s1d, basis.kappa1d):
        arg = np.outer(s, kap)
        mats.append(np.cos(arg) if p == "C" else np.sin(arg))
    return np.einsum("abc,ia,jb,kc->ijk", c, *mats)


def test_box_rejects_nonpositive_lengths():
    """[TRIVIAL] box lengths must be positive."""
    with pytest.raises(ValueError):
        BoxCavity((1.0, 0.0, 1.0))
    assert BoxCavity((1.0, 2.0, 3.0)).volume == pytest.approx(6.0)


def test_resolution_needs_two_modes():
    """[TRIVIAL] at least two modes per axis."""
    with pytest.raises(ValueError):
        SpectralResolution((1, 4, 4))


def test_velocity_mode_count_n2():
    """[TRIVIAL] cube with N=(2,2,2) has 3*1*1*1 velocity modes."""
    assert make_basis(2).n_velocity == 3


def test_solenoidal_dofs_generic_wavevector():
    """[DERIVED] k with all k_i >= 1: nullspace of the 1x3 constraint has dimension 2."""
    b = make_basis(6)
    A = magnetic_constraint_matrix(b, (1, 2, 3))
    assert A.shape == (1, 3)
    assert 3 - np.linalg.matrix_rank(A) == 2
    assert b.magnetic_dofs[1, 2, 3] == 2


def test_solenoidal_dofs_with_zero_index():
    """[DERIVED] brute-force nullspace when one or two indices vanish."""
    b = make_basis(6)
    for k in itertools.product(range(3), repeat=3):
        present = [i for i in range(3) if k[i] >= 1]
        if not present:
            assert b.magnetic_dofs[k] == 0
            continue
        A = magnetic_constraint_matrix(b, k)
        null = len(present) - np.linalg.matrix_rank(A)
        assert b.magnetic_dofs[k] == null


def test_dealias_cutoff_values():
    """[DERIVED] largest K with 3K < 2N."""
    for n in range(2, 40):
        K = dealias_cutoff(n)
        assert 3 * K < 2 * n <= 3 * (K + 1)


@pytest.mark.parametrize("parity", [SCALAR, VELOCITY, MAGNETIC[0], CURL[2]])
def test_forward_zero(basis6, parity):
    """[TRIVIAL] zero field has zero coefficients."""
    assert not np.any(basis6.forward(np.zeros(basis6.shape), parity))


@pytest.mark.parametrize("parity", [SCALAR, VELOCITY, MAGNETIC[1], CURL[0]])
def test_forward_single_mode_is_delta(basis6, parity):
    """[DERIVED] a sampled pure mode transforms to a unit delta."""
    k = (2, 1, 3)
    c = np.zeros(basis6.shape)
    c[k] = 1.0
    f = direct_inverse(basis6, c, parity)
    out = basis6.forward(f, parity)
    assert out[k] == pytest.approx(1.0, abs=1e-13)
    out[k] = 0.0
    assert np.max(np.abs(out)) < 1e-13


@pytest.mark.parametrize("parity", [SCALAR, VELOCITY, MAGNETIC[2], CURL[1]])
def test_inverse_matches_direct_sum(basis6, parity):
    """[DERIVED] fast synthesis equals explicit O(N^2) sums."""
    rng = np.random.default_rng(1)
    c = rng.standard_normal(basis6.shape)
    for ax, p in enumerate(parity):
        if p == "S":
            idx = [slice(None)] * 3
            idx[ax] = 0
            c[tuple(idx)] = 0.0
    f = basis6.inverse(c, parity)
    ref = direct_inverse(basis6, c, parity)
    assert np.max(np.abs(f - ref)) <= 1e-12 * np.max(np.abs(ref))


def test_inverse_constant_mode(basis6):
    """[TRIVIAL] constant cosine coefficient c gives the nodal field c."""
    c = np.zeros(basis6.shape)
    c[0, 0, 0] = 2.5
    assert np.allclose(basis6.inverse(c, SCALAR), 2.5, rtol=0, atol=1e-14)


@given(seed=st.integers(0, 2**31 - 1),
       parity=st.sampled_from([SCALAR, VELOCITY, MAGNETIC[0], MAGNETIC[2], CURL[1]]))
def test_round_trip(seed, parity):
    """[TRIVIAL] forward(inverse(c)) = c for admissible coefficients."""
    b = make_basis((5, 6, 7))
    c = np.random.default_rng(seed).standard_normal(b.shape)
    for ax, p in enumerate(parity):
        if p == "S":
            idx = [slice(None)] * 3
            idx[ax] = 0
            c[tuple(idx)] = 0.0
    back = b.forward(b.inverse(c, parity), parity)
    assert np.max(np.abs(back - c)) <= 1e-12 * max(1.0, np.max(np.abs(c)))


def test_dealias_idempotent_and_top_mode(basis8):
    """[TRIVIAL] truncation is idempotent and removes the top mode."""
    rng = np.random.default_rng(2)
    c = rng.standard_normal(basis8.shape)
    d = basis8.dealias(c)
    assert np.array_equal(basis8.dealias(d), d)
    top = np.zeros(basis8.shape)
    top[7, 7, 7] = 1.0
    assert not np.any(basis8.dealias(top))


def test_dealiased_product_equals_convolution(basis8):
    """[DERIVED] cos(a)cos(b) = (cos(a-b) + cos(a+b))/2 on retained modes."""
    c1 = np.zeros(basis8.shape)
    c1[1, 2, 0] = 1.0
    c2 = np.zeros(basis8.shape)
    c2[2, 1, 1] = 1.0
    prod = basis8.inverse(c1, SCALAR) * basis8.inverse(c2, SCALAR)
    got = basis8.dealias(basis8.forward(prod, SCALAR))
    ref = np.zeros(basis8.shape)
    for k1 in (1, 3):
        for k2 in (1, 3):
            ref[k1, k2, 1] += 0.25
    ref = basis8.dealias(ref)
    assert np.max(np.abs(got - ref)) < 1e-14


def face_grids(basis):
    for axis in range(3):
        for side in (-1, 1):
            xs = [basis.x1d[j] for j in range(3)]
            xs[axis] = np.array([side * basis.lengths[axis] / 2])
            yield axis, xs


def test_velocity_modes_vanish_on_walls():
    """[DERIVED] every sine-basis velocity mode is zero on all six faces."""
    b = make_basis((4, 5, 6), lengths=(1.0, 2.0, 1.5))
    c = np.where(b.velocity_mask[0], 1.0, 0.0)
    for _, xs in face_grids(b):
        for k in zip(*np.nonzero(c)):
            e = np.zeros(b.shape)
            e[k] = 1.0
            assert np.max(np.abs(b.evaluate(e, VELOCITY, *xs))) <= 1e-12


def test_magnetic_modes_satisfy_wall_conditions():
    """[DERIVED] b.n = 0 and (curl b) x n = 0 on all faces for every magnetic mode."""
    b = make_basis((4, 5, 6), lengths=(1.0, 2.0, 1.5))
    for i in range(3):
        for k in zip(*np.nonzero(b.magnetic_mask[i])):
            e = np.zeros((3,) + b.shape)
            e[(i,) + k] = 1.0
            j = curl_modal(b, e)
            for axis, xs in face_grids(b):
                bn = b.evaluate(e[axis], MAGNETIC[axis], *xs)
                assert np.max(np.abs(bn)) <= 1e-10
                for t in range(3):
                    if t == axis:
                        continue
                    jt = b.evaluate(j[t], CURL[t], *xs)
                    assert np.max(np.abs(jt)) <= 1e-10


def test_weights_are_l2_norms(basis6):
    """[DERIVED] quadrature of a squared mode equals its weight."""
    for parity in (SCALAR, VELOCITY, MAGNETIC[1]):
        W = basis6.weights(parity)
        for k in [(0, 0, 0), (1, 2, 3), (2, 0, 1)]:
            if W[k] == 0:
                continue
            e = np.zeros(basis6.shape)
            e[k] = 1.0
            f = basis6.inverse(e, parity)
            assert basis6.integrate(f * f) == pytest.approx(W[k], rel=1e-13)

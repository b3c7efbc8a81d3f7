"""Shared fixtures.  Test labels in docstrings:

[DERIVED]  checked against an independently computed oracle
[PAPER]    value or relation stated in the source text
[TRIVIAL]  definitional or bookkeeping check
"""
import numpy as np
import pytest
from hypothesis import settings

from cavmhd.basis import BoxCavity, SpectralResolution, build_bases
from cavmhd.operators import solenoidal_project
from cavmhd.state import (FluidState, PhysParams, RigidState, enforce_linear_constraint,
                          rest_state)

settings.register_profile("ci", max_examples=25, deadline=None)
settings.load_profile("ci")


def make_basis(n=8, lengths=(np.pi, np.pi, np.pi), dealias=True):
    if np.isscalar(n):
        n = (n, n, n)
    return build_bases(BoxCavity(lengths), SpectralResolution(tuple(n), dealias))


def random_state(basis, amp=0.05, seed=0, omega=(0.1, 0.02, 0.0), kmax=2, mu=0.1,
                 with_b=True, constrain=True):
    """Smooth small perturbation of the rest state on modes ``k <= kmax``."""
    rng = np.random.default_rng(seed)
    s = rest_state(basis, phys=PhysParams(mu=mu))
    n = kmax + 1
    rho = s.fluid.rho.copy()
    rho[:n, :n, :n] += amp * rng.uniform(-1, 1, (n, n, n))
    rho[0, 0, 0] = 1.0
    v = np.zeros((3,) + basis.shape)
    v[:, :n, :n, :n] = amp * rng.uniform(-1, 1, (3, n, n, n))
    v = np.where(basis.velocity_mask, v, 0.0)
    b = np.zeros((3,) + basis.shape)
    if with_b:
        b[:, :n, :n, :n] = amp * rng.uniform(-1, 1, (3, n, n, n))
        b = solenoidal_project(basis, b)
    s = s.replace(fluid=FluidState(rho, v, b),
                  rigid=RigidState(np.asarray(omega, float), np.zeros(3)))
    return enforce_linear_constraint(s) if constrain else s


@pytest.fixture(scope="session")
def basis8():
    return make_basis(8)


@pytest.fixture(scope="session")
def basis6():
    return make_basis(6)


ACCEPTANCE_LINES = []


def report(number, ok, detail):
    """Record and print one acceptance verdict line."""
    line = f"CRITERION {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)

import numpy as np
import pytest
import scipy.linalg as sl
from hypothesis import settings

from weakwalk.graphs import GraphSpec, build_hamiltonian
from weakwalk.monitor import MeasurementSetup, SiteSet, bright_subspace, make_weak_operators, site_state


def site_setup(spec, site, eta=1.0, t=0.9):
    H = build_hamiltonian(spec)
    return MeasurementSetup(H, SiteSet((site,)), eta, t, site_state(H.dim, site))


def random_hermitian(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (a + a.conj().T) / 2


def bright_radius(ops):
    B = bright_subspace(ops)
    return float(np.max(np.abs(np.linalg.eigvals(B.conj().T @ ops.survival @ B))))


def stein_tau(ops, psi):
    """Exact infinite-horizon mean detection time for a state inside the detector range."""
    B = bright_subspace(ops)
    Sb = B.conj().T @ ops.survival @ B
    x = B.conj().T @ psi
    G = sl.solve_discrete_lyapunov(Sb.conj().T, np.eye(x.size))
    return float(np.vdot(x, G @ x).real)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def two_level():
    def make(eta=1.0, t=0.9):
        s = site_setup(GraphSpec.two_vertex(), 0, eta, t)
        return make_weak_operators(s), s.psi

    return make


@pytest.fixture
def benzene():
    def make(eta=1.0, t=0.9, site=5):
        s = site_setup(GraphSpec.benzene(), site, eta, t)
        return make_weak_operators(s), s.psi

    return make


settings.register_profile("default", max_examples=100, deadline=None)
settings.load_profile("default")


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import summary_lines

    lines = summary_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)

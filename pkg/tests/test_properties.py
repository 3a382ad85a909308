"""Randomized identity checks over Hermitian setups of dimension <= 16."""

import math

import numpy as np
from hypothesis import assume, given
from hypothesis import strategies as st
from pytest import approx

from weakwalk.asymptotics import (
    EXCEPTIONAL_MARGIN,
    distance_to_exceptional,
    survival_spectrum,
    tau_infinity_integral,
    tau_infinity_series,
    tau_infinity_vectorized,
)
from weakwalk.errors import NoConvergence
from weakwalk.graphs import GraphSpec, build_hamiltonian
from weakwalk.linalg import eig_hermitian, propagator, unitarity_error, unvec, vec, vectorized_superoperator
from weakwalk.monitor import (
    detection_series,
    projective_detection_series,
    shear_basis_transform,
    shear_defect,
    shear_matrix,
    weak_operators,
)
from weakwalk.trajectory import DilatedCircuit, DilatedState, branches

from conftest import bright_radius, random_hermitian, stein_tau


class Setup:
    def __init__(self, H, eig, P, sites, psi, eta, t):
        self.H, self.eig, self.P, self.sites = H, eig, P, sites
        self.psi, self.eta, self.t = psi, eta, t
        self.U = propagator(eig, t)

    def ops(self, eta=None):
        return weak_operators(self.P, self.U, self.eta if eta is None else eta, t=self.t, eig=self.eig)


@st.composite
def setups(draw, max_dim=16, min_eta=0.01):
    d = draw(st.integers(2, max_dim))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    k = draw(st.integers(1, d - 1))
    sites = np.sort(rng.choice(d, size=k, replace=False))
    H = random_hermitian(rng, d)
    P = np.zeros((d, d), dtype=complex)
    P[sites, sites] = 1
    psi = np.zeros(d, dtype=complex)
    psi[sites] = rng.normal(size=k) + 1j * rng.normal(size=k)
    psi /= np.linalg.norm(psi)
    eta = draw(st.floats(min_eta, 1.0))
    t = draw(st.floats(0.0, 2 * np.pi))
    return Setup(H, eig_hermitian(H), P, sites, psi, eta, t)


def random_unit(rng, d):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


@given(st.integers(1, 16), st.integers(0, 2**32 - 1), st.floats(-10, 10), st.floats(-10, 10))
def test_propagator_unitary_and_group(d, seed, t1, t2):
    e = eig_hermitian(random_hermitian(np.random.default_rng(seed), d))
    assume(abs(t1 + t2) <= 10)
    u1, u2 = propagator(e, t1), propagator(e, t2)
    assert unitarity_error(u1) <= 1e-9
    assert np.max(np.abs(u1 @ u2 - propagator(e, t1 + t2))) <= 1e-8


@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_conjugation_vectorization_identity(d, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    rho /= np.trace(rho)
    u = propagator(eig_hermitian(random_hermitian(rng, d)), 1.0)
    lhs = vec(u @ rho @ u.conj().T)
    assert np.max(np.abs(vectorized_superoperator(u, u) @ vec(rho) - lhs)) <= 1e-12
    np.testing.assert_array_equal(unvec(vec(rho)), rho)


@given(setups())
def test_pseudo_completeness_and_shear(s):
    ops = s.ops()
    d = s.P.shape[0]
    f = shear_defect(s.eta)
    assert np.max(np.abs(ops.P_eta + ops.Q_eta - (np.eye(d) + f * s.P))) <= 1e-10
    A = shear_matrix(s.eta)
    assert np.max(np.abs(ops.P_eta - (A[0, 0] * ops.P + A[0, 1] * ops.Q))) <= 1e-12
    assert np.max(np.abs(ops.Q_eta - (A[1, 0] * ops.P + A[1, 1] * ops.Q))) <= 1e-12
    assert np.max(np.abs(ops.P @ ops.P - ops.P)) == 0 and np.max(np.abs(ops.P @ ops.Q)) == 0


@given(setups())
def test_pseudo_orthogonal_decomposition(s):
    ops = s.ops()
    d = s.P.shape[0]
    f = shear_defect(s.eta)
    S = ops.survival
    Sk = np.eye(d)  # S^(n-1)
    for n in range(1, 9):
        a_n = ops.P_eta @ ops.U @ Sk @ ops.P
        lhs = a_n + S @ Sk @ ops.P
        rhs = (np.eye(d) + f * ops.P) @ ops.U @ Sk @ ops.P
        assert np.max(np.abs(lhs - rhs)) <= 1e-10
        Sk = S @ Sk


@given(setups(), st.integers(0, 2**32 - 1))
def test_survival_norm_identity(s, seed):
    ops = s.ops()
    psi = random_unit(np.random.default_rng(seed), s.P.shape[0])
    surv = ops.survival @ psi
    pu = ops.P @ ops.U @ psi
    lhs = np.vdot(surv, surv).real
    assert abs(lhs - (1 - s.eta * np.vdot(pu, pu).real)) <= 1e-10
    assert -1e-15 <= lhs <= 1 + 1e-12


@given(setups())
def test_survival_norm_equality_iff_undetectable(s):
    # build a unit vector whose first step misses the detector: psi = U^dagger x, x in Q
    ops = s.ops()
    d = s.P.shape[0]
    x = np.zeros(d, dtype=complex)
    x[np.setdiff1d(np.arange(d), s.sites)[0]] = 1
    psi = ops.U.conj().T @ x
    assert abs(np.linalg.norm(ops.survival @ psi) ** 2 - 1) <= 1e-12
    # and any detectable component strictly lowers the norm
    y = psi + 0.1 * (ops.U.conj().T @ (ops.P @ np.ones(d)))
    y /= np.linalg.norm(y)
    assert np.linalg.norm(ops.survival @ y) ** 2 < 1 - 1e-6 * s.eta


@given(setups(), st.integers(1, 400))
def test_telescoping_and_hitting_invariants(s, N):
    r = detection_series(s.ops(), s.psi, N)
    assert abs(r.p.sum() + r.survival_norms[-1] - 1) <= 1e-9
    assert np.all(r.p >= 0)
    assert np.all(np.diff(r.R) >= -1e-15)
    if r.tau_defined:
        assert r.tau_N >= 1 - 1e-9


@given(setups(), st.integers(1, 200))
def test_strong_limit_matches_projective_path(s, N):
    a = detection_series(s.ops(1.0), s.psi, N)
    b = projective_detection_series(s.U, s.P, s.psi, N)
    assert np.max(np.abs(a.p - b.p)) <= 1e-12
    assert abs(a.R_N - b.R_N) <= 1e-12


@given(setups())
def test_first_step_monotone_in_eta(s):
    # N = 1: R_1(eta) = eta ||P U psi||^2 <= R_1(1)
    weak = detection_series(s.ops(), s.psi, 1)
    strong = detection_series(s.ops(1.0), s.psi, 1)
    assert weak.R_N <= strong.R_N + 1e-12
    assert weak.R_N == np.float64(s.eta * strong.R_N) or abs(weak.R_N - s.eta * strong.R_N) < 1e-12


@given(setups(max_dim=8, min_eta=0.2))
def test_series_matches_stein_oracle(s):
    # exact sum of survival norms from G = S^H G S + 1 on the bright subspace
    ops = s.ops()
    assume(bright_radius(ops) ** 2 < 1 - 1e-3)
    try:
        got = tau_infinity_series(ops, s.psi)
    except NoConvergence:
        assume(False)
    assert got == approx(stein_tau(ops, s.psi), rel=1e-8)


@given(st.integers(2, 8), st.integers(0, 2**32 - 1), st.floats(0.2, 1.0), st.floats(0.0, 2 * np.pi))
def test_rank_one_return_law_exact(d, seed, eta, t):
    # eta tau(eta) = tau(1) for self-returns to a rank-one detector, hence tau(eta) >= tau(1)
    rng = np.random.default_rng(seed)
    eig = eig_hermitian(random_hermitian(rng, d))
    assume(distance_to_exceptional(t, eig) > EXCEPTIONAL_MARGIN)
    phi = random_unit(rng, d)
    P = np.outer(phi, phi.conj())
    U = propagator(eig, t)
    weak = stein_tau(weak_operators(P, U, eta, t=t, eig=eig), phi)
    strong = stein_tau(weak_operators(P, U, 1.0, t=t, eig=eig), phi)
    assert eta * weak == approx(strong, rel=1e-8)
    assert weak >= strong * (1 - 1e-9)


@given(setups(), st.floats(0.0, 1.0))
def test_spectrum_in_unit_disk(s, eta):
    ops = weak_operators(s.P, s.U, eta, t=s.t, allow_zero=True)
    mod = survival_spectrum(ops).moduli
    assert np.all(mod <= 1 + 1e-9)
    if eta == 0.0:
        assert np.all(np.abs(mod - 1) <= 1e-9)


@given(setups(max_dim=6))
def test_basis_change_preserves_structure(s):
    rng = np.random.default_rng(int(s.t * 1e6))
    d = s.P.shape[0]
    q, _ = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    ops = s.ops()
    out = shear_basis_transform(ops, q)
    Pp = q.conj().T @ s.P @ q
    assert np.max(np.abs(out.P - Pp)) <= 1e-12
    assert np.max(np.abs(out.P_eta - math.sqrt(s.eta) * Pp)) <= 1e-12
    assert np.max(np.abs(out.P_eta + out.Q_eta - np.eye(d) - shear_defect(s.eta) * Pp)) <= 1e-10
    assert np.max(np.abs(out.survival - out.Q_eta @ out.U)) <= 1e-12


@given(setups(max_dim=10, min_eta=0.05))
def test_dilated_branches_equal_sheared_operators(s):
    ops = s.ops()
    mask = np.zeros(s.P.shape[0], dtype=bool)
    mask[s.sites] = True
    circ = DilatedCircuit(s.U, mask, s.eta)
    state, psi = DilatedState.from_system(s.psi), s.psi
    for _ in range(4):
        p_yes, _, no = branches(state, circ)
        hit = ops.termination @ psi
        assert abs(p_yes - np.vdot(hit, hit).real) <= 1e-12
        surv = ops.survival @ psi
        norm = np.linalg.norm(surv)
        if norm < 1e-6:
            break
        assert np.max(np.abs(no.system(0) - surv / norm)) <= 1e-12
        state, psi = no, surv / norm


@given(st.integers(2, 8), st.sampled_from([0.25, 0.5, 1.0]), st.floats(0.1, 2 * np.pi - 0.1))
def test_three_routes_agree_on_rings(L, eta, t):
    H = build_hamiltonian(GraphSpec.ring(L))
    assume(distance_to_exceptional(t, H.eig) > EXCEPTIONAL_MARGIN * 20)
    P = np.zeros((L, L))
    P[0, 0] = 1
    psi = np.eye(L)[0]
    ops = weak_operators(P, propagator(H.eig, t), eta, t=t, eig=H.eig)
    try:
        a = tau_infinity_series(ops, psi)
    except NoConvergence:
        assume(False)
    assert abs(tau_infinity_vectorized(ops, psi) - a) <= 1e-4 * a
    assert abs(tau_infinity_integral(ops, psi) - a) <= 1e-4 * a


@given(st.integers(2, 16))
def test_ring_spectrum_formula(L):
    e = build_hamiltonian(GraphSpec.ring(L)).eig.eigenvalues
    assert np.max(np.abs(e - np.sort(-2 * np.cos(2 * np.pi * np.arange(L) / L)))) <= 1e-9


@given(st.integers(2, 12), st.floats(-np.pi, np.pi))
def test_magnetic_ring_hermitian(L, alpha):
    h = build_hamiltonian(GraphSpec.magnetic_ring(L, alpha)).matrix
    assert np.max(np.abs(h - h.conj().T)) == 0


@given(st.integers(2, 14), st.floats(0.2, 1.0), st.integers(0, 10**6))
def test_random_graph_connected_and_symmetric(n, p, seed):
    from weakwalk.graphs import is_connected

    h = build_hamiltonian(GraphSpec.seeded_random(n, p, seed)).matrix
    assert is_connected(h)
    assert np.array_equal(h, h.T) and np.all(np.diag(h) == 0)

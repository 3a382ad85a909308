import math
from fractions import Fraction

import numpy as np
import pytest

from weakwalk.asymptotics import (
    distance_to_exceptional,
    eta_law_check,
    exceptional_times,
    ring_reference,
    survival_spectrum,
    tau_infinity_integral,
    tau_infinity_integral_details,
    tau_infinity_report,
    tau_infinity_series,
    tau_infinity_series_details,
    tau_infinity_vectorized,
    tau_infinity_vectorized_details,
    vectorized_generating_function,
)
from weakwalk.errors import InvalidArgs, NoConvergence, QuadratureNotConverged, SingularResolvent
from weakwalk.graphs import GraphSpec, build_hamiltonian
from weakwalk.linalg import eig_hermitian, propagator
from weakwalk.monitor import detection_series, make_weak_operators, weak_operators

from conftest import site_setup


def two_level_closed_form(eta, t):
    if abs(math.sin(t)) < 1e-12:
        return 1 / eta
    return 2 / eta


@pytest.mark.parametrize("t,eta,expected", [(0.9, 1.0, 2), (np.pi, 1.0, 1), (0.9, 0.5, 4)])
def test_series_two_level(two_level, t, eta, expected):
    ops, psi = two_level(eta, t)
    assert tau_infinity_series(ops, psi) == pytest.approx(expected, rel=1e-8)


def test_series_tail_bound_and_normalization(two_level):
    ops, psi = two_level(0.2, 0.9)
    res = tau_infinity_series_details(ops, psi, tail_tol=1e-12)
    assert res.tail_bound < 1e-12
    assert res.R == pytest.approx(1 - res.survival)
    finite = detection_series(ops, psi, res.steps)
    assert res.tau == pytest.approx(finite.tau_N, rel=1e-12)


def test_series_no_convergence(two_level):
    ops, psi = two_level(0.01, 0.9)
    with pytest.raises(NoConvergence):
        tau_infinity_series(ops, psi, max_steps=100)


def test_series_rejects_eta_zero():
    ops = weak_operators(np.diag([1, 0]), np.eye(2), 0.0, allow_zero=True)
    with pytest.raises(InvalidArgs):
        tau_infinity_series(ops, [1, 0])


def test_vectorized_two_level(two_level):
    ops, psi = two_level(0.2, np.pi / 2)
    assert tau_infinity_vectorized(ops, psi) == pytest.approx(10, rel=1e-6)


def test_vectorized_benzene(benzene):
    ops, psi = benzene(1.0, 0.9)
    assert tau_infinity_vectorized(ops, psi) == pytest.approx(4, rel=1e-6)


def test_benzene_exceptional_time_series_route(benzene):
    # at an exceptional time the series route is the authoritative one
    ops, psi = benzene(1.0, np.pi)
    assert tau_infinity_series(ops, psi) == pytest.approx(2, rel=1e-9)


def test_generating_function_low_orders(two_level):
    # g(0) = p_1 and g'(0) = p_2
    ops, psi = two_level(0.3, 0.9)
    r = detection_series(ops, psi, 3)
    g, dg, _ = vectorized_generating_function(ops, psi, 0.0)
    assert g.real == pytest.approx(r.p[0], abs=1e-14)
    assert dg.real == pytest.approx(r.p[1], abs=1e-14)
    assert g.real == pytest.approx(0.3 * math.cos(0.9) ** 2, abs=1e-14)


def test_vectorized_total_probability(benzene):
    ops, psi = benzene(0.5, 0.9)
    _, R = tau_infinity_vectorized_details(ops, psi)
    assert R == pytest.approx(1, abs=1e-8)


def test_singular_resolvent(two_level):
    ops, psi = two_level(0.5, 0.9)
    with pytest.raises(SingularResolvent):
        tau_infinity_vectorized(ops, psi, cond_limit=1.0)


def test_integral_two_level(two_level):
    ops, psi = two_level(1.0, 0.9)
    assert tau_infinity_integral(ops, psi, 256) == pytest.approx(2, abs=1e-6)
    ops, psi = two_level(0.25, 0.9)
    assert tau_infinity_integral(ops, psi, 256) == pytest.approx(8, abs=1e-5 * 8)


def test_integral_vs_vectorized_benzene(benzene):
    ops, psi = benzene(0.5, 0.9)
    a = tau_infinity_integral(ops, psi)
    b = tau_infinity_vectorized(ops, psi)
    assert a == pytest.approx(b, rel=1e-5)


def test_integral_residue_and_norm(benzene):
    ops, psi = benzene(0.5, 0.9)
    res = tau_infinity_integral_details(ops, psi)
    assert abs(res.imag_residue) < 1e-6 * res.tau
    assert res.R == pytest.approx(1, abs=1e-8)


def test_integral_ring4_with_dark_state():
    s = site_setup(GraphSpec.ring(4), 0, 0.5, 0.9)
    ops = make_weak_operators(s)
    assert tau_infinity_integral(ops, s.psi) == pytest.approx(tau_infinity_series(ops, s.psi), rel=1e-6)


def test_integral_not_converged(two_level):
    ops, psi = two_level(0.5, 0.9)
    with pytest.raises(QuadratureNotConverged):
        tau_infinity_integral_details(ops, psi, 64, max_points=128, rtol=1e-18)


@pytest.mark.parametrize("m", [32, 100, 0])
def test_integral_rejects_bad_grid(two_level, m):
    ops, psi = two_level(0.5, 0.9)
    with pytest.raises(InvalidArgs):
        tau_infinity_integral(ops, psi, m)


def test_report_agreement(benzene):
    ops, psi = benzene(0.25, 1.3)
    rep = tau_infinity_report(ops, psi)
    assert not rep.flagged
    assert rep.agreement_spread < 1e-4
    assert set(rep.values) == {"series", "vectorized", "integral"}


def test_spectrum_strong_two_level():
    t = 0.9
    s = site_setup(GraphSpec.two_vertex(), 0, 1.0, t)
    lam = survival_spectrum(make_weak_operators(s)).eigenvalues
    np.testing.assert_allclose(np.sort(np.abs(lam)), [0, abs(math.cos(t))], atol=1e-12)
    np.testing.assert_allclose(np.sort_complex(lam), np.sort_complex([0, math.cos(t)]), atol=1e-12)


def test_spectrum_no_measurement_on_unit_circle():
    e = build_hamiltonian(GraphSpec.benzene()).eig
    P = np.zeros((6, 6))
    P[5, 5] = 1
    for t in np.linspace(0, 2 * np.pi, 13):
        ops = weak_operators(P, propagator(e, t), 0.0, t=t, allow_zero=True)
        res = survival_spectrum(ops)
        np.testing.assert_allclose(res.moduli, 1, atol=1e-9)
        assert np.all(np.diff(np.angle(res.eigenvalues)) >= 0)


def test_spectrum_near_zero_coupling():
    for t in (0.3, 0.9, 2.0):
        s = site_setup(GraphSpec.two_vertex(), 0, 1e-6, t)
        assert survival_spectrum(make_weak_operators(s)).moduli.max() >= 0.999


def test_spectrum_strictly_inside_on_rings():
    # site 0 of an odd ring sees every nondegenerate level, but degenerate
    # pairs keep a dark combination at modulus 1; only bright states contract
    s = site_setup(GraphSpec.ring(5), 0, 0.5, 0.9)
    ops = make_weak_operators(s)
    mod = survival_spectrum(ops).moduli
    assert np.all(mod <= 1 + 1e-12)
    assert np.sum(mod > 1 - 1e-9) == 2
    s = site_setup(GraphSpec.two_vertex(), 0, 0.5, 0.9)
    assert np.all(survival_spectrum(make_weak_operators(s)).moduli < 1)


def test_exceptional_two_level():
    e = eig_hermitian(-np.array([[0, 1], [1, 0]]))
    np.testing.assert_allclose(exceptional_times(e).times, [0, np.pi])


def test_exceptional_benzene():
    ex = exceptional_times(build_hamiltonian(GraphSpec.benzene()).eig)
    expected = np.array([0, 1 / 2, 2 / 3, 1, 4 / 3, 3 / 2]) * np.pi
    np.testing.assert_allclose(ex.times, expected, atol=1e-12)
    for t, (k, gap) in zip(ex.times, ex.generators):
        assert math.isclose(t, (2 * np.pi * k / gap) % (2 * np.pi), abs_tol=1e-12) if gap else t == 0


def test_exceptional_zero_hamiltonian():
    ex = exceptional_times(eig_hermitian(np.zeros((3, 3))))
    np.testing.assert_array_equal(ex.times, [0.0])


def test_exceptional_tol_must_be_positive():
    with pytest.raises(InvalidArgs):
        exceptional_times(eig_hermitian(np.zeros((2, 2))), 0.0)


def test_distance_to_exceptional():
    e = build_hamiltonian(GraphSpec.benzene()).eig
    assert distance_to_exceptional(np.pi, e) < 1e-12
    assert distance_to_exceptional(4 * np.pi + 1e-4, e) == pytest.approx(1e-4, rel=1e-6)
    assert distance_to_exceptional(0.9, e) == pytest.approx(np.pi / 2 - 0.9)


def test_ring_reference_examples():
    assert ring_reference(6) == (Fraction(4), Fraction(2, 3))
    assert ring_reference(2) == (Fraction(2), Fraction(1))
    assert ring_reference(7) == (Fraction(4), Fraction(1, 2) + Fraction(1, 14))
    with pytest.raises(InvalidArgs):
        ring_reference(1)


def test_ring_threshold_is_classical_crossing():
    for L in range(2, 9):
        tau, eta_c = ring_reference(L)
        # tau_strong / eta' equals the classical return time L
        assert tau / eta_c == L


def test_eta_law_two_level():
    s = site_setup(GraphSpec.two_vertex(), 0, 1.0, 0.9)
    res = eta_law_check(s, [0.2, 0.5, 1.0], N=10**5)
    for row in res.rows:
        assert row.eta_tau == pytest.approx(2, abs=1e-3)
    assert res.max_dev < 1e-3


def test_eta_law_benzene():
    s = site_setup(GraphSpec.benzene(), 5, 1.0, 0.9)
    res = eta_law_check(s, [0.1, 0.4, 0.7, 1.0], N=10**5)
    for row in res.rows:
        assert row.eta_tau == pytest.approx(4, rel=1e-2)


def test_eta_law_zeno_exact():
    s = site_setup(GraphSpec.ring(3), 0, 1.0, 0.0)
    res = eta_law_check(s, [0.1, 0.25, 0.5, 1.0], N=math.inf)
    for row in res.rows:
        assert row.eta_tau == pytest.approx(1.0, abs=1e-15)
    assert res.tau_strong == 1.0

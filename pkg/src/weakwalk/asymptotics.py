"""Infinite-N first-detection time, survival spectra and reference values.

Three independent routes lead to ``tau_inf = sum_n n p_n``:

* ``series``: the truncated telescoping sum, run until an explicit tail bound is met;
* ``vectorized``: the generating function ``g(x) = sum_n p_n x^(n-1)`` on the
  squared space, ``g(x) = <vec 1| T (1 - x S)^(-1) |vec rho>`` with
  ``T = (P_eta U) kron conj(P_eta U)`` and ``S = (Q_eta U) kron conj(Q_eta U)``,
  so that ``tau_inf = 1 + g'(1)``; the limit ``x -> 1`` is Richardson-extrapolated;
* ``integral``: the winding integral of ``psi(theta) = a(e^{i theta}) psi`` over
  the unit circle, ``tau_inf = (1 / 2 pi i) int <psi, d psi / d theta> d theta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InvalidArgs, NoConvergence, QuadratureNotConverged, SingularResolvent
from .linalg import EigenSystem, as_state, vec, vectorized_superoperator
from .monitor import (
    MeasurementSetup,
    WeakOperators,
    bright_subspace,
    check_eta,
    detection_series,
    make_weak_operators,
    zeno_tau,
)

RICHARDSON_EPS = (1e-4, 1e-5, 1e-6)
COND_LIMIT = 1e14
# Routes are only compared this far (in t) from an exceptional sampling time.
EXCEPTIONAL_MARGIN = 1e-3


@dataclass(frozen=True)
class SeriesSum:
    tau: float
    R: float
    steps: int
    survival: float
    tail_bound: float


def _bright_decay(ops: WeakOperators) -> float:
    """Squared spectral radius of the survival operator on the bright subspace.

    Falls back to 0 (no floor) when the Hamiltonian eigensystem is unknown.
    """
    if ops.eig is None:
        return 0.0
    B = bright_subspace(ops)
    Sb = B.conj().T @ ops.survival @ B
    if Sb.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(Sb)))) ** 2


def tau_infinity_series_details(
    ops: WeakOperators,
    psi,
    tail_tol: float = 1e-10,
    max_steps: int = 10**6,
) -> SeriesSum:
    """Telescoped partial sums until ``s_K (K + 1/(1 - q)) < tail_tol``.

    ``s_K = ||S^K psi||^2``; the bound is the tail of a geometric majorant of
    ``sum_{n > K} n p_n = K s_K + sum_{k >= K} s_k``. The rate ``q`` is the
    larger of the decay of ``s`` over the last block and the squared spectral
    radius of ``S`` on the bright subspace, so a slow mode with little weight
    cannot end the sum early.
    """
    if ops.eta <= 0.0:
        raise InvalidArgs("series route needs eta > 0")
    psi = as_state(psi)
    S = ops.survival
    d = S.shape[0]
    q_floor = _bright_decay(ops)
    b = max(1, min(256, 2**22 // (d * d)))
    powers = np.empty((b, d, d), dtype=complex)
    acc = S
    for i in range(b):
        powers[i] = acc
        acc = S @ acc
    x = psi
    s_prev = float(np.vdot(x, x).real)
    head = 0.0  # sum_{k < K} s_k
    K = 0
    tail = math.inf
    while K < max_steps:
        m = min(b, max_steps - K)
        ys = powers[:m] @ x
        s = np.einsum("ij,ij->i", ys.conj(), ys).real
        head += s_prev + float(np.sum(s[:-1]))
        s_start = s_prev
        x = ys[m - 1]
        s_prev = float(s[-1])
        K += m
        if s_prev == 0.0:
            tail = 0.0
            break
        q = (s_prev / s_start) ** (1.0 / m) if s_start > 0 else 1.0
        q = max(q, q_floor)
        if q < 1.0:
            tail = s_prev * (K + 1.0 / (1.0 - q))
            if tail < tail_tol:
                break
    if tail >= tail_tol and s_prev >= 1e-6:
        raise NoConvergence(
            f"survival norm {s_prev:.3e} still above 1e-6 after {K} steps"
        )
    R = 1.0 - s_prev
    tau = (head - K * s_prev) / R
    return SeriesSum(tau, R, K, s_prev, tail)


def tau_infinity_series(ops, psi, tail_tol=1e-10, max_steps=10**6) -> float:
    return tau_infinity_series_details(ops, psi, tail_tol, max_steps).tau


def _extrapolate_to_zero(xs, ys) -> float:
    """Neville evaluation at 0 of the interpolating polynomial through ``(xs, ys)``."""
    p = list(ys)
    n = len(xs)
    for level in range(1, n):
        for i in range(n - level):
            j = i + level
            p[i] = (xs[j] * p[i] - xs[i] * p[i + 1]) / (xs[j] - xs[i])
    return p[0]


def _superoperators(ops: WeakOperators):
    T = vectorized_superoperator(ops.termination, ops.termination)
    S = vectorized_superoperator(ops.survival, ops.survival)
    return T, S


def vectorized_generating_function(ops: WeakOperators, psi, x: float):
    """``(g(x), g'(x), cond_1(1 - x S))`` with ``g(x) = sum_n p_n x^(n-1)``.

    The derivative uses ``d/dx (1 - xS)^(-1) = (1 - xS)^(-1) S (1 - xS)^(-1)``.
    """
    psi = as_state(psi)
    d = psi.size
    T, S = _superoperators(ops)
    PP = vectorized_superoperator(ops.P, ops.P)
    rho = PP @ vec(np.outer(psi, psi.conj()))
    left = vec(np.eye(d)) @ T
    M = np.eye(d * d) - x * S
    Minv = np.linalg.inv(M)
    cond = float(np.linalg.norm(M, 1) * np.linalg.norm(Minv, 1))
    y = Minv @ rho
    g = left @ y
    dg = left @ (Minv @ (S @ y))
    return complex(g), complex(dg), cond


def tau_infinity_vectorized_details(ops, psi, eps=RICHARDSON_EPS, cond_limit=COND_LIMIT):
    """``(tau_inf, R_inf)`` from the squared-space resolvent.

    Raises:
        SingularResolvent: if ``1 - xS`` is numerically singular at the smallest ``eps``.
    """
    if ops.eta <= 0.0:
        raise InvalidArgs("vectorized route needs eta > 0")
    gs, dgs = [], []
    for e in eps:
        g, dg, cond = vectorized_generating_function(ops, psi, 1.0 - e)
        gs.append(g.real)
        dgs.append(dg.real)
    if not np.isfinite(cond) or cond > cond_limit:
        raise SingularResolvent(
            f"resolvent condition number {cond:.3e} at x = 1 - {min(eps):g} exceeds {cond_limit:.0e}"
        )
    xs = list(eps)
    return 1.0 + _extrapolate_to_zero(xs, dgs), _extrapolate_to_zero(xs, gs)


def tau_infinity_vectorized(ops, psi, eps=RICHARDSON_EPS, cond_limit=COND_LIMIT) -> float:
    return tau_infinity_vectorized_details(ops, psi, eps, cond_limit)[0]


@dataclass(frozen=True)
class IntegralResult:
    tau: float
    imag_residue: float
    R: float
    points: int


def _winding_integral(Sr, Tr, psir, M):
    theta = 2 * np.pi * np.arange(M) / M
    z = np.exp(1j * theta)
    r = Sr.shape[0]
    A = np.eye(r)[None, :, :] - z[:, None, None] * Sr[None, :, :]
    rhs = np.broadcast_to(psir[:, None], (M, r, 1))
    sol = np.linalg.solve(A, rhs)[..., 0]
    vals = z[:, None] * (sol @ Tr.T)
    # one-sided wavenumbers: psi(theta) only carries e^{ik theta}, k >= 1
    coeffs = np.fft.fft(vals, axis=0) / M
    k = np.arange(M)
    dvals = np.fft.ifft(1j * k[:, None] * coeffs, axis=0) * M
    f = np.einsum("ij,ij->i", vals.conj(), dvals)
    val = f.mean() / 1j
    R = float(np.mean(np.einsum("ij,ij->i", vals.conj(), vals).real))
    return val, R


def tau_infinity_integral_details(
    ops: WeakOperators,
    psi,
    quadrature_points: int = 256,
    max_points: int = 2**15,
    rtol: float = 1e-4,
) -> IntegralResult:
    """Winding integral on a uniform grid with spectral differentiation.

    The starting grid is refined until ``M rho^M`` is negligible (``rho`` the
    spectral radius of the restricted survival operator), then doubled until
    two successive values agree within ``rtol``. The integrand is evaluated on the bright subspace, where the resolvent is
    regular on the unit circle.

    Raises:
        QuadratureNotConverged: if doubling up to ``max_points`` never settles,
            or the imaginary residue exceeds ``1e-6`` times the result.
    """
    if ops.eta <= 0.0:
        raise InvalidArgs("integral route needs eta > 0")
    M = int(quadrature_points)
    if M < 64 or M & (M - 1):
        raise InvalidArgs(f"quadrature_points must be a power of two >= 64, got {M}")
    psi = as_state(psi)
    B = bright_subspace(ops)
    Bh = B.conj().T
    Sr = Bh @ ops.survival @ B
    Tr = ops.termination @ B
    psir = Bh @ (ops.P @ psi)
    # the integrand is analytic for |z| < 1/rho, so the grid error is ~ M rho^M
    rho = float(np.max(np.abs(np.linalg.eigvals(Sr)))) if Sr.size else 0.0
    while M < max_points // 2 and M * rho**M > 1e-3 * rtol:
        M *= 2
    prev, _ = _winding_integral(Sr, Tr, psir, M)
    while True:
        M *= 2
        cur, R = _winding_integral(Sr, Tr, psir, M)
        if abs(cur - prev) <= rtol * abs(cur):
            break
        if M >= max_points:
            raise QuadratureNotConverged(
                f"winding integral still moving at {M} points: {prev.real:.8g} -> {cur.real:.8g}"
            )
        prev = cur
    if abs(cur.imag) > 1e-6 * abs(cur.real):
        raise QuadratureNotConverged(
            f"imaginary residue {cur.imag:.3e} too large for result {cur.real:.8g}"
        )
    return IntegralResult(float(cur.real), float(cur.imag), R, M)


def tau_infinity_integral(ops, psi, quadrature_points=256) -> float:
    return tau_infinity_integral_details(ops, psi, quadrature_points).tau


@dataclass(frozen=True)
class TauInfinityReport:
    tau_series: float
    tau_vectorized: float
    tau_integral: float
    agreement_spread: float
    eta: float
    t: float | None
    flagged: bool

    @property
    def values(self):
        return {
            "series": self.tau_series,
            "vectorized": self.tau_vectorized,
            "integral": self.tau_integral,
        }


def tau_infinity_report(ops, psi, tol=1e-4, quadrature_points=256) -> TauInfinityReport:
    """Run all three routes; ``agreement_spread`` is the max pairwise relative gap."""
    ts = tau_infinity_series(ops, psi)
    tv = tau_infinity_vectorized(ops, psi)
    ti = tau_infinity_integral(ops, psi, quadrature_points)
    vals = (ts, tv, ti)
    spread = max(abs(a - b) for a in vals for b in vals) / abs(ts)
    return TauInfinityReport(ts, tv, ti, spread, ops.eta, ops.t, spread > tol)


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    eigenvalues: np.ndarray
    eta: float
    t: float | None

    @property
    def moduli(self) -> np.ndarray:
        return np.abs(self.eigenvalues)


def survival_spectrum(ops: WeakOperators) -> SpectrumResult:
    """Eigenvalues of ``Q_eta U`` sorted by argument."""
    lam = np.linalg.eigvals(ops.survival)
    lam = lam[np.argsort(np.angle(lam), kind="stable")]
    return SpectrumResult(lam, ops.eta, ops.t)


def distinct_energies(eig: EigenSystem, degeneracy_tol=1e-8) -> np.ndarray:
    clusters = [[eig.eigenvalues[0]]]
    for e in eig.eigenvalues[1:]:
        if e - clusters[-1][-1] <= degeneracy_tol:
            clusters[-1].append(e)
        else:
            clusters.append([e])
    return np.array([np.mean(c) for c in clusters])


def energy_gaps(eig: EigenSystem, degeneracy_tol=1e-8) -> np.ndarray:
    """Distinct positive differences between distinct energies."""
    levels = distinct_energies(eig, degeneracy_tol)
    gaps = np.sort(np.concatenate([levels[j] - levels[:j] for j in range(1, levels.size)] or [[]]))
    out = []
    for g in gaps:
        if not out or g - out[-1] > degeneracy_tol:
            out.append(g)
    return np.array(out)


@dataclass(frozen=True, eq=False)
class ExceptionalTimes:
    """Sampling times ``2 pi k / gap`` in ``[0, 2 pi)``; ``generators[i]`` is ``(k, gap)``."""

    times: np.ndarray
    generators: tuple[tuple[int, float], ...]


def exceptional_times(eig: EigenSystem, degeneracy_tol: float = 1e-8) -> ExceptionalTimes:
    """Times at which distinct energies give coinciding phases ``exp(-iEt)``.

    Only ``k`` with ``2 pi k / gap < 2 pi`` are generated; larger multiples are
    genuinely different times unless the spectrum is commensurate.
    """
    if degeneracy_tol <= 0:
        raise InvalidArgs("degeneracy_tol must be positive")
    entries = [(0.0, 0, 0.0)]
    for gap in energy_gaps(eig, degeneracy_tol):
        k = 1
        while 2 * np.pi * k / gap < 2 * np.pi - 1e-12:
            entries.append((2 * np.pi * k / gap, k, float(gap)))
            k += 1
    entries.sort()
    times, gens = [], []
    for t, k, gap in entries:
        if times and t - times[-1] <= 1e-9:
            continue
        times.append(t)
        gens.append((k, gap))
    return ExceptionalTimes(np.array(times), tuple(gens))


def distance_to_exceptional(t: float, eig: EigenSystem, degeneracy_tol=1e-8) -> float:
    """Distance from ``t`` to the nearest ``2 pi k / gap`` over all gaps (``k >= 0``)."""
    t = abs(float(t))
    best = t
    for gap in energy_gaps(eig, degeneracy_tol):
        step = 2 * np.pi / gap
        best = min(best, abs(t - round(t / step) * step))
    return best


def ring_reference(L: int) -> tuple[Fraction, Fraction]:
    """Strong-measurement return time of an ``L``-ring and the classical threshold.

    The threshold ``eta'`` solves ``tau_strong / eta' = L`` (the classical return time).
    """
    if L < 2:
        raise InvalidArgs(f"ring length must be >= 2, got {L}")
    if L % 2 == 0:
        tau = Fraction(L + 2, 2)
        eta_c = Fraction(1, 2) + Fraction(1, L)
    else:
        tau = Fraction(L + 1, 2)
        eta_c = Fraction(1, 2) + Fraction(1, 2 * L)
    return tau, eta_c


@dataclass(frozen=True)
class EtaLawRow:
    eta: float
    tau: float
    eta_tau: float
    tau_strong: float
    rel_dev: float


@dataclass(frozen=True)
class EtaLawTable:
    rows: tuple[EtaLawRow, ...]
    tau_strong: float
    max_dev: float


def _tau_at(setup: MeasurementSetup, eta, N):
    s = setup.with_params(eta=eta)
    if N == math.inf:
        if s.t == 0.0:
            return zeno_tau(eta, math.inf)
        return tau_infinity_series(make_weak_operators(s), s.psi)
    return detection_series(make_weak_operators(s), s.psi, int(N)).tau_N


def eta_law_check(setup: MeasurementSetup, eta_grid, N=2000) -> EtaLawTable:
    """Compare ``eta * tau(eta)`` with the strong value ``tau(1)`` across ``eta_grid``."""
    grid = [check_eta(e) for e in eta_grid]
    tau_strong = _tau_at(setup, 1.0, N)
    rows = []
    for eta in grid:
        tau = _tau_at(setup, eta, N)
        rows.append(EtaLawRow(eta, tau, eta * tau, tau_strong, abs(eta * tau - tau_strong) / tau_strong))
    return EtaLawTable(tuple(rows), tau_strong, max(r.rel_dev for r in rows))

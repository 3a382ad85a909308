"""Weak-measurement operator algebra and finite-N first-detection statistics.

A weak measurement of strength ``eta`` on the detected subspace ``P`` has the
sheared pair ``P_eta = sqrt(eta) P`` and ``Q_eta = Q + sqrt(1 - eta) P``. The
walker evolves by ``U = exp(-iHt)`` between measurements, so the conditioned
("no click") state after ``n`` rounds is ``(Q_eta U)^n psi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    ConsistencyError,
    EtaOutOfRange,
    InitialStateNotInSubspace,
    InvalidArgs,
    NonUnitaryBasis,
)
from .graphs import Hamiltonian
from .linalg import EigenSystem, as_matrix, as_state, propagator, unitarity_error

SUBSPACE_TOL = 1e-10
# tau_N is reported undefined when less than this much probability was detected.
MIN_DETECTED = 1e-12
# survival norms below this are treated as exhausted
UNDERFLOW = 1e-300


def shear_defect(eta: float) -> float:
    """``f(eta) = sqrt(eta) + sqrt(1 - eta) - 1``, the defect in ``P_eta + Q_eta = 1 + f P``."""
    return math.sqrt(eta) + math.sqrt(1.0 - eta) - 1.0


def shear_matrix(eta: float) -> np.ndarray:
    """Maps ``(P, Q)`` to ``(P_eta, Q_eta)`` when applied to the stacked pair."""
    return np.array([[math.sqrt(eta), 0.0], [math.sqrt(1.0 - eta), 1.0]])


def check_eta(eta, allow_zero=False) -> float:
    try:
        eta = float(eta)
    except (TypeError, ValueError):
        raise EtaOutOfRange(eta, allow_zero) from None
    lo_ok = eta >= 0.0 if allow_zero else eta > 0.0
    if not (lo_ok and eta <= 1.0):
        raise EtaOutOfRange(eta, allow_zero)
    return eta


@dataclass(frozen=True)
class SiteSet:
    """Detection on a set of vertices (a rank-k diagonal projector)."""

    sites: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(sorted({int(s) for s in self.sites})))
        if not self.sites:
            raise InvalidArgs("SiteSet needs at least one site")

    def projector(self, dim: int) -> np.ndarray:
        if self.sites[0] < 0 or self.sites[-1] >= dim:
            raise InvalidArgs(f"detected sites {self.sites} out of range for dim {dim}")
        p = np.zeros((dim, dim), dtype=complex)
        p[self.sites, self.sites] = 1.0
        return p

    def describe(self) -> str:
        return "site{" + " ".join(map(str, self.sites)) + "}"


@dataclass(frozen=True, eq=False)
class RankOne:
    """Detection of a given state, ``P = |phi><phi|``."""

    state: np.ndarray

    def projector(self, dim: int) -> np.ndarray:
        phi = as_state(self.state)
        if phi.size != dim:
            raise InvalidArgs(f"rank-one state has dim {phi.size}, expected {dim}")
        phi = phi / np.linalg.norm(phi)
        return np.outer(phi, phi.conj())

    def describe(self) -> str:
        return "rank-one"


def site_state(dim: int, amplitudes) -> np.ndarray:
    """Normalized superposition from ``{site: amplitude}`` or a single site index."""
    if isinstance(amplitudes, (int, np.integer)):
        amplitudes = {int(amplitudes): 1.0}
    psi = np.zeros(dim, dtype=complex)
    for site, amp in dict(amplitudes).items():
        if not 0 <= site < dim:
            raise InvalidArgs(f"site {site} out of range for dim {dim}")
        psi[site] += amp
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise InvalidArgs("initial state has zero norm")
    return psi / norm


@dataclass(frozen=True, eq=False)
class MeasurementSetup:
    hamiltonian: Hamiltonian
    detected: SiteSet | RankOne
    eta: float
    t: float
    psi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "eta", check_eta(self.eta))
        t = float(self.t)
        if not (np.isfinite(t) and t >= 0.0):
            raise InvalidArgs(f"sampling time must be finite and >= 0, got {self.t}")
        object.__setattr__(self, "t", t)
        psi = as_state(self.psi)
        d = self.hamiltonian.dim
        if psi.size != d:
            raise InvalidArgs(f"initial state has dim {psi.size}, Hamiltonian has dim {d}")
        if abs(np.linalg.norm(psi) - 1.0) > SUBSPACE_TOL:
            raise InvalidArgs(f"initial state must be normalized, got norm {np.linalg.norm(psi)}")
        p = self.detected.projector(d)
        miss = float(np.max(np.abs(p @ psi - psi)))
        if miss > SUBSPACE_TOL:
            raise InitialStateNotInSubspace(
                f"initial state leaves the detected subspace: max |P psi - psi| = {miss:.3e}"
            )
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "_projector", p)

    @property
    def projector(self) -> np.ndarray:
        return self._projector

    @property
    def dim(self) -> int:
        return self.hamiltonian.dim

    def with_params(self, eta=None, t=None) -> "MeasurementSetup":
        return replace(
            self,
            eta=self.eta if eta is None else eta,
            t=self.t if t is None else t,
        )


@dataclass(frozen=True, eq=False)
class WeakOperators:
    """Sheared measurement pair plus survival ``Q_eta U`` and termination ``P_eta U``.

    ``eig`` is the eigensystem of the generating Hamiltonian in the same basis
    (``None`` when the operators were built from a bare unitary).
    """

    P: np.ndarray
    Q: np.ndarray
    P_eta: np.ndarray
    Q_eta: np.ndarray
    U: np.ndarray
    survival: np.ndarray
    termination: np.ndarray
    eta: float
    t: float | None = None
    eig: EigenSystem | None = None

    @property
    def dim(self) -> int:
        return self.U.shape[0]


def weak_operators(P, U, eta, t=None, eig=None, allow_zero=False) -> WeakOperators:
    """Build the operator set from a projector and a unitary.

    ``allow_zero`` admits ``eta = 0`` (no measurement at all), which only makes
    sense for spectral studies of the survival operator.
    """
    eta = check_eta(eta, allow_zero=allow_zero)
    P = as_matrix(P)
    U = as_matrix(U)
    d = P.shape[0]
    Q = np.eye(d) - P
    if eta == 1.0:
        P_eta, Q_eta = P.copy(), Q
    else:
        P_eta = math.sqrt(eta) * P
        Q_eta = Q + math.sqrt(1.0 - eta) * P
    return WeakOperators(
        P=P,
        Q=Q,
        P_eta=P_eta,
        Q_eta=Q_eta,
        U=U,
        survival=Q_eta @ U,
        termination=P_eta @ U,
        eta=eta,
        t=t,
        eig=eig,
    )


def make_weak_operators(setup: MeasurementSetup) -> WeakOperators:
    eig = setup.hamiltonian.eig
    U = propagator(eig, setup.t)
    return weak_operators(setup.projector, U, setup.eta, t=setup.t, eig=eig)


def shear_basis_transform(ops: WeakOperators, B, tol=1e-10) -> WeakOperators:
    """Conjugate every operator by a unitary basis change, ``X -> B^dagger X B``."""
    B = as_matrix(B)
    if B.shape[0] != ops.dim:
        raise NonUnitaryBasis(f"basis has dim {B.shape[0]}, operators have dim {ops.dim}")
    err = unitarity_error(B)
    if err > tol:
        raise NonUnitaryBasis(f"basis change is not unitary: max |B^dagger B - 1| = {err:.3e}")
    Bh = B.conj().T

    def conj(x):
        return Bh @ x @ B

    eig = None
    if ops.eig is not None:
        eig = EigenSystem(ops.eig.eigenvalues, Bh @ ops.eig.eigenvectors)
    return WeakOperators(
        P=conj(ops.P),
        Q=conj(ops.Q),
        P_eta=conj(ops.P_eta),
        Q_eta=conj(ops.Q_eta),
        U=conj(ops.U),
        survival=conj(ops.survival),
        termination=conj(ops.termination),
        eta=ops.eta,
        t=ops.t,
        eig=eig,
    )


@dataclass(frozen=True, eq=False)
class HittingResult:
    """First-detection statistics after at most ``N`` measurements.

    ``survival_norms[k]`` is ``||(Q_eta U)^k psi||^2`` for ``k = 0..N``;
    ``p[n-1]`` is the probability of first detection at measurement ``n``.
    """

    p: np.ndarray
    survival_norms: np.ndarray
    R_N: float
    tau_N: float
    t_N: float
    eta: float
    t: float | None
    tau_defined: bool = True

    @property
    def N(self) -> int:
        return self.p.shape[0]

    @property
    def R(self) -> np.ndarray:
        """Cumulative detection probability ``R_1..R_N``."""
        return np.cumsum(self.p)


def survival_norms(survival, psi, N: int, block: int = 64) -> np.ndarray:
    """``||S^k psi||^2`` for ``k = 0..N``, using blocks of precomputed powers of ``S``."""
    S = as_matrix(survival)
    x = as_state(psi)
    out = np.zeros(N + 1)
    out[0] = float(np.vdot(x, x).real)
    if N == 0:
        return out
    b = min(block, N)
    powers = np.empty((b,) + S.shape, dtype=complex)
    acc = S
    for i in range(b):
        powers[i] = acc
        acc = S @ acc
    k = 0
    while k < N:
        m = min(b, N - k)
        ys = powers[:m] @ x
        out[k + 1 : k + 1 + m] = np.einsum("ij,ij->i", ys.conj(), ys).real
        x = ys[m - 1]
        k += m
        if out[k] < UNDERFLOW:
            out[k:] = 0.0
            break
    return out


def _hitting_from_norms(s, eta, t) -> HittingResult:
    N = s.shape[0] - 1
    p = np.maximum(s[:-1] - s[1:], 0.0)
    s_N = s[-1]
    R_N = 1.0 - s_N
    if R_N < MIN_DETECTED:
        return HittingResult(p, s, R_N, math.nan, math.nan, eta, t, tau_defined=False)
    tau = (float(np.sum(s[:-1])) - N * s_N) / R_N
    t_N = tau * t if t is not None else math.nan
    return HittingResult(p, s, R_N, tau, t_N, eta, t)


def first_return_amplitude(ops: WeakOperators, n: int) -> np.ndarray:
    """``P_eta U (Q_eta U)^(n-1) P`` as a matrix."""
    if n < 1:
        raise InvalidArgs(f"n must be >= 1, got {n}")
    a = ops.P
    for _ in range(n - 1):
        a = ops.survival @ a
    return ops.termination @ a


def detection_series(
    ops: WeakOperators,
    psi,
    N: int,
    short_circuit: bool = True,
    check_amplitudes: bool = True,
) -> HittingResult:
    """First-detection probabilities via telescoping survival norms.

    ``p_n = ||S^(n-1) psi||^2 - ||S^n psi||^2`` with ``S = Q_eta U``. The first
    few ``p_n`` are cross-checked against the amplitude operators.

    Args:
        short_circuit: use the closed forms when ``t == 0``.
        check_amplitudes: verify ``p_n`` for ``n <= min(N, 8)`` at 1e-9.

    Raises:
        ConsistencyError: if the telescoped and direct ``p_n`` disagree.
    """
    N = int(N)
    if N < 1:
        raise InvalidArgs(f"N must be >= 1, got {N}")
    psi = as_state(psi)
    if short_circuit and ops.t == 0.0:
        s = (1.0 - ops.eta) ** np.arange(N + 1, dtype=float)
        s *= float(np.vdot(psi, psi).real)
    else:
        s = survival_norms(ops.survival, psi, N)
    result = _hitting_from_norms(s, ops.eta, ops.t)
    if check_amplitudes:
        x = ops.P @ psi
        for n in range(1, min(N, 8) + 1):
            amp = ops.termination @ x
            direct = float(np.vdot(amp, amp).real)
            if abs(direct - result.p[n - 1]) > 1e-9:
                raise ConsistencyError(
                    f"p_{n}: telescoped {result.p[n - 1]:.15g} vs amplitude {direct:.15g}"
                )
            x = ops.survival @ x
    return result


def projective_detection_series(U, P, psi, N: int) -> HittingResult:
    """Strong-measurement statistics from amplitudes, ``p_n = ||P U (Q U)^(n-1) psi||^2``.

    Deliberately independent of the sheared operators; used to check ``eta = 1``.
    """
    U = as_matrix(U)
    P = as_matrix(P)
    Q = np.eye(P.shape[0]) - P
    x = as_state(psi)
    p = np.empty(N)
    s = np.empty(N + 1)
    s[0] = float(np.vdot(x, x).real)
    for n in range(N):
        y = U @ x
        hit = P @ y
        p[n] = float(np.vdot(hit, hit).real)
        x = Q @ y
        s[n + 1] = float(np.vdot(x, x).real)
    R = float(p.sum())
    if R < MIN_DETECTED:
        return HittingResult(p, s, R, math.nan, math.nan, 1.0, None, tau_defined=False)
    tau = float(np.dot(np.arange(1, N + 1), p)) / R
    return HittingResult(p, s, R, tau, math.nan, 1.0, None)


def zeno_probabilities(eta: float, N: int) -> np.ndarray:
    """Closed form at ``t = 0``: ``p_n = eta (1 - eta)^(n-1)``."""
    eta = check_eta(eta)
    return eta * (1.0 - eta) ** np.arange(int(N), dtype=float)


def zeno_tau(eta: float, N=math.inf) -> float:
    """Closed-form mean number of measurements at ``t = 0``.

    ``tau_N = 1/eta - N q^N / (1 - q^N)`` with ``q = 1 - eta``; ``1/eta`` for ``N = inf``.
    """
    eta = check_eta(eta)
    if eta == 1.0:
        return 1.0
    if N == math.inf:
        return 1.0 / eta
    N = int(N)
    if N < 1:
        raise InvalidArgs(f"N must be >= 1 or inf, got {N}")
    q = 1.0 - eta
    qN = q**N
    return 1.0 / eta - N * qN / (-math.expm1(N * math.log(q)))


def zeno_tau_error(eta: float, N: int) -> float:
    """``1/eta - tau_N(eta, 0)``, evaluated without cancellation."""
    eta = check_eta(eta)
    if eta == 1.0:
        return 0.0
    q = 1.0 - eta
    return N * q**N / (-math.expm1(N * math.log(q)))


def _phase_clusters(phases, tol):
    """Group angles on the circle whose gaps are below ``tol``."""
    order = np.argsort(phases)
    sorted_ph = phases[order]
    groups = [[order[0]]]
    for prev, cur, idx in zip(sorted_ph[:-1], sorted_ph[1:], order[1:]):
        if cur - prev < tol:
            groups[-1].append(idx)
        else:
            groups.append([idx])
    if len(groups) > 1 and sorted_ph[0] + 2 * np.pi - sorted_ph[-1] < tol:
        groups[0].extend(groups.pop())
    return groups


def dark_subspace(ops: WeakOperators, degeneracy_tol=1e-8, null_tol=1e-9) -> np.ndarray:
    """Orthonormal basis of the eigenvectors of ``U`` annihilated by ``P``.

    These states never reach the detector; they are invariant under the
    survival operator with unit-modulus eigenvalues. Columns of the result span
    the space (shape ``d x k``, possibly ``k = 0``).
    """
    if ops.eig is None:
        raise InvalidArgs("dark subspace needs the Hamiltonian eigensystem")
    t = 0.0 if ops.t is None else ops.t
    phases = np.mod(-ops.eig.eigenvalues * t, 2 * np.pi)
    V = ops.eig.eigenvectors
    dark = []
    for group in _phase_clusters(phases, degeneracy_tol):
        Vc = V[:, group]
        _, sv, vh = np.linalg.svd(ops.P @ Vc)
        sv = np.concatenate([sv, np.zeros(len(group) - sv.size)])
        null = vh.conj().T[:, sv < null_tol]
        if null.size:
            dark.append(Vc @ null)
    if not dark:
        return np.zeros((ops.dim, 0), dtype=complex)
    D = np.concatenate(dark, axis=1)
    q, _ = np.linalg.qr(D)
    return q


def bright_subspace(ops: WeakOperators, **kw) -> np.ndarray:
    """Orthonormal basis of the complement of :func:`dark_subspace`.

    Both subspaces are invariant under ``Q_eta U`` and the detected subspace
    lies in the bright one, so the survival operator restricted here is a
    strict contraction for ``eta > 0``.
    """
    D = dark_subspace(ops, **kw)
    k = D.shape[1]
    if k == 0:
        return np.eye(ops.dim, dtype=complex)
    u, _, _ = np.linalg.svd(D, full_matrices=True)
    return u[:, k:]

"""Shot-by-shot simulation of the dilated system-plus-ancilla circuit.

Each round applies ``U(t)`` to the system, couples the ancilla through a
controlled ``R_Y(2 g)`` with ``g = arcsin(sqrt(eta))`` (control: system index in
the detected site set), and measures the ancilla. A "no" outcome leaves the
ancilla in ``|0>``, so no reset is needed; a "yes" ends the shot.

The ancilla is kept explicitly: states are arrays of shape ``(d, 2)`` (or
``(shots, d, 2)`` for a batch), flattened as ``2 i + a``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgs, NormLoss
from .linalg import as_state, propagator
from .monitor import MeasurementSetup, RankOne, check_eta

# branches lighter than this cannot have been sampled legitimately
BRANCH_FLOOR = 1e-14
DEFAULT_BATCH = 8192


def coupling_angle(eta: float) -> float:
    return math.asin(math.sqrt(check_eta(eta)))


def _cos_sin(eta: float):
    # cos g = sqrt(1 - eta) directly: cos(asin(x)) loses precision as eta -> 1
    eta = check_eta(eta)
    return math.sqrt(1.0 - eta), math.sqrt(eta)


def ry(eta: float) -> np.ndarray:
    c, s = _cos_sin(eta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def cry_gate(eta: float) -> np.ndarray:
    """``exp(-i g (1 - sigma_z)/2 kron sigma_y)`` on ``|control, target>``.

    Equal to ``diag(1, R_Y)`` with ``R_Y = [[cos g, -sin g], [sin g, cos g]]``.
    """
    out = np.eye(4, dtype=complex)
    out[2:, 2:] = ry(eta)
    return out


@dataclass(frozen=True, eq=False)
class DilatedCircuit:
    """One round of the monitored circuit: evolution, coupling, ancilla readout."""

    U: np.ndarray
    mask: np.ndarray  # True on detected system indices
    eta: float

    @property
    def dim(self) -> int:
        return self.U.shape[0]

    @property
    def angle(self) -> float:
        return coupling_angle(self.eta)


def dilated_circuit(setup: MeasurementSetup) -> DilatedCircuit:
    """Circuit for a site-set setup. Rank-one detection has no local control and is rejected."""
    if isinstance(setup.detected, RankOne):
        raise InvalidArgs("trajectory oracle supports SiteSet detection only")
    mask = np.zeros(setup.dim, dtype=bool)
    mask[list(setup.detected.sites)] = True
    U = propagator(setup.hamiltonian.eig, setup.t)
    return DilatedCircuit(U, mask, setup.eta)


@dataclass(frozen=True, eq=False)
class DilatedState:
    """System-major, ancilla-minor amplitudes of shape ``(d, 2)``."""

    amplitudes: np.ndarray

    @classmethod
    def from_system(cls, psi) -> "DilatedState":
        psi = as_state(psi)
        amp = np.zeros((psi.size, 2), dtype=complex)
        amp[:, 0] = psi
        return cls(amp)

    @property
    def flat(self) -> np.ndarray:
        return self.amplitudes.reshape(-1)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def system(self, ancilla: int = 0) -> np.ndarray:
        return self.amplitudes[:, ancilla].copy()

    def ancilla_weight(self, ancilla: int) -> float:
        a = self.amplitudes[:, ancilla]
        return float(np.vdot(a, a).real)


def _couple(circuit: DilatedCircuit, sys):
    """Evolve ancilla-``|0>`` system amplitudes ``sys[..., d]`` and apply the coupling."""
    sys = sys @ circuit.U.T
    c, s = _cos_sin(circuit.eta)
    amp = np.zeros(sys.shape + (2,), dtype=complex)
    amp[..., 0] = sys
    amp[..., circuit.mask, 0] *= c
    amp[..., circuit.mask, 1] = s * sys[..., circuit.mask]
    return amp


def pre_measurement(state: DilatedState, circuit: DilatedCircuit) -> DilatedState:
    """State just before the ancilla readout."""
    if state.ancilla_weight(1) > BRANCH_FLOOR:
        raise InvalidArgs("input ancilla must be in |0>")
    return DilatedState(_couple(circuit, state.amplitudes[:, 0]))


def branches(state: DilatedState, circuit: DilatedCircuit):
    """``(p_yes, yes_state, no_state)``; branch states are normalized (``None`` if empty).

    Both branch states carry the ancilla in ``|0>`` (reset after "yes").
    """
    amp = pre_measurement(state, circuit).amplitudes
    p_yes = float(np.vdot(amp[:, 1], amp[:, 1]).real)
    p_no = float(np.vdot(amp[:, 0], amp[:, 0]).real)
    yes = no = None
    if p_yes > BRANCH_FLOOR:
        yes = DilatedState.from_system(amp[:, 1] / math.sqrt(p_yes))
    if p_no > BRANCH_FLOOR:
        no = DilatedState.from_system(amp[:, 0] / math.sqrt(p_no))
    return p_yes, yes, no


def step_and_measure(state: DilatedState, circuit: DilatedCircuit, rng):
    """One round; returns ``("yes" | "no", post-measurement state)``.

    Raises:
        NormLoss: if the sampled branch has vanishing weight.
    """
    p_yes, yes, no = branches(state, circuit)
    if rng.random() < p_yes:
        if yes is None:
            raise NormLoss(f"sampled 'yes' with branch weight {p_yes:.3e}")
        return "yes", yes
    if no is None:
        raise NormLoss(f"sampled 'no' with branch weight {1.0 - p_yes:.3e}")
    return "no", no


def _seed_words(seed):
    return [int(x) for x in np.atleast_1d(seed)]


def _run_batch(circuit: DilatedCircuit, psi, N, size, seed, index):
    """First-hit counts for one batch; index ``N`` of the result counts undetected shots."""
    rng = np.random.default_rng([*_seed_words(seed), index])
    counts = np.zeros(N + 1, dtype=np.int64)
    sys = np.broadcast_to(as_state(psi), (size, psi.size)).copy()
    for n in range(N):
        if sys.shape[0] == 0:
            break
        amp = _couple(circuit, sys)
        p_yes = np.einsum("ij,ij->i", amp[..., 1].conj(), amp[..., 1]).real
        hit = rng.random(sys.shape[0]) < p_yes
        if np.any(hit & (p_yes < BRANCH_FLOOR)):
            raise NormLoss("sampled 'yes' on an empty branch")
        counts[n] += int(hit.sum())
        keep = ~hit
        p_no = 1.0 - p_yes[keep]
        if np.any(p_no < BRANCH_FLOOR):
            raise NormLoss("sampled 'no' on an empty branch")
        sys = amp[keep, :, 0] / np.sqrt(p_no)[:, None]
    counts[N] += sys.shape[0]
    return counts


def wilson_interval(k, n, z=1.96):
    """Wilson score interval for ``k`` successes out of ``n`` (vectorized over ``k``)."""
    k = np.asarray(k, dtype=float)
    p = k / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return np.clip(centre - half, 0.0, 1.0), np.clip(centre + half, 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class TrajectoryEstimate:
    """Empirical first-hit statistics.

    ``counts[n-1]`` is the number of shots first detected at round ``n``;
    ``p_lo``/``p_hi`` are 95% Wilson bounds on ``p_hat``.
    """

    shots: int
    counts: np.ndarray
    undetected: int
    p_hat: np.ndarray
    R_hat: float
    tau_hat: float
    tau_sigma: float
    p_lo: np.ndarray
    p_hi: np.ndarray
    seed: int | tuple[int, ...]

    @property
    def N(self) -> int:
        return self.counts.size

    def wilson(self, z):
        return wilson_interval(self.counts, self.shots, z)


def estimate_from_counts(counts, undetected, seed) -> TrajectoryEstimate:
    counts = np.asarray(counts, dtype=np.int64)
    shots = int(counts.sum() + undetected)
    detected = int(counts.sum())
    p_hat = counts / shots
    n = np.arange(1, counts.size + 1)
    if detected:
        tau = float(np.dot(n, counts)) / detected
        var = float(np.dot((n - tau) ** 2, counts)) / max(detected - 1, 1)
        sigma = math.sqrt(var / detected)
    else:
        tau = sigma = math.nan
    lo, hi = wilson_interval(counts, shots)
    return TrajectoryEstimate(
        shots, counts, int(undetected), p_hat, detected / shots, tau, sigma, lo, hi, seed
    )


def sample_first_hit(
    setup: MeasurementSetup,
    N: int,
    shots: int,
    seed,
    jobs: int = 1,
    batch_size: int = DEFAULT_BATCH,
) -> TrajectoryEstimate:
    """Monte Carlo first-detection statistics over ``shots`` independent runs.

    Shots are split into fixed-size batches; batch ``b`` draws from
    ``default_rng([*seed, b])`` (``seed`` is an int or a tuple of ints), so the
    result does not depend on ``jobs``.
    """
    N, shots = int(N), int(shots)
    if N < 1 or shots < 1:
        raise InvalidArgs(f"need N >= 1 and shots >= 1, got N={N}, shots={shots}")
    circuit = dilated_circuit(setup)
    sizes = [min(batch_size, shots - s) for s in range(0, shots, batch_size)]
    args = [(circuit, setup.psi, N, size, seed, b) for b, size in enumerate(sizes)]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_run_batch, *zip(*args)))
    else:
        parts = [_run_batch(*a) for a in args]
    total = np.sum(parts, axis=0)
    return estimate_from_counts(total[:N], total[N], seed)


def qubit_count(L: int, k: int) -> int:
    """Qubits for an ``L``-site walk with ``k`` ancilla-coupled sites: ``ceil(log2(L - k)) + 2k``."""
    L, k = int(L), int(k)
    if not 1 <= k < L:
        raise InvalidArgs(f"need 1 <= k < L, got L={L}, k={k}")
    return (L - k - 1).bit_length() + 2 * k

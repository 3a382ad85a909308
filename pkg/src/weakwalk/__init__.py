"""First-detection statistics of quantum walks under stroboscopic weak measurements."""

__version__ = "0.1.0"

from .asymptotics import (
    ExceptionalTimes,
    SpectrumResult,
    TauInfinityReport,
    eta_law_check,
    exceptional_times,
    ring_reference,
    survival_spectrum,
    tau_infinity_integral,
    tau_infinity_report,
    tau_infinity_series,
    tau_infinity_vectorized,
)
from .graphs import GraphSpec, Hamiltonian, build_hamiltonian
from .linalg import EigenSystem, eig_hermitian, propagator, vec, unvec, vectorized_superoperator
from .monitor import (
    HittingResult,
    MeasurementSetup,
    RankOne,
    SiteSet,
    WeakOperators,
    detection_series,
    make_weak_operators,
    shear_basis_transform,
    site_state,
    zeno_tau,
)
from .trajectory import DilatedState, TrajectoryEstimate, cry_gate, qubit_count, sample_first_hit, step_and_measure

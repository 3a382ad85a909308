"""Finite-N counterexample to "weaker coupling never raises the detection probability".

Scans the two-level walk for sampling times where R_N(eta) > R_N(1), then
prints the worst case found together with the per-step p_n of both couplings.
"""

import argparse

import numpy as np

from weakwalk.graphs import GraphSpec, build_hamiltonian
from weakwalk.monitor import MeasurementSetup, SiteSet, detection_series, make_weak_operators, site_state


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=5)
    ap.add_argument("--eta", type=float, default=0.9)
    ap.add_argument("--points", type=int, default=2001)
    args = ap.parse_args(argv)
    ham = build_hamiltonian(GraphSpec.two_vertex())
    psi = site_state(2, 0)

    def series(eta, t):
        setup = MeasurementSetup(ham, SiteSet((0,)), eta, t, psi)
        return detection_series(make_weak_operators(setup), psi, args.N)

    best = (-np.inf, None)
    for t in np.linspace(0.0, 2 * np.pi, args.points):
        gap = series(args.eta, t).R_N - series(1.0, t).R_N
        if gap > best[0]:
            best = (gap, t)
    gap, t = best
    weak, strong = series(args.eta, t), series(1.0, t)
    print(f"N={args.N} eta={args.eta} t={t:.6f}")
    print(f"R_N(eta)={weak.R_N:.6f}  R_N(1)={strong.R_N:.6f}  excess={gap:.6f}")
    print(f"tau_N(eta)={weak.tau_N:.6f}  tau_N(1)={strong.tau_N:.6f}")
    for n, (a, b) in enumerate(zip(weak.p, strong.p), start=1):
        print(f"  p_{n}: weak={a:.6f} strong={b:.6f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

"""Command-line front end.

Subcommands: ``sweep``, ``zeno``, ``spectrum``, ``eta-law``, ``compare``, ``trajectory``.
Exit codes: 0 success, 2 configuration error, 3 tolerance failure in ``compare``,
1 for any other numerical failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .asymptotics import (
    EXCEPTIONAL_MARGIN,
    distance_to_exceptional,
    eta_law_check,
    survival_spectrum,
    tau_infinity_integral_details,
    tau_infinity_series_details,
    tau_infinity_vectorized_details,
)
from .config import RunConfig, checked_etas, field_line, from_dict, read_config_document
from .errors import ConfigError, QuadratureNotConverged, SingularResolvent, WeakWalkError
from .linalg import propagator
from .monitor import detection_series, make_weak_operators, weak_operators, zeno_tau
from .output import Table, emit
from .trajectory import sample_first_hit

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_TOLERANCE = 0, 1, 2, 3


def _map(fn, items, jobs):
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))
    return [fn(x) for x in items]


def _near_exceptional(setup) -> bool:
    return distance_to_exceptional(setup.t, setup.hamiltonian.eig) < EXCEPTIONAL_MARGIN


def _tau_cell(cfg: RunConfig, setup, method, seed):
    """``(tau, R, method label)`` for one grid cell."""
    ops = make_weak_operators(setup)
    if method == "finite" and cfg.steps != math.inf:
        r = detection_series(ops, setup.psi, cfg.steps)
        return r.tau_N, r.R_N, "finite"
    if method == "trajectory":
        est = sample_first_hit(setup, cfg.steps, cfg.shots, seed)
        return est.tau_hat, est.R_hat, "trajectory"
    if method in ("vectorized", "integral") and not _near_exceptional(setup):
        try:
            if method == "vectorized":
                tau, R = tau_infinity_vectorized_details(ops, setup.psi)
            else:
                res = tau_infinity_integral_details(ops, setup.psi)
                tau, R = res.tau, res.R
            return tau, R, method
        except (SingularResolvent, QuadratureNotConverged):
            pass
        label = "series(fallback)"
    elif method in ("vectorized", "integral"):
        label = "series(fallback)"
    else:
        label = "series"
    res = tau_infinity_series_details(ops, setup.psi)
    return res.tau, res.R, label


def _sweep_cell(args):
    cfg, t, eta, index = args
    return _tau_cell(cfg, cfg.setup(eta=eta, t=t), cfg.method, (cfg.seed, index))


def cmd_sweep(cfg: RunConfig):
    etas = checked_etas(cfg)
    cells = []
    for t in cfg.times:
        for eta in etas:
            cells.append((cfg, float(t), eta, len(cells)))
    results = _map(_sweep_cell, cells, cfg.jobs)
    table = Table(
        ["t", "eta", "tau", "R_N", "method"],
        cfg.header(),
        {"steps": cfg.steps, "requested_method": cfg.method},
    )
    if cfg.method == "trajectory":
        table.meta.update(shots=cfg.shots, seed=cfg.seed)
    for (_, t, eta, _), (tau, R, label) in zip(cells, results):
        table.add(t, eta, float(tau), float(R), label)
    return table, ("t", "tau", "eta"), EXIT_OK


def cmd_zeno(cfg: RunConfig):
    etas = checked_etas(cfg)
    table = Table(["eta", "N", "tau"], cfg.header(), {"sampling_time": 0.0})
    for eta in etas:
        for N in cfg.n_list:
            table.add(eta, "inf" if N == math.inf else int(N), zeno_tau(eta, N))
    return table, ("eta", "tau", "N"), EXIT_OK


def _spectrum_cell(args):
    cfg, t, eta = args
    setup = cfg.setup(eta=1.0, t=t)
    U = propagator(setup.hamiltonian.eig, t)
    ops = weak_operators(setup.projector, U, eta, t=t, allow_zero=True)
    return survival_spectrum(ops).eigenvalues


def cmd_spectrum(cfg: RunConfig):
    etas = checked_etas(cfg, allow_zero=True)
    cells = [(cfg, float(t), eta) for t in cfg.times for eta in etas]
    results = _map(_spectrum_cell, cells, cfg.jobs)
    table = Table(
        ["t", "eta", "re", "im"],
        cfg.header(),
        {"reference_circles": "radius 1 (unit circle); radius 0.5"},
    )
    for (_, t, eta), lam in zip(cells, results):
        for z in lam:
            table.add(t, eta, float(z.real), float(z.imag))
    return table, ("re", "im", "eta"), EXIT_OK


def cmd_eta_law(cfg: RunConfig):
    etas = checked_etas(cfg)
    setup = cfg.setup(eta=1.0, t=cfg.t_grid[0])
    res = eta_law_check(setup, etas, cfg.steps)
    table = Table(
        ["eta", "tau", "eta_tau", "tau_strong", "rel_dev"],
        cfg.header(),
        {
            "t": setup.t,
            "steps": cfg.steps,
            "tau_strong": res.tau_strong,
            "max_rel_dev": res.max_dev,
            "within_1pct": res.max_dev < 0.01,
        },
    )
    for r in res.rows:
        table.add(r.eta, r.tau, r.eta_tau, r.tau_strong, r.rel_dev)
    return table, ("eta", "eta_tau", None), EXIT_OK


def cmd_compare(cfg: RunConfig):
    eta = checked_etas(cfg)[0]
    setup = cfg.setup(eta=eta, t=cfg.t_grid[0])
    ops = make_weak_operators(setup)
    series = tau_infinity_series_details(ops, setup.psi)
    values = {"series": (series.tau, "")}
    exceptional = _near_exceptional(setup)
    for name, fn in (
        ("vectorized", lambda: tau_infinity_vectorized_details(ops, setup.psi)[0]),
        ("integral", lambda: tau_infinity_integral_details(ops, setup.psi).tau),
    ):
        if exceptional:
            values[name] = (series.tau, "SingularResolvent fallback: exceptional sampling time")
            continue
        try:
            values[name] = (fn(), "")
        except (SingularResolvent, QuadratureNotConverged) as exc:
            values[name] = (series.tau, f"{type(exc).__name__} fallback: {exc}")
    table = Table(
        ["method", "tau", "sigma", "max_rel_dev", "note"],
        cfg.header(),
        {"eta": eta, "t": setup.t, "tol": cfg.tol},
    )
    analytic = [v for v, _ in values.values()]
    spread = 0.0
    for name, (v, note) in values.items():
        dev = max(abs(v - w) for w in analytic) / abs(series.tau)
        spread = max(spread, dev)
        table.add(name, v, 0.0, dev, note)
    code = EXIT_OK if spread <= cfg.tol else EXIT_TOLERANCE
    if cfg.method == "trajectory" or "shots" in cfg.given:
        if cfg.steps == math.inf:
            raise ConfigError("trajectory comparison needs a finite number of steps", field="steps")
        est = sample_first_hit(setup, cfg.steps, cfg.shots, cfg.seed, jobs=cfg.jobs)
        exact = detection_series(ops, setup.psi, cfg.steps).tau_N
        z = (est.tau_hat - exact) / est.tau_sigma if est.tau_sigma > 0 else 0.0
        table.add(
            "trajectory", est.tau_hat, est.tau_sigma, abs(est.tau_hat - exact) / exact,
            f"finite-N reference {float(exact)!r}; z={z:.3f}",
        )
        if abs(z) > 3.0:
            code = EXIT_TOLERANCE
    table.meta["spread"] = spread
    table.meta["passed"] = code == EXIT_OK
    return table, ("method", "tau", None), code


def cmd_trajectory(cfg: RunConfig):
    eta = checked_etas(cfg)[0]
    setup = cfg.setup(eta=eta, t=cfg.t_grid[0])
    if cfg.steps == math.inf:
        raise ConfigError("trajectory needs a finite number of steps", field="steps")
    est = sample_first_hit(setup, cfg.steps, cfg.shots, cfg.seed, jobs=cfg.jobs)
    exact = detection_series(make_weak_operators(setup), setup.psi, cfg.steps)
    table = Table(
        ["n", "count", "p_hat", "p_lo", "p_hi", "p_exact"],
        cfg.header(),
        {
            "eta": eta,
            "t": setup.t,
            "shots": cfg.shots,
            "seed": cfg.seed,
            "undetected": est.undetected,
            "R_hat": est.R_hat,
            "tau_hat": est.tau_hat,
            "tau_sigma": est.tau_sigma,
            "tau_exact": exact.tau_N,
        },
    )
    for n in range(est.N):
        table.add(n + 1, int(est.counts[n]), float(est.p_hat[n]), float(est.p_lo[n]),
                  float(est.p_hi[n]), float(exact.p[n]))
    return table, ("n", "p_hat", None), EXIT_OK


COMMANDS = {
    "sweep": cmd_sweep,
    "zeno": cmd_zeno,
    "spectrum": cmd_spectrum,
    "eta-law": cmd_eta_law,
    "compare": cmd_compare,
    "trajectory": cmd_trajectory,
}

# subcommand defaults applied when neither the config nor a flag sets the key
DEFAULTS = {
    "sweep": {},
    "zeno": {"graph": "two-vertex"},
    "spectrum": {"t_grid": [0.0, 39 * math.pi / 20, 40]},
    "eta-law": {"t": 0.9, "steps": 2000},
    "compare": {"t": 0.9, "eta": 0.5},
    "trajectory": {"t": 0.9, "eta": 0.5, "steps": 20},
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("run configuration")
    g.add_argument("--config", help="JSON run configuration; flags override its entries")
    g.add_argument("--graph", help="graph kind (two-vertex, ring, magnetic-ring, benzene, "
                   "complete-bipartite, petersen, grid, random, custom)")
    g.add_argument("--L", type=int, help="ring length")
    g.add_argument("--alpha", help="Peierls phase of a magnetic ring")
    g.add_argument("--m", type=int, help="first part of a complete bipartite graph")
    g.add_argument("--n", type=int, help="second bipartite part, or vertex count of a random graph")
    g.add_argument("--rows", type=int)
    g.add_argument("--cols", type=int)
    g.add_argument("--p", help="edge probability of a random graph")
    g.add_argument("--graph-seed", type=int, help="seed of a random graph")
    g.add_argument("--adjacency", help="custom graph file (JSON or edge list)")
    g.add_argument("--mode", choices=("site", "rank-one"), help="detected subspace type")
    g.add_argument("--site", type=int, help="initial (and detected) site")
    g.add_argument("--superposition", nargs="+", metavar="SITE[:AMP]",
                   help="initial superposition, e.g. 6 7 or 6:1 7:-1")
    g.add_argument("--detected", nargs="+", type=int, help="detected sites (default: support of psi)")
    g.add_argument("--eta", help="single coupling strength")
    g.add_argument("--eta-grid", nargs="+", help="coupling strengths")
    g.add_argument("--t", help="single sampling time (accepts pi expressions)")
    g.add_argument("--t-grid", nargs=3, metavar=("START", "STOP", "POINTS"))
    g.add_argument("--steps", help="number of measurements N (or inf)")
    g.add_argument("--n-list", nargs="+", help="values of N for zeno (inf allowed)")
    g.add_argument("--method", choices=("finite", "series", "vectorized", "integral", "trajectory"))
    g.add_argument("--shots", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--jobs", type=int)
    g.add_argument("--tol", help="relative tolerance for compare")
    g.add_argument("--out", help="output path (default stdout)")
    g.add_argument("--format", choices=("csv", "json", "svg"))

    parser = argparse.ArgumentParser(
        prog="weakwalk",
        description="First-detection statistics of weakly monitored quantum walks.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "sweep": "tau over a (t, eta) grid",
        "zeno": "closed-form tau_N at t = 0",
        "spectrum": "eigenvalues of the survival operator",
        "eta-law": "eta * tau(eta) against the strong-measurement value",
        "compare": "cross-check the infinite-N routes (and optionally the trajectory oracle)",
        "trajectory": "Monte Carlo first-hit histogram",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text, description=text)
    return parser


def _superposition(items):
    out = []
    for item in items:
        site, _, amp = item.partition(":")
        out.append([site, amp or "1"])
    return out


def overrides_from_args(args) -> dict:
    doc = {}
    if args.graph is not None or args.adjacency is not None:
        kind = args.graph or "custom"
        graph = {"kind": kind}
        for key, val in (("L", args.L), ("alpha", args.alpha), ("m", args.m), ("n", args.n),
                         ("rows", args.rows), ("cols", args.cols), ("p", args.p),
                         ("seed", args.graph_seed), ("path", args.adjacency)):
            if val is not None:
                graph[key] = val
        doc["graph"] = graph
    if args.site is not None and args.superposition is not None:
        raise ConfigError("give either --site or --superposition", field="initial")
    if args.site is not None:
        doc["initial"] = args.site
    if args.superposition is not None:
        doc["initial"] = _superposition(args.superposition)
    if args.eta is not None and args.eta_grid is not None:
        raise ConfigError("give either --eta or --eta-grid", field="eta")
    if args.t is not None and args.t_grid is not None:
        raise ConfigError("give either --t or --t-grid", field="t")
    simple = {
        "mode": args.mode, "detected": args.detected, "eta": args.eta_grid or args.eta,
        "t": args.t, "t_grid": args.t_grid, "steps": args.steps, "n_list": args.n_list,
        "method": args.method, "shots": args.shots, "seed": args.seed, "jobs": args.jobs,
        "tol": args.tol, "out": args.out, "format": args.format,
    }
    for key, val in simple.items():
        if val is not None:
            doc[key] = val
    return doc


def resolve_config(command: str, args) -> RunConfig:
    """Merge config file, flags and subcommand defaults (in decreasing priority: flags, file, defaults)."""
    flags = overrides_from_args(args)
    base, text, base_dir = {}, None, None
    if args.config:
        base, text = read_config_document(args.config)
        base_dir = Path(args.config).parent
    merged = dict(base)
    # a time flag replaces whichever time entry the file had
    if "t" in flags or "t_grid" in flags:
        merged.pop("t", None)
        merged.pop("t_grid", None)
    merged.update(flags)
    for key, val in DEFAULTS[command].items():
        if key in ("t", "t_grid") and ("t" in merged or "t_grid" in merged):
            continue
        merged.setdefault(key, val)
    try:
        cfg = from_dict(merged, base_dir=base_dir)
    except ConfigError as exc:
        top = (exc.field or "").split(".")[0]
        if text is not None and exc.line is None and top in base and top not in flags:
            raise ConfigError(exc.message, field=exc.field, line=field_line(text, exc.field)) from exc
        raise
    return cfg.validate()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args.command, args)
        table, plot, code = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"weakwalk {args.command}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except WeakWalkError as exc:
        print(f"weakwalk {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    emit(table, cfg.fmt, cfg.out, plot)
    return code


if __name__ == "__main__":
    sys.exit(main())

"""Regenerate the figure data sets from the checked-in recipes in configs/.

Usage: python3 scripts/reproduce_figures.py [--out results] [--jobs 4] [--svg] [NAME ...]
"""

import argparse
import sys
from pathlib import Path

from weakwalk.cli import main as weakwalk

ROOT = Path(__file__).resolve().parent.parent

# recipe -> subcommand
RECIPES = {
    "fig2a_zeno": "zeno",
    "fig2c_spectrum_two_level": "spectrum",
    "fig2d_spectrum_benzene": "spectrum",
    "fig3a_two_level_N10": "sweep",
    "fig3b_two_level_N20": "sweep",
    "fig3c_two_level_N50": "sweep",
    "fig3d_two_level_Ninf": "sweep",
    "fig4_two_level_eta02_N20": "sweep",
    "fig5a_benzene_N10": "sweep",
    "fig5b_benzene_N20": "sweep",
    "fig5c_benzene_N200": "sweep",
    "fig5d_benzene_Ninf": "sweep",
    "fig7a_complete_bipartite_eta_law": "eta-law",
    "fig7b_random_eta_law": "eta-law",
    "fig8a_petersen_eta_law": "eta-law",
    "fig8b_grid_eta_law": "eta-law",
    "benzene_eta_law": "eta-law",
    "magnetic_ring_eta_law": "eta-law",
    "compare_two_level": "compare",
    "trajectory_benzene": "trajectory",
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("names", nargs="*", help="recipes to run (default: all)")
    ap.add_argument("--out", default=str(ROOT / "results"))
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--svg", action="store_true", help="also write an SVG line plot")
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    failed = []
    for name in args.names or RECIPES:
        command = RECIPES[name]
        base = [command, "--config", str(ROOT / "configs" / f"{name}.json"), "--jobs", str(args.jobs)]
        formats = ["csv", "svg"] if args.svg else ["csv"]
        for fmt in formats:
            code = weakwalk(base + ["--format", fmt, "--out", str(out / f"{name}.{fmt}")])
            if code:
                failed.append((name, fmt, code))
        print(f"{name}: {command} -> {out / name}.csv", file=sys.stderr)
    for name, fmt, code in failed:
        print(f"FAILED {name} ({fmt}): exit {code}", file=sys.stderr)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())

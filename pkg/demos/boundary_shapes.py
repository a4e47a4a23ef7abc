"""Futility and efficacy thresholds across the trial for one (lambda, gamma).

    python demos/boundary_shapes.py --lam 0.9 --gamma 1.0 --N 80
"""

import argparse

from bop2sim.boundaries import BoundaryParams, boundary_table
from bop2sim.reporting import text_table

ap = argparse.ArgumentParser()
ap.add_argument("--lam", type=float, default=0.9)
ap.add_argument("--gamma", type=float, default=1.0)
ap.add_argument("--N", type=int, default=80)
ap.add_argument("--every", type=int, default=10)
args = ap.parse_args()

schedule = range(args.every, args.N, args.every)
rows = boundary_table(BoundaryParams(args.lam, args.gamma), args.N, schedule)
print(text_table(("n", "futility", "efficacy"),
                 [(r["n"], r["futility_threshold"], r["efficacy_threshold"]) for r in rows], ".4f"))

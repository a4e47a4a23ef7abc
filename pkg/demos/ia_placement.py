"""Where should interim analyses go? Sweep one IA, then compare strategies.

Equal-allocation paths are simulated once and replayed for every schedule, so
the sweep over all placements costs about one simulation.

    python demos/ia_placement.py --sims 4000
"""

import argparse

from bop2sim import IASearchSpec, Scenario, TrialDesign, compare_ia_strategies, enumerate_ia_placements
from bop2sim.reporting import text_table

ap = argparse.ArgumentParser()
ap.add_argument("--sims", type=int, default=4000)
ap.add_argument("--seed", type=int, default=2024)
args = ap.parse_args()

design = TrialDesign(K=1, N=80, lam=0.91, gamma=0.94)
alt = Scenario((0.2, 0.4))

spec = IASearchSpec(num_ias=1, objective="min_ess", step=1, n_sims=args.sims)
sweep = enumerate_ia_placements(design, alt, spec, args.seed)
print(text_table(("ia_at", "ESS", "power"),
                 [(r["schedule"][0], r["ess"], r["power"]) for r in sweep.table if r["schedule"][0] % 5 == 0]))
print(f"best single IA: {sweep.best_row['schedule']} (ESS {sweep.best_row['ess']:.2f})\n")

rows = compare_ia_strategies(design, alt, spec, args.seed, max_ias=3)
print(text_table(("IAs", "optimal", "equal", "after_waiting", "optimal_at"),
                 [(r.num_ias, r.optimal, r.equal, r.equal_after_waiting, list(r.optimal_schedule)) for r in rows], ".2f"))

"""Equal randomisation against tuned two-arm BRAR across treatment effects.

    python demos/two_arm_comparison.py --sims 2000
"""

import argparse

from bop2sim import Scenario, TrialDesign, estimate_oc
from bop2sim.reporting import text_table

ap = argparse.ArgumentParser()
ap.add_argument("--sims", type=int, default=2000)
ap.add_argument("--seed", type=int, default=2024)
args = ap.parse_args()

equal = TrialDesign(K=1, N=80, lam=0.91, gamma=0.93, ia_schedule=(20, 40, 60))
brar = equal.with_(lam=0.9, gamma=0.86, scheme="brar2")

rows = []
for rate in (0.1, 0.2, 0.3, 0.4):
    sc = Scenario((0.2, rate))
    for name, d in (("equal", equal), ("brar", brar)):
        oc = estimate_oc(d, sc, args.sims, args.seed)
        rows.append((name, rate, oc.power, oc.ess_total, oc.prop_best))
print(text_table(("design", "treatment", "reject", "ESS", "prop_treat"), rows))

"""Allocation probability as one treatment arm's response count varies.

Three-arm controlled setting: 30 patients on every arm, the control and the
second treatment at 13/30 responses, the first treatment swept from 0 to 30.
Compares the Trippa rule (control protected by sample-size imbalance) with
the Maximum rule (allocation by probability of being the best arm).

    python demos/allocation_curve.py
"""

import numpy as np

from bop2sim.allocation import maximum_allocation, trippa_allocation, tuning_exponent
from bop2sim.posterior import prob_exceeds_threshold, update_posterior, UNIFORM
from bop2sim.reporting import text_table

PER_ARM, CONTROL_SUCC, OTHER_SUCC = 30, 13, 13
REFERENCE = 0.45
N_MAX = 180

c = tuning_exponent(3 * PER_ARM, N_MAX)
rows = []
for s in range(PER_ARM + 1):
    succ = [CONTROL_SUCC, s, OTHER_SUCC]
    post = [update_posterior(UNIFORM, k, PER_ARM - k) for k in succ]
    exceed = [prob_exceeds_threshold(p, REFERENCE) for p in post]
    trip = trippa_allocation([PER_ARM] * 3, exceed, c, np.ones(3, bool))
    mx = maximum_allocation(post, c)
    rows.append((s, trip[0], trip[1], mx[0], mx[1]))

print(f"tuning exponent c = {c:.3f}")
print(text_table(("successes", "trippa_ctrl", "trippa_arm1", "maximum_ctrl", "maximum_arm1"), rows))

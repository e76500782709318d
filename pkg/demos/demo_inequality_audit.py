"""Randomized audit of the map energy inequalities.

The two height maps (subtract a above the well; collapse everything
below 1 to the wall) may only raise the energy by a boundary term plus a
count of near-wall sites. The audit hammers the three bounds with random
and threshold-adversarial fields; a single negative slack would break
the wetting argument. Runs in a few seconds at this size.
"""

import numpy as np

import hardwall as hw
from hardwall.chalker import adversarial_heights, s_gauss_slacks

rows = hw.verify_suite(n_random=20000, n_adversarial=2000, seed=7)
print(f"{'check':34s} {'configs':>8s} {'min_slack':>12s} {'violations':>10s}")
for r in rows:
    print(f"{r['name']:34s} {r['configs']:8d} {r['min_slack']:12.3e} "
          f"{r['violations']:10d}")

# the bounds are tight: uniform tall fields spend the budget exactly
lat = hw.build_lattice(2, 2)
print("\ntight case, all heights = 3 on the 2x2 cube:",
      hw.check_S_inequality_sos(lat, np.full(4, 3.0)), "(slack exactly 0)")

# adversarial fields sit within 1e-12 of the thresholds
lat = hw.build_lattice(2, 5)
rng = np.random.default_rng(0)
h = adversarial_heights(lat, 5000, rng, (1.0,))
print("gaussian map slack minimum on threshold-adversarial fields:",
      float(s_gauss_slacks(lat, h).min()))

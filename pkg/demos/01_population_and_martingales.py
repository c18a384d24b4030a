"""Growth of a branching Brownian motion and its two martingales.

The mean population is e^t. The McKean martingale Y_t has mean 1 but is
increasingly skewed, and the derivative martingale Z_t has mean 0 while most
replicas sit above 0. Both facts show up clearly at small t.
"""

import math

import numpy as np

from bbm_extremal import BbmConfig, simulate_many
from bbm_extremal import martingales as mg
from bbm_extremal.bbm_core import population_sizes

SEED = 2024

# --- population size ---------------------------------------------------------
for t in (1.0, 2.0, 3.0):
    n = population_sizes(BbmConfig(t), SEED, 5000)
    print(f"t={t:.0f}  mean n(t) = {n.mean():7.3f}   e^t = {math.exp(t):7.3f}   "
          f"max over replicas = {n.max()}")

# --- martingales -------------------------------------------------------------
print()
for t in (1.0, 2.0, 3.0):
    snaps = simulate_many(BbmConfig(t), SEED, 4000, batch=256)
    y = np.array([mg.mckean_martingale(s) for s in snaps])
    z = np.array([mg.derivative_martingale(s) for s in snaps])
    print(f"t={t:.0f}  mean Y = {y.mean():.3f} (median {np.median(y):.3f})   "
          f"mean Z = {z.mean():+.3f} (median {np.median(z):+.3f}, P(Z<0) = {np.mean(z < 0):.2f})")

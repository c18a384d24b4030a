"""The spine: branch times along one size-biased lineage.

Branch times form a rate-2 Poisson process, offspring at the spine are
size-biased, and each branching carries a uniform mark. Monte Carlo sums are
compared with their closed forms.
"""

import numpy as np

from bbm_extremal import OffspringDistribution
from bbm_extremal import spine

rng = np.random.default_rng(8)
law = OffspringDistribution({1: 0.5, 3: 0.5})
times, offs, marks, offsets = spine.sample_spines(200_000, 3.0, law, rng)

v = spine.campbell_functionals(times, offs, offsets, 1.0, 3.0)
print(f"Campbell sum on [1, 3]: {v.mean():.4f} +- {v.std() / np.sqrt(v.size):.4f}, "
      f"closed form {spine.campbell_mean(law, 1.0, 3.0):.4f}")

counts = np.diff(offsets)
for i in (1, 2, 3):
    s = 0.8  # a spine with fewer than i points by time 3 has t_i > 3 > s
    ok = counts >= i
    ti = times[offsets[:-1][ok] + i - 1]
    emp = (np.sum(ti > s) + np.sum(~ok)) / counts.size
    print(f"P(t_{i} > {s}) = {emp:.4f}, Erlang {spine.erlang_survival(i, s):.4f}")

# a long horizon so almost every spine has a nonzero mark
_, _, marks, offsets = spine.sample_spines(200_000, 20.0, law, rng)
first = spine.first_nonzero_index(marks, offsets)
for i in (1, 2, 3, 4):
    print(f"first nonzero mark at #{i}: {np.mean(first == i):.4f}, law "
          f"{spine.first_nonzero_mark_law(law, i):.4f}, bound {spine.first_nonzero_mark_bound(law, i):.4f}")

"""Extremal particles of one replica, grouped into genealogical clusters.

Particles within a few units of m(t) are listed with their embedding gamma.
Grouping by overlap >= q puts close relatives together, and the top of each
group is its representative.
"""

import numpy as np

from bbm_extremal import BbmConfig, simulate
from bbm_extremal import extremal as ext

t = 10.0
s = simulate(BbmConfig(t), 31)
print(f"t = {t}, population {s.n}, m(t) = {s.m_t:.3f}, max - m(t) = {s.positions.max() - s.m_t:.3f}")

sample = ext.extract(s, cutoff=-3.0)
print(f"{len(sample)} particles above m(t) - 3\n")

q = 0.3  # clusters share an ancestor after time q t = 3
dcmp = ext.q_thin(sample, q)
for k, rep in enumerate(dcmp.representatives):
    members = np.nonzero(dcmp.assignment == rep)[0]
    a = sample.atoms[rep]
    offsets = np.sort(sample.values[members] - a.value)[::-1]
    print(f"cluster {k}: top value {a.value:+.3f} at gamma {a.gamma:.5f}, "
          f"{len(members)} members, offsets {np.round(offsets[1:6], 2).tolist()}")

# overlaps between representatives are short, overlaps inside clusters long
reps = list(dcmp.representatives)
if len(reps) > 1:
    between = sample.overlap_times[np.ix_(reps, reps)][np.triu_indices(len(reps), 1)]
    print(f"\nlargest overlap time between representatives: {between.max():.2f} (< {q * t})")

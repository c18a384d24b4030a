"""Clusters seen from the maximum of BBM conditioned on max >= sqrt(2) t.

The conditioning event is rare, so the sampler simply rejects. Truncating to
relatives that split in the last r time units gives nested point sets.
"""

import numpy as np

from bbm_extremal import decoration as dec

t = 6.0
p, se = dec.acceptance_rate(t, 1, 20_000)
print(f"P(max >= sqrt2 t) at t={t}: {p:.4f} +- {se:.4f}")

snaps, attempts = dec.sample_conditioned_many(t, 1, 40)
print(f"40 conditioned samples used {attempts} attempts\n")

for r in (0.5, 1.0, 2.0, None):
    sizes = [len(dec.decoration_atoms(s, r)) for s in snaps]
    gaps = [d.atoms[1] for s in snaps if len(d := dec.decoration_atoms(s, r)) > 1]
    label = "all" if r is None else f"r={r}"
    print(f"{label:6s} mean atoms {np.mean(sizes):7.1f}   mean gap to second {np.mean(gaps):+.3f}")

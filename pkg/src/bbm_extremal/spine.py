"""Size-biased single-lineage (many-to-one) samplers and their closed forms."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gw_tree import OffspringDistribution


@dataclass(frozen=True)
class SpineRealization:
    """Branch times on the spine with size-biased offspring and uniform marks."""

    times: np.ndarray
    offspring: np.ndarray
    marks: np.ndarray
    horizon: float

    def __len__(self):
        return len(self.times)


def _size_biased_draw(dist: OffspringDistribution, rng: np.random.Generator, n: int):
    ks, probs = dist.size_biased()
    return ks[rng.choice(len(ks), size=n, p=probs)] if len(ks) > 1 else np.full(n, ks[0])


def sample_spine(horizon: float, dist: OffspringDistribution, rng: np.random.Generator) -> SpineRealization:
    """Branch times with iid Exp(2) gaps on ``[0, horizon]``, independent marks."""
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    times = []
    clock = rng.exponential(0.5)
    while clock <= horizon:
        times.append(clock)
        clock += rng.exponential(0.5)
    times = np.array(times)
    n = len(times)
    offspring = _size_biased_draw(dist, rng, n)
    marks = np.floor(rng.uniform(size=n) * offspring).astype(np.int64)
    return SpineRealization(times, offspring, marks, float(horizon))


def sample_spines(n: int, horizon: float, dist: OffspringDistribution, rng: np.random.Generator):
    """Many spines at once, as flat arrays plus CSR offsets.

    Uses the Poisson-count / uniform-order-statistics description of the
    same point process.
    """
    counts = rng.poisson(2.0 * horizon, size=n)
    total = int(counts.sum())
    offsets = np.concatenate([[0], np.cumsum(counts)])
    times = rng.uniform(0.0, horizon, size=total)
    owner = np.repeat(np.arange(n), counts)
    order = np.lexsort((times, owner))
    times = times[order]
    offspring = _size_biased_draw(dist, rng, total)
    marks = np.floor(rng.uniform(size=total) * offspring).astype(np.int64)
    return times, offspring, marks, offsets


def campbell_functional(s: SpineRealization, r: float, t: float) -> float:
    """``sum_j (l_j - 1) exp(-t_j)`` over spine points in ``[r, t]``."""
    if not 0 <= r <= t:
        raise ValueError("need 0 <= r <= t")
    sel = (s.times >= r) & (s.times <= t)
    return float(((s.offspring[sel] - 1) * np.exp(-s.times[sel])).sum())


def campbell_mean(dist: OffspringDistribution, r: float, t: float) -> float:
    """Closed form ``K (exp(-r) - exp(-t))``."""
    if not 0 <= r <= t:
        raise ValueError("need 0 <= r <= t")
    return dist.K * (math.exp(-r) - math.exp(-t))


def campbell_functionals(times, offspring, offsets, r: float, t: float) -> np.ndarray:
    """Vectorised :func:`campbell_functional` for CSR-packed spines."""
    w = np.where((times >= r) & (times <= t), (offspring - 1) * np.exp(-times), 0.0)
    c = np.concatenate([[0.0], np.cumsum(w)])
    return c[offsets[1:]] - c[offsets[:-1]]


def erlang_survival(i_star: int, s: float) -> float:
    """Survival function at ``s`` of a sum of ``i_star`` iid Exp(2) times."""
    if i_star < 1:
        raise ValueError("i_star must be >= 1")
    if s < 0:
        raise ValueError("s must be >= 0")
    x = 2.0 * s
    term, total = 1.0, 1.0
    for i in range(1, i_star):
        term *= x / i
        total += term
    return math.exp(-x) * total


def first_nonzero_mark_law(dist: OffspringDistribution, i_star: int) -> float:
    """Probability that the first nonzero mark on the spine is the ``i_star``-th."""
    if i_star < 1:
        raise ValueError("i_star must be >= 1")
    ks, probs = dist.size_biased()
    inv = float((probs / ks).sum())
    return (1.0 - inv) * inv ** (i_star - 1)


def first_nonzero_mark_bound(dist: OffspringDistribution, i_star: int) -> float:
    return ((1.0 + dist.p1) / 2.0) ** (i_star - 1)


def first_nonzero_index(marks, offsets) -> np.ndarray:
    """1-based index of the first nonzero mark per spine (0 when none)."""
    n = len(offsets) - 1
    out = np.zeros(n, dtype=np.int64)
    nz = np.nonzero(marks != 0)[0]
    owner = np.searchsorted(offsets, nz, side="right") - 1
    first = np.full(n, np.iinfo(np.int64).max, dtype=np.int64)
    np.minimum.at(first, owner, nz)
    has = first < np.iinfo(np.int64).max
    out[has] = first[has] - offsets[:-1][has] + 1
    return out

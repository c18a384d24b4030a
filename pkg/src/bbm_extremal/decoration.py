"""Finite-t decoration (cluster) processes.

``sample_conditioned`` draws BBM conditioned on ``max x(t) >= sqrt(2) t`` by
rejection. ``decoration_atoms`` reads the cluster seen from the maximum,
optionally keeping only particles that split from it during the last ``r``
time units. ``recent_relatives`` does the same around any particle of an
unconditioned snapshot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from ._grow import BRANCH
from .bbm_core import SQRT2, BbmConfig, BbmSnapshot, centering_m, max_centered_for_keys, simulate


class RejectionExhausted(RuntimeError):
    def __init__(self, attempts: int, accepted: int = 0):
        self.attempts = attempts
        self.accepted = accepted
        self.acceptance_estimate = accepted / attempts if attempts else math.nan
        super().__init__(
            f"no conditioned sample after {attempts} attempts "
            f"(acceptance estimate {self.acceptance_estimate:.3g}, < {1 / max(attempts, 1):.3g})")


@dataclass(frozen=True)
class Conditioned:
    snapshot: BbmSnapshot
    attempts: int


@dataclass(frozen=True)
class DecorationSample:
    atoms: np.ndarray  # sorted decreasingly, relative to the reference particle
    particle_ids: np.ndarray
    t: float
    r: float | None = None
    attempts: int | None = None

    def __len__(self):
        return len(self.atoms)


def _attempt_keys(key: int, start: int, count: int) -> np.ndarray:
    k = np.full(count, key, dtype=np.uint64)
    return _rng.child_keys(k, np.arange(start, start + count) + (1 << 40))


def _threshold(t):
    return SQRT2 * t


def sample_conditioned(t: float, rng, max_attempts: int = 100_000,
                       config: BbmConfig | None = None, batch: int = 256) -> Conditioned:
    """Rejection sampler for BBM conditioned on ``max x(t) >= sqrt(2) t``.

    Attempt ``a`` uses a stream derived from ``(rng, a)``; the first accepted
    attempt is returned, so the result does not depend on ``batch``.
    """
    cfg = config or BbmConfig(t)
    if cfg.horizon != t or cfg.prune is not None:
        cfg = BbmConfig(t, cfg.offspring, cfg.checkpoints, cfg.cutoff, None, cfg.cap)
    key = _rng.as_key(rng)
    done = 0
    m_t = centering_m(t)
    while done < max_attempts:
        n = min(batch, max_attempts - done)
        keys = _attempt_keys(key, done, n)
        mx = max_centered_for_keys(cfg, keys) + m_t
        hit = np.nonzero(mx >= _threshold(t))[0]
        if hit.size:
            a = int(hit[0])
            return Conditioned(simulate(cfg, int(keys[a])), done + a + 1)
        done += n
    raise RejectionExhausted(done)


def acceptance_rate(t: float, seed: int, attempts: int, config: BbmConfig | None = None,
                    tag: str = "cond") -> tuple[float, float]:
    """Empirical ``P(max x(t) >= sqrt(2) t)`` and its standard error."""
    cfg = config or BbmConfig(t)
    keys = _rng.replica_keys(seed, np.arange(attempts), tag)
    mx = max_centered_for_keys(cfg, keys) + centering_m(t)
    p = float(np.mean(mx >= _threshold(t)))
    return p, math.sqrt(p * (1 - p) / attempts)


def sample_conditioned_many(t: float, seed: int, n_accept: int, config: BbmConfig | None = None,
                            tag: str = "cond", batch: int = 512,
                            max_attempts: int = 10_000_000) -> tuple[list[BbmSnapshot], int]:
    """``n_accept`` conditioned snapshots from consecutive replica streams.

    Returns the snapshots and the number of attempts consumed.
    """
    cfg = config or BbmConfig(t)
    if cfg.horizon != t or cfg.prune is not None:
        raise ValueError("conditioned sampling needs an unpruned config with horizon t")
    m_t = centering_m(t)
    accepted, done = [], 0
    while len(accepted) < n_accept:
        if done >= max_attempts:
            raise RejectionExhausted(done, len(accepted))
        keys = _rng.replica_keys(seed, np.arange(done, done + batch), tag)
        mx = max_centered_for_keys(cfg, keys) + m_t
        for a in np.nonzero(mx >= _threshold(t))[0]:
            if len(accepted) < n_accept:
                accepted.append((done + int(a) + 1, int(keys[a])))
        done += batch
    attempts = accepted[-1][0]
    return [simulate(cfg, k) for _, k in accepted], attempts


def overlaps_with(snapshot: BbmSnapshot, particle_id: int) -> np.ndarray:
    """Most-recent-common-ancestor time of every particle with ``particle_id``."""
    tree = snapshot.tree
    nd = tree.nodes
    path = tree.ancestry(int(snapshot.leaf_nodes[particle_id]))
    on_path = np.zeros(len(nd), dtype=bool)
    on_path[path] = True
    # deepest on-path ancestor of every node; parents precede children
    parent = nd.parent.tolist()
    flags = on_path.tolist()
    meet = [0] * len(nd)
    for i in range(len(nd)):
        meet[i] = i if flags[i] else meet[parent[i]]
    d = nd.t1[np.array(meet, dtype=np.int64)[snapshot.leaf_nodes]]
    d[particle_id] = snapshot.t
    return d


def decoration_atoms(snapshot: BbmSnapshot, r: float | None = None) -> DecorationSample:
    """Positions relative to the maximum; with ``r``, only particles whose
    overlap with the maximum is ``>= t - r``."""
    if snapshot.empty:
        raise ValueError("empty snapshot")
    t = snapshot.t
    if r is not None and not 0 <= r <= t:
        raise ValueError("need 0 <= r <= t")
    x = snapshot.positions
    top = int(np.lexsort((np.arange(len(x)), -x))[0])
    rel = x - x[top]
    ids = np.arange(len(x))
    if r is not None:
        d = overlaps_with(snapshot, top)
        ids = ids[d >= t - r]
    ids = ids[np.lexsort((ids, -rel[ids]))]
    return DecorationSample(rel[ids], ids, t, r)


def recent_relatives(snapshot: BbmSnapshot, particle_id: int, r: float,
                     cutoff: float = -math.inf, representatives=None) -> DecorationSample:
    """``{0}`` plus particles that split from ``particle_id`` after ``t - r``.

    Atoms are positions relative to the particle. ``cutoff`` restricts to
    particles with ``x - m(t) >= cutoff``. If ``representatives`` (particle
    ids) is given, ``particle_id`` must be one of them.
    """
    if representatives is not None and particle_id not in set(int(p) for p in representatives):
        raise ValueError(f"particle {particle_id} is not a cluster representative")
    if not 0 <= particle_id < snapshot.n:
        raise IndexError("particle id out of range")
    t = snapshot.t
    d = overlaps_with(snapshot, particle_id)
    x = snapshot.positions
    keep = (d > t - r) & (x - snapshot.m_t >= cutoff)
    keep[particle_id] = True
    ids = np.nonzero(keep)[0]
    rel = x[ids] - x[particle_id]
    order = np.lexsort((ids, -rel))
    return DecorationSample(rel[order], ids[order], t, r)


def branch_times_along(snapshot: BbmSnapshot, particle_id: int) -> np.ndarray:
    """Branching times on a particle's lineage, most recent first."""
    tree = snapshot.tree
    nd = tree.nodes
    path = tree.ancestry(int(snapshot.leaf_nodes[particle_id]))
    times = [nd.t1[p] for p in path[:-1] if nd.kind[p] == BRANCH]
    return np.array(times[::-1])

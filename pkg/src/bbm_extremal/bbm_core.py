"""Exact event-driven branching Brownian motion over a sampled genealogy."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _grow
from . import rng as _rng
from ._grow import PopulationCapError
from .gw_tree import DEFAULT_CAP, GenealogyTree, OffspringDistribution

SQRT2 = math.sqrt(2.0)


def centering_m(t: float) -> float:
    """``sqrt(2) t - 3/(2 sqrt(2)) log t``."""
    if not t > 0:
        raise ValueError(f"centering needs t > 0, got {t}")
    return SQRT2 * t - 3.0 / (2.0 * SQRT2) * math.log(t)


@dataclass(frozen=True)
class PruneBarrier:
    """Kill particles below ``(s/t) m(t) - f(s) - L`` at event times.

    ``f(s) = min(s, t - s)**alpha`` for ``alpha > 0``; ``alpha = 0`` switches
    the curve off (straight line).
    """

    L: float = 8.0
    alpha: float = 0.0

    def __post_init__(self):
        if not self.L >= 0:
            raise ValueError("barrier offset L must be >= 0")
        if not 0.0 <= self.alpha < 0.5:
            raise ValueError("barrier exponent alpha must lie in [0, 1/2)")

    def level(self, s, t: float):
        s = np.asarray(s, dtype=float)
        line = s / t * centering_m(t)
        if self.alpha > 0:
            line = line - np.minimum(s, t - s).clip(min=0.0) ** self.alpha
        return line - self.L


@dataclass(frozen=True)
class BbmConfig:
    horizon: float
    offspring: OffspringDistribution = field(default_factory=OffspringDistribution.binary)
    checkpoints: tuple[float, ...] = ()
    cutoff: float = -8.0
    prune: PruneBarrier | None = None
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        cps = tuple(float(c) for c in self.checkpoints)
        if list(cps) != sorted(cps):
            raise ValueError("checkpoints must be sorted")
        if any(c < 0 or c > self.horizon for c in cps):
            raise ValueError(f"checkpoints must lie in [0, {self.horizon}]")
        if not math.isfinite(self.cutoff):
            raise ValueError("cutoff must be finite")
        object.__setattr__(self, "checkpoints", cps)

    def barrier(self):
        if self.prune is None:
            return None
        t = self.horizon
        return lambda s: self.prune.level(s, t)


@dataclass(frozen=True, eq=False)
class BbmSnapshot:
    """One BBM realisation at the horizon.

    Particles are indexed ``0 .. n-1`` (particle id); ``positions``,
    ``gammas`` and ``leaf_nodes`` are aligned with that index.
    """

    config: BbmConfig
    key: int
    tree: GenealogyTree
    leaf_nodes: np.ndarray
    positions: np.ndarray
    gammas: np.ndarray
    checkpoint_nodes: np.ndarray  # (n, n_interior_checkpoints)
    n_killed: int = 0

    @property
    def t(self) -> float:
        return self.config.horizon

    @property
    def m_t(self) -> float:
        return centering_m(self.t)

    @property
    def n(self) -> int:
        return len(self.positions)

    @property
    def pruned(self) -> bool:
        return self.config.prune is not None

    @property
    def empty(self) -> bool:
        return self.n == 0

    @property
    def checkpoints(self) -> tuple[float, ...]:
        return self.config.checkpoints

    def _interior(self):
        t = self.t
        return [c for c in sorted(set(self.config.checkpoints)) if 0.0 < c < t]

    def ancestor_nodes(self, r: float) -> np.ndarray:
        """Node alive at checkpoint ``r`` on each particle's lineage.

        For ``r = 0`` the root; for ``r = t`` the particle's own leaf node.
        """
        if r not in self.config.checkpoints:
            raise KeyError(f"{r} is not a declared checkpoint")
        if r == 0.0:
            return np.zeros(self.n, dtype=np.int64)
        if r == self.t:
            return self.leaf_nodes.copy()
        col = self._interior().index(r)
        return self.checkpoint_nodes[:, col].copy()

    def ancestral_positions(self, r: float) -> np.ndarray:
        if r == 0.0 and r in self.config.checkpoints:
            return np.zeros(self.n)
        return self.tree.nodes.x1[self.ancestor_nodes(r)]

    def ancestral_gammas(self, r: float) -> np.ndarray:
        """Embedding value of each particle's time-``r`` ancestor."""
        if r == 0.0 and r in self.config.checkpoints:
            return np.zeros(self.n)
        if r == self.t:
            return self.gammas.copy()
        return self.tree.nodes.gamma[self.ancestor_nodes(r)]

    def population_at(self, r: float) -> np.ndarray:
        """Positions of every particle alive at checkpoint ``r``, including
        lineages that were later pruned."""
        if r not in self.config.checkpoints:
            raise KeyError(f"{r} is not a declared checkpoint")
        if r == 0.0:
            return np.zeros(1)
        if r == self.t:
            return self.positions.copy()
        nd = self.tree.nodes
        sel = (nd.kind == _grow.CHECKPOINT) & (nd.t1 == r)
        return nd.x1[sel]

    def labels(self):
        return [self.tree.node_label(i) for i in self.leaf_nodes]


def _snapshots_from(res: _grow.GrowResult, config: BbmConfig, keys) -> list[BbmSnapshot]:
    nodes = res.nodes
    order = np.argsort(nodes.root, kind="stable")
    bounds = np.searchsorted(nodes.root[order], np.arange(len(keys) + 1))
    leaf_order = np.argsort(res.leaf_root, kind="stable")
    leaf_bounds = np.searchsorted(res.leaf_root[leaf_order], np.arange(len(keys) + 1))
    out = []
    for i, key in enumerate(keys):
        idx = order[bounds[i]:bounds[i + 1]]
        sub, remap = nodes.take(idx)
        li = leaf_order[leaf_bounds[i]:leaf_bounds[i + 1]]
        cp = res.leaf_cp[li]
        cp = np.where(cp >= 0, remap[np.maximum(cp, 0)], -1)
        out.append(BbmSnapshot(
            config=config,
            key=int(key),
            tree=GenealogyTree(sub, config.horizon),
            leaf_nodes=remap[res.leaf_node[li]],
            positions=res.leaf_x[li],
            gammas=res.leaf_gamma[li],
            checkpoint_nodes=cp,
            n_killed=int(res.n_killed[i]),
        ))
    return out


def _grow_config(config: BbmConfig, keys, keep_nodes: bool):
    return _grow.grow(
        keys, config.horizon, config.offspring.ks, config.offspring.ps,
        checkpoints=config.checkpoints, barrier=config.barrier(),
        keep_nodes=keep_nodes, cap=config.cap,
    )


def simulate(config: BbmConfig, rng) -> BbmSnapshot:
    """Simulate one replica; ``rng`` is an integer stream key or a Generator."""
    key = _rng.as_key(rng)
    return _snapshots_from(_grow_config(config, [key], True), config, [key])[0]


def simulate_many(config: BbmConfig, seed: int, replicas, tag: str = "bbm",
                  batch: int = 32) -> list[BbmSnapshot]:
    """Snapshots for replica indices ``replicas`` (an int means ``range``)."""
    idx = np.arange(replicas) if np.isscalar(replicas) else np.asarray(replicas)
    keys = _rng.replica_keys(seed, idx, tag)
    out = []
    for lo in range(0, len(keys), batch):
        kb = keys[lo:lo + batch]
        out.extend(_snapshots_from(_grow_config(config, kb, True), config, kb))
    return out


def iter_snapshots(config: BbmConfig, seed: int, replicas, tag: str = "bbm", batch: int = 32):
    """Lazy variant of :func:`simulate_many`."""
    idx = np.arange(replicas) if np.isscalar(replicas) else np.asarray(replicas)
    keys = _rng.replica_keys(seed, idx, tag)
    for lo in range(0, len(keys), batch):
        kb = keys[lo:lo + batch]
        yield from _snapshots_from(_grow_config(config, kb, True), config, kb)


def simulate_max_centered(config: BbmConfig, seed: int, replicas, tag: str = "bbm",
                          batch: int = 64) -> np.ndarray:
    """``max_centered`` for many replicas without materialising genealogies.

    Bit-identical to ``max_centered(simulate(config, key))`` for the same keys.
    Extinct (fully pruned) replicas give ``-inf``.
    """
    idx = np.arange(replicas) if np.isscalar(replicas) else np.asarray(replicas)
    keys = _rng.replica_keys(seed, idx, tag)
    return max_centered_for_keys(config, keys, batch)


def max_centered_for_keys(config: BbmConfig, keys, batch: int = 64) -> np.ndarray:
    keys = np.asarray(keys, dtype=np.uint64)
    out = np.empty(len(keys))
    for lo in range(0, len(keys), batch):
        res = _grow_config(config, keys[lo:lo + batch], False)
        out[lo:lo + batch] = res.max_x - centering_m(config.horizon)
    return out


def population_sizes(config: BbmConfig, seed: int, replicas, tag: str = "bbm",
                     batch: int = 256) -> np.ndarray:
    idx = np.arange(replicas) if np.isscalar(replicas) else np.asarray(replicas)
    keys = _rng.replica_keys(seed, idx, tag)
    out = np.empty(len(keys), dtype=np.int64)
    for lo in range(0, len(keys), batch):
        out[lo:lo + batch] = _grow_config(config, keys[lo:lo + batch], False).n_leaves
    return out


def max_centered(snapshot: BbmSnapshot) -> float:
    if snapshot.empty:
        raise ValueError("max_centered of an empty snapshot")
    return float(snapshot.positions.max() - snapshot.m_t)


__all__ = [
    "BbmConfig", "BbmSnapshot", "PopulationCapError", "PruneBarrier", "SQRT2",
    "centering_m", "iter_snapshots", "max_centered", "max_centered_for_keys",
    "population_sizes", "simulate", "simulate_many", "simulate_max_centered",
]

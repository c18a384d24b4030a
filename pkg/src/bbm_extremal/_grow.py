"""Vectorised breadth-first growth of branching Brownian trees.

Nodes are lineage segments ``[t0, t1]``. A segment ends in one of three ways:

``BRANCH``      the particle branches at ``t1`` into ``offspring`` children
``CHECKPOINT``  ``t1`` is a declared checkpoint; a single continuation child
                starts there (exact Brownian position at the checkpoint)
``LEAF``        ``t1`` is the horizon

Lifetimes are Exp(1) per segment; by memorylessness a continuation through a
checkpoint draws a fresh lifetime. Several replicas (roots) grow in the same
arrays and never interact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as _rng

BRANCH = 0
CHECKPOINT = 1
LEAF = 2


class PopulationCapError(RuntimeError):
    """Raised when a replica's population exceeds the configured cap."""


@dataclass
class NodeTable:
    parent: np.ndarray
    rank: np.ndarray
    kind: np.ndarray
    killed: np.ndarray
    t0: np.ndarray
    t1: np.ndarray
    x1: np.ndarray
    gamma: np.ndarray  # embedding value accumulated over events <= t0
    offspring: np.ndarray
    root: np.ndarray
    key: np.ndarray

    def __len__(self):
        return len(self.parent)

    @property
    def x0(self):
        out = np.zeros(len(self.parent))
        has = self.parent >= 0
        out[has] = self.x1[self.parent[has]]
        return out

    def take(self, idx):
        """Sub-table for a root, with parent pointers re-based to ``idx``."""
        remap = np.full(len(self.parent), -1, dtype=np.int64)
        remap[idx] = np.arange(len(idx))
        par = self.parent[idx]
        par = np.where(par >= 0, remap[np.maximum(par, 0)], -1)
        return NodeTable(
            par, self.rank[idx], self.kind[idx], self.killed[idx], self.t0[idx],
            self.t1[idx], self.x1[idx], self.gamma[idx], self.offspring[idx],
            np.zeros(len(idx), dtype=np.int64), self.key[idx],
        ), remap


@dataclass
class GrowResult:
    nodes: NodeTable | None
    # per leaf, aligned arrays (leaf order = node creation order)
    leaf_node: np.ndarray | None
    leaf_root: np.ndarray
    leaf_x: np.ndarray
    leaf_gamma: np.ndarray
    leaf_cp: np.ndarray | None  # (n_leaves, n_checkpoints) node ids
    max_x: np.ndarray  # per root, -inf when extinct
    n_leaves: np.ndarray  # per root
    n_killed: np.ndarray  # per root


def _offspring_sampler(ks, ps):
    cdf = np.cumsum(ps)
    cdf[-1] = 1.0
    ks = np.asarray(ks, dtype=np.int64)

    def draw(u):
        return ks[np.searchsorted(cdf, u, side="right")]

    return draw


def grow(
    root_keys,
    horizon: float,
    ks,
    ps,
    checkpoints=(),
    barrier=None,
    keep_nodes: bool = True,
    cap: int = 50_000_000,
) -> GrowResult:
    """Grow one tree per root key up to ``horizon``.

    ``barrier`` is ``None`` or a callable ``s -> level``; a segment whose end
    position at a branching or checkpoint time lies strictly below the level
    is killed and has no descendants.
    """
    root_keys = np.atleast_1d(np.asarray(root_keys, dtype=np.uint64))
    n_roots = len(root_keys)
    cps = np.array(sorted(c for c in set(checkpoints) if 0.0 < c < horizon), dtype=float)
    stops = np.append(cps, horizon)
    n_cp = len(cps)
    draw_k = _offspring_sampler(ks, ps)

    # active segments
    a_key = root_keys.copy()
    a_root = np.arange(n_roots, dtype=np.int64)
    a_t0 = np.zeros(n_roots)
    a_x0 = np.zeros(n_roots)
    a_g0 = np.zeros(n_roots)
    a_rank = np.zeros(n_roots, dtype=np.int64)
    a_parent = np.full(n_roots, -1, dtype=np.int64)
    a_cp = np.full((n_roots, n_cp), -1, dtype=np.int64)

    chunks = {f: [] for f in ("parent", "rank", "kind", "killed", "t0", "t1", "x1",
                              "gamma", "offspring", "root", "key")}
    leaf_parts = {f: [] for f in ("node", "root", "x", "gamma", "cp")}
    max_x = np.full(n_roots, -np.inf)
    n_leaves = np.zeros(n_roots, dtype=np.int64)
    n_killed = np.zeros(n_roots, dtype=np.int64)
    alive = np.ones(n_roots, dtype=np.int64)
    n_nodes = 0

    while len(a_key):
        life = _rng.exponentials(a_key, _rng.SLOT_LIFE)
        stop = stops[np.searchsorted(cps, a_t0, side="right")]
        t_nat = a_t0 + life
        ends_at_stop = t_nat >= stop
        t1 = np.where(ends_at_stop, stop, t_nat)
        x1 = a_x0 + np.sqrt(t1 - a_t0) * _rng.normals(a_key, _rng.SLOT_NORMAL)
        kind = np.where(ends_at_stop, np.where(stop >= horizon, LEAF, CHECKPOINT), BRANCH)
        if barrier is not None:
            killed = (kind != LEAF) & (x1 < barrier(t1))
        else:
            killed = np.zeros(len(a_key), dtype=bool)
        is_branch = kind == BRANCH
        offspring = np.zeros(len(a_key), dtype=np.int64)
        offspring[is_branch] = draw_k(_rng.uniforms(a_key[is_branch], _rng.SLOT_OFFSPRING))
        offspring[kind == CHECKPOINT] = 1
        offspring[killed] = np.where(is_branch[killed], offspring[killed], 0)

        ids = np.arange(n_nodes, n_nodes + len(a_key), dtype=np.int64)
        n_nodes += len(a_key)
        if keep_nodes:
            chunks["parent"].append(a_parent)
            chunks["rank"].append(a_rank)
            chunks["kind"].append(kind.astype(np.int8))
            chunks["killed"].append(killed)
            chunks["t0"].append(a_t0)
            chunks["t1"].append(t1)
            chunks["x1"].append(x1)
            chunks["gamma"].append(a_g0)
            chunks["offspring"].append(offspring)
            chunks["root"].append(a_root)
            chunks["key"].append(a_key)

        leaf = kind == LEAF
        if leaf.any():
            lr = a_root[leaf]
            np.maximum.at(max_x, lr, x1[leaf])
            n_leaves += np.bincount(lr, minlength=n_roots)
            leaf_parts["root"].append(lr)
            leaf_parts["x"].append(x1[leaf])
            leaf_parts["gamma"].append(a_g0[leaf])
            if keep_nodes:
                leaf_parts["node"].append(ids[leaf])
                leaf_parts["cp"].append(a_cp[leaf])
        if killed.any():
            kr = a_root[killed]
            n_killed += np.bincount(kr, minlength=n_roots)
            alive -= np.bincount(kr, minlength=n_roots)

        grows = ~leaf & ~killed
        counts = np.where(grows, offspring, 0)
        alive += np.bincount(a_root, weights=np.where(grows, offspring - 1, 0),
                             minlength=n_roots).astype(np.int64)
        if alive.max(initial=0) > cap:
            raise PopulationCapError(
                f"population exceeded cap {cap} (replica {int(alive.argmax())})")

        src = np.repeat(np.arange(len(a_key)), counts)
        if len(src) == 0:
            break
        # rank of each child within its family
        starts = np.cumsum(counts) - counts
        child_rank = np.arange(len(src)) - np.repeat(starts, counts)
        from_cp = kind[src] == CHECKPOINT
        key_rank = np.where(from_cp, _rng.CHECKPOINT_RANK, child_rank)
        new_key = _rng.child_keys(a_key[src], key_rank)
        new_t0 = t1[src]
        # only branching children shift the embedding
        new_g0 = a_g0[src] + np.where(from_cp, 0.0, child_rank * np.exp(-new_t0))
        new_cp = a_cp[src]
        if n_cp and from_cp.any():
            col = np.searchsorted(cps, new_t0[from_cp])
            rows = np.nonzero(from_cp)[0]
            new_cp[rows, col] = ids[src[from_cp]]
        a_key = new_key
        a_root = a_root[src]
        a_t0 = new_t0
        a_x0 = x1[src]
        a_g0 = new_g0
        a_rank = np.where(from_cp, 0, child_rank)
        a_parent = ids[src]
        a_cp = new_cp

    def cat(parts, dtype, shape=None):
        if parts:
            return np.concatenate(parts)
        return np.zeros(shape if shape is not None else 0, dtype=dtype)

    nodes = None
    if keep_nodes:
        nodes = NodeTable(
            cat(chunks["parent"], np.int64), cat(chunks["rank"], np.int64),
            cat(chunks["kind"], np.int8), cat(chunks["killed"], bool),
            cat(chunks["t0"], float), cat(chunks["t1"], float), cat(chunks["x1"], float),
            cat(chunks["gamma"], float), cat(chunks["offspring"], np.int64),
            cat(chunks["root"], np.int64), cat(chunks["key"], np.uint64),
        )
    return GrowResult(
        nodes=nodes,
        leaf_node=cat(leaf_parts["node"], np.int64) if keep_nodes else None,
        leaf_root=cat(leaf_parts["root"], np.int64),
        leaf_x=cat(leaf_parts["x"], float),
        leaf_gamma=cat(leaf_parts["gamma"], float),
        leaf_cp=cat(leaf_parts["cp"], np.int64, (0, n_cp)) if keep_nodes else None,
        max_x=max_x,
        n_leaves=n_leaves,
        n_killed=n_killed,
    )

"""
Continuous-time Galton-Watson trees with global-event multi-index labels.

Branching events of a tree are numbered ``1, 2, ...`` in increasing time.
A particle's label is a sparse map ``event index -> child index``: when a
particle branches at event ``j`` into ``l`` children, child ``k`` extends its
parent's label by ``{j: k}``. Every other particle implicitly receives a zero
entry at ``j``, so absent entries mean zero.

The embedding ``gamma(u) = sum_j u_j exp(-t_j)`` sends labels into the
half-line, and ``overlap_time`` returns the time of the most recent common
ancestor of two labels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from . import _grow
from . import rng as _rng

MAX_OFFSPRING = 64
DEFAULT_CAP = 50_000_000


class OffspringDistribution:
    """Offspring law ``p_k``, ``k >= 1``, normalised to mean 2.

    >>> OffspringDistribution({2: 1.0}).K
    2.0
    """

    def __init__(self, probabilities: Mapping[int, float] | Iterable[tuple[int, float]]):
        items = dict(probabilities.items() if isinstance(probabilities, Mapping) else probabilities)
        items = {int(k): float(p) for k, p in items.items() if p != 0.0}
        if not items:
            raise ValueError("offspring distribution is empty")
        for k, p in items.items():
            if k < 1:
                raise ValueError(f"offspring count {k} not allowed (k >= 1, no death)")
            if k > MAX_OFFSPRING:
                raise ValueError(f"offspring count {k} exceeds supported maximum {MAX_OFFSPRING}")
            if not (0.0 < p <= 1.0):
                raise ValueError(f"p_{k} = {p} is not a probability")
        ks = np.array(sorted(items), dtype=np.int64)
        ps = np.array([items[k] for k in ks])
        total = ps.sum()
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        mean = float(ks @ ps)
        if abs(mean - 2.0) > 1e-12:
            raise ValueError(f"offspring mean is {mean!r}; the law must have mean 2")
        if items.get(1, 0.0) >= 1.0:
            raise ValueError("p_1 must be < 1")
        self.ks = ks
        self.ps = ps

    @classmethod
    def binary(cls):
        return cls({2: 1.0})

    @classmethod
    def from_vector(cls, p):
        """Build from ``[p_1, p_2, ...]`` (index 0 holds ``p_1``)."""
        return cls({k + 1: v for k, v in enumerate(p)})

    def __repr__(self):
        body = ", ".join(f"{k}: {p:g}" for k, p in zip(self.ks, self.ps))
        return f"OffspringDistribution({{{body}}})"

    def __eq__(self, other):
        return (isinstance(other, OffspringDistribution)
                and np.array_equal(self.ks, other.ks) and np.array_equal(self.ps, other.ps))

    def __hash__(self):
        return hash((tuple(self.ks), tuple(self.ps)))

    @property
    def probabilities(self) -> dict[int, float]:
        return {int(k): float(p) for k, p in zip(self.ks, self.ps)}

    @property
    def mean(self) -> float:
        return float(self.ks @ self.ps)

    @property
    def K(self) -> float:
        """Second factorial moment ``sum k (k-1) p_k``."""
        return float((self.ks * (self.ks - 1)) @ self.ps)

    @property
    def p1(self) -> float:
        return self.probabilities.get(1, 0.0)

    def size_biased(self) -> tuple[np.ndarray, np.ndarray]:
        """Support and probabilities of the size-biased law ``k p_k / 2``."""
        return self.ks.copy(), self.ks * self.ps / 2.0


@dataclass(frozen=True)
class MultiIndex:
    """Finitely supported label; ``entries`` holds nonzero ``(event, child)`` pairs."""

    entries: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        clean = tuple(sorted((int(j), int(c)) for j, c in self.entries if c != 0))
        for j, c in clean:
            if j < 1 or c < 0:
                raise ValueError(f"invalid label entry ({j}, {c})")
        if len({j for j, _ in clean}) != len(clean):
            raise ValueError("duplicate event index in label")
        object.__setattr__(self, "entries", clean)

    @classmethod
    def root(cls):
        return cls(())

    @classmethod
    def from_dict(cls, d: Mapping[int, int]):
        return cls(tuple(d.items()))

    def __getitem__(self, j: int) -> int:
        for e, c in self.entries:
            if e == j:
                return c
        return 0

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(j for j, _ in self.entries)

    def as_dict(self) -> dict[int, int]:
        return dict(self.entries)

    def dense(self, length: int) -> list[int]:
        out = [0] * length
        for j, c in self.entries:
            out[j - 1] = c
        return out


@dataclass(frozen=True, eq=False)
class GenealogyTree:
    """Immutable tree over ``[0, horizon]`` backed by a segment table."""

    nodes: _grow.NodeTable
    horizon: float
    # derived, filled in __post_init__
    branching_times: np.ndarray = field(init=False, repr=False)
    event_nodes: np.ndarray = field(init=False, repr=False)
    event_offspring: np.ndarray = field(init=False, repr=False)
    event_index: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        nd = self.nodes
        br = np.nonzero((nd.kind == _grow.BRANCH) & ~nd.killed)[0]
        order = np.argsort(nd.t1[br], kind="stable")
        br = br[order]
        event_index = np.zeros(len(nd), dtype=np.int64)
        event_index[br] = np.arange(1, len(br) + 1)
        object.__setattr__(self, "branching_times", nd.t1[br].copy())
        object.__setattr__(self, "event_nodes", br)
        object.__setattr__(self, "event_offspring", nd.offspring[br].copy())
        object.__setattr__(self, "event_index", event_index)

    @property
    def n_events(self) -> int:
        return len(self.branching_times)

    def W(self, s: float) -> int:
        """Number of branching events in ``[0, s]``."""
        return int(np.searchsorted(self.branching_times, s, side="right"))

    def n(self, s: float) -> int:
        """Population size at time ``s`` (unpruned trees)."""
        w = self.W(s)
        return 1 + int((self.event_offspring[:w] - 1).sum())

    def alive_nodes(self, s: float) -> np.ndarray:
        """Segments carrying a living particle at time ``s``."""
        _check_time(s, self.horizon)
        nd = self.nodes
        inside = (nd.t0 <= s) & (s < nd.t1)
        at_end = (nd.kind == _grow.LEAF) & (s >= self.horizon)
        idx = np.nonzero((inside & ~(nd.killed & (nd.t1 <= s))) | at_end)[0]
        return idx

    def node_label(self, node: int) -> MultiIndex:
        nd = self.nodes
        entries = []
        cur = int(node)
        while nd.parent[cur] >= 0:
            par = int(nd.parent[cur])
            if nd.kind[par] == _grow.BRANCH and nd.rank[cur] != 0:
                entries.append((int(self.event_index[par]), int(nd.rank[cur])))
            cur = par
        return MultiIndex(tuple(entries))

    def ancestry(self, node: int) -> list[int]:
        """Node ids from the root down to ``node``."""
        path = []
        cur = int(node)
        while cur >= 0:
            path.append(cur)
            cur = int(self.nodes.parent[cur])
        return path[::-1]

    def _check_label(self, u: MultiIndex):
        if u.entries and u.entries[-1][0] > self.n_events:
            raise ValueError(
                f"label refers to event {u.entries[-1][0]} but the tree has {self.n_events} events")


def _check_time(s, horizon):
    if not (0.0 <= s <= horizon):
        raise ValueError(f"time {s} outside [0, {horizon}]")


def sample_tree(dist: OffspringDistribution, horizon: float, rng, cap: int = DEFAULT_CAP) -> GenealogyTree:
    """Sample a Galton-Watson tree on ``[0, horizon]``.

    Each particle branches at rate 1 independently. ``rng`` is an integer
    stream key or a ``numpy.random.Generator``.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    key = _rng.as_key(rng)
    res = _grow.grow([key], horizon, dist.ks, dist.ps, keep_nodes=True, cap=cap)
    return GenealogyTree(res.nodes, float(horizon))


def labels_at(tree: GenealogyTree, s: float) -> list[MultiIndex]:
    """The label set at time ``s``, one entry per living particle."""
    return [tree.node_label(i) for i in tree.alive_nodes(s)]


def ancestor_label(u: MultiIndex, tree: GenealogyTree, r: float) -> MultiIndex:
    """Truncate ``u`` to time ``r``: entries at events after ``r`` become zero."""
    tree._check_label(u)
    w = tree.W(r)
    return MultiIndex(tuple((j, c) for j, c in u.entries if j <= w))


def embed_gamma(u: MultiIndex, tree: GenealogyTree, s: float | None = None) -> float:
    """``sum_j u_j exp(-t_j)`` over events up to ``s``, largest terms first."""
    tree._check_label(u)
    w = tree.n_events if s is None else tree.W(s)
    total = 0.0
    for j, c in u.entries:
        if j <= w:
            total += c * math.exp(-tree.branching_times[j - 1])
    return total


def overlap_time(u: MultiIndex, v: MultiIndex, tree: GenealogyTree, s: float | None = None) -> float:
    """Time of the most recent common ancestor of ``u`` and ``v``.

    Returns ``s`` (default: the horizon) for identical labels.
    """
    tree._check_label(u)
    tree._check_label(v)
    s = tree.horizon if s is None else s
    du, dv = u.as_dict(), v.as_dict()
    first = min((j for j in du.keys() | dv.keys() if du.get(j, 0) != dv.get(j, 0)), default=None)
    if first is None:
        return float(s)
    return float(tree.branching_times[first - 1])


def dyadic_embed(sigma) -> float:
    """Map a binary word ``sigma_1 ... sigma_n`` to ``sum sigma_l 2^(-l-1)``."""
    return sum(int(b) * 2.0 ** (-l - 1) for l, b in enumerate(sigma, start=1))


def dyadic_tree(n: int) -> GenealogyTree:
    """Deterministic binary tree branching at times ``1, ..., n`` (test fixture).

    Leaves sit at horizon ``n + 1/2``. Useful to compare ``embed_gamma``
    against ``dyadic_embed`` on identical shapes.
    """
    parents, ranks, kinds, t0, t1 = [-1], [0], [], [0.0], []
    frontier = [0]
    for level in range(1, n + 1):
        new = []
        for node in frontier:
            kinds.append(_grow.BRANCH)
            t1.append(float(level))
            for c in (0, 1):
                parents.append(node)
                ranks.append(c)
                t0.append(float(level))
                new.append(len(parents) - 1)
        frontier = new
    kinds.extend([_grow.LEAF] * len(frontier))
    t1.extend([n + 0.5] * len(frontier))
    m = len(parents)
    offspring = np.array([2 if k == _grow.BRANCH else 0 for k in kinds], dtype=np.int64)
    gamma = np.zeros(m)
    for i in range(1, m):
        gamma[i] = gamma[parents[i]] + ranks[i] * math.exp(-t0[i])
    nodes = _grow.NodeTable(
        np.array(parents, dtype=np.int64), np.array(ranks, dtype=np.int64),
        np.array(kinds, dtype=np.int8), np.zeros(m, dtype=bool), np.array(t0), np.array(t1),
        np.zeros(m), gamma, offspring, np.zeros(m, dtype=np.int64), np.zeros(m, dtype=np.uint64),
    )
    return GenealogyTree(nodes, n + 0.5)

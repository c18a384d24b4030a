"""The extended extremal process ``(gamma, x - m(t))``, overlaps and q-thinning."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .bbm_core import SQRT2, BbmConfig, BbmSnapshot, centering_m, max_centered_for_keys, simulate


@dataclass(frozen=True)
class ExtendedAtom:
    gamma: float
    value: float
    particle_id: int


@dataclass(frozen=True, eq=False)
class ExtendedPointSample:
    """Atoms sorted by decreasing value (ties broken by particle id).

    ``overlap_times[i, j]`` is the time of the most recent common ancestor of
    atoms ``i`` and ``j``; ``overlap`` is the same matrix divided by ``t``.
    """

    atoms: tuple[ExtendedAtom, ...]
    t: float
    overlap_times: np.ndarray
    cutoff: float = -math.inf

    def __len__(self):
        return len(self.atoms)

    @property
    def overlap(self) -> np.ndarray:
        return self.overlap_times / self.t

    @property
    def values(self) -> np.ndarray:
        return np.array([a.value for a in self.atoms])

    @property
    def gammas(self) -> np.ndarray:
        return np.array([a.gamma for a in self.atoms])

    @property
    def particle_ids(self) -> np.ndarray:
        return np.array([a.particle_id for a in self.atoms], dtype=np.int64)


@dataclass(frozen=True, eq=False)
class ClusterDecomposition:
    q: float
    representatives: tuple[int, ...]
    assignment: np.ndarray  # atom index -> representative atom index
    relative_offsets: dict

    @property
    def n_clusters(self) -> int:
        return len(self.representatives)

    def clusters(self) -> list[list[int]]:
        return [np.nonzero(self.assignment == r)[0].tolist() for r in self.representatives]


def overlap_times(snapshot: BbmSnapshot, particle_ids) -> np.ndarray:
    """Pairwise most-recent-common-ancestor times for the given particles."""
    ids = np.asarray(particle_ids, dtype=np.int64)
    n = len(ids)
    t = snapshot.t
    out = np.full((n, n), t)
    if n < 2:
        return out
    tree = snapshot.tree
    paths = [tree.ancestry(int(snapshot.leaf_nodes[i])) for i in ids]
    depth = max(len(p) for p in paths)
    mat = np.full((n, depth), -1, dtype=np.int64)
    for i, p in enumerate(paths):
        mat[i, :len(p)] = p
    t1 = tree.nodes.t1
    for i in range(n - 1):
        eq = mat[i + 1:] == mat[i]
        common = np.cumprod(eq, axis=1).sum(axis=1)
        mrca = mat[i, common - 1]
        d = t1[mrca]
        out[i, i + 1:] = d
        out[i + 1:, i] = d
    return out


def extract(snapshot: BbmSnapshot, cutoff: float | None = None,
            gamma_checkpoint: float | None = None) -> ExtendedPointSample:
    """Particles with ``x(t) - m(t) >= cutoff`` as extended atoms.

    ``gamma`` is the embedding at the horizon, or at ``gamma_checkpoint``
    when given (the particle's time-``r`` ancestor).
    """
    if snapshot.empty:
        raise ValueError("cannot extract from an empty snapshot")
    cutoff = snapshot.config.cutoff if cutoff is None else cutoff
    if gamma_checkpoint is None:
        gam = snapshot.gammas
    else:
        if gamma_checkpoint not in snapshot.checkpoints:
            raise KeyError(f"unknown checkpoint {gamma_checkpoint}")
        gam = snapshot.ancestral_gammas(gamma_checkpoint)
    vals = snapshot.positions - snapshot.m_t
    ids = np.nonzero(vals >= cutoff)[0]
    ids = ids[np.lexsort((ids, -vals[ids]))]
    atoms = tuple(ExtendedAtom(float(gam[i]), float(vals[i]), int(i)) for i in ids)
    return ExtendedPointSample(atoms, snapshot.t, overlap_times(snapshot, ids), cutoff)


def _check_q(q):
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q}")


def greedy_representatives(qbar: np.ndarray, q: float) -> list[int]:
    """Recursive selection of cluster maxima on value-sorted atoms.

    The next representative is the first atom after the previous one whose
    normalised overlap with every representative chosen so far is ``< q``.
    """
    n = qbar.shape[0]
    if n == 0:
        return []
    reps = [0]
    j = 1
    while True:
        while j < n and not all(qbar[i, j] < q for i in reps):
            j += 1
        if j >= n:
            return reps
        reps.append(j)
        j += 1


def q_thin(sample: ExtendedPointSample, q: float) -> ClusterDecomposition:
    """Partition atoms into classes of ``overlap >= q``; keep each class maximum."""
    _check_q(q)
    qbar = sample.overlap
    reps = greedy_representatives(qbar, q)
    n = len(sample)
    assignment = np.full(n, -1, dtype=np.int64)
    if n:
        rep_arr = np.array(reps)
        # each atom meets exactly one representative at overlap >= q
        hit = qbar[np.ix_(np.arange(n), rep_arr)] >= q
        assignment = rep_arr[np.argmax(hit, axis=1)]
    values = sample.values
    offsets = {int(r): values[assignment == r] - values[r] for r in reps}
    return ClusterDecomposition(q, tuple(int(r) for r in reps), assignment, offsets)


def closure_partition(qbar: np.ndarray, q: float) -> list[list[int]]:
    """Brute-force classes: transitive closure of ``qbar >= q`` (cubic)."""
    n = qbar.shape[0]
    reach = np.asarray(qbar) >= q
    np.fill_diagonal(reach, True)
    for k in range(n):
        reach = reach | (reach[:, [k]] & reach[[k], :])
    seen = np.zeros(n, dtype=bool)
    classes = []
    for i in range(n):
        if not seen[i]:
            members = np.nonzero(reach[i])[0].tolist()
            seen[members] = True
            classes.append(members)
    return classes


def representation_shift(r_d: float, t: float) -> float:
    """``m(t) - m(t - r_d) - sqrt(2) r_d``."""
    return centering_m(t) - centering_m(t - r_d) - SQRT2 * r_d


def thinned_representation_sample(r_d: float, t: float, config: BbmConfig | None, rng) -> np.ndarray:
    """Atoms ``x_j(r_d) - sqrt(2) r_d + M_j(t - r_d) - R_t``, sorted decreasingly.

    One BBM runs to ``r_d``; every particle alive then starts an independent
    BBM of length ``t - r_d`` whose centred maximum is ``M_j``. ``config``
    supplies the offspring law and population cap (horizon is ignored).
    """
    if not 0 < r_d < t:
        raise ValueError("need 0 < r_d < t")
    base = config or BbmConfig(t)
    key = _rng.as_key(rng)
    head = simulate(BbmConfig(r_d, base.offspring, cap=base.cap), key)
    sub_keys = _rng.child_keys(np.full(head.n, key, dtype=np.uint64),
                               np.arange(head.n) + (1 << 30))
    tail_cfg = BbmConfig(t - r_d, base.offspring, cap=base.cap)
    m_j = max_centered_for_keys(tail_cfg, sub_keys)
    atoms = head.positions - SQRT2 * r_d + m_j - representation_shift(r_d, t)
    return np.sort(atoms)[::-1]

"""Derivative and McKean martingales and the truncated measure ``v -> Z(v, r, t)``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bbm_core import SQRT2, BbmSnapshot


class PrunedSnapshotError(ValueError):
    """Martingale sums need the full population; pruning biases them."""


def _terms(x, t):
    w = np.exp(SQRT2 * (x - SQRT2 * t))
    return (SQRT2 * t - x) * w, w


def _sum(a) -> float:
    # correctly rounded, hence independent of summation order and of zero padding
    return math.fsum(np.asarray(a, dtype=float).tolist())


def _require_full(snapshot: BbmSnapshot, allow_pruned: bool):
    if snapshot.pruned and not allow_pruned:
        raise PrunedSnapshotError("martingale of a pruned snapshot (pass allow_pruned=True)")


def derivative_martingale(snapshot: BbmSnapshot, allow_pruned: bool = False) -> float:
    """``sum_j (sqrt2 t - x_j) exp(sqrt2 (x_j - sqrt2 t))``."""
    _require_full(snapshot, allow_pruned)
    z, _ = _terms(snapshot.positions, snapshot.t)
    return _sum(z)


def mckean_martingale(snapshot: BbmSnapshot, allow_pruned: bool = False) -> float:
    """``sum_j exp(sqrt2 (x_j - sqrt2 t))``."""
    _require_full(snapshot, allow_pruned)
    _, y = _terms(snapshot.positions, snapshot.t)
    return _sum(y)


def derivative_martingale_at(positions, t: float) -> float:
    return _sum(_terms(np.asarray(positions, dtype=float), t)[0])


def mckean_martingale_at(positions, t: float) -> float:
    return _sum(_terms(np.asarray(positions, dtype=float), t)[1])


def truncated_Z(snapshot: BbmSnapshot, v: float, r: float, allow_pruned: bool = False) -> float:
    """Derivative martingale restricted to particles whose time-``r`` ancestor
    has embedding ``<= v``."""
    _require_full(snapshot, allow_pruned)
    if r not in snapshot.checkpoints:
        raise KeyError(f"{r} is not a declared checkpoint")
    g = snapshot.ancestral_gammas(r)
    z, _ = _terms(snapshot.positions, snapshot.t)
    return _sum(np.where(g <= v, z, 0.0))


def sellke_decomposition_check(snapshot: BbmSnapshot, v: float, r: float,
                               allow_pruned: bool = False) -> tuple[float, float]:
    """Both sides of the branching decomposition of ``Z(v, r, t)`` at time ``r``.

    The right side groups particles by their time-``r`` ancestor ``i`` and
    evaluates ``Y`` and ``Z`` of each subtree in its own frame (positions
    minus ``x_i(r)``, elapsed time ``t - r``).
    """
    lhs = truncated_Z(snapshot, v, r, allow_pruned)
    t = snapshot.t
    anc = snapshot.ancestor_nodes(r)
    xr = snapshot.ancestral_positions(r)
    gr = snapshot.ancestral_gammas(r)
    rhs = 0.0
    for node in np.unique(anc):
        members = np.nonzero(anc == node)[0]
        x_i = xr[members[0]]
        if gr[members[0]] > v:
            continue
        local = snapshot.positions[members] - x_i
        y_sub = mckean_martingale_at(local, t - r)
        z_sub = derivative_martingale_at(local, t - r)
        weight = math.exp(SQRT2 * (x_i - SQRT2 * r))
        rhs += weight * ((SQRT2 * r - x_i) * y_sub + z_sub)
    return lhs, rhs


@dataclass
class MartingaleTrace:
    t: float
    r: float
    Z_t: float
    Y_t: float
    v_grid: np.ndarray
    Z_v: np.ndarray
    jumps_at: np.ndarray = field(default_factory=lambda: np.zeros(0))
    jumps: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def max_jump_ratio(self) -> float:
        """Largest single jump magnitude over total variation of the step function."""
        tv = np.abs(self.jumps).sum()
        return float(np.abs(self.jumps).max() / tv) if tv > 0 else math.nan


def trace(snapshot: BbmSnapshot, v_grid, r: float, allow_pruned: bool = False) -> MartingaleTrace:
    """``Z(v, r, t)`` on a grid plus the exact jump structure of the step function."""
    _require_full(snapshot, allow_pruned)
    g = snapshot.ancestral_gammas(r)
    z, w = _terms(snapshot.positions, snapshot.t)
    atoms, inv = np.unique(g, return_inverse=True)
    jumps = np.bincount(inv, weights=z, minlength=len(atoms))
    v_grid = np.asarray(v_grid, dtype=float)
    # same arithmetic as truncated_Z, so grid values match it exactly
    zv = np.array([_sum(np.where(g <= v, z, 0.0)) for v in v_grid])
    return MartingaleTrace(snapshot.t, r, _sum(z), _sum(w), v_grid, zv, atoms, jumps)


@dataclass
class ZMeasureEstimate:
    t: float
    r: float
    v_grid: np.ndarray
    per_replica: np.ndarray  # (replicas, len(v_grid))
    Z_t: np.ndarray
    quantiles: dict
    max_jump_ratio: np.ndarray
    negative_part: np.ndarray


def empirical_Z_measure(snapshots, v_grid, r: float, allow_pruned: bool = False) -> ZMeasureEstimate:
    """Per-replica step functions ``v -> Z(v, r, t)`` with summary diagnostics.

    ``negative_part`` sums the terms of particles ahead of ``sqrt2 t``.
    """
    snapshots = list(snapshots)
    if not snapshots:
        raise ValueError("no snapshots")
    t = snapshots[0].t
    for s in snapshots:
        if s.t != t or r not in s.checkpoints:
            raise ValueError("snapshots must share horizon and checkpoint r")
    v_grid = np.asarray(v_grid, dtype=float)
    rows, zt, ratio, neg = [], [], [], []
    for s in snapshots:
        tr = trace(s, v_grid, r, allow_pruned)
        rows.append(tr.Z_v)
        zt.append(tr.Z_t)
        ratio.append(tr.max_jump_ratio)
        z, _ = _terms(s.positions, t)
        neg.append(float(np.abs(z[z < 0]).sum()))
    per = np.array(rows)
    qs = {p: np.quantile(per, p, axis=0) for p in (0.1, 0.25, 0.5, 0.75, 0.9)}
    return ZMeasureEstimate(t, r, v_grid, per, np.array(zt), qs, np.array(ratio), np.array(neg))

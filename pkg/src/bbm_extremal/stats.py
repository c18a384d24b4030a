"""Estimators and fixed-threshold diagnostics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np


class InsufficientDataError(ValueError):
    pass


@dataclass
class DiagnosticReport:
    """Outcome of one acceptance check.

    ``passed`` is decided by comparing ``statistic`` with ``threshold``
    through the rule named in ``comparison``.
    """

    name: str
    statistic: Any
    threshold: Any
    passed: bool
    comparison: str = ""
    replicas: int = 0
    seed: int | None = None
    inputs: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)
    runtime_s: float | None = None

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.name}: {_fmt(self.statistic)} {self.comparison} {_fmt(self.threshold)}"

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    if isinstance(v, dict):
        return "{" + ", ".join(f"{k}: {_fmt(x)}" for k, x in v.items()) + "}"
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def ks_distance(sample_a, sample_b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic ``sup |F_a - F_b|``.

    ``-inf`` entries are allowed (they sit below every finite value).
    """
    a = np.sort(np.asarray(sample_a, dtype=float))
    b = np.sort(np.asarray(sample_b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise InsufficientDataError("ks_distance needs two non-empty samples")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def ks_one_sample(sample, cdf) -> float:
    """Kolmogorov-Smirnov distance between an empirical law and ``cdf``."""
    x = np.sort(np.asarray(sample, dtype=float))
    if x.size == 0:
        raise InsufficientDataError("empty sample")
    f = np.asarray(cdf(x), dtype=float)
    n = x.size
    hi = np.arange(1, n + 1) / n - f
    lo = f - np.arange(n) / n
    return float(max(hi.max(), lo.max()))


def survivor_counts(values, grid) -> np.ndarray:
    v = np.sort(np.asarray(values, dtype=float))
    return v.size - np.searchsorted(v, np.asarray(grid, dtype=float), side="left")


@dataclass
class TailFit:
    slope: float
    corrected_slope: float
    intercept: float
    corrected_intercept: float
    grid: np.ndarray
    counts: np.ndarray


def tail_slope(values, window, n_grid: int = 21, min_exceed: int = 100) -> TailFit:
    """Least-squares slope of ``log S(x)`` on an even grid over ``window``.

    ``S`` is the empirical survivor count. The corrected fit regresses
    ``log(S(x) / x)``, removing a linear prefactor in front of the
    exponential tail; it needs ``window[0] > 0``.
    """
    a, b = map(float, window)
    if not a < b:
        raise ValueError("window must satisfy a < b")
    values = np.asarray(values, dtype=float)
    if (values > a).sum() < min_exceed:
        raise InsufficientDataError(
            f"only {(values > a).sum()} values exceed {a}; need {min_exceed}")
    grid = np.linspace(a, b, n_grid)
    counts = survivor_counts(values, grid)
    if (counts == 0).any():
        raise InsufficientDataError("empty survivor counts inside the window")
    y = np.log(counts)
    slope, icpt = np.polyfit(grid, y, 1)
    if a > 0:
        cslope, cicpt = np.polyfit(grid, y - np.log(grid), 1)
    else:
        cslope, cicpt = math.nan, math.nan
    return TailFit(float(slope), float(cslope), float(icpt), float(cicpt), grid, counts)


def dispersion_index(counts) -> float:
    """Sample variance over sample mean (1 for Poisson counts)."""
    c = np.asarray(counts, dtype=float)
    if c.size < 30:
        raise InsufficientDataError("dispersion_index needs at least 30 counts")
    mean = c.mean()
    if mean == 0:
        raise InsufficientDataError("dispersion_index undefined for zero mean")
    return float(c.var(ddof=1) / mean)


def stratified_dispersion(counts, covariate, n_strata: int = 4) -> tuple[list[float], list[int]]:
    """Dispersion index within quantile strata of ``covariate``."""
    counts = np.asarray(counts)
    cov = np.asarray(covariate, dtype=float)
    edges = np.quantile(cov, np.linspace(0, 1, n_strata + 1))
    which = np.clip(np.searchsorted(edges, cov, side="right") - 1, 0, n_strata - 1)
    out, sizes = [], []
    for k in range(n_strata):
        sel = which == k
        out.append(dispersion_index(counts[sel]))
        sizes.append(int(sel.sum()))
    return out, sizes


def dichotomy_fraction(pairs, r: float, t: float | None = None) -> float:
    """Fraction of overlap times falling strictly inside ``(r, t - r)``.

    ``pairs`` is either an iterable of ``(overlaps, t)`` tuples (one per
    sample; ``overlaps`` a square matrix of overlap times) or a flat array of
    pairwise overlap times together with ``t``.
    """
    if t is not None:
        d = np.asarray(pairs, dtype=float).ravel()
        if d.size == 0:
            raise InsufficientDataError("no extremal pairs")
        return float(np.mean((d > r) & (d < t - r)))
    hits = total = 0
    for overlaps, tt in pairs:
        q = np.asarray(overlaps, dtype=float)
        iu = np.triu_indices(q.shape[0], 1)
        d = q[iu]
        hits += int(((d > r) & (d < tt - r)).sum())
        total += d.size
    if total == 0:
        raise InsufficientDataError("no extremal pairs")
    return hits / total


def median_of_means(x, blocks: int = 16) -> float:
    x = np.asarray(x, dtype=float)
    if x.size < blocks:
        raise InsufficientDataError("fewer observations than blocks")
    return float(np.median([b.mean() for b in np.array_split(x, blocks)]))


def mean_and_se(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))

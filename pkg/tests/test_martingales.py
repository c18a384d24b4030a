import math

import numpy as np
import pytest

from bbm_extremal import martingales as mg
from bbm_extremal.bbm_core import BbmConfig, PruneBarrier, iter_snapshots, simulate, simulate_many


@pytest.fixture(scope="module")
def snaps():
    return simulate_many(BbmConfig(5.0, checkpoints=(1.5,)), 12, 40)


def test_single_particle_values():
    # one particle at x: Z = (sqrt2 t - x) w, Y = w with w = exp(sqrt2 (x - sqrt2 t))
    x, t = 1.3, 2.0
    w = math.exp(math.sqrt(2) * (x - math.sqrt(2) * t))
    assert mg.mckean_martingale_at([x], t) == pytest.approx(w)
    assert mg.derivative_martingale_at([x], t) == pytest.approx((math.sqrt(2) * t - x) * w)


def test_sellke_identity(snaps):
    for s in snaps:
        g = s.ancestral_gammas(1.5)
        for v in (-1.0, float(np.median(g)), float(g.max()), math.inf):
            lhs, rhs = mg.sellke_decomposition_check(s, v, 1.5)
            assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12)
        assert mg.truncated_Z(s, math.inf, 1.5) == mg.derivative_martingale(s)
        assert mg.truncated_Z(s, -1.0, 1.5) == 0.0


def test_trace_matches_truncated(snaps):
    grid = np.linspace(0.0, 1.2, 13)
    for s in snaps[:10]:
        tr = mg.trace(s, grid, 1.5)
        assert [mg.truncated_Z(s, v, 1.5) for v in grid] == tr.Z_v.tolist()
        assert math.fsum(tr.jumps) == pytest.approx(tr.Z_t)
        assert tr.Y_t == mg.mckean_martingale(s)
        assert 0 < tr.max_jump_ratio <= 1


def test_empirical_measure(snaps):
    est = mg.empirical_Z_measure(snaps, [0.1, 0.5, math.inf], 1.5)
    assert est.per_replica.shape == (len(snaps), 3)
    assert np.array_equal(est.per_replica[:, -1], est.Z_t)
    assert (est.negative_part >= 0).all()
    assert (est.quantiles[0.1] <= est.quantiles[0.9]).all()


def test_empirical_measure_rejects_mixed_inputs(snaps):
    other = simulate(BbmConfig(4.0, checkpoints=(1.5,)), 1)
    with pytest.raises(ValueError):
        mg.empirical_Z_measure([snaps[0], other], [0.5], 1.5)
    with pytest.raises(ValueError):
        mg.empirical_Z_measure([], [0.5], 1.5)


def test_pruned_requires_opt_in():
    s = simulate(BbmConfig(6.0, prune=PruneBarrier(8.0)), 3)
    with pytest.raises(mg.PrunedSnapshotError):
        mg.derivative_martingale(s)
    assert math.isfinite(mg.derivative_martingale(s, allow_pruned=True))


def test_undeclared_checkpoint(snaps):
    with pytest.raises(KeyError):
        mg.truncated_Z(snaps[0], 1.0, 2.0)


def test_summation_order_independent():
    x = np.random.default_rng(0).normal(5.0, 2.0, 1000)
    assert mg.derivative_martingale_at(x, 4.0) == mg.derivative_martingale_at(x[::-1], 4.0)


def test_means_at_small_t():
    t = 1.0
    y, z = [], []
    for s in simulate_many(BbmConfig(t), 5, 20_000, batch=512):
        y.append(mg.mckean_martingale(s))
        z.append(mg.derivative_martingale(s))
    y, z = np.array(y), np.array(z)
    assert abs(y.mean() - 1) < 4 * y.std() / math.sqrt(y.size)
    assert abs(z.mean()) < 4 * z.std() / math.sqrt(z.size)


def test_degenerate_values():
    assert mg.derivative_martingale_at([0.0], 0.0) == 0.0
    assert mg.mckean_martingale_at([0.0], 0.0) == 1.0
    assert mg.derivative_martingale_at([math.sqrt(2) * 3.0], 3.0) == 0.0


def test_monotone_in_v_and_r_consistency():
    s = simulate(BbmConfig(5.0, checkpoints=(1.0, 2.5)), 77)
    grid = np.linspace(0.0, 1.0, 41)
    pos = s.positions <= math.sqrt(2) * s.t
    z, _ = mg._terms(s.positions, s.t)
    for r in (1.0, 2.5):
        g = s.ancestral_gammas(r)
        plus = [math.fsum(z[(g <= v) & pos]) for v in grid]
        assert np.all(np.diff(plus) >= 0)
    g1, g2 = s.ancestral_gammas(1.0), s.ancestral_gammas(2.5)
    for v in grid:
        assert math.fsum(z[(g2 <= v) & pos]) <= math.fsum(z[(g1 <= v) & pos])


@pytest.fixture(scope="module")
def early_late():
    # the ancestral time grows with t (r = t/3); at fixed r the number of atoms is fixed
    out = {}
    for t, n in ((6.0, 400), (12.0, 40)):
        r = t / 3
        snaps = simulate_many(BbmConfig(t, checkpoints=(r,)), 31, n, batch=8)
        est = mg.empirical_Z_measure(snaps, np.linspace(0, 1.5, 16), r)
        out[t] = (np.array([mg.mckean_martingale(s) for s in snaps]), est)
    return out


def test_trends_in_t(early_late):
    y6, e6 = early_late[6.0]
    y12, e12 = early_late[12.0]
    assert np.median(y12) < np.median(y6)
    assert np.median(e12.max_jump_ratio) < np.median(e6.max_jump_ratio)


@pytest.mark.slow
def test_negative_part_shrinks():
    # negative terms come from rare particles ahead of sqrt2 t
    neg = {}
    for t, n in ((6.0, 2000), (12.0, 200)):
        neg[t] = np.array([mg.empirical_Z_measure([s], [math.inf], 0.0).negative_part[0]
                           for s in iter_snapshots(BbmConfig(t, checkpoints=(0.0,)), 32, n, batch=4)])
    assert neg[12.0].mean() < neg[6.0].mean()
    assert np.mean(neg[12.0] > 0) < np.mean(neg[6.0] > 0)

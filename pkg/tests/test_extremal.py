import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bbm_extremal import extremal as ext
from bbm_extremal.bbm_core import BbmConfig, simulate
from bbm_extremal.gw_tree import overlap_time
from bbm_extremal.verify import random_small_sample


def random_ultrametric(rng, n, depth=1.0):
    """Overlap-time matrix of a random hierarchy: recursive random splits."""
    d = np.full((n, n), depth)

    def split(idx, lo):
        if len(idx) < 2:
            return
        cut = rng.integers(1, len(idx))
        t = rng.uniform(lo, depth)
        a, b = idx[:cut], idx[cut:]
        d[np.ix_(a, b)] = t
        d[np.ix_(b, a)] = t
        split(a, t)
        split(b, t)

    split(rng.permutation(n), 0.0)
    return d


@given(seed=st.integers(0, 2**32), n=st.integers(1, 40), q=st.floats(0.01, 0.99))
@settings(max_examples=300, deadline=None)
def test_greedy_equals_closure_on_ultrametrics(seed, n, q):
    qbar = random_ultrametric(np.random.default_rng(seed), n)
    reps = ext.greedy_representatives(qbar, q)
    classes = ext.closure_partition(qbar, q)
    # atoms are indexed in decreasing value, so class maxima are class minima of index
    assert reps == sorted(min(c) for c in classes)


@given(seed=st.integers(0, 2**32), q=st.floats(0.05, 0.95))
@settings(max_examples=60, deadline=None)
def test_q_thin_on_simulated_trees(seed, q):
    s, smp = random_small_sample(np.random.default_rng(seed))
    d = ext.q_thin(smp, q)
    classes = ext.closure_partition(smp.overlap, q)
    assert sorted(map(sorted, d.clusters())) == sorted(map(sorted, classes))
    v = smp.values
    for r in d.representatives:
        members = d.assignment == r
        assert v[r] == v[members].max()
        assert (d.relative_offsets[r] <= 0).all()
    for a, b in itertools.combinations(d.representatives, 2):
        assert smp.overlap[a, b] < q


def test_overlap_matrix_agrees_with_labels():
    s = simulate(BbmConfig(3.0), 21)
    smp = ext.extract(s, -math.inf)
    labels = s.labels()
    ids = smp.particle_ids
    for i, j in itertools.combinations(range(min(len(ids), 25)), 2):
        assert smp.overlap_times[i, j] == overlap_time(labels[ids[i]], labels[ids[j]], s.tree)
    assert (np.diag(smp.overlap_times) == s.t).all()


def test_extract_order_and_cutoff():
    s = simulate(BbmConfig(5.0, checkpoints=(2.0,)), 4)
    smp = ext.extract(s, -1.0)
    v = smp.values
    assert (np.diff(v) <= 0).all() and (v >= -1.0).all()
    assert len(smp) == int((s.positions - s.m_t >= -1.0).sum())
    assert np.array_equal(smp.gammas, s.gammas[smp.particle_ids])
    g2 = ext.extract(s, -1.0, gamma_checkpoint=2.0).gammas
    assert np.array_equal(g2, s.ancestral_gammas(2.0)[smp.particle_ids])
    with pytest.raises(KeyError):
        ext.extract(s, -1.0, gamma_checkpoint=3.0)


@pytest.mark.parametrize("q", [0.0, 1.0, -0.5, 2.0])
def test_q_domain(q):
    s = simulate(BbmConfig(2.0), 1)
    with pytest.raises(ValueError):
        ext.q_thin(ext.extract(s, -math.inf), q)


def test_representation_shift_reference():
    assert ext.representation_shift(3.0, 10.0) == pytest.approx(
        3 / (2 * math.sqrt(2)) * math.log(0.7), abs=1e-12)
    assert ext.representation_shift(3.0, 10.0) == pytest.approx(-0.3783, abs=1e-4)


def test_thinned_representation_sample():
    a = ext.thinned_representation_sample(1.0, 4.0, None, 99)
    b = ext.thinned_representation_sample(1.0, 4.0, None, 99)
    assert np.array_equal(a, b) and (np.diff(a) <= 0).all()
    head = simulate(BbmConfig(1.0), 99)
    assert len(a) == head.n
    with pytest.raises(ValueError):
        ext.thinned_representation_sample(4.0, 4.0, None, 1)


def test_hand_traced_thinning():
    qbar = np.array([[1.0, 0.5, 0.1], [0.5, 1.0, 0.1], [0.1, 0.1, 1.0]])
    assert ext.greedy_representatives(qbar, 0.2) == [0, 2]
    assert ext.closure_partition(qbar, 0.2) == [[0, 1], [2]]
    assert ext.greedy_representatives(qbar, 0.6) == [0, 1, 2]


def test_empty_and_single():
    s = simulate(BbmConfig(2.0), 1)
    assert len(ext.extract(s, math.inf)) == 0
    assert ext.q_thin(ext.extract(s, math.inf), 0.5).n_clusters == 0
    lone = simulate(BbmConfig(1e-6), 1)
    smp = ext.extract(lone, -math.inf)
    assert len(smp) == 1 and smp.atoms[0].gamma == 0.0


@given(seed=st.integers(0, 2**32), q=st.floats(0.05, 0.9), dq=st.floats(0.0, 0.5))
@settings(max_examples=60, deadline=None)
def test_idempotence_and_refinement(seed, q, dq):
    _, smp = random_small_sample(np.random.default_rng(seed))
    coarse = ext.q_thin(smp, q)
    reps = list(coarse.representatives)
    sub = smp.overlap[np.ix_(reps, reps)]
    assert ext.greedy_representatives(sub, q) == list(range(len(reps)))
    q2 = min(q + dq, 0.99)
    fine = ext.q_thin(smp, q2)
    for cluster in fine.clusters():
        assert len(set(coarse.assignment[cluster].tolist())) == 1


def test_near_collisions_vanish():
    from bbm_extremal.bbm_core import iter_snapshots
    gaps = []
    for s in iter_snapshots(BbmConfig(8.0), 4, 200, tag="collide"):
        smp = ext.extract(s, -2.0)
        reps = list(ext.q_thin(smp, 0.25).representatives)
        g = smp.gammas[reps]
        gaps.extend(np.abs(g[:, None] - g[None, :])[np.triu_indices(len(g), 1)].tolist())
    gaps = np.array(gaps)
    freq = [np.mean(gaps <= d) for d in (0.1, 0.01, 0.001)]
    assert gaps.size > 50 and freq[0] >= freq[1] >= freq[2] and freq[2] < 0.01


def test_vanishing_lag_reduces_to_direct_max():
    atoms = ext.thinned_representation_sample(1e-9, 5.0, None, 3)
    assert len(atoms) == 1
    assert abs(ext.representation_shift(1e-9, 5.0)) < 1e-8

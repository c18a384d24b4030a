import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from bbm_extremal.gw_tree import (
    MultiIndex, OffspringDistribution, ancestor_label, dyadic_embed, dyadic_tree, embed_gamma,
    labels_at, overlap_time, sample_tree,
)


class TestOffspring:
    def test_binary(self):
        d = OffspringDistribution.binary()
        assert d.mean == 2.0 and d.K == 2.0 and d.p1 == 0.0

    def test_mean_must_be_two(self):
        # p_1 = p_3 = 1/2 has mean 2; p_1 = p_2 = 1/2 has mean 3/2
        OffspringDistribution({1: 0.5, 3: 0.5})
        OffspringDistribution.from_vector([0.5, 0.0, 0.5])
        with pytest.raises(ValueError, match="mean"):
            OffspringDistribution({1: 0.5, 2: 0.5})

    @pytest.mark.parametrize("bad", [{0: 0.5, 4: 0.5}, {2: 0.9}, {2: 1.2, 1: -0.2},
                                     {1: 0.5, 65: 0.5}, {}])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            OffspringDistribution(bad)

    def test_K_and_size_biased(self):
        d = OffspringDistribution({1: 0.5, 3: 0.5})
        assert d.K == pytest.approx(3.0)  # 3 * 2 * 0.5
        ks, p = d.size_biased()
        assert dict(zip(ks.tolist(), p.tolist())) == pytest.approx({1: 0.25, 3: 0.75})


class TestMultiIndex:
    def test_zero_entries_dropped(self):
        u = MultiIndex.from_dict({3: 1, 1: 0, 2: 2})
        assert u.support == (2, 3) and u[1] == 0 and u[3] == 1
        assert u.dense(4) == [0, 2, 1, 0]
        assert MultiIndex.root().support == ()

    def test_equality_and_hash(self):
        assert MultiIndex.from_dict({1: 1}) == MultiIndex.from_dict({1: 1, 2: 0})
        assert len({MultiIndex.from_dict({1: 1}), MultiIndex.from_dict({1: 1})}) == 1


def test_yule_population_is_geometric():
    # binary Yule process: n(1) ~ Geometric(e^-1)
    n = np.array([sample_tree(OffspringDistribution.binary(), 1.0, k).n(1.0)
                  for k in range(4000)])
    p = math.exp(-1)
    ks = np.arange(1, 40)
    observed = np.array([(n == k).sum() for k in ks])
    expected = len(n) * p * (1 - p) ** (ks - 1)
    keep = expected > 5
    chi2 = (((observed - expected) ** 2 / expected)[keep]).sum()
    assert chi2 < stats.chi2.ppf(0.999, keep.sum() - 1)


def test_population_bookkeeping():
    t = sample_tree(OffspringDistribution({1: 0.5, 3: 0.5}), 2.5, 42)
    for s in (0.0, 0.7, 1.9, 2.5):
        assert t.n(s) == len(t.alive_nodes(s))
    assert t.W(0.0) == 0 and t.n(0.0) == 1


def test_dyadic_reference():
    assert dyadic_embed((1, 1)) == 0.375
    tree = dyadic_tree(3)
    leaves = labels_at(tree, 3.5)
    assert len(leaves) == 8 and len(set(leaves)) == 8
    assert embed_gamma(MultiIndex.root(), tree) == 0.0


@given(seed=st.integers(0, 2**32), horizon=st.floats(0.5, 3.0))
@settings(max_examples=40, deadline=None)
def test_labels_embedding_overlap(seed, horizon):
    tree = sample_tree(OffspringDistribution({1: 0.4, 2: 0.4, 4: 0.2}), horizon, seed)
    labels = labels_at(tree, horizon)
    assert len(set(labels)) == len(labels)
    gam = [embed_gamma(u, tree) for u in labels]
    assert len(set(gam)) == len(gam)
    r = horizon / 2
    for u in labels:
        a = ancestor_label(u, tree, r)
        assert embed_gamma(a, tree) == embed_gamma(u, tree, r)
        assert embed_gamma(a, tree) <= embed_gamma(u, tree)
    sub = labels[:12]
    for u, v, w in itertools.product(sub, repeat=3):
        # e^{-d} is an ultrametric: d(u,w) >= min(d(u,v), d(v,w))
        assert overlap_time(u, w, tree) >= min(overlap_time(u, v, tree), overlap_time(v, w, tree))
    for u, v in itertools.combinations(sub, 2):
        d = overlap_time(u, v, tree)
        assert 0 < d < horizon
        # lineages coincide strictly before the split and differ from it on
        before = np.nextafter(d, 0.0)
        assert ancestor_label(u, tree, before) == ancestor_label(v, tree, before)
        assert ancestor_label(u, tree, d) != ancestor_label(v, tree, d)


def test_label_beyond_tree_rejected():
    tree = dyadic_tree(2)
    with pytest.raises(ValueError):
        embed_gamma(MultiIndex.from_dict({99: 1}), tree)


def test_root_and_early_times():
    tree = sample_tree(OffspringDistribution.binary(), 1e-9, 3)
    assert tree.n(1e-9) == 1 and tree.n_events == 0
    assert labels_at(tree, 0.0) == [MultiIndex.root()]


@given(seed=st.integers(0, 2**32))
@settings(max_examples=30, deadline=None)
def test_label_set_consistency_and_counting(seed):
    tree = sample_tree(OffspringDistribution({1: 0.5, 3: 0.5}), 2.0, seed)
    late = labels_at(tree, 2.0)
    for r in (0.0, 0.4, 1.1, 2.0):
        assert set(ancestor_label(u, tree, r) for u in late) == set(labels_at(tree, r))
        w = tree.W(r)
        assert int((tree.event_offspring[:w] - 1).sum()) == tree.n(r) - 1 == len(labels_at(tree, r)) - 1
    assert all(ancestor_label(u, tree, 0.0) == MultiIndex.root() for u in late)


def test_first_event_embedding():
    tree = sample_tree(OffspringDistribution.binary(), 3.0, 12)
    t1 = tree.branching_times[0]
    assert embed_gamma(MultiIndex.from_dict({1: 1}), tree) == math.exp(-t1)
    between = (t1 + tree.branching_times[1]) / 2
    kids = labels_at(tree, between)
    assert sorted(u[1] for u in kids) == [0, 1] and all(u.support in ((), (1,)) for u in kids)

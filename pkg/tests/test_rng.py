import numpy as np
import pytest
from scipy import stats

from bbm_extremal import rng


def test_mix64_known_value():
    # SplitMix64 finalizer of the first golden-ratio increment
    assert int(rng.mix64(np.uint64(0x9E3779B97F4A7C15))) == 0xE220A8397B1DCDAF


def test_replica_key_scalar_matches_vector():
    keys = rng.replica_keys(11, np.arange(5), "x")
    assert [rng.replica_key(11, i, "x") for i in range(5)] == [int(k) for k in keys]


def test_tags_and_seeds_separate_streams():
    a = rng.replica_keys(1, np.arange(100), "a")
    b = rng.replica_keys(1, np.arange(100), "b")
    c = rng.replica_keys(2, np.arange(100), "a")
    assert len(set(a) | set(b) | set(c)) == 300


def test_child_keys_distinct_over_ranks():
    k = np.full(200, 12345, dtype=np.uint64)
    assert len(set(rng.child_keys(k, np.arange(200)).tolist())) == 200


def test_uniforms_open_interval_and_uniform():
    keys = rng.replica_keys(3, np.arange(50_000))
    u = rng.uniforms(keys, rng.SLOT_LIFE)
    assert (u > 0).all() and (u < 1).all()
    assert stats.kstest(u, "uniform").statistic < 0.01


def test_slots_are_decorrelated():
    keys = rng.replica_keys(4, np.arange(50_000))
    a = rng.uniforms(keys, rng.SLOT_LIFE)
    b = rng.uniforms(keys, rng.SLOT_OFFSPRING)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.02


def test_normals_and_exponentials():
    keys = rng.replica_keys(5, np.arange(50_000))
    z = rng.normals(keys)
    e = rng.exponentials(keys, rate=2.0)
    assert stats.kstest(z, "norm").statistic < 0.01
    assert stats.kstest(e, "expon", args=(0, 0.5)).statistic < 0.01


def test_as_key():
    assert rng.as_key(7) == 7
    assert rng.as_key(-1) == 2**64 - 1
    g1, g2 = np.random.default_rng(0), np.random.default_rng(0)
    assert rng.as_key(g1) == rng.as_key(g2)
    with pytest.raises(TypeError):
        rng.as_key("seed")

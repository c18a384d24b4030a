import math

import numpy as np
import pytest

from bbm_extremal import decoration as dec
from bbm_extremal.bbm_core import BbmConfig, PruneBarrier, simulate
from bbm_extremal.verify import tiling_holds


@pytest.fixture(scope="module")
def conditioned():
    return dec.sample_conditioned_many(5.0, 3, 30)


def test_predicate_holds(conditioned):
    snaps, attempts = conditioned
    assert len(snaps) == 30 and attempts >= 30
    for s in snaps:
        assert s.positions.max() >= math.sqrt(2) * 5.0


def test_single_sampler():
    c = dec.sample_conditioned(4.0, 11)
    assert c.attempts >= 1 and c.snapshot.positions.max() >= math.sqrt(2) * 4.0
    again = dec.sample_conditioned(4.0, 11, batch=7)
    assert again.attempts == c.attempts
    assert np.array_equal(again.snapshot.positions, c.snapshot.positions)


def test_rejection_exhausted():
    with pytest.raises(dec.RejectionExhausted) as info:
        dec.sample_conditioned(8.0, 1, max_attempts=5)
    assert info.value.attempts == 5 and info.value.acceptance_estimate == 0.0


def test_decoration_truncation_is_nested(conditioned):
    for s in conditioned[0]:
        full = dec.decoration_atoms(s)
        assert full.atoms[0] == 0.0 and (full.atoms <= 0).all()
        assert (np.diff(full.atoms) <= 0).all()
        prev = set()
        for r in (0.0, 0.5, 1.0, 2.0, 5.0):
            part = dec.decoration_atoms(s, r)
            ids = set(part.particle_ids.tolist())
            assert prev <= ids <= set(full.particle_ids.tolist())
            assert 0.0 in part.atoms
            prev = ids
        assert prev == set(full.particle_ids.tolist())


def test_overlaps_with_matches_pairwise():
    from bbm_extremal.extremal import overlap_times
    s = simulate(BbmConfig(3.0), 8)
    d = dec.overlaps_with(s, 0)
    assert np.array_equal(d, overlap_times(s, np.arange(s.n))[0])


def test_recent_relatives():
    s = simulate(BbmConfig(4.0), 2)
    pid = int(np.argmax(s.positions))
    rr = dec.recent_relatives(s, pid, 1.0)
    d = dec.overlaps_with(s, pid)
    assert set(rr.particle_ids.tolist()) == set(np.nonzero(d > 3.0)[0].tolist()) | {pid}
    assert rr.atoms[0] == 0.0
    with pytest.raises(ValueError):
        dec.recent_relatives(s, pid, 1.0, representatives=[pid + 1])
    with pytest.raises(IndexError):
        dec.recent_relatives(s, s.n, 1.0)


def test_branch_times_along():
    s = simulate(BbmConfig(3.0), 5)
    bt = dec.branch_times_along(s, 0)
    assert (np.diff(bt) <= 0).all() and ((bt > 0) & (bt < 3.0)).all()


def test_tiling_on_conditioned(conditioned):
    results = [tiling_holds(s, -1.0, 1.5) for s in conditioned[0]]
    assert False not in results


def test_acceptance_decreases_in_t():
    rates = [dec.acceptance_rate(t, 1, 4000)[0] for t in (4.0, 6.0, 8.0)]
    assert rates[0] > rates[1] > rates[2] > 0


def test_acceptance_consistent_across_seeds():
    (p1, s1), (p2, s2) = dec.acceptance_rate(6.0, 1, 6000), dec.acceptance_rate(6.0, 2, 6000)
    assert abs(p1 - p2) < 3 * math.hypot(s1, s2)


def test_pruned_config_rejected():
    with pytest.raises(ValueError):
        dec.sample_conditioned_many(5.0, 1, 1, BbmConfig(5.0, prune=PruneBarrier()))


def test_degenerate_truncations(conditioned):
    s = conditioned[0][0]
    assert dec.decoration_atoms(s, 0.0).atoms.tolist() == [0.0]
    top = int(np.argmax(s.positions))
    youngest = s.t - dec.branch_times_along(s, top)[0]
    assert dec.recent_relatives(s, top, 0.5 * youngest).atoms.tolist() == [0.0]
    with pytest.raises(ValueError):
        dec.decoration_atoms(s, s.t + 1)

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from bbm_extremal import stats


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=60),
       st.lists(st.floats(-50, 50), min_size=1, max_size=60))
@settings(max_examples=200, deadline=None)
@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_ks_matches_scipy(a, b):
    assert stats.ks_distance(a, b) == pytest.approx(sps.ks_2samp(a, b).statistic, abs=1e-12)


def test_ks_identical_is_zero_and_handles_neg_inf():
    x = np.random.default_rng(0).normal(size=500)
    assert stats.ks_distance(x, x) == 0.0
    y = np.concatenate([[-np.inf] * 10, x[10:]])
    assert stats.ks_distance(y, x) <= 10 / 500 + 1e-12
    with pytest.raises(stats.InsufficientDataError):
        stats.ks_distance([], x)


def test_ks_one_sample_matches_scipy():
    x = np.random.default_rng(1).exponential(size=1000)
    ref = sps.kstest(x, "expon").statistic
    assert stats.ks_one_sample(x, sps.expon.cdf) == pytest.approx(ref, abs=1e-12)


def test_tail_slope_on_exact_exponential_tail():
    # quantiles of S(x) = exp(-sqrt2 x): survivor counts are exact up to rounding
    n = 200_000
    x = -np.log((np.arange(n) + 0.5) / n) / math.sqrt(2)
    fit = stats.tail_slope(x, (0.5, 2.5))
    assert fit.slope == pytest.approx(-math.sqrt(2), rel=1e-3)
    # with S(x) = x exp(-sqrt2 x) the corrected fit removes the prefactor
    grid = np.linspace(0.5, 2.5, 21)
    y = np.log(grid) - math.sqrt(2) * grid
    assert np.polyfit(grid, y - np.log(grid), 1)[0] == pytest.approx(-math.sqrt(2))


def test_tail_slope_insufficient():
    with pytest.raises(stats.InsufficientDataError):
        stats.tail_slope(np.zeros(10), (0.5, 2.5))


def test_dispersion():
    rng = np.random.default_rng(2)
    assert stats.dispersion_index(rng.poisson(3.0, 20_000)) == pytest.approx(1.0, abs=0.05)
    mixed = rng.poisson(rng.gamma(1.0, 3.0, 20_000))
    assert stats.dispersion_index(mixed) > 3.0
    with pytest.raises(stats.InsufficientDataError):
        stats.dispersion_index([1, 2])
    with pytest.raises(stats.InsufficientDataError):
        stats.dispersion_index(np.zeros(100))


def test_stratification_recovers_poisson_in_a_cox_mixture():
    rng = np.random.default_rng(3)
    lam = rng.choice([0.5, 2.0, 5.0, 9.0], size=40_000)
    counts = rng.poisson(lam)
    strata, sizes = stats.stratified_dispersion(counts, lam + 1e-9 * rng.random(lam.size), 4)
    assert sum(sizes) == lam.size
    assert all(abs(d - 1.0) < 0.1 for d in strata)
    assert stats.dispersion_index(counts) > 1.5


@given(st.lists(st.floats(0, 12), min_size=1, max_size=100))
def test_dichotomy_window_nesting(d):
    f = [stats.dichotomy_fraction(d, r, 12.0) for r in (1.0, 2.0, 3.0)]
    assert f[0] >= f[1] >= f[2]


def test_dichotomy_matrix_form():
    q = np.array([[5.0, 0.5, 4.0], [0.5, 5.0, 0.5], [4.0, 0.5, 5.0]])
    assert stats.dichotomy_fraction([(q, 5.0)], 1.0) == pytest.approx(0.0)
    assert stats.dichotomy_fraction([(q, 5.0)], 0.75) == pytest.approx(1 / 3)
    assert stats.dichotomy_fraction([(q, 5.0)], 0.25) == pytest.approx(1.0)


def test_median_of_means_resists_outliers():
    x = np.ones(1600)
    x[0] = 1e9
    assert stats.median_of_means(x, 16) == 1.0


def test_report_roundtrip():
    r = stats.DiagnosticReport("demo", [0.1, math.inf], 0.2, False, "<",
                               details={"a": np.float64(1.5), "b": np.bool_(True)})
    assert r.line().startswith("[FAIL] demo")
    assert json.loads(json.dumps(r.to_dict()))["details"] == {"a": 1.5, "b": True}


def test_documented_examples():
    assert stats.ks_distance([0, 1], [0, 1, 2]) == pytest.approx(1 / 3)
    assert stats.ks_distance([0, 1], [5, 6]) == 1.0
    assert stats.dispersion_index(np.full(50, 3)) == 0.0
    assert stats.dichotomy_fraction(np.linspace(0, 12, 50), 6.0, 12.0) == 0.0
    assert stats.dichotomy_fraction(np.linspace(0, 12, 50), 7.0, 12.0) == 0.0


def test_tail_slope_shift_invariant():
    x = np.random.default_rng(4).exponential(1 / math.sqrt(2), 50_000)
    a = stats.tail_slope(x, (0.5, 2.5))
    b = stats.tail_slope(x + 1.0, (1.5, 3.5))
    assert a.slope == pytest.approx(b.slope, abs=1e-12)

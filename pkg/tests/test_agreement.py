import numpy as np
import pytest
from scipy.stats import pearsonr

from terrabstract.agreement import bland_altman, r_squared, relative_difference
from terrabstract.utils import UndefinedMetricError


def test_relative_difference_diagonal():
    # straight diagonal of 10 cells walked as 10 axis moves plus 10 more
    rel = relative_difference(10 * np.sqrt(2), 20.0)
    assert rel == pytest.approx(0.41421, abs=1e-5)


def test_relative_difference_identical():
    assert relative_difference(7.5, 7.5) == 0


def test_relative_difference_zero_distance():
    with pytest.raises(UndefinedMetricError):
        relative_difference(0.0, 1.0)


def test_r_squared_matches_pearson():
    rng = np.random.default_rng(1)
    a = rng.uniform(0, 2, 50)
    b = a + rng.normal(0, 0.2, 50)
    assert r_squared(a, b) == pytest.approx(pearsonr(a, b)[0] ** 2)


def test_r_squared_perfect():
    a = np.arange(10.0)
    assert r_squared(a, 3 * a + 1) == pytest.approx(1.0)


def test_r_squared_constant_is_undefined():
    assert r_squared(np.ones(5), np.arange(5.0)) is None


def test_r_squared_length_mismatch():
    with pytest.raises(ValueError):
        r_squared([1.0, 2.0], [1.0])


def test_bland_altman():
    reference = np.array([1.0, 2.0, 3.0, 4.0])
    measured = np.array([1.5, 2.0, 3.5, 4.0])
    ba = bland_altman(reference, measured)
    diff = measured - reference
    sd = np.std(diff, ddof=1)
    assert ba.n == 4
    assert ba.mean_diff == pytest.approx(0.25)
    assert ba.sd_diff == pytest.approx(sd)
    assert ba.loa_lower == pytest.approx(0.25 - 1.96 * sd)
    assert ba.loa_upper == pytest.approx(0.25 + 1.96 * sd)


def test_bland_altman_single_pair():
    ba = bland_altman([2.0], [3.0])
    assert ba.mean_diff == 1.0
    assert ba.sd_diff is None


def test_bland_altman_empty():
    with pytest.raises(UndefinedMetricError):
        bland_altman([], [])


def test_rounding_noise_counts_as_constant():
    a = np.full(16, 1.1)
    a[::3] = np.nextafter(1.1, 2.0)
    assert np.ptp(a) > 0
    assert r_squared(a, 2 * a) is None
    assert bland_altman(a, 2 * a).proportional_bias is None


def test_large_constant_series_is_undefined():
    a = np.full(8, 1e6)
    a[1] += 1e-7
    assert r_squared(a, np.arange(8.0)) is None

import json

import numpy as np
import pytest
from scipy import stats

from src.core.series import DiscreteSeries
from src.processing.transform import EPS, estimate_categorical, to_continuous


def test_single_category():
    cdf_left, pmf = estimate_categorical(DiscreteSeries([3, 3, 3, 3], levels=5))
    assert pmf[2] == 1.0
    assert cdf_left[2] == 0.0


def test_counting_example():
    cdf_left, pmf = estimate_categorical(DiscreteSeries([1, 2, 2, 4], levels=4))
    np.testing.assert_allclose(pmf, [0.25, 0.5, 0.0, 0.25])
    assert cdf_left[0] == 0.0
    assert cdf_left[3] == pytest.approx(0.75)


def test_pmf_matches_histogram(rng):
    codes = rng.integers(1, 6, size=200)
    _, pmf = estimate_categorical(DiscreteSeries(codes, levels=5))
    hist, _ = np.histogram(codes, bins=np.arange(0.5, 6.5))
    np.testing.assert_array_equal(pmf, hist / 200)
    assert pmf.sum() == pytest.approx(1.0)


def test_injected_draws():
    z, record = to_continuous(DiscreteSeries([1, 5], levels=5), seed=0, draws=np.array([0.5, 0.5]))
    np.testing.assert_allclose(record.u, [0.25, 0.75])
    np.testing.assert_allclose(z.values, stats.norm.ppf([0.25, 0.75]))
    np.testing.assert_allclose(z.values, [-0.6744897501960817, 0.6744897501960817], atol=1e-12)
    assert record.seed is None


def test_single_category_passes_draws_through():
    z, record = to_continuous(DiscreteSeries([3] * 50, levels=5), seed=7)
    np.testing.assert_array_equal(record.u, np.clip(record.w, EPS, 1 - EPS))


def test_normal_cdf_reproduces_u(rng):
    series = DiscreteSeries(rng.integers(1, 6, size=300), levels=5)
    z, record = to_continuous(series, seed=11)
    np.testing.assert_allclose(stats.norm.cdf(z.values), record.u, atol=1e-9)


def test_u_stays_in_category_interval(rng):
    series = DiscreteSeries(rng.integers(1, 6, size=500), levels=5)
    _, record = to_continuous(series, seed=3)
    idx = series.values - 1
    lower = record.cdf_left[idx]
    upper = lower + record.pmf[idx]
    assert np.all(record.u >= lower - 1e-15)
    assert np.all(record.u <= upper + 1e-15)


def test_category_order_preserved(rng):
    series = DiscreteSeries(rng.integers(1, 6, size=500), levels=5)
    z, _ = to_continuous(series, seed=5)
    for low, high in [(1, 2), (2, 3), (3, 4), (4, 5)]:
        assert z.values[series.values == low].max() <= z.values[series.values == high].min()


def test_deterministic_given_seed(rng):
    series = DiscreteSeries(rng.integers(1, 6, size=100), levels=5)
    z1, r1 = to_continuous(series, seed=42)
    z2, r2 = to_continuous(series, seed=42)
    np.testing.assert_array_equal(z1.values, z2.values)
    assert r1.to_dict() == r2.to_dict()
    z3, _ = to_continuous(series, seed=43)
    assert not np.array_equal(z1.values, z3.values)


def test_extreme_u_is_finite():
    z, _ = to_continuous(DiscreteSeries([1, 2], levels=2), seed=0, draws=np.array([0.0, 1.0]))
    assert np.all(np.isfinite(z.values))


def test_random_draws_exclude_zero():
    series = DiscreteSeries([1] * 400 + [2] * 100, levels=2)
    z, record = to_continuous(series, seed=13)
    expected = 1.0 - np.random.Generator(np.random.PCG64(13)).random(series.n)
    np.testing.assert_array_equal(record.w, expected)
    assert np.all((record.w > 0.0) & (record.w <= 1.0))
    assert np.all(record.u[:400] > 0.0)
    assert np.all(np.isfinite(z.values))


def test_record_exports(tmp_path, rng):
    series = DiscreteSeries(rng.integers(1, 6, size=20), levels=5)
    _, record = to_continuous(series, seed=9)
    data = json.loads(record.write_json(tmp_path / "t.json").read_text())
    assert data["seed"] == 9
    assert data["categories"] == [1, 2, 3, 4, 5]
    frame = record.to_frame(series.values)
    assert list(frame.columns) == ["t", "category", "w", "u"]
    assert len(frame) == 20


def test_wrong_number_of_draws():
    with pytest.raises(ValueError, match="expected 3 draws"):
        to_continuous(DiscreteSeries([1, 2, 3]), seed=0, draws=np.array([0.5]))

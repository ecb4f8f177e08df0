import json
import math

import numpy as np
import pytest

from src.processing.critical_values import (
    ThresholdCache,
    ThresholdRequest,
    auto_grid,
    default_cache_path,
    get_or_compute,
    simulate_maxima,
    simulate_threshold,
    upper_order_index,
    upper_order_statistic,
)
from src.processing.detectors import joint_univariate
from src.processing.local_stats import BandwidthError, WindowConfig
from src.utils.metrics import RunMetrics


SMALL = dict(n=60, B=100, seed=3, grid=(5, 10, 20))


def loop_maxima(n, grid, B, seed):
    """Replication maxima with explicit loops over every position."""
    children = np.random.SeedSequence(seed).spawn(B)
    out = []
    for child in children:
        rng = np.random.Generator(np.random.PCG64(child))
        steps = rng.standard_normal((2, n + max(grid)))
        walk = np.hstack([np.zeros((2, 1)), np.cumsum(steps, axis=1)])
        best = 0.0
        for g in grid:
            for h in range(g, n - g + 1):
                t = (walk[:, h + g] - 2 * walk[:, h] + walk[:, h - g]) / math.sqrt(2 * g)
                best = max(best, math.hypot(t[0], t[1]))
        out.append(best)
    return np.array(out)


def test_auto_grid():
    assert auto_grid(100) == tuple(range(25, 50))
    assert auto_grid(1000)[-1] == 200
    assert auto_grid(40) == ()


def test_upper_order_index():
    assert upper_order_index(0.05, 1000) == 950
    assert upper_order_index(0.05, 100) == 95
    assert upper_order_index(0.0, 10) == 10
    assert upper_order_index(0.999, 10) == 1


def test_upper_order_statistic_has_no_interpolation():
    assert upper_order_statistic(np.arange(1, 1001)[::-1], 0.05) == 950.0
    assert upper_order_statistic(np.array([0.5, 2.5, 1.5]), 0.5) == 1.5


def test_matches_loop_implementation():
    req = ThresholdRequest(**SMALL)
    np.testing.assert_allclose(simulate_maxima(req, workers=2), loop_maxima(60, (5, 10, 20), 100, 3), rtol=1e-12)


def test_deterministic_across_worker_counts():
    req = ThresholdRequest(**SMALL)
    np.testing.assert_array_equal(simulate_maxima(req, workers=1), simulate_maxima(req, workers=4))
    assert simulate_threshold(req, workers=1) == simulate_threshold(req, workers=3)


def test_seed_changes_value():
    a = simulate_threshold(ThresholdRequest(**SMALL))
    b = simulate_threshold(ThresholdRequest(**{**SMALL, "seed": 4}))
    assert a != b


def test_alpha_monotone():
    maxima = simulate_maxima(ThresholdRequest(**SMALL))
    values = [upper_order_statistic(maxima, alpha) for alpha in (0.01, 0.05, 0.1, 0.5)]
    assert values == sorted(values, reverse=True)


def test_grows_with_length():
    short = simulate_threshold(ThresholdRequest(n=60, B=200, grid=(10,)))
    long = simulate_threshold(ThresholdRequest(n=1000, B=200, grid=(10,)))
    assert long > short


def test_grid_is_clipped_to_length():
    req = ThresholdRequest(n=60, B=100, grid=(20, 10, 40, 10))
    assert req.grid == (10, 20, 40)
    assert req.effective_grid() == (10, 20)


def test_empty_grid_is_rejected():
    with pytest.raises(ValueError, match="grid is empty"):
        simulate_maxima(ThresholdRequest(n=30, B=100))


@pytest.mark.parametrize("kwargs", [{"n": 60, "B": 99}, {"n": 60, "alpha": 1.0}, {"n": 60, "alpha": -0.1}])
def test_invalid_request(kwargs):
    with pytest.raises(ValueError):
        ThresholdRequest(**kwargs)


def test_fingerprint_covers_inputs():
    base = ThresholdRequest(**SMALL).fingerprint()
    assert base == ThresholdRequest(**SMALL).fingerprint()
    for change in ({"B": 200}, {"seed": 9}, {"alpha": 0.1}, {"n": 61}, {"grid": (5, 10)}, {"bandwidth": 20}):
        assert ThresholdRequest(**{**SMALL, **change}).fingerprint() != base


def test_cache_miss_then_hit(cache):
    metrics = RunMetrics()
    req = ThresholdRequest(**SMALL)
    first = get_or_compute(cache, req, metrics=metrics)
    second = get_or_compute(cache, req, metrics=metrics)
    assert first == second
    assert (metrics.cache_misses, metrics.cache_hits) == (1, 1)
    entry = json.loads(cache.path.read_text())[req.fingerprint()]
    assert entry["value"] == first
    assert entry["metadata"]["B"] == 100
    assert "sample" not in entry


def test_cache_distinguishes_replications(cache):
    metrics = RunMetrics()
    get_or_compute(cache, ThresholdRequest(**SMALL), metrics=metrics)
    get_or_compute(cache, ThresholdRequest(**{**SMALL, "B": 150}), metrics=metrics)
    assert metrics.cache_misses == 2
    assert len(json.loads(cache.path.read_text())) == 2


def test_cached_value_is_returned_verbatim(cache):
    req = ThresholdRequest(**SMALL)
    cache.store(req, 1.2345)
    assert get_or_compute(cache, req) == 1.2345


def test_rebuild_overwrites(cache):
    req = ThresholdRequest(**SMALL)
    cache.store(req, 1.2345)
    metrics = RunMetrics()
    value = get_or_compute(cache, req, rebuild=True, metrics=metrics)
    assert value != 1.2345
    assert metrics.cache_misses == 1
    assert cache.lookup(req) == value


def test_corrupt_cache_is_recomputed(cache):
    cache.path.parent.mkdir(parents=True, exist_ok=True)
    cache.path.write_text("{not json")
    req = ThresholdRequest(**SMALL)
    value = get_or_compute(cache, req)
    assert value == simulate_threshold(req)
    assert cache.lookup(req) == value


def test_invalid_entry_is_ignored(cache):
    req = ThresholdRequest(**SMALL)
    cache.path.parent.mkdir(parents=True, exist_ok=True)
    cache.path.write_text(json.dumps({req.fingerprint(): {"value": "NaN"}}))
    assert cache.lookup(req) is None


def test_keep_sample(tmp_path):
    cache = ThresholdCache(tmp_path / "cv.json", keep_sample=True)
    req = ThresholdRequest(**SMALL)
    get_or_compute(cache, req)
    assert len(json.loads(cache.path.read_text())[req.fingerprint()]["sample"]) == 100


def test_no_cache_always_computes():
    metrics = RunMetrics()
    req = ThresholdRequest(**SMALL)
    get_or_compute(None, req, metrics=metrics)
    get_or_compute(None, req, metrics=metrics)
    assert metrics.cache_misses == 2


def test_default_cache_path_honours_environment(isolated_cache_dir):
    assert default_cache_path() == isolated_cache_dir / "critical_values.json"


def test_studentized_matches_detector_loop():
    req = ThresholdRequest(n=60, B=100, seed=5, bandwidth=10)
    cfg = WindowConfig(G=10, n=60)
    expected = []
    for child in np.random.SeedSequence(5).spawn(100):
        rng = np.random.Generator(np.random.PCG64(child))
        expected.append(math.sqrt(joint_univariate(rng.standard_normal(60), cfg).d2.max()))
    np.testing.assert_allclose(simulate_maxima(req, workers=3), expected, rtol=1e-12)
    assert simulate_threshold(req) == upper_order_statistic(np.array(expected), 0.05)


def test_studentized_ignores_short_grid():
    # n=40 leaves the random-walk grid empty
    assert simulate_threshold(ThresholdRequest(n=40, B=100, bandwidth=10)) > 0


def test_studentized_bandwidth_must_fit():
    with pytest.raises(BandwidthError, match="bandwidth too large"):
        ThresholdRequest(n=60, B=100, bandwidth=31)
    with pytest.raises(ValueError, match="positive"):
        ThresholdRequest(n=60, B=100, bandwidth=0)


def test_studentized_entry_is_cached_separately(cache):
    plain = get_or_compute(cache, ThresholdRequest(**SMALL))
    student = get_or_compute(cache, ThresholdRequest(**SMALL, bandwidth=20))
    assert plain != student
    document = json.loads(cache.path.read_text())
    assert sorted(str(e["metadata"]["bandwidth"]) for e in document.values()) == ["20", "None"]


@pytest.mark.slow
def test_studentized_threshold_holds_level():
    cfg = WindowConfig(G=20, n=100)
    value = simulate_threshold(ThresholdRequest(n=100, B=1000, seed=0, bandwidth=20))
    rng = np.random.Generator(np.random.PCG64(2024))
    rejections = [joint_univariate(rng.standard_normal(100), cfg).d2.max() > value ** 2 for _ in range(1000)]
    assert np.mean(rejections) <= 0.08


@pytest.mark.slow
def test_standard_setting_is_plausible():
    value = simulate_threshold(ThresholdRequest(n=100, alpha=0.05, B=1000, seed=0))
    # a bivariate Gaussian maximum over 25 bandwidths sits well above the chi(2) 95% point
    assert 2.45 < value < 6.0


@pytest.mark.parametrize("seed", range(200))
def test_order_statistic_monotone_in_alpha(seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    values = rng.gamma(2.0, size=int(rng.integers(100, 400)))
    a1, a2 = sorted(rng.uniform(0, 0.5, size=2))
    assert upper_order_statistic(values, a1) >= upper_order_statistic(values, a2)

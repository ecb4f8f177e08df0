import numpy as np
import pytest

from src.core.series import ContinuousSeries
from src.processing.detectors import DetectorKind, DetectorTrace, compute_trace
from src.processing.local_stats import WindowConfig
from src.processing.segmentation import (
    BootstrapCIs,
    ChangePointSet,
    bootstrap_cis,
    exceeds,
    extract_changepoints,
    mask_to_runs,
    screen_local_maxima,
    segment_bounds,
)


CFG = WindowConfig(G=20, n=100)


def test_exceeds_compares_on_distance_scale():
    np.testing.assert_array_equal(exceeds(np.array([3.9, 4.0, 4.1]), 2.0), [False, False, True])


def test_mask_to_runs():
    assert mask_to_runs(np.array([False, True, True, False, True])) == [(2, 3), (5, 5)]
    assert mask_to_runs(np.zeros(5, dtype=bool)) == []
    assert mask_to_runs(np.ones(3, dtype=bool)) == [(1, 3)]


def test_screening_takes_maxima_then_suppresses():
    d2 = np.array([0.0, 5.0, 4.0, 6.0, 0.0, 3.0])
    assert screen_local_maxima(d2, d2 > 1, radius=1) == [1, 3, 5]
    assert screen_local_maxima(d2, d2 > 1, radius=2) == [3]
    assert screen_local_maxima(d2, d2 > 1, radius=3) == [3]


def test_screening_ties_go_to_smaller_index():
    d2 = np.array([1.0, 2.0, 2.0, 1.0])
    assert screen_local_maxima(d2, np.ones(4, dtype=bool), radius=1) == [1, 3]
    assert screen_local_maxima(d2, np.ones(4, dtype=bool), radius=2) == [1]


def test_screening_nothing_to_screen():
    assert screen_local_maxima(np.arange(5.0), np.zeros(5, dtype=bool), radius=2) == []


def test_segment_bounds():
    assert segment_bounds((40, 60), 100) == [(1, 40), (41, 60), (61, 100)]
    assert segment_bounds((), 10) == [(1, 10)]


def test_step_is_detected(step_series):
    y = step_series([50], [0.0, 3.0], [1.0, 1.0], seed=1)
    trace = compute_trace(DetectorKind.UNI_Y, y, None, CFG)
    cp = extract_changepoints(trace, threshold=3.0)
    assert any(abs(p - 50) <= 3 for p in cp.points)
    assert set(cp.points) <= set(cp.exceedance)


def test_points_are_separated(rng):
    y = ContinuousSeries(rng.standard_normal(100) * np.r_[np.ones(50), 4 * np.ones(50)])
    trace = compute_trace(DetectorKind.UNI_Y, y, None, CFG)
    cp = extract_changepoints(trace, threshold=0.5)
    assert cp.points
    assert all(b - a > CFG.screen_radius for a, b in zip(cp.points, cp.points[1:]))


def test_no_exceedance_gives_no_points(rng):
    trace = compute_trace(DetectorKind.UNI_Y, ContinuousSeries(rng.standard_normal(100)), None, CFG)
    cp = extract_changepoints(trace, threshold=1e6)
    assert cp.points == () and cp.exceedance == ()
    assert cp.to_dict()["exceedance_runs"] == []


def test_exceedance_runs():
    cp = ChangePointSet(kind=DetectorKind.UNI_Y, points=(3,), exceedance=(2, 3, 4, 8), threshold=1.0)
    assert cp.exceedance_runs == [(2, 4), (8, 8)]


def test_with_cis_length_must_match():
    cp = ChangePointSet(kind=DetectorKind.UNI_Y, points=(3, 9), exceedance=(3, 9), threshold=1.0)
    with pytest.raises(ValueError):
        cp.with_cis([(1, 4)], 0.05)
    assert cp.with_cis([(1, 4), (8, 10)], 0.05).cis == ((1, 4), (8, 10))


def test_bootstrap_requires_enough_replications(step_series):
    y = step_series([50], [0.0, 1.0], [1.0, 1.0])
    with pytest.raises(ValueError, match="at least 100"):
        bootstrap_cis(y, None, DetectorKind.UNI_Y, (50,), CFG, B=99)


def test_bootstrap_without_points(step_series):
    result = bootstrap_cis(step_series([], [0.0], [1.0]), None, DetectorKind.UNI_Y, (), CFG, B=100)
    assert result.intervals == ()
    assert result.deviations.shape == (100, 0)


def test_noiseless_step_has_zero_width():
    y = ContinuousSeries(np.r_[np.zeros(50), np.ones(50)])
    result = bootstrap_cis(y, None, DetectorKind.UNI_Y, (50,), CFG, B=100, seed=1)
    assert result.intervals == ((50, 50),)
    assert result.margins_at(0.01) == [0]


def test_bootstrap_is_deterministic(step_series):
    y = step_series([50], [0.0, 1.5], [1.0, 1.0], seed=2)
    a = bootstrap_cis(y, None, DetectorKind.UNI_Y, (50,), CFG, B=100, seed=5, workers=1)
    b = bootstrap_cis(y, None, DetectorKind.UNI_Y, (50,), CFG, B=100, seed=5, workers=4)
    np.testing.assert_array_equal(a.deviations, b.deviations)
    assert a.intervals == b.intervals


def test_intervals_widen_as_alpha_falls(step_series):
    y = step_series([50], [0.0, 1.0], [1.0, 1.0], seed=3)
    result = bootstrap_cis(y, None, DetectorKind.UNI_Y, (50,), CFG, B=200, seed=0)
    (lo1, hi1), = result.intervals_at(0.01)
    (lo2, hi2), = result.intervals_at(0.2)
    assert lo1 <= lo2 <= 50 <= hi2 <= hi1


def test_strong_step_interval_covers_truth(step_series):
    y = step_series([50], [0.0, 3.0], [1.0, 1.0], seed=4)
    result = bootstrap_cis(y, None, DetectorKind.UNI_Y, (50,), CFG, B=200, seed=0)
    (lo, hi), = result.intervals
    assert lo <= 50 <= hi
    assert hi - lo <= 10


def test_intervals_are_clipped(step_series):
    y = step_series([5], [0.0, 0.3], [1.0, 1.0], seed=5)
    result = bootstrap_cis(y, None, DetectorKind.UNI_Y, (5,), CFG, B=100, seed=0)
    (lo, hi), = result.intervals_at(0.0)
    assert lo >= 1 and hi <= 100


def test_cross_bootstrap_resamples_pairs(step_series):
    y = step_series([50], [0.0, 2.0], [1.0, 1.0], seed=6)
    x = step_series([50], [0.0, 2.0], [1.0, 1.0], seed=7)
    result = bootstrap_cis(y, x, DetectorKind.YX, (50,), CFG, B=100, seed=0)
    assert result.kind is DetectorKind.YX
    assert len(result.intervals) == 1


def test_short_segments_are_reported():
    y = ContinuousSeries(np.random.Generator(np.random.PCG64(0)).standard_normal(100))
    result = bootstrap_cis(y, None, DetectorKind.UNI_Y, (50, 51), CFG, B=100)
    assert result.short_segments == ((51, 51),)


def _bump_trace(centers, n=100):
    k = np.arange(1, n + 1)
    d2 = sum(30.0 * np.exp(-0.5 * ((k - c) / 1.5) ** 2) for c in centers)
    zeros = np.zeros(n)
    return DetectorTrace(kind=DetectorKind.UNI_Y, t1=zeros, t2=zeros, rho=zeros, d2=d2, cfg=CFG,
                         degenerate=np.zeros(n, dtype=bool))


def test_single_bump_gives_its_peak():
    assert extract_changepoints(_bump_trace([50]), threshold=2.0).points == (50,)


def test_two_bumps_give_two_points():
    cp = extract_changepoints(_bump_trace([40, 60]), threshold=2.0)
    assert cp.points == (40, 60)
    assert cp.exceedance_runs == [(37, 43), (57, 63)]


@pytest.mark.parametrize("seed", range(200))
def test_screened_points_are_separated_exceedances(seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    d2 = rng.chisquare(2, size=100) * rng.uniform(0.5, 3)
    radius = int(rng.integers(1, 10))
    mask = d2 > 4.0
    chosen = screen_local_maxima(d2, mask, radius)
    assert all(b - a > radius for a, b in zip(chosen, chosen[1:]))
    assert all(mask[p] for p in chosen)
    # every exceedance lies within the radius of a chosen point
    assert all(any(abs(k - p) <= radius for p in chosen) for k in np.flatnonzero(mask))


@pytest.mark.parametrize("seed", range(200))
def test_interval_width_is_monotone_in_alpha(seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    deviations = rng.integers(0, 20, size=(100, 3))
    result = BootstrapCIs(kind=DetectorKind.UNI_Y, points=(20, 50, 80), deviations=deviations, n=100,
                          alpha=0.05, intervals=())
    a1, a2 = sorted(rng.uniform(0, 0.5, size=2))
    for (lo1, hi1), (lo2, hi2) in zip(result.intervals_at(a1), result.intervals_at(a2)):
        assert lo1 <= lo2 and hi2 <= hi1

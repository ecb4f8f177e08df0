import numpy as np
import pytest

from src.processing.local_stats import (
    BandwidthError,
    Region,
    WindowConfig,
    averaged_scales,
    compute_local_moments,
    mean_diff_trace,
    region_tags,
    segment_mean,
    segment_var,
    var_diff_trace,
)


def _pvar(seg):
    return sum((v - sum(seg) / len(seg)) ** 2 for v in seg) / len(seg)


def _third(seg):
    m = sum(seg) / len(seg)
    return sum((v - m) ** 3 for v in seg) / len(seg)


def _fourth_scale(seg):
    m = sum(seg) / len(seg)
    sq = [(v - m) ** 2 for v in seg]
    s2 = sum(sq) / len(sq)
    return sum((q - s2) ** 2 for q in sq) / len(sq)


def naive_moments(x, G):
    """Per-k loop over plain Python lists, 1-based k throughout."""
    x = [float(v) for v in x]
    n = len(x)
    seg = lambda a, b: x[a - 1:b]
    d_mean, d_var, s2, v2, k3 = [], [], [], [], []
    for k in range(1, n + 1):
        if G <= k <= n - G:
            left, right = seg(k - G + 1, k), seg(k + 1, k + G)
            d_mean.append(sum(right) / G - sum(left) / G)
            d_var.append(_pvar(right) - _pvar(left))
            s2.append(0.5 * (_pvar(right) + _pvar(left)))
            v2.append(0.5 * (_fourth_scale(right) + _fourth_scale(left)))
            k3.append(0.5 * (_third(right) + _third(left)))
            continue
        if k < G:
            a, b = 1, 2 * G
            c = 2.0 / np.sqrt(k * (2 * G - k))
            ts = range(1, k + 1)
        else:
            a, b = n - 2 * G + 1, n
            c = 2.0 / np.sqrt((n + 1 - k) * (k - n + 2 * G))
            ts = range(n - 2 * G + 1, k + 1)
        block = seg(a, b)
        m = sum(block) / len(block)
        sq_mean = sum((v - m) ** 2 for v in block) / len(block)
        d_mean.append(c * sum(m - x[t - 1] for t in ts))
        d_var.append(c * sum(sq_mean - (x[t - 1] - m) ** 2 for t in ts))
        s2.append(_pvar(block))
        v2.append(_fourth_scale(block))
        k3.append(_third(block))
    return (np.array(d_mean), np.array(d_var), np.sqrt(s2), np.sqrt(v2), np.array(k3))


def test_segment_examples():
    assert segment_mean([1, 2, 3], 1, 3) == 2.0
    assert segment_var([1, 2, 3], 1, 3) == pytest.approx(2 / 3)
    assert segment_var([4.0] * 10, 2, 9) == 0.0


def test_segment_matches_two_pass(rng):
    x = rng.standard_normal(80)
    seg = x[10:60]
    assert segment_mean(x, 11, 60) == pytest.approx(seg.sum() / 50, abs=1e-12)
    assert segment_var(x, 11, 60) == pytest.approx(((seg - seg.sum() / 50) ** 2).sum() / 50, abs=1e-12)


@pytest.mark.parametrize("t1,t2", [(0, 3), (2, 1), (1, 11)])
def test_segment_out_of_range(t1, t2):
    with pytest.raises(ValueError):
        segment_mean(np.arange(10.0), t1, t2)


@pytest.mark.parametrize("seed", range(100))
def test_matches_naive_oracle(seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    G = int(rng.integers(1, 16))
    n = int(rng.integers(2 * G, 2 * G + 40))
    x = rng.standard_normal(n) * rng.uniform(0.1, 5) + rng.uniform(-3, 3)
    cfg = WindowConfig(G=G, n=n)
    expected = naive_moments(x, G)
    m = compute_local_moments(x, cfg)
    for got, want in zip((m.d_mean, m.d_var, m.s_bar, m.v_bar, m.k_bar), expected):
        np.testing.assert_allclose(got, want, atol=1e-10, rtol=0)


def test_constant_series_has_zero_differences():
    cfg = WindowConfig(G=10, n=50)
    x = np.full(50, 3.7)
    np.testing.assert_allclose(mean_diff_trace(x, cfg), 0.0, atol=1e-12)
    np.testing.assert_allclose(var_diff_trace(x, cfg), 0.0, atol=1e-12)
    s_bar, v_bar, _ = averaged_scales(x, cfg)
    np.testing.assert_allclose(s_bar, 0.0, atol=1e-7)
    np.testing.assert_allclose(v_bar, 0.0, atol=1e-7)


def test_step_mean_difference():
    x = np.r_[np.zeros(50), np.ones(50)]
    assert mean_diff_trace(x, WindowConfig(G=20, n=100))[49] == pytest.approx(1.0)


def test_variance_step_concentrates():
    cfg = WindowConfig(G=20, n=100)
    values = []
    for seed in range(200):
        rng = np.random.Generator(np.random.PCG64(seed))
        x = np.r_[0.1 * rng.standard_normal(50), 0.8 * rng.standard_normal(50)]
        values.append(var_diff_trace(x, cfg)[49])
    # population divisor: E[S^2] = sigma^2 (G - 1) / G
    assert np.mean(values) == pytest.approx((0.8 ** 2 - 0.1 ** 2) * 19 / 20, abs=0.05)


def test_gaussian_scales():
    cfg = WindowConfig(G=40, n=100)
    s, v2 = [], []
    for seed in range(200):
        x = np.random.Generator(np.random.PCG64(seed)).standard_normal(100)
        s_bar, v_bar, _ = averaged_scales(x, cfg)
        s.append(s_bar[49])
        v2.append(v_bar[49] ** 2)
    assert np.mean(s) == pytest.approx(1.0, rel=0.1)
    assert np.mean(v2) == pytest.approx(2.0, rel=0.15)


def test_symmetric_alternating_has_zero_third_moment():
    cfg = WindowConfig(G=10, n=60)
    x = np.tile([-1.0, 1.0], 30)
    _, _, k_bar = averaged_scales(x, cfg)
    np.testing.assert_allclose(k_bar, 0.0, atol=1e-12)


@pytest.mark.parametrize("seed", range(200))
def test_translation_and_scale(seed):
    rng = np.random.Generator(np.random.PCG64(1000 + seed))
    cfg = WindowConfig(G=int(rng.integers(2, 12)), n=60)
    x = rng.standard_normal(60)
    c, lam = rng.uniform(-10, 10), rng.uniform(0.2, 5)
    base = compute_local_moments(x, cfg)
    shifted = compute_local_moments(x + c, cfg)
    scaled = compute_local_moments(lam * x, cfg)
    for name in ("d_mean", "d_var", "s_bar", "v_bar", "k_bar"):
        np.testing.assert_allclose(getattr(shifted, name), getattr(base, name), atol=1e-10)
    np.testing.assert_allclose(scaled.d_mean, lam * base.d_mean, atol=1e-10)
    np.testing.assert_allclose(scaled.s_bar, lam * base.s_bar, atol=1e-10)
    np.testing.assert_allclose(scaled.d_var, lam ** 2 * base.d_var, atol=1e-9)
    np.testing.assert_allclose(scaled.v_bar, lam ** 2 * base.v_bar, atol=1e-9)
    np.testing.assert_allclose(scaled.k_bar, lam ** 3 * base.k_bar, atol=1e-8)


def test_regions_partition():
    cfg = WindowConfig(G=20, n=100)
    tags = region_tags(cfg)
    interior = np.flatnonzero(tags == Region.INTERIOR) + 1
    assert interior[0] == 20 and interior[-1] == 80
    assert np.sum(tags == Region.LEFT) == 19
    assert np.sum(tags == Region.RIGHT) == 20
    assert tags.size == 100


def test_bandwidth_too_large():
    with pytest.raises(BandwidthError, match="bandwidth too large"):
        WindowConfig(G=40, n=50)


@pytest.mark.parametrize("kwargs", [{"G": 0, "n": 10}, {"G": 2, "n": 10, "eta": 1.0}, {"G": 2, "n": 10, "alpha": 0.0}])
def test_invalid_config(kwargs):
    with pytest.raises(ValueError):
        WindowConfig(**kwargs)


def test_screen_radius():
    assert WindowConfig(G=20, n=100).screen_radius == 4
    assert WindowConfig(G=40, n=100).screen_radius == 8
    assert WindowConfig(G=21, n=100).screen_radius == 5


def test_length_mismatch():
    with pytest.raises(ValueError, match="does not match"):
        mean_diff_trace(np.zeros(30), WindowConfig(G=5, n=40))


def test_moments_frame():
    cfg = WindowConfig(G=5, n=20)
    frame = compute_local_moments(np.arange(20.0) ** 1.5, cfg).to_frame()
    assert list(frame.columns) == ["k", "region", "d_mean", "d_var", "s_bar", "v_bar", "k_bar"]
    assert frame["region"].tolist()[:4] == ["left"] * 4

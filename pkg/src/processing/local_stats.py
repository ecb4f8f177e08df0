"""
Local Statistics - Rolling window moments and moment differences

Time indices k are 1-based in every docstring and output; array position
i holds the value for k = i + 1. Windows use population divisors.

Regions:
    left boundary   k = 1 .. G-1       single window (1, 2G), CUSUM form
    interior        k = G .. n-G       windows (k-G+1, k) and (k+1, k+G)
    right boundary  k = n-G+1 .. n     single window (n-2G+1, n), CUSUM form
"""

from dataclasses import dataclass
from enum import IntEnum
from typing import Callable, Sequence

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view

from src.utils.logger import setup_logger


logger = setup_logger(__name__)


class BandwidthError(ValueError):
    """Raised when the series is too short for the bandwidth."""


class Region(IntEnum):
    LEFT = -1
    INTERIOR = 0
    RIGHT = 1


@dataclass(frozen=True)
class WindowConfig:
    """
    Bandwidth and level settings shared by every detector of one analysis.

    Attributes:
        G: Bandwidth (window length in time points)
        n: Series length
        eta: Screening fraction for local-maximum pruning
        alpha: Significance level
    """

    G: int
    n: int
    eta: float = 0.2
    alpha: float = 0.05

    def __post_init__(self):
        if int(self.G) != self.G or self.G < 1:
            raise ValueError(f"bandwidth must be a positive integer, got {self.G}")
        if self.n < 2 * self.G:
            raise BandwidthError(f"bandwidth too large: G={self.G} needs n >= {2 * self.G}, got n={self.n}")
        if not 0.0 < self.eta < 1.0:
            raise ValueError(f"eta must lie in (0, 1), got {self.eta}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")

    @property
    def screen_radius(self) -> int:
        """Suppression half-width ceil(eta * G) used by local-maximum screening"""
        return int(np.ceil(self.eta * self.G - 1e-9))


@dataclass(frozen=True)
class LocalMoments:
    """Per-k local moment differences and locally averaged scales of one series."""

    d_mean: np.ndarray
    d_var: np.ndarray
    s_bar: np.ndarray
    v_bar: np.ndarray
    k_bar: np.ndarray
    regions: np.ndarray

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "k": np.arange(1, self.d_mean.size + 1),
            "region": [Region(r).name.lower() for r in self.regions],
            "d_mean": self.d_mean,
            "d_var": self.d_var,
            "s_bar": self.s_bar,
            "v_bar": self.v_bar,
            "k_bar": self.k_bar,
        })


def _as_array(series) -> np.ndarray:
    return np.asarray(getattr(series, "values", series), dtype=float)


def _check(x: np.ndarray, cfg: WindowConfig) -> None:
    if x.size != cfg.n:
        raise ValueError(f"series length {x.size} does not match config n={cfg.n}")


def segment_mean(series, t1: int, t2: int) -> float:
    """Mean of X_t1..X_t2 (1-based, inclusive)."""
    x = _as_array(series)
    if not 1 <= t1 <= t2 <= x.size:
        raise ValueError(f"segment ({t1}, {t2}) outside 1..{x.size}")
    return float(np.mean(x[t1 - 1:t2]))


def segment_var(series, t1: int, t2: int) -> float:
    """Population variance of X_t1..X_t2 (divisor t2 - t1 + 1)."""
    x = _as_array(series)
    if not 1 <= t1 <= t2 <= x.size:
        raise ValueError(f"segment ({t1}, {t2}) outside 1..{x.size}")
    seg = x[t1 - 1:t2]
    return float(np.mean((seg - seg.mean()) ** 2))


def region_tags(cfg: WindowConfig) -> np.ndarray:
    """Region code per k; the three regions partition 1..n."""
    tags = np.full(cfg.n, Region.INTERIOR, dtype=np.int8)
    tags[:cfg.G - 1] = Region.LEFT
    tags[cfg.n - cfg.G:] = Region.RIGHT
    return tags


# Window statistics. Each takes stacked windows (..., width) and reduces the last axis.

def _centered(w: np.ndarray) -> np.ndarray:
    return w - w.mean(axis=-1, keepdims=True)


def window_mean(w: np.ndarray) -> np.ndarray:
    return w.mean(axis=-1)


def window_var(w: np.ndarray) -> np.ndarray:
    return np.mean(_centered(w) ** 2, axis=-1)


def window_third(w: np.ndarray) -> np.ndarray:
    return np.mean(_centered(w) ** 3, axis=-1)


def window_fourth_scale(w: np.ndarray) -> np.ndarray:
    """V^2(a, b): mean of ((X - mean)^2 - S^2)^2"""
    sq = _centered(w) ** 2
    return np.mean((sq - sq.mean(axis=-1, keepdims=True)) ** 2, axis=-1)


WindowStat = Callable[..., np.ndarray]


def local_average(stat: WindowStat, arrays: Sequence[np.ndarray], cfg: WindowConfig) -> np.ndarray:
    """
    Locally averaged window statistic for every k.

    Interior k averages the statistic over the windows (k-G+1, k) and
    (k+1, k+G); boundary k take it from the single 2G-window at that end.

    Args:
        stat: Window statistic taking one stacked-window array per input series
        arrays: Input series of length n (time-aligned)
        cfg: Window configuration

    Returns:
        Array of length n
    """
    n, G = cfg.n, cfg.G
    per_window = stat(*[sliding_window_view(a, G) for a in arrays])
    ks = np.arange(G, n - G + 1)

    out = np.empty(n)
    # window starting at 0-based index k holds X_{k+1..k+G}
    out[ks - 1] = 0.5 * (per_window[ks] + per_window[ks - G])
    out[:G - 1] = stat(*[a[:2 * G] for a in arrays])
    out[n - G:] = stat(*[a[n - 2 * G:] for a in arrays])
    return out


def _boundary_cusum(deviations_left: np.ndarray, deviations_right: np.ndarray,
                    out: np.ndarray, cfg: WindowConfig) -> None:
    """Fill boundary k with the scaled partial sums of block deviations."""
    n, G = cfg.n, cfg.G
    if G > 1:
        k_left = np.arange(1, G)
        c1 = 2.0 / np.sqrt(k_left * (2 * G - k_left))
        out[:G - 1] = c1 * np.cumsum(deviations_left)[:G - 1]

    k_right = np.arange(n - G + 1, n + 1)
    cn = 2.0 / np.sqrt((n + 1 - k_right) * (k_right - n + 2 * G))
    # partial sums over t = n-2G+1 .. k
    partial = np.cumsum(deviations_right)[k_right - (n - 2 * G) - 1]
    out[n - G:] = cn * partial


def mean_diff_trace(series, cfg: WindowConfig) -> np.ndarray:
    """
    Local difference of means dX(k).

    Interior: mean(k+1, k+G) - mean(k-G+1, k). Boundaries: scaled partial
    sums of deviations from the 2G-block mean.
    """
    x = _as_array(series)
    _check(x, cfg)
    n, G = cfg.n, cfg.G

    means = window_mean(sliding_window_view(x, G))
    ks = np.arange(G, n - G + 1)
    out = np.empty(n)
    out[ks - 1] = means[ks] - means[ks - G]

    left, right = x[:2 * G], x[n - 2 * G:]
    _boundary_cusum(left.mean() - left, right.mean() - right, out, cfg)
    return out


def var_diff_trace(series, cfg: WindowConfig) -> np.ndarray:
    """
    Local difference of variances dS^2(k), same three-region layout as
    mean_diff_trace with squared deviations from the local means.
    """
    x = _as_array(series)
    _check(x, cfg)
    n, G = cfg.n, cfg.G

    variances = window_var(sliding_window_view(x, G))
    ks = np.arange(G, n - G + 1)
    out = np.empty(n)
    out[ks - 1] = variances[ks] - variances[ks - G]

    left, right = x[:2 * G], x[n - 2 * G:]
    sq_left = (left - left.mean()) ** 2
    sq_right = (right - right.mean()) ** 2
    _boundary_cusum(sq_left.mean() - sq_left, sq_right.mean() - sq_right, out, cfg)
    return out


def averaged_scales(series, cfg: WindowConfig):
    """
    Locally averaged standard deviation, kurtosis scale and third moment.

    Returns:
        (s_bar, v_bar, k_bar) where s_bar = sqrt(avg S^2), v_bar = sqrt(avg V^2)
        and k_bar = avg of the third central moment
    """
    x = _as_array(series)
    _check(x, cfg)
    s_bar = np.sqrt(np.maximum(local_average(window_var, [x], cfg), 0.0))
    v_bar = np.sqrt(np.maximum(local_average(window_fourth_scale, [x], cfg), 0.0))
    k_bar = local_average(window_third, [x], cfg)
    return s_bar, v_bar, k_bar


def compute_local_moments(series, cfg: WindowConfig) -> LocalMoments:
    """All local moment arrays of one series in one call."""
    s_bar, v_bar, k_bar = averaged_scales(series, cfg)
    return LocalMoments(
        d_mean=mean_diff_trace(series, cfg),
        d_var=var_diff_trace(series, cfg),
        s_bar=s_bar,
        v_bar=v_bar,
        k_bar=k_bar,
        regions=region_tags(cfg),
    )

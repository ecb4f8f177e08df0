"""
Detectors - Standardized mean/variance detectors and their Mahalanobis fusion

Univariate kinds fuse the mean and variance detectors of one series;
cross kinds fuse one feature detector of Y with one feature detector of X.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd

from src.core.series import ContinuousSeries
from src.processing.local_stats import (
    LocalMoments,
    Region,
    WindowConfig,
    compute_local_moments,
    local_average,
    region_tags,
)
from src.utils.logger import setup_logger


logger = setup_logger(__name__)

DENOMINATOR_FLOOR = 1e-12
RHO_CLAMP = 0.999


class DetectorKind(str, Enum):
    """The six detector targets; cross tags read (feature of Y, feature of X)."""

    UNI_Y = "UniY"
    UNI_X = "UniX"
    YX = "YX"
    YX2 = "YX2"
    Y2X = "Y2X"
    Y2X2 = "Y2X2"

    @property
    def is_cross(self) -> bool:
        return self not in (DetectorKind.UNI_Y, DetectorKind.UNI_X)

    @property
    def features(self) -> Tuple[str, str]:
        """(feature of the first component, feature of the second component)"""
        return _FEATURES[self]

    @classmethod
    def parse(cls, label: str) -> "DetectorKind":
        """Accept "YX2", "YX^2", "YX²", "unix" and similar spellings."""
        key = label.strip().replace("²", "2").replace("^", "").replace(" ", "").lower()
        for kind in cls:
            if kind.value.lower() == key:
                return kind
        raise ValueError(f"unknown detector kind '{label}' (expected one of {[k.value for k in cls]})")


_FEATURES = {
    DetectorKind.UNI_Y: ("mean", "var"),
    DetectorKind.UNI_X: ("mean", "var"),
    DetectorKind.YX: ("mean", "mean"),
    DetectorKind.YX2: ("mean", "var"),
    DetectorKind.Y2X: ("var", "mean"),
    DetectorKind.Y2X2: ("var", "var"),
}

CROSS_KINDS = (DetectorKind.YX, DetectorKind.YX2, DetectorKind.Y2X, DetectorKind.Y2X2)


@dataclass(frozen=True)
class DetectorTrace:
    """
    Per-k detector values for one kind.

    Attributes:
        kind: Detector kind
        t1: First detector component
        t2: Second detector component
        rho: Local correlation, clamped to [-0.999, 0.999]
        d2: Mahalanobis distance, >= 0
        cfg: Window configuration used
        degenerate: True where a detector denominator fell below the floor
    """

    kind: DetectorKind
    t1: np.ndarray
    t2: np.ndarray
    rho: np.ndarray
    d2: np.ndarray
    cfg: WindowConfig
    degenerate: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return int(self.d2.size)

    def to_frame(self) -> pd.DataFrame:
        """Plot-ready table with columns k, t1, t2, rho, d2, region, degenerate"""
        return pd.DataFrame({
            "k": np.arange(1, self.n + 1),
            "t1": self.t1,
            "t2": self.t2,
            "rho": self.rho,
            "d2": self.d2,
            "region": [Region(r).name.lower() for r in region_tags(self.cfg)],
            "degenerate": self.degenerate.astype(int),
        })


def _ratio(numerator: np.ndarray, denominator: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """numerator / denominator with 0/0 -> 0 and x/0 -> x / floor, flagging both."""
    flagged = denominator < DENOMINATOR_FLOOR
    safe = np.where(flagged, DENOMINATOR_FLOOR, denominator)
    out = numerator / safe
    # round-off residue of a constant window counts as a zero numerator
    out = np.where(flagged & (np.abs(numerator) < DENOMINATOR_FLOOR), 0.0, out)
    return out, flagged


def _standardize(cfg: WindowConfig) -> float:
    # both window-difference forms have null variance 2/G times the local scale
    return float(np.sqrt(cfg.G / 2.0))


def _values(series) -> np.ndarray:
    return np.asarray(getattr(series, "values", series), dtype=float)


def _moments(series, cfg: WindowConfig, moments: Optional[LocalMoments]) -> LocalMoments:
    return moments if moments is not None else compute_local_moments(series, cfg)


def t1_trace(series, cfg: WindowConfig, moments: Optional[LocalMoments] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Standardized mean-change detector.

    Returns:
        (T1 values, degenerate flags)
    """
    m = _moments(series, cfg, moments)
    ratio, flagged = _ratio(m.d_mean, m.s_bar)
    return _standardize(cfg) * ratio, flagged


def t2_trace(series, cfg: WindowConfig, moments: Optional[LocalMoments] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Standardized variance-change detector.

    Returns:
        (T2 values, degenerate flags)
    """
    m = _moments(series, cfg, moments)
    ratio, flagged = _ratio(m.d_var, m.v_bar)
    return _standardize(cfg) * ratio, flagged


def mahalanobis_2x2(t1: np.ndarray, t2: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """
    J' Gamma^-1 J for J = (t1, t2) and Gamma = [[1, rho], [rho, 1]].

    Written as (t1 - rho t2)^2 / (1 - rho^2) + t2^2, which is nonnegative
    term by term for |rho| < 1.
    """
    return (t1 - rho * t2) ** 2 / (1.0 - rho ** 2) + t2 ** 2


def _clamped_correlation(numerator: np.ndarray, scale_a: np.ndarray, scale_b: np.ndarray) -> np.ndarray:
    rho, _ = _ratio(numerator, scale_a * scale_b)
    return np.clip(rho, -RHO_CLAMP, RHO_CLAMP)


def joint_univariate(series, cfg: WindowConfig,
                     kind: DetectorKind = DetectorKind.UNI_Y,
                     moments: Optional[LocalMoments] = None) -> DetectorTrace:
    """
    Joint mean+variance detector of one series.

    rho(k) = K(k) / (S(k) V(k)) from the locally averaged third moment.

    Args:
        series: Input series
        cfg: Window configuration
        kind: UniY or UniX label for the output
        moments: Precomputed local moments of the series

    Returns:
        DetectorTrace
    """
    if kind.is_cross:
        raise ValueError(f"{kind.value} is a cross kind; use joint_bivariate")
    m = _moments(series, cfg, moments)
    t1, flag1 = t1_trace(series, cfg, m)
    t2, flag2 = t2_trace(series, cfg, m)
    rho = _clamped_correlation(m.k_bar, m.s_bar, m.v_bar)
    d2 = mahalanobis_2x2(t1, t2, rho)

    degenerate = flag1 | flag2
    if degenerate.any():
        logger.debug(f"{kind.value}: {int(degenerate.sum())} k with degenerate local scale")
    return DetectorTrace(kind=kind, t1=t1, t2=t2, rho=rho, d2=d2, cfg=cfg, degenerate=degenerate)


# Cross window statistics on stacked windows (..., G)

def _cross_mean_mean(yw: np.ndarray, xw: np.ndarray) -> np.ndarray:
    cy = yw - yw.mean(axis=-1, keepdims=True)
    cx = xw - xw.mean(axis=-1, keepdims=True)
    return np.mean(cy * cx, axis=-1)


def _cross_mean_var(yw: np.ndarray, xw: np.ndarray) -> np.ndarray:
    cy = yw - yw.mean(axis=-1, keepdims=True)
    cx = xw - xw.mean(axis=-1, keepdims=True)
    return np.mean(cy * cx ** 2, axis=-1)


def _cross_var_mean(yw: np.ndarray, xw: np.ndarray) -> np.ndarray:
    return _cross_mean_var(xw, yw)


def _cross_var_var(yw: np.ndarray, xw: np.ndarray) -> np.ndarray:
    sy = (yw - yw.mean(axis=-1, keepdims=True)) ** 2
    sx = (xw - xw.mean(axis=-1, keepdims=True)) ** 2
    return np.mean((sy - sy.mean(axis=-1, keepdims=True)) * (sx - sx.mean(axis=-1, keepdims=True)), axis=-1)


_CROSS_STATS = {
    DetectorKind.YX: _cross_mean_mean,
    DetectorKind.YX2: _cross_mean_var,
    DetectorKind.Y2X: _cross_var_mean,
    DetectorKind.Y2X2: _cross_var_var,
}


def joint_bivariate(y, x, kind: DetectorKind, cfg: WindowConfig,
                    y_moments: Optional[LocalMoments] = None,
                    x_moments: Optional[LocalMoments] = None) -> DetectorTrace:
    """
    Cross-series detector: one feature detector of Y fused with one of X.

    The local correlation is the locally averaged cross moment of the
    matching centered powers, scaled by S for mean features and V for
    variance features.

    Args:
        y: Stress (first) series
        x: Sensing (second) series
        kind: One of YX, YX2, Y2X, Y2X2
        cfg: Window configuration
        y_moments: Precomputed local moments of y
        x_moments: Precomputed local moments of x

    Returns:
        DetectorTrace
    """
    if not kind.is_cross:
        raise ValueError(f"{kind.value} is univariate; use joint_univariate")
    yv, xv = _values(y), _values(x)
    if yv.size != xv.size:
        raise ValueError(f"length mismatch: y has {yv.size} points, x has {xv.size}")

    my = _moments(yv, cfg, y_moments)
    mx = _moments(xv, cfg, x_moments)
    y_feature, x_feature = kind.features

    t1, flag1 = (t1_trace if y_feature == "mean" else t2_trace)(yv, cfg, my)
    t2, flag2 = (t1_trace if x_feature == "mean" else t2_trace)(xv, cfg, mx)

    scale_y = my.s_bar if y_feature == "mean" else my.v_bar
    scale_x = mx.s_bar if x_feature == "mean" else mx.v_bar
    cross = local_average(_CROSS_STATS[kind], [yv, xv], cfg)
    rho = _clamped_correlation(cross, scale_y, scale_x)

    d2 = mahalanobis_2x2(t1, t2, rho)
    return DetectorTrace(kind=kind, t1=t1, t2=t2, rho=rho, d2=d2, cfg=cfg, degenerate=flag1 | flag2)


def compute_trace(kind: DetectorKind,
                  y: Optional[ContinuousSeries],
                  x: Optional[ContinuousSeries],
                  cfg: WindowConfig,
                  moments: Optional[Dict[str, LocalMoments]] = None) -> DetectorTrace:
    """
    Dispatch to the univariate or bivariate detector for a kind.

    Args:
        kind: Detector kind
        y: Stress series (required for UniY and all cross kinds)
        x: Sensing series (required for UniX and all cross kinds)
        cfg: Window configuration
        moments: Optional cache {"y": ..., "x": ...} of local moments

    Returns:
        DetectorTrace
    """
    moments = moments or {}
    if kind is DetectorKind.UNI_Y:
        if y is None:
            raise ValueError("UniY needs the stress series")
        return joint_univariate(y, cfg, kind, moments.get("y"))
    if kind is DetectorKind.UNI_X:
        if x is None:
            raise ValueError("UniX needs the sensing series")
        return joint_univariate(x, cfg, kind, moments.get("x"))
    if y is None or x is None:
        raise ValueError(f"{kind.value} needs both series")
    return joint_bivariate(y, x, kind, cfg, moments.get("y"), moments.get("x"))

"""
Hotspots - Fuse anchor and cross-series detections into interval sets
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.processing.detectors import CROSS_KINDS, DetectorKind, DetectorTrace
from src.processing.segmentation import ChangePointSet, Interval, exceeds, mask_to_runs
from src.utils.logger import setup_logger


logger = setup_logger(__name__)


class MissingTraceError(KeyError):
    """Raised when a hotspot rule lacks a detector kind it needs."""


class HotspotMode(str, Enum):
    THRESHOLD = "threshold"
    CI = "ci"


@dataclass(frozen=True)
class CombinationSpec:
    """
    Which detections a hotspot rule combines.

    Attributes:
        cross_kinds: Cross kinds whose evidence is united
        anchor: Univariate kind intersected with the cross evidence
        mode: Thresholding rule or confidence-interval rule
    """

    cross_kinds: Tuple[DetectorKind, ...] = CROSS_KINDS
    anchor: DetectorKind = DetectorKind.UNI_Y
    mode: HotspotMode = HotspotMode.THRESHOLD

    def __post_init__(self):
        kinds = tuple(DetectorKind(k) for k in self.cross_kinds)
        if not kinds:
            raise ValueError("combination needs at least one cross kind")
        if len(set(kinds)) != len(kinds):
            raise ValueError(f"duplicate cross kinds in {[k.value for k in kinds]}")
        if not all(k.is_cross for k in kinds):
            raise ValueError("cross_kinds may only contain YX, YX2, Y2X, Y2X2")
        if DetectorKind(self.anchor) not in (DetectorKind.UNI_Y, DetectorKind.UNI_X):
            raise ValueError("anchor must be UniY or UniX")
        object.__setattr__(self, "cross_kinds", kinds)
        object.__setattr__(self, "anchor", DetectorKind(self.anchor))
        object.__setattr__(self, "mode", HotspotMode(self.mode))

    @property
    def required_kinds(self) -> Tuple[DetectorKind, ...]:
        return (self.anchor,) + self.cross_kinds

    def to_dict(self) -> Dict[str, Any]:
        return {
            "cross_kinds": [k.value for k in self.cross_kinds],
            "anchor": self.anchor.value,
            "mode": self.mode.value,
        }


@dataclass(frozen=True)
class HotspotSet:
    """
    Normalized hotspot intervals with the cross kinds supporting each.

    Attributes:
        intervals: Sorted, disjoint, non-adjacent closed intervals within 1..n
        n: Series length
        spec: Combination that produced them
        provenance: Contributing cross kinds per interval
    """

    intervals: Tuple[Interval, ...]
    n: int
    spec: CombinationSpec
    provenance: Tuple[Tuple[DetectorKind, ...], ...] = field(default=())

    @property
    def mode(self) -> HotspotMode:
        return self.spec.mode

    def mask(self) -> np.ndarray:
        return intervals_to_mask(self.intervals, self.n)

    def contains(self, k: int) -> bool:
        return any(lo <= k <= hi for lo, hi in self.intervals)

    def total_length(self) -> int:
        return sum(hi - lo + 1 for lo, hi in self.intervals)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mode": self.mode.value,
            "spec": self.spec.to_dict(),
            "intervals": [list(iv) for iv in self.intervals],
            "provenance": [[k.value for k in kinds] for kinds in self.provenance],
        }

    def shading_frame(self) -> pd.DataFrame:
        """Per-k 0/1 hotspot indicator for plot shading"""
        return pd.DataFrame({
            "k": np.arange(1, self.n + 1),
            f"hotspot_{self.mode.value}": self.mask().astype(int),
        })


def intervals_to_mask(intervals: Sequence[Interval], n: int) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    for lo, hi in intervals:
        # fractional endpoints round outward
        lo, hi = max(1, math.floor(lo)), min(n, math.ceil(hi))
        if lo <= hi:
            mask[lo - 1:hi] = True
    return mask


def normalize(intervals: Sequence[Interval], n: int) -> List[Interval]:
    """
    Sort, clip to 1..n and merge overlapping or adjacent intervals.

    Raises:
        ValueError: An interval with lo > hi
    """
    for lo, hi in intervals:
        if lo > hi:
            raise ValueError(f"interval [{lo}, {hi}] has lo > hi")
    return mask_to_runs(intervals_to_mask(intervals, n))


def _require(mapping: Mapping[DetectorKind, Any], kinds: Sequence[DetectorKind], what: str) -> None:
    missing = [k.value for k in kinds if k not in mapping]
    if missing:
        raise MissingTraceError(f"missing {what} for {missing}")


def hotspots_threshold(traces: Mapping[DetectorKind, DetectorTrace],
                       threshold: float,
                       spec: CombinationSpec) -> HotspotSet:
    """
    Thresholding rule: k where the anchor and at least one cross kind exceed.

    Args:
        traces: Detector traces by kind (same cfg)
        threshold: Critical value (distance scale)
        spec: Combination spec

    Returns:
        HotspotSet of maximal runs
    """
    spec = replace(spec, mode=HotspotMode.THRESHOLD)
    _require(traces, spec.required_kinds, "trace")
    anchor = traces[spec.anchor]
    n = anchor.n
    if any(traces[k].n != n for k in spec.cross_kinds):
        raise ValueError("traces differ in length")

    cross_masks = {k: exceeds(traces[k].d2, threshold) for k in spec.cross_kinds}
    any_cross = np.logical_or.reduce(list(cross_masks.values()))
    mask = any_cross & exceeds(anchor.d2, threshold)

    intervals = mask_to_runs(mask)
    provenance = tuple(
        tuple(k for k in spec.cross_kinds if (cross_masks[k] & mask)[lo - 1:hi].any())
        for lo, hi in intervals
    )
    logger.debug(f"Thresholding hotspots: {intervals}")
    return HotspotSet(intervals=tuple(intervals), n=n, spec=spec, provenance=provenance)


def hotspots_ci(cps: Mapping[DetectorKind, ChangePointSet],
                spec: CombinationSpec,
                n: int,
                alpha: Optional[float] = None) -> HotspotSet:
    """
    Confidence-interval rule: union of cross-kind CIs intersected with the anchor's CIs.

    Args:
        cps: Change-point sets by kind, each carrying intervals
        spec: Combination spec
        n: Series length
        alpha: Expected interval level; checked against every set when given

    Returns:
        HotspotSet
    """
    spec = replace(spec, mode=HotspotMode.CI)
    _require(cps, spec.required_kinds, "change points")
    for kind in spec.required_kinds:
        cp = cps[kind]
        if cp.cis is None:
            raise ValueError(f"{kind.value} change points carry no confidence intervals")
        if alpha is not None and cp.ci_alpha is not None and not np.isclose(cp.ci_alpha, alpha):
            raise ValueError(f"{kind.value} intervals are at alpha={cp.ci_alpha}, expected {alpha}")

    cross_masks = {k: intervals_to_mask(cps[k].cis, n) for k in spec.cross_kinds}
    any_cross = np.logical_or.reduce(list(cross_masks.values()))
    mask = any_cross & intervals_to_mask(cps[spec.anchor].cis, n)

    intervals = mask_to_runs(mask)
    provenance = tuple(
        tuple(k for k in spec.cross_kinds if cross_masks[k][lo - 1:hi].any())
        for lo, hi in intervals
    )
    logger.debug(f"CI hotspots: {intervals}")
    return HotspotSet(intervals=tuple(intervals), n=n, spec=spec, provenance=provenance)

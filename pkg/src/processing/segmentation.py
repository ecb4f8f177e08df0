"""
Segmentation - Threshold exceedance, local-maximum screening and bootstrap CIs

Critical values live on the distance scale, so k exceeds the threshold
when sqrt(d2(k)) > D, i.e. d2(k) > D^2.
"""

import os
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from src.core.series import ContinuousSeries
from src.processing.critical_values import upper_order_index
from src.processing.detectors import DetectorKind, DetectorTrace, compute_trace
from src.processing.local_stats import WindowConfig
from src.utils.logger import setup_logger


logger = setup_logger(__name__)

MIN_BOOTSTRAP = 100

Interval = Tuple[int, int]


def exceeds(d2: np.ndarray, threshold: float) -> np.ndarray:
    """Boolean exceedance mask: sqrt(d2) > threshold."""
    return np.asarray(d2) > threshold ** 2


def mask_to_runs(mask: np.ndarray) -> List[Interval]:
    """Maximal runs of True as 1-based closed intervals."""
    padded = np.concatenate(([False], np.asarray(mask, dtype=bool), [False]))
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    starts, stops = edges[0::2], edges[1::2]
    return [(int(s) + 1, int(e)) for s, e in zip(starts, stops)]


@dataclass(frozen=True)
class ChangePointSet:
    """
    Screened change points of one detector kind.

    Attributes:
        kind: Detector kind
        points: Sorted 1-based change-point locations
        exceedance: Sorted 1-based k with d2(k) above the threshold
        threshold: Critical value used (distance scale)
        cis: Per-point closed intervals, once bootstrapped
        ci_alpha: Level of the intervals
    """

    kind: DetectorKind
    points: Tuple[int, ...]
    exceedance: Tuple[int, ...]
    threshold: float
    cis: Optional[Tuple[Interval, ...]] = None
    ci_alpha: Optional[float] = None

    @property
    def exceedance_runs(self) -> List[Interval]:
        runs: List[Interval] = []
        for k in self.exceedance:
            if runs and runs[-1][1] == k - 1:
                runs[-1] = (runs[-1][0], k)
            else:
                runs.append((k, k))
        return runs

    def with_cis(self, cis: List[Interval], alpha: float) -> "ChangePointSet":
        if len(cis) != len(self.points):
            raise ValueError(f"{len(cis)} intervals for {len(self.points)} change points")
        return replace(self, cis=tuple((int(lo), int(hi)) for lo, hi in cis), ci_alpha=alpha)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "threshold": self.threshold,
            "points": list(self.points),
            "exceedance_runs": [list(run) for run in self.exceedance_runs],
            "cis": [list(ci) for ci in self.cis] if self.cis is not None else None,
            "ci_alpha": self.ci_alpha,
        }


def screen_local_maxima(d2: np.ndarray, candidates: np.ndarray, radius: int) -> List[int]:
    """
    Greedy max-then-suppress over candidate positions.

    Takes the largest remaining candidate (ties to the smaller index),
    emits it and removes every candidate within +-radius.

    Args:
        d2: Statistic values (0-based positions)
        candidates: Boolean mask of admissible positions
        radius: Suppression half-width

    Returns:
        Sorted 0-based positions
    """
    remaining = np.asarray(candidates, dtype=bool).copy()
    chosen: List[int] = []
    while remaining.any():
        masked = np.where(remaining, d2, -np.inf)
        best = int(np.argmax(masked))
        chosen.append(best)
        remaining[max(0, best - radius):best + radius + 1] = False
    return sorted(chosen)


def extract_changepoints(trace: DetectorTrace, threshold: float) -> ChangePointSet:
    """
    Change points of a trace: exceedance set screened to separated local maxima.

    Args:
        trace: Detector trace
        threshold: Critical value on the distance scale

    Returns:
        ChangePointSet without intervals
    """
    mask = exceeds(trace.d2, threshold)
    radius = trace.cfg.screen_radius
    positions = screen_local_maxima(trace.d2, mask, radius)
    points = tuple(p + 1 for p in positions)
    logger.debug(f"{trace.kind.value}: {int(mask.sum())} exceedances -> points {list(points)}")
    return ChangePointSet(
        kind=trace.kind,
        points=points,
        exceedance=tuple(int(k) + 1 for k in np.flatnonzero(mask)),
        threshold=float(threshold),
    )


def segment_bounds(points: Tuple[int, ...], n: int) -> List[Interval]:
    """Segments {k_(j-1)+1 .. k_j} between consecutive points with sentinels 0 and n."""
    cuts = [0] + sorted(points) + [n]
    return [(cuts[j - 1] + 1, cuts[j]) for j in range(1, len(cuts)) if cuts[j] >= cuts[j - 1] + 1]


@dataclass(frozen=True)
class BootstrapCIs:
    """
    Bootstrap localization errors of a set of change points.

    Attributes:
        kind: Detector kind
        points: Change points being assessed (1-based)
        deviations: |k_j^(b) - k_j|, shape (B, number of points)
        alpha: Level of `intervals`
        intervals: Pointwise intervals k_j -+ M_j(alpha), clipped to 1..n
        short_segments: Segments of fewer than two points (resampling just repeats them)
    """

    kind: DetectorKind
    points: Tuple[int, ...]
    deviations: np.ndarray = field(repr=False)
    n: int
    alpha: float
    intervals: Tuple[Interval, ...]
    short_segments: Tuple[Interval, ...] = ()

    def margins_at(self, alpha: float) -> List[int]:
        """M_j(alpha): the ceil((1 - alpha) B)-th smallest deviation per point"""
        if not self.points:
            return []
        rank = upper_order_index(alpha, self.deviations.shape[0])
        ordered = np.sort(self.deviations, axis=0)
        return [int(m) for m in ordered[rank - 1]]

    def intervals_at(self, alpha: float) -> List[Interval]:
        return [
            (max(1, k - m), min(self.n, k + m))
            for k, m in zip(self.points, self.margins_at(alpha))
        ]


def _bootstrap_argmax(d2: np.ndarray, point: int, G: int) -> int:
    lo = max(1, point - G)
    hi = min(d2.size, point + G)
    return lo + int(np.argmax(d2[lo - 1:hi]))


def bootstrap_cis(y: Optional[ContinuousSeries],
                  x: Optional[ContinuousSeries],
                  kind: DetectorKind,
                  points: Tuple[int, ...],
                  cfg: WindowConfig,
                  B: int = 1000,
                  seed: int = 0,
                  alpha: Optional[float] = None,
                  workers: Optional[int] = None) -> BootstrapCIs:
    """
    Pointwise bootstrap confidence intervals for change-point locations.

    Each replication resamples time-aligned (Y_t, X_t) tuples with
    replacement inside every segment between consecutive points, recomputes
    the kind's trace and re-locates each point as the argmax of d2 within
    +-G of the original estimate. No re-thresholding takes place.

    Args:
        y: Stress series (None for UniX)
        x: Sensing series (None for UniY)
        kind: Detector kind whose trace is recomputed
        points: Change points from extract_changepoints on the same data
        cfg: Window configuration
        B: Bootstrap replications
        seed: Master seed; replication b uses the b-th spawned child
        alpha: Interval level (defaults to cfg.alpha)
        workers: Thread count

    Returns:
        BootstrapCIs
    """
    if B < MIN_BOOTSTRAP:
        raise ValueError(f"need at least {MIN_BOOTSTRAP} bootstrap replications, got B={B}")
    alpha = cfg.alpha if alpha is None else alpha
    points = tuple(sorted(int(p) for p in points))
    if not points:
        return BootstrapCIs(kind=kind, points=(), deviations=np.zeros((B, 0), dtype=np.int64),
                            n=cfg.n, alpha=alpha, intervals=())

    segments = segment_bounds(points, cfg.n)
    short = tuple(seg for seg in segments if seg[1] - seg[0] + 1 < 2)
    if short:
        logger.warning(f"{kind.value}: segments {list(short)} shorter than 2 points; bootstrap repeats them")

    y_values = None if y is None else np.asarray(y.values)
    x_values = None if x is None else np.asarray(x.values)
    children = np.random.SeedSequence(seed).spawn(B)
    deviations = np.empty((B, len(points)), dtype=np.int64)

    def run_chunk(indices: np.ndarray) -> None:
        for b in indices:
            rng = np.random.Generator(np.random.PCG64(children[b]))
            idx = np.concatenate([rng.integers(lo - 1, hi, size=hi - lo + 1) for lo, hi in segments])
            yb = None if y_values is None else ContinuousSeries(y_values[idx])
            xb = None if x_values is None else ContinuousSeries(x_values[idx])
            d2 = compute_trace(kind, yb, xb, cfg).d2
            for j, point in enumerate(points):
                deviations[b, j] = abs(_bootstrap_argmax(d2, point, cfg.G) - point)

    workers = workers or min(8, os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(run_chunk, chunk) for chunk in np.array_split(np.arange(B), workers) if chunk.size]
        for future in as_completed(futures):
            future.result()

    deviations.setflags(write=False)
    result = BootstrapCIs(kind=kind, points=points, deviations=deviations, n=cfg.n,
                          alpha=alpha, intervals=(), short_segments=short)
    intervals = tuple(result.intervals_at(alpha))
    logger.debug(f"{kind.value}: bootstrap intervals {list(intervals)} (B={B}, alpha={alpha})")
    return replace(result, intervals=intervals)

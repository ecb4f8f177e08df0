"""
Detection Controller - Orchestrates thresholds, per-kind pipelines and hotspots
"""

from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

from src.aggregation.hotspots import CombinationSpec, HotspotSet, hotspots_ci, hotspots_threshold
from src.core.pipeline import DetectionPipeline, KindResult
from src.core.series import ContinuousSeries
from src.processing.critical_values import ThresholdCache, ThresholdRequest, get_or_compute
from src.processing.detectors import DetectorKind
from src.processing.local_stats import LocalMoments, WindowConfig, compute_local_moments
from src.utils.logger import setup_logger
from src.utils.metrics import RunMetrics
from src.utils.seeding import derive_seed


@dataclass
class DetectionResult:
    """Everything one detection run produced"""

    cfg: WindowConfig
    threshold: float
    results: Dict[DetectorKind, KindResult] = field(default_factory=dict)
    failures: Dict[DetectorKind, str] = field(default_factory=dict)
    hotspots: Dict[str, HotspotSet] = field(default_factory=dict)

    @property
    def changepoints(self):
        return {kind: result.changepoints for kind, result in self.results.items()}

    @property
    def traces(self):
        return {kind: result.trace for kind, result in self.results.items()}


class DetectionController:
    """
    Main controller that orchestrates a detection run.
    Runs the per-kind pipelines in parallel and fuses their results.
    """

    def __init__(self,
                 cfg: WindowConfig,
                 metrics: Optional[RunMetrics] = None,
                 cache: Optional[ThresholdCache] = None,
                 threshold_reps: int = 1000,
                 threshold_seed: int = 0,
                 rebuild_cache: bool = False,
                 workers: Optional[int] = None):
        self.cfg = cfg
        self.metrics = metrics or RunMetrics()
        self.cache = cache
        self.threshold_reps = threshold_reps
        self.threshold_seed = threshold_seed
        self.rebuild_cache = rebuild_cache
        self.workers = workers
        self.logger = setup_logger(__name__)

    def threshold(self) -> float:
        """Critical value for the configured n, G and alpha (shared by all kinds)"""
        req = ThresholdRequest(n=self.cfg.n, alpha=self.cfg.alpha,
                               B=self.threshold_reps, seed=self.threshold_seed,
                               bandwidth=self.cfg.G)
        with self.metrics.timed("threshold"):
            return get_or_compute(self.cache, req, rebuild=self.rebuild_cache,
                                  metrics=self.metrics, workers=self.workers)

    def execute(self,
                y: Optional[ContinuousSeries],
                x: Optional[ContinuousSeries],
                kinds: Sequence[DetectorKind],
                boot_reps: Optional[int] = None,
                seed: int = 0,
                threshold: Optional[float] = None) -> DetectionResult:
        """
        Execute detection for every requested kind.

        A kind that fails is logged and recorded; the others proceed.

        Args:
            y: Stress series
            x: Sensing series
            kinds: Detector kinds to run
            boot_reps: Bootstrap replications (None: no intervals)
            seed: Master analysis seed
            threshold: Critical value override (computed when omitted)

        Returns:
            DetectionResult
        """
        # Step 1: Critical value
        if threshold is None:
            threshold = self.threshold()
        self.logger.info(f"Detecting {[k.value for k in kinds]} with G={self.cfg.G}, "
                         f"threshold={threshold:.4f}")

        # Step 2: Local moments shared by every kind
        moments: Dict[str, LocalMoments] = {}
        with self.metrics.timed("moments"):
            if y is not None:
                moments["y"] = compute_local_moments(y, self.cfg)
            if x is not None:
                moments["x"] = compute_local_moments(x, self.cfg)

        # Step 3: Per-kind pipelines in parallel
        result = DetectionResult(cfg=self.cfg, threshold=threshold)
        with self.metrics.timed("pipelines"), ThreadPoolExecutor(max_workers=max(1, len(kinds))) as executor:
            future_to_kind = {
                executor.submit(
                    DetectionPipeline(kind, self.cfg).process,
                    y, x, threshold, boot_reps,
                    derive_seed(seed, list(DetectorKind).index(kind)),
                    moments, self.workers,
                ): kind
                for kind in kinds
            }
            for future in as_completed(future_to_kind):
                kind = future_to_kind[future]
                try:
                    result.results[kind] = future.result()
                except Exception as e:
                    self.logger.error(f"Detection failed for {kind.value}: {e}")
                    self.metrics.record_kind_failure(kind.value)
                    result.failures[kind] = str(e)

        for kind in kinds:
            if kind in result.results:
                self.logger.info(f"{kind.value}: change points {list(result.results[kind].changepoints.points)}")
        return result

    def fuse(self, result: DetectionResult, spec: CombinationSpec) -> DetectionResult:
        """
        Attach hotspot sets to a detection result.

        The thresholding rule always runs; the CI rule runs when every
        required kind carries intervals.
        """
        with self.metrics.timed("hotspots"):
            result.hotspots["threshold"] = hotspots_threshold(result.traces, result.threshold, spec)
            cps = result.changepoints
            if all(k in cps and cps[k].cis is not None for k in spec.required_kinds):
                result.hotspots["ci"] = hotspots_ci(cps, spec, self.cfg.n, self.cfg.alpha)

        for mode, hotspot in result.hotspots.items():
            self.logger.info(f"Hotspots ({mode}): {[list(iv) for iv in hotspot.intervals]}")
        return result

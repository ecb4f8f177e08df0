"""
Detection Pipeline - Trace, screening and bootstrap for a single detector kind
"""

from dataclasses import dataclass
from typing import Dict, Optional

from src.core.series import ContinuousSeries
from src.processing.detectors import DetectorKind, DetectorTrace, compute_trace
from src.processing.local_stats import LocalMoments, WindowConfig
from src.processing.segmentation import BootstrapCIs, ChangePointSet, bootstrap_cis, extract_changepoints
from src.utils.logger import setup_logger


@dataclass(frozen=True)
class KindResult:
    """Output of one pipeline run"""

    trace: DetectorTrace
    changepoints: ChangePointSet
    bootstrap: Optional[BootstrapCIs] = None


class DetectionPipeline:
    """
    Runs the complete detection pipeline for one detector kind.
    Coordinates the trace, the exceedance screening and optional bootstrap.
    """

    def __init__(self, kind: DetectorKind, cfg: WindowConfig):
        self.kind = kind
        self.cfg = cfg
        self.logger = setup_logger(f"{__name__}.{kind.value}")

    def process(self,
                y: Optional[ContinuousSeries],
                x: Optional[ContinuousSeries],
                threshold: float,
                boot_reps: Optional[int] = None,
                seed: int = 0,
                moments: Optional[Dict[str, LocalMoments]] = None,
                workers: Optional[int] = None) -> KindResult:
        """
        Process one series pair through the pipeline.

        Args:
            y: Stress series
            x: Sensing series
            threshold: Critical value (distance scale)
            boot_reps: Bootstrap replications; None skips the intervals
            seed: Bootstrap seed
            moments: Precomputed local moments keyed "y" / "x"
            workers: Thread count for the bootstrap

        Returns:
            KindResult with trace, change points and optional intervals
        """
        # Step 1: Detector trace
        trace = compute_trace(self.kind, y, x, self.cfg, moments)

        # Step 2: Exceedance + local-maximum screening
        changepoints = extract_changepoints(trace, threshold)
        self.logger.debug(f"Change points {list(changepoints.points)}")

        if boot_reps is None:
            return KindResult(trace=trace, changepoints=changepoints)

        # Step 3: Bootstrap intervals
        boot = bootstrap_cis(y, x, self.kind, changepoints.points, self.cfg,
                             B=boot_reps, seed=seed, workers=workers)
        changepoints = changepoints.with_cis(list(boot.intervals), boot.alpha)
        self.logger.debug(f"Intervals {list(boot.intervals)}")

        return KindResult(trace=trace, changepoints=changepoints, bootstrap=boot)

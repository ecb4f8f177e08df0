"""
Evaluation - Power, FDR, hit rate and interval length over replications
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.processing.segmentation import Interval


def _matched(estimates: Sequence[int], true_point: int, eta: int) -> bool:
    return any(abs(int(e) - true_point) <= eta for e in estimates)


def replication_power(estimates: Sequence[int], true_points: Sequence[int], eta: int) -> bool:
    """Every true point has an estimate within eta"""
    return all(_matched(estimates, t, eta) for t in true_points)


def replication_false_discovery(estimates: Sequence[int], true_points: Sequence[int], eta: int) -> bool:
    """At least one estimate, and every estimate farther than eta from every true point"""
    if len(estimates) == 0:
        return False
    return all(abs(int(e) - t) > eta for e in estimates for t in true_points)


def power_fdr(estimates: Sequence[Sequence[int]],
              true_points: Sequence[int],
              eta_power: int = 5,
              eta_fdr: int = 5) -> Tuple[float, float]:
    """
    Power(eta) and FDR(eta) over replications.

    Args:
        estimates: Estimated points per replication
        true_points: True points (pooled across series for bivariate runs)
        eta_power: Matching tolerance for power
        eta_fdr: Matching tolerance for FDR

    Returns:
        (power, fdr); fdr is 0 when no replication detected anything
    """
    if len(estimates) == 0:
        raise ValueError("need at least one replication")
    power = np.mean([replication_power(est, true_points, eta_power) for est in estimates])
    detected = [est for est in estimates if len(est) > 0]
    if not detected:
        return float(power), 0.0
    fdr = np.mean([replication_false_discovery(est, true_points, eta_fdr) for est in detected])
    return float(power), float(fdr)


def replication_hit(intervals: Sequence[Interval],
                    true_points: Sequence[int],
                    n: int) -> Tuple[float, Optional[int]]:
    """
    Hit score and covering length of one replication's hotspots.

    The score is the fraction of true points inside some interval. The
    length sums the distinct intervals that contain a true point; it is n
    when hotspots exist but cover none, and None when there are no hotspots.
    """
    covering = {(lo, hi) for lo, hi in intervals for t in true_points if lo <= t <= hi}
    hits = sum(any(lo <= t <= hi for lo, hi in intervals) for t in true_points)
    score = hits / len(true_points) if true_points else 0.0
    if not intervals:
        return score, None
    if not covering:
        return score, n
    return score, sum(hi - lo + 1 for lo, hi in covering)


def hit_rate_and_length(hotspots: Sequence[Sequence[Interval]],
                        true_points: Sequence[int],
                        n: int) -> Tuple[float, float]:
    """
    Mean hit score over all replications and mean covering length over
    replications that produced hotspots.

    Returns:
        (hit_rate, mean_interval_length); the length is nan when no
        replication produced a hotspot
    """
    if len(hotspots) == 0:
        raise ValueError("need at least one replication")
    scores, lengths = [], []
    for intervals in hotspots:
        score, length = replication_hit(intervals, true_points, n)
        scores.append(score)
        if length is not None:
            lengths.append(length)
    return float(np.mean(scores)), float(np.mean(lengths)) if lengths else float("nan")


@dataclass
class MetricReport:
    """Metrics of one scenario x method cell"""

    scenario: str
    method: str
    replications: int
    power: Optional[float] = None
    fdr: Optional[float] = None
    hit_rate: Optional[float] = None
    mean_interval_length: Optional[float] = None
    eta_power: Optional[int] = None
    eta_fdr: Optional[int] = None
    records: List[Dict[str, Any]] = field(default_factory=list, repr=False)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scenario": self.scenario,
            "method": self.method,
            "replications": self.replications,
            "power": self.power,
            "fdr": self.fdr,
            "hit_rate": self.hit_rate,
            "mean_interval_length": self.mean_interval_length,
            "eta_power": self.eta_power,
            "eta_fdr": self.eta_fdr,
        }

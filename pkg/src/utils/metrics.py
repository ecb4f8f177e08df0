"""
Run Metrics - Stage timings, failures and per-replication audit records
"""

import threading
import time
from collections import defaultdict
from contextlib import contextmanager
from typing import Any, Dict, Iterator, List

from src.utils.logger import setup_logger


class RunMetrics:
    """
    Thread-safe metrics collection for detection and simulation runs.
    Tracks stage durations, per-kind failures and replication records.
    """

    def __init__(self):
        self.logger = setup_logger(__name__)
        self._lock = threading.Lock()

        # Metrics storage
        self.stage_times: Dict[str, List[float]] = defaultdict(list)
        self.kind_failures: Dict[str, int] = defaultdict(int)
        self.replications: List[Dict[str, Any]] = []
        self.cache_hits = 0
        self.cache_misses = 0
        self.total_failures = 0

    @contextmanager
    def timed(self, stage: str) -> Iterator[None]:
        """
        Time a block of work and record it under a stage name.

        Args:
            stage: Stage label, e.g. "threshold" or "bootstrap"
        """
        start = time.perf_counter()
        try:
            yield
        finally:
            elapsed_ms = (time.perf_counter() - start) * 1000
            with self._lock:
                self.stage_times[stage].append(elapsed_ms)
            self.logger.debug(f"Stage {stage} took {elapsed_ms:.1f}ms")

    def record_replication(self, record: Dict[str, Any]) -> None:
        """
        Record one simulation replication for the audit log.

        Args:
            record: JSON-serializable replication summary
        """
        with self._lock:
            self.replications.append(record)

    def record_kind_failure(self, kind: str) -> None:
        """
        Record a detector kind that failed to compute.

        Args:
            kind: Detector kind label
        """
        with self._lock:
            self.kind_failures[kind] += 1
            self.total_failures += 1

    def record_cache(self, hit: bool) -> None:
        """Record a critical-value cache lookup outcome"""
        with self._lock:
            if hit:
                self.cache_hits += 1
            else:
                self.cache_misses += 1

    def get_summary(self) -> Dict[str, Any]:
        """
        Get summary statistics.

        Returns:
            Dictionary of aggregated metrics
        """
        with self._lock:
            stages = {
                stage: {
                    "count": len(times),
                    "total_ms": round(sum(times), 3),
                    "avg_ms": round(sum(times) / len(times), 3),
                    "max_ms": round(max(times), 3),
                }
                for stage, times in self.stage_times.items()
                if times
            }
            return {
                "stages": stages,
                "replications": len(self.replications),
                "kind_failures": dict(self.kind_failures),
                "total_failures": self.total_failures,
                "cache_hits": self.cache_hits,
                "cache_misses": self.cache_misses,
            }

    def replication_records(self) -> List[Dict[str, Any]]:
        """Replication records sorted by their index, independent of completion order"""
        with self._lock:
            return sorted(self.replications, key=lambda r: (r.get("scenario", ""), r.get("replication", 0)))

    def reset(self) -> None:
        """Reset all metrics"""
        with self._lock:
            self.stage_times.clear()
            self.kind_failures.clear()
            self.replications.clear()
            self.cache_hits = 0
            self.cache_misses = 0
            self.total_failures = 0

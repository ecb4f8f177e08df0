"""
Critical Values - Monte-Carlo threshold D_n(G, alpha) with a persistent cache

Two calibrations share the replication machinery and the cache:

  random walk   each replication draws two independent Gaussian random walks
                and records the maximum over the bandwidth grid and positions h
                of sqrt(T_1(h)^2 + T_2(h)^2),
                T_m(h) = (W_m(h+g) - 2 W_m(h) + W_m(h-g)) / sqrt(2g)
  studentized   (request carries a bandwidth) each replication draws an
                i.i.d. N(0, 1) series of length n and records max_k sqrt(d2(k))
                of the joint mean/variance detector at that bandwidth

The threshold is the ceil((1 - alpha) B)-th smallest replication maximum.
The studentized value is the one detection compares against: it is on the
scale of the plug-in detector itself, local scale and correlation estimates
included.
"""

import hashlib
import json
import math
import os
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from src.processing.detectors import joint_univariate
from src.processing.local_stats import BandwidthError, WindowConfig
from src.utils.logger import setup_logger
from src.utils.metrics import RunMetrics


logger = setup_logger(__name__)

CACHE_DIR_ENV = "HOTSPOT_CACHE_DIR"
CACHE_FILE_NAME = "critical_values.json"
GRID_MIN = 25
GRID_MAX = 200
MIN_REPLICATIONS = 100


def auto_grid(n: int) -> Tuple[int, ...]:
    """Bandwidths 25 .. min((n-1)/2, 200), step 1 (empty for short series)."""
    upper = min((n - 1) // 2, GRID_MAX)
    return tuple(range(GRID_MIN, upper + 1))


def upper_order_index(alpha: float, count: int) -> int:
    """1-based rank ceil((1 - alpha) * count), kept inside 1..count."""
    # rounding first keeps (1 - 0.05) * 1000 at exactly 950
    rank = math.ceil(round((1.0 - alpha) * count, 9))
    return min(max(rank, 1), count)


def upper_order_statistic(values: np.ndarray, alpha: float) -> float:
    """The ceil((1 - alpha) n)-th smallest value, no interpolation."""
    ordered = np.sort(np.asarray(values, dtype=float))
    return float(ordered[upper_order_index(alpha, ordered.size) - 1])


@dataclass(frozen=True)
class ThresholdRequest:
    """
    Inputs that fully determine a Monte-Carlo critical value.

    Attributes:
        n: Series length
        alpha: Significance level
        B: Number of replications
        seed: Master seed; replication b uses the b-th spawned child seed
        grid: Bandwidth set; auto_grid(n) when omitted
        bandwidth: Detector bandwidth G; when set, the value is calibrated
            on the studentized detector at G instead of the random walks
    """

    n: int
    alpha: float = 0.05
    B: int = 1000
    seed: int = 0
    grid: Optional[Tuple[int, ...]] = None
    bandwidth: Optional[int] = None

    def __post_init__(self):
        if self.B < MIN_REPLICATIONS:
            raise ValueError(f"need at least {MIN_REPLICATIONS} replications, got B={self.B}")
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"alpha must lie in [0, 1), got {self.alpha}")
        if self.bandwidth is not None:
            if self.bandwidth < 1:
                raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
            if 2 * self.bandwidth > self.n:
                raise BandwidthError(
                    f"bandwidth too large: G={self.bandwidth} needs n >= {2 * self.bandwidth}, got n={self.n}")
        grid = auto_grid(self.n) if self.grid is None else tuple(sorted({int(g) for g in self.grid}))
        object.__setattr__(self, "grid", grid)

    @property
    def studentized(self) -> bool:
        return self.bandwidth is not None

    def describe(self) -> str:
        if self.studentized:
            return f"studentized detector at G={self.bandwidth}"
        grid = self.effective_grid()
        return f"random walks, grid {grid[0]}..{grid[-1]}" if grid else "random walks, empty grid"

    def effective_grid(self) -> Tuple[int, ...]:
        """Grid clipped to bandwidths with at least one position h in [g, n - g]"""
        return tuple(g for g in self.grid if 1 <= g <= self.n - g)

    def fingerprint(self) -> str:
        payload = json.dumps({
            "n": self.n,
            "alpha": repr(float(self.alpha)),
            "B": self.B,
            "seed": self.seed,
            "grid": list(self.grid),
            "bandwidth": self.bandwidth,
        }, sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _replication_maximum(rng: np.random.Generator, n: int, grid: Sequence[int]) -> float:
    length = n + max(grid)
    steps = rng.standard_normal((2, length))
    walks = np.concatenate([np.zeros((2, 1)), np.cumsum(steps, axis=1)], axis=1)

    best = 0.0
    for g in grid:
        # h = g .. n - g
        second_diff = walks[:, 2 * g:n + 1] - 2.0 * walks[:, g:n - g + 1] + walks[:, 0:n - 2 * g + 1]
        norm = np.sqrt(np.sum(second_diff ** 2, axis=0) / (2.0 * g))
        best = max(best, float(norm.max()))
    return best


def _detector_maximum(rng: np.random.Generator, cfg: WindowConfig) -> float:
    trace = joint_univariate(rng.standard_normal(cfg.n), cfg)
    return float(np.sqrt(np.max(trace.d2)))


def simulate_maxima(req: ThresholdRequest, workers: Optional[int] = None) -> np.ndarray:
    """
    Replication maxima of the null functional selected by the request.

    Replications run in parallel chunks; each owns a child seed spawned from
    the master seed, so the result does not depend on the schedule.

    Args:
        req: Threshold request
        workers: Thread count (default: min(8, cpu count))

    Returns:
        Array of B maxima in replication order
    """
    if req.studentized:
        cfg = WindowConfig(G=req.bandwidth, n=req.n)

        def replicate(rng: np.random.Generator) -> float:
            return _detector_maximum(rng, cfg)
    else:
        grid = req.effective_grid()
        if not grid:
            raise ValueError(f"bandwidth grid is empty after clipping to n={req.n} (requested {req.grid})")

        def replicate(rng: np.random.Generator) -> float:
            return _replication_maximum(rng, req.n, grid)

    children = np.random.SeedSequence(req.seed).spawn(req.B)
    maxima = np.empty(req.B)
    workers = workers or min(8, os.cpu_count() or 1)
    chunks = np.array_split(np.arange(req.B), workers)

    def run_chunk(indices: np.ndarray) -> None:
        for b in indices:
            rng = np.random.Generator(np.random.PCG64(children[b]))
            maxima[b] = replicate(rng)

    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(run_chunk, chunk) for chunk in chunks if chunk.size]
        for future in as_completed(futures):
            future.result()

    return maxima


def simulate_threshold(req: ThresholdRequest, workers: Optional[int] = None) -> float:
    """
    Monte-Carlo critical value D_n(G, alpha).

    Args:
        req: Threshold request
        workers: Thread count

    Returns:
        Upper order statistic of the replication maxima
    """
    maxima = simulate_maxima(req, workers)
    value = upper_order_statistic(maxima, req.alpha)
    logger.info(f"Critical value n={req.n} alpha={req.alpha} B={req.B}: {value:.4f} ({req.describe()})")
    return value


def default_cache_path() -> Path:
    base = os.environ.get(CACHE_DIR_ENV)
    directory = Path(base) if base else Path.home() / ".cache" / "hotspot_mosum"
    return directory / CACHE_FILE_NAME


class ThresholdCache:
    """
    JSON document mapping request fingerprints to critical values.

    Reads and writes are serialized with a lock; a corrupted file is
    reported and replaced on the next write.
    """

    def __init__(self, path: Optional[Path] = None, keep_sample: bool = False):
        self.path = Path(path) if path is not None else default_cache_path()
        self.keep_sample = keep_sample
        self.logger = setup_logger(__name__)
        self._lock = threading.Lock()

    def _read(self) -> Dict[str, dict]:
        if not self.path.exists():
            return {}
        try:
            document = json.loads(self.path.read_text(encoding="utf-8"))
            if not isinstance(document, dict):
                raise ValueError("top level is not an object")
            return document
        except (ValueError, OSError) as e:
            self.logger.warning(f"Critical-value cache {self.path} unreadable ({e}); it will be rebuilt")
            return {}

    def lookup(self, req: ThresholdRequest) -> Optional[float]:
        with self._lock:
            entry = self._read().get(req.fingerprint())
        if not isinstance(entry, dict):
            return None
        value = entry.get("value")
        if not isinstance(value, (int, float)) or not math.isfinite(value) or value <= 0:
            self.logger.warning(f"Invalid cache entry for {req.fingerprint()[:12]}; recomputing")
            return None
        return float(value)

    def store(self, req: ThresholdRequest, value: float, maxima: Optional[np.ndarray] = None) -> None:
        entry = {
            "value": value,
            "metadata": {**asdict(req), "grid": list(req.grid)},
        }
        if self.keep_sample and maxima is not None:
            entry["sample"] = maxima.tolist()
        with self._lock:
            document = self._read()
            document[req.fingerprint()] = entry
            self.path.parent.mkdir(parents=True, exist_ok=True)
            tmp = self.path.with_suffix(".tmp")
            tmp.write_text(json.dumps(document, indent=2, sort_keys=True), encoding="utf-8")
            tmp.replace(self.path)


def get_or_compute(cache: Optional[ThresholdCache],
                   req: ThresholdRequest,
                   rebuild: bool = False,
                   metrics: Optional[RunMetrics] = None,
                   workers: Optional[int] = None) -> float:
    """
    Cached critical value; computed and persisted on a miss.

    Args:
        cache: Cache to consult, or None to always compute
        req: Threshold request
        rebuild: Ignore an existing entry and overwrite it
        metrics: Optional metrics sink for hit/miss counts
        workers: Thread count for a recomputation

    Returns:
        Critical value
    """
    if cache is not None and not rebuild:
        value = cache.lookup(req)
        if value is not None:
            logger.debug(f"Cache hit {req.fingerprint()[:12]} -> {value:.4f}")
            if metrics is not None:
                metrics.record_cache(hit=True)
            return value

    if metrics is not None:
        metrics.record_cache(hit=False)
    maxima = simulate_maxima(req, workers)
    value = upper_order_statistic(maxima, req.alpha)
    logger.info(f"Computed critical value {value:.4f} for n={req.n}, alpha={req.alpha}, B={req.B} ({req.describe()})")
    if cache is not None:
        cache.store(req, value, maxima)
    return value

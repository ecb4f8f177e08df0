"""
Run Configuration - Resolved settings of one CLI invocation
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Optional, Tuple

from src.processing.local_stats import BandwidthError


DEFAULT_ALPHA = 0.05
DEFAULT_ETA = 0.2
DEFAULT_THRESHOLD_REPS = 1000
DEFAULT_BOOT_REPS = 1000
DEFAULT_REPLICATIONS = 500
DEFAULT_BANDWIDTHS = (20, 40)
DEFAULT_KINDS = ("UniY", "YX", "YX2", "Y2X", "Y2X2")
DEFAULT_CROSS_KINDS = ("YX", "YX2", "Y2X", "Y2X2")
OUTPUT_FORMATS = ("json", "csv")
HOTSPOT_MODES = ("threshold", "ci")
ILLUSTRATION_SCENARIOS = ("mean", "variance")


@dataclass(frozen=True)
class RunConfig:
    """
    Every setting that shapes a run's output.

    The whole object is embedded in each output file so a run can be
    reproduced from its artifacts alone.
    """

    command: str
    input: Optional[str] = None
    stress_col: str = "stress"
    sensing_col: Optional[str] = None
    discrete: bool = False
    levels: Optional[int] = None
    bandwidth: Optional[int] = None
    alpha: float = DEFAULT_ALPHA
    eta: float = DEFAULT_ETA
    boot_reps: int = DEFAULT_BOOT_REPS
    threshold_reps: int = DEFAULT_THRESHOLD_REPS
    seed: int = 0
    transform_seed: int = 0
    mode: str = "threshold"
    kinds: Tuple[str, ...] = DEFAULT_KINDS
    cross_kinds: Tuple[str, ...] = DEFAULT_CROSS_KINDS
    anchor: str = "UniY"
    out: str = "out"
    format: str = "json"
    table: Optional[int] = None
    replications: int = DEFAULT_REPLICATIONS
    bandwidths: Tuple[int, ...] = DEFAULT_BANDWIDTHS
    scenario: str = "mean"
    length: Optional[int] = None
    keep_sample: bool = False
    no_cache: bool = False
    rebuild_cache: bool = False
    workers: Optional[int] = field(default=None, compare=False)

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"--alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 < self.eta < 1.0:
            raise ValueError(f"--eta must lie in (0, 1), got {self.eta}")
        if self.bandwidth is not None and self.bandwidth < 1:
            raise ValueError(f"--bandwidth must be positive, got {self.bandwidth}")
        if self.boot_reps < 100 or self.threshold_reps < 100:
            raise ValueError("--boot-reps and --threshold-reps must be at least 100")
        if self.format not in OUTPUT_FORMATS:
            raise ValueError(f"--format must be one of {OUTPUT_FORMATS}")
        if self.mode not in HOTSPOT_MODES:
            raise ValueError(f"--mode must be one of {HOTSPOT_MODES}")
        if self.replications < 1:
            raise ValueError("--replications must be at least 1")
        if self.table is not None and self.table not in (1, 2, 3):
            raise ValueError(f"--table must be 1, 2 or 3, got {self.table}")
        if self.scenario not in ILLUSTRATION_SCENARIOS:
            raise ValueError(f"--scenario must be one of {ILLUSTRATION_SCENARIOS}")
        if self.length is not None and self.length < 2:
            raise ValueError(f"--length must be at least 2, got {self.length}")

    def validate(self, n: int) -> None:
        """
        Check the bandwidth against a series length.

        Raises:
            ValueError: No bandwidth given
            BandwidthError: n < 2G
        """
        if self.bandwidth is None:
            raise ValueError("--bandwidth is required")
        if n < 2 * self.bandwidth:
            raise BandwidthError(f"bandwidth too large: G={self.bandwidth} needs n >= {2 * self.bandwidth}, got n={n}")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data.pop("workers")
        for key in ("kinds", "cross_kinds", "bandwidths"):
            data[key] = list(data[key])
        return data

    def fingerprint(self) -> str:
        """SHA-256 of the canonical JSON form"""
        payload = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

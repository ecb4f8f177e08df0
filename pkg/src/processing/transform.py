"""
Likert Transform - Randomized inverse-CDF map from ordinal scores to latent normals
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats

from src.core.series import ContinuousSeries, DiscreteSeries
from src.utils.logger import setup_logger


logger = setup_logger(__name__)

# U is kept inside [EPS, 1 - EPS] so that the normal quantile stays finite
EPS = 1e-12


@dataclass(frozen=True)
class TransformRecord:
    """
    Audit trail of one discrete-to-continuous transform.

    Attributes:
        u: Uniform variates U_t placed inside each category's probability interval
        w: Raw Unif(0, 1) draws W_t
        cdf_left: F(y-) per category 1..L
        pmf: P(Y = y) per category 1..L
        seed: Seed of the generator that produced w (None when w was injected)
    """

    u: np.ndarray
    w: np.ndarray
    cdf_left: np.ndarray
    pmf: np.ndarray
    seed: Optional[int]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "categories": list(range(1, self.pmf.size + 1)),
            "pmf": self.pmf.tolist(),
            "cdf_left": self.cdf_left.tolist(),
            "u": self.u.tolist(),
            "w": self.w.tolist(),
        }

    def to_frame(self, codes: np.ndarray) -> pd.DataFrame:
        """Per-time audit table: t, category, W, U"""
        return pd.DataFrame({
            "t": np.arange(1, self.u.size + 1),
            "category": codes,
            "w": self.w,
            "u": self.u,
        })

    def write_json(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True), encoding="utf-8")
        return path


def estimate_categorical(series: DiscreteSeries) -> Tuple[np.ndarray, np.ndarray]:
    """
    Global empirical pmf and left-limit CDF of a discrete series.

    Args:
        series: Ordinal series with codes 1..L

    Returns:
        (cdf_left, pmf), both of length L, indexed by category - 1
    """
    if series.n == 0:
        raise ValueError("empty input")
    counts = np.bincount(series.values, minlength=series.levels + 1)[1:]
    pmf = counts / series.n
    cdf_left = np.concatenate(([0.0], np.cumsum(pmf)[:-1]))
    return cdf_left, pmf


def to_continuous(series: DiscreteSeries,
                  seed: int,
                  draws: Optional[np.ndarray] = None) -> Tuple[ContinuousSeries, TransformRecord]:
    """
    Smoothed randomized inverse-CDF transform of a Likert series.

    U_t = F(Y_t-) + W_t * P(Y_t) with W_t ~ Unif(0, 1], and Z_t = Phi^-1(U_t).

    Args:
        series: Discrete input
        seed: Seed for the PCG64 generator drawing W
        draws: Optional W values to use instead of random draws

    Returns:
        (latent continuous series, audit record)
    """
    cdf_left, pmf = estimate_categorical(series)
    if draws is None:
        rng = np.random.Generator(np.random.PCG64(seed))
        # W in (0, 1]
        w = 1.0 - rng.random(series.n)
        record_seed: Optional[int] = seed
    else:
        w = np.asarray(draws, dtype=float)
        if w.shape != (series.n,):
            raise ValueError(f"expected {series.n} draws, got {w.shape}")
        record_seed = None

    idx = series.values - 1
    u = cdf_left[idx] + w * pmf[idx]
    u = np.clip(u, EPS, 1.0 - EPS)
    z = stats.norm.ppf(u)

    logger.debug(f"Transformed {series.n} scores over {series.levels} categories (seed={seed})")

    record = TransformRecord(u=u, w=w, cdf_left=cdf_left, pmf=pmf, seed=record_seed)
    return ContinuousSeries(z, name=series.name), record

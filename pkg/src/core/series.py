"""
Series - Immutable time-series containers and CSV ingestion
"""

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd
from scipy import stats

from src.utils.logger import setup_logger


logger = setup_logger(__name__)


class SeriesParseError(ValueError):
    """Raised when a CSV column cannot be turned into a series."""

    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class SeriesKind(str, Enum):
    CONTINUOUS = "continuous"
    DISCRETE = "discrete"


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.array(values, copy=True)
    values.setflags(write=False)
    return values


@dataclass(frozen=True)
class ContinuousSeries:
    """
    Real-valued, fixed-frequency series; the input of every detector.

    Attributes:
        values: Finite float64 observations, one per time index
        name: Optional column label carried into reports
    """

    values: np.ndarray
    name: str = "value"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise ValueError("series must be one-dimensional")
        if values.size == 0:
            raise ValueError("empty input")
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0]) + 1
            raise ValueError(f"non-finite value at time index {bad}")
        object.__setattr__(self, "values", _frozen(values))

    @property
    def n(self) -> int:
        return int(self.values.size)

    def __len__(self) -> int:
        return self.n


@dataclass(frozen=True)
class DiscreteSeries:
    """
    Ordered categorical series with codes 1..levels (e.g. a 5-point Likert scale).

    Attributes:
        values: Integer category codes
        levels: Number of categories L; inferred as max(2, max code) when omitted
        name: Optional column label
    """

    values: np.ndarray
    levels: Optional[int] = None
    name: str = "value"

    def __post_init__(self):
        raw = np.asarray(self.values)
        if raw.ndim != 1:
            raise ValueError("series must be one-dimensional")
        if raw.size == 0:
            raise ValueError("empty input")
        if raw.dtype.kind == "f":
            if not np.all(np.isfinite(raw)) or np.any(raw != np.round(raw)):
                raise ValueError("discrete series must contain integer codes")
        codes = raw.astype(np.int64)
        levels = self.levels if self.levels is not None else max(2, int(codes.max()))
        if levels < 2:
            raise ValueError(f"need at least 2 categories, got {levels}")
        out_of_range = (codes < 1) | (codes > levels)
        if np.any(out_of_range):
            bad = int(np.flatnonzero(out_of_range)[0])
            raise ValueError(
                f"category {int(codes[bad])} at time index {bad + 1} outside 1..{levels}"
            )
        object.__setattr__(self, "values", _frozen(codes))
        object.__setattr__(self, "levels", int(levels))

    @property
    def n(self) -> int:
        return int(self.values.size)

    def __len__(self) -> int:
        return self.n


AnySeries = Union[ContinuousSeries, DiscreteSeries]


def _parse_float(cell: str) -> float:
    try:
        return float(cell)
    except ValueError:
        return np.nan


def load_csv(path: Union[str, Path],
             column: str,
             kind: Union[SeriesKind, str] = SeriesKind.CONTINUOUS,
             levels: Optional[int] = None) -> AnySeries:
    """
    Read one column of a headed CSV file as a series.

    Rows are taken in file order. Row numbers in errors count data rows
    from 1 (the header is not counted).

    Args:
        path: CSV file with a header row
        column: Name of the column to read
        kind: "continuous" or "discrete"
        levels: Number of Likert categories for discrete input

    Returns:
        ContinuousSeries or DiscreteSeries

    Raises:
        SeriesParseError: Empty file, missing column, blank or non-numeric cell
    """
    kind = SeriesKind(kind)
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise SeriesParseError(f"{path}: empty file") from None

    if column not in frame.columns:
        available = ", ".join(frame.columns)
        raise SeriesParseError(f"{path}: column '{column}' not found (available: {available})")
    if frame.empty:
        raise SeriesParseError(f"{path}: no data rows")

    cells = frame[column].str.strip()
    blank = cells == ""
    if blank.any():
        row = int(np.flatnonzero(blank.to_numpy())[0]) + 1
        raise SeriesParseError(f"blank cell in column '{column}'", row=row)

    # float() parses the shortest repr exactly; pd.to_numeric may round the last digit
    numeric = cells.map(_parse_float)
    invalid = pd.Series(~np.isfinite(numeric.to_numpy(dtype=float)), index=numeric.index)
    if invalid.any():
        row = int(np.flatnonzero(invalid.to_numpy())[0]) + 1
        raise SeriesParseError(
            f"non-numeric value '{cells.iloc[row - 1]}' in column '{column}'", row=row
        )

    values = numeric.to_numpy(dtype=float)
    logger.debug(f"Loaded {values.size} rows of '{column}' from {path}")

    if kind is SeriesKind.CONTINUOUS:
        return ContinuousSeries(values, name=column)

    fractional = values != np.round(values)
    if fractional.any():
        row = int(np.flatnonzero(fractional)[0]) + 1
        raise SeriesParseError(f"non-integer category '{cells.iloc[row - 1]}'", row=row)
    try:
        return DiscreteSeries(values.astype(np.int64), levels=levels, name=column)
    except ValueError as e:
        raise SeriesParseError(f"{path}: {e}") from None


def write_csv(series: AnySeries, path: Union[str, Path], index_column: str = "t") -> Path:
    """
    Write a series as a two-column CSV (time index, values) readable by load_csv.

    Args:
        series: Series to write
        path: Destination file
        index_column: Header of the 1-based time index column

    Returns:
        The written path
    """
    path = Path(path)
    frame = pd.DataFrame({
        index_column: np.arange(1, series.n + 1),
        series.name: series.values,
    })
    # repr-precision floats so a write/read cycle is lossless
    frame.to_csv(path, index=False, float_format="%.17g")
    return path


def discretize_likert(latent: Union[ContinuousSeries, np.ndarray], levels: int = 5) -> DiscreteSeries:
    """
    Map a latent standard-normal series onto ordered categories.

    Cut points are the standard-normal quantiles at i/levels, so an N(0, 1)
    input produces uniformly used categories.

    Args:
        latent: Latent continuous values
        levels: Number of categories

    Returns:
        DiscreteSeries with codes 1..levels
    """
    values = latent.values if isinstance(latent, ContinuousSeries) else np.asarray(latent, dtype=float)
    cuts = stats.norm.ppf(np.arange(1, levels) / levels)
    codes = np.digitize(values, cuts) + 1
    return DiscreteSeries(codes, levels=levels)

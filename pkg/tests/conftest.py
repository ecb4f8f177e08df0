"""Shared fixtures for the test suite."""

import numpy as np
import pytest

from src.core.series import ContinuousSeries
from src.processing.critical_values import CACHE_DIR_ENV, ThresholdCache


@pytest.fixture(autouse=True)
def isolated_cache_dir(tmp_path, monkeypatch):
    """Keep every critical-value cache inside the test's temporary directory."""
    cache_dir = tmp_path / "cache"
    monkeypatch.setenv(CACHE_DIR_ENV, str(cache_dir))
    return cache_dir


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(20240611))


@pytest.fixture
def cache(tmp_path):
    return ThresholdCache(tmp_path / "thresholds" / "critical_values.json")


@pytest.fixture
def step_series():
    """Factory: piecewise-constant mean/sd series with Gaussian noise."""

    def make(points, means, sds, n=100, seed=0, name="value"):
        rng = np.random.Generator(np.random.PCG64(seed))
        cuts = [0] + list(points) + [n]
        values = np.empty(n)
        for s in range(len(cuts) - 1):
            lo, hi = cuts[s], cuts[s + 1]
            values[lo:hi] = means[s] + sds[s] * rng.standard_normal(hi - lo)
        return ContinuousSeries(values, name=name)

    return make


def _cell(value):
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


@pytest.fixture
def pair_csv(tmp_path):
    """Factory: headed CSV with a time column, a stress column and an optional sensing column."""

    def write(y, x=None, name="input.csv", stress_col="stress", sensing_col="sensing"):
        path = tmp_path / name
        lines = ["t," + stress_col + ("," + sensing_col if x is not None else "")]
        for t in range(len(y)):
            row = f"{t + 1},{_cell(y[t])}"
            if x is not None:
                row += f",{_cell(x[t])}"
            lines.append(row)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return write

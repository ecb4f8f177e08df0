"""
Scenarios - Piecewise-stationary Gaussian series for the simulation study

Segment s (0-based, delimited by the true change points) has mean
(-1)^(s+1) * mu * mean_scale and standard deviation sigma_min for even s,
sigma_max for odd s, so every change point shifts mean and variance at once.
A change point k means t = k is the last observation of the old regime.
"""

from dataclasses import dataclass
from typing import Dict, NamedTuple, Optional, Tuple

import numpy as np

from src.core.series import ContinuousSeries, DiscreteSeries, discretize_likert
from src.utils.seeding import derive_seed


class Case(NamedTuple):
    mu: float
    sigma_min: float
    sigma_max: float


# Signal strengths, strongest first
CASES: Dict[int, Case] = {
    1: Case(2.0, 0.1, 0.4),
    2: Case(2.0, 0.1, 0.8),
    3: Case(2.0, 0.4, 0.8),
    4: Case(1.0, 0.1, 0.4),
    5: Case(1.0, 0.1, 0.8),
    6: Case(1.0, 0.4, 0.8),
}


def _check_points(points: Tuple[int, ...], n: int, label: str) -> Tuple[int, ...]:
    points = tuple(int(p) for p in points)
    if any(b <= a for a, b in zip(points, points[1:])):
        raise ValueError(f"{label} change points must be strictly increasing, got {list(points)}")
    if points and (points[0] < 1 or points[-1] >= n):
        raise ValueError(f"{label} change points must lie in 1..{n - 1}, got {list(points)}")
    return points


@dataclass(frozen=True)
class ScenarioSpec:
    """
    One simulation setting.

    Attributes:
        y_points: True change points of the stress series Y
        x_points: True change points of the sensing series X (None: Y only)
        case_id: Signal strength 1..6
        n: Series length
        delta: Lag of Y behind X, recorded for reporting
        mean_scale: Multiplier on the case's mean magnitude
        seed: Scenario seed; replication r draws from (seed, r)
        name: Label used in audit records
    """

    y_points: Tuple[int, ...]
    x_points: Optional[Tuple[int, ...]] = None
    case_id: int = 1
    n: int = 100
    delta: int = 0
    mean_scale: float = 1.0
    seed: int = 0
    name: str = ""

    def __post_init__(self):
        if self.case_id not in CASES:
            raise ValueError(f"case_id must be one of {sorted(CASES)}, got {self.case_id}")
        object.__setattr__(self, "y_points", _check_points(self.y_points, self.n, "Y"))
        if self.x_points is not None:
            object.__setattr__(self, "x_points", _check_points(self.x_points, self.n, "X"))

    @classmethod
    def lagged(cls, x_points: Tuple[int, ...], delta: int, **kwargs) -> "ScenarioSpec":
        """Pair whose Y changes delta steps after each X change"""
        return cls(y_points=tuple(p + delta for p in x_points), x_points=tuple(x_points),
                   delta=delta, **kwargs)

    @property
    def case(self) -> Case:
        return CASES[self.case_id]

    @property
    def bivariate(self) -> bool:
        return self.x_points is not None

    @property
    def true_points(self) -> Tuple[int, ...]:
        """True points of Y"""
        return self.y_points

    @property
    def pooled_points(self) -> Tuple[int, ...]:
        """True points of both series; a point shared by both counts twice"""
        return tuple(sorted(self.y_points + (self.x_points or ())))


def piecewise_gaussian(rng: np.random.Generator, n: int, points: Tuple[int, ...],
                       mu: float, sigma_min: float, sigma_max: float) -> np.ndarray:
    """Draw one series with alternating (-mu, sigma_min), (+mu, sigma_max), ... segments"""
    cuts = (0,) + tuple(points) + (n,)
    means = np.empty(n)
    sds = np.empty(n)
    for s in range(len(cuts) - 1):
        lo, hi = cuts[s], cuts[s + 1]
        means[lo:hi] = mu if s % 2 else -mu
        sds[lo:hi] = sigma_max if s % 2 else sigma_min
    return means + sds * rng.standard_normal(n)


def generate(spec: ScenarioSpec, replication: int) -> Tuple[ContinuousSeries, Optional[ContinuousSeries]]:
    """
    Draw replication r of a scenario.

    Y and X use independent noise streams spawned from (spec.seed, r).

    Returns:
        (Y, X) with X None for univariate scenarios
    """
    case = spec.case
    mu = case.mu * spec.mean_scale
    y_seq, x_seq = np.random.SeedSequence([int(spec.seed), int(replication)]).spawn(2)

    y = piecewise_gaussian(np.random.Generator(np.random.PCG64(y_seq)), spec.n, spec.y_points,
                           mu, case.sigma_min, case.sigma_max)
    if not spec.bivariate:
        return ContinuousSeries(y, name="stress"), None
    x = piecewise_gaussian(np.random.Generator(np.random.PCG64(x_seq)), spec.n, spec.x_points,
                           mu, case.sigma_min, case.sigma_max)
    return ContinuousSeries(y, name="stress"), ContinuousSeries(x, name="sensing")


@dataclass(frozen=True)
class Illustration:
    """A Likert stress series and a continuous sensing series with known changes"""

    name: str
    stress: DiscreteSeries
    sensing: ContinuousSeries
    y_points: Tuple[int, ...]
    x_points: Tuple[int, ...]


LIKERT_LEVELS = 5
ILLUSTRATION_N = 100


def illustration(scenario: str = "mean", seed: int = 0) -> Illustration:
    """
    The two worked examples.

    "mean": Y shifts its mean at 50; X shifts mean and variance at 55.
    "variance": Y changes variance at 40 and 60; X changes at 45 and 65.
    The stress series is drawn on a latent normal scale and cut into a
    5-point Likert scale.
    """
    n = ILLUSTRATION_N
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, 0 if scenario == "mean" else 1)))
    t = np.arange(1, n + 1)

    if scenario == "mean":
        y_points, x_points = (50,), (55,)
        latent = np.where(t <= 50, -0.8, 0.8) + 0.5 * rng.standard_normal(n)
    elif scenario == "variance":
        y_points, x_points = (40, 60), (45, 65)
        sd = np.where((t > 40) & (t <= 60), 1.5, 0.3)
        latent = sd * rng.standard_normal(n)
    else:
        raise ValueError(f"unknown illustration scenario '{scenario}' (expected 'mean' or 'variance')")

    case = CASES[1]
    x = piecewise_gaussian(rng, n, x_points, case.mu, case.sigma_min, case.sigma_max)
    stress = discretize_likert(latent, levels=LIKERT_LEVELS)
    return Illustration(
        name=scenario,
        stress=DiscreteSeries(stress.values, levels=LIKERT_LEVELS, name="stress"),
        sensing=ContinuousSeries(x, name="sensing"),
        y_points=y_points,
        x_points=x_points,
    )

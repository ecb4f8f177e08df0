"""
Simulation Bench - Replicated detection and hotspot studies

Three studies share the scenario generator:
  1. univariate Joint-MOSUM, Power(5) / FDR(5)
  2. bivariate four-kind ensemble, Power(5) / FDR(0) on pooled points
  3. hotspot hit rate and covering length for both hotspot rules
Any object satisfying ChangePointDetector can be benchmarked in place of
the built-in detectors.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from src.aggregation.hotspots import CombinationSpec, HotspotMode, hotspots_ci, hotspots_threshold
from src.core.pipeline import DetectionPipeline
from src.core.series import ContinuousSeries, DiscreteSeries
from src.processing.critical_values import ThresholdCache, ThresholdRequest, get_or_compute
from src.processing.detectors import CROSS_KINDS, DetectorKind, compute_trace, joint_univariate
from src.processing.local_stats import WindowConfig, compute_local_moments
from src.processing.segmentation import Interval, extract_changepoints
from src.processing.transform import to_continuous
from src.simulation.evaluation import MetricReport, hit_rate_and_length, power_fdr
from src.simulation.scenarios import CASES, ScenarioSpec, generate
from src.utils.logger import setup_logger
from src.utils.metrics import RunMetrics
from src.utils.seeding import derive_seed


logger = setup_logger(__name__)

SAMPLE_SIZE = 100
TABLE1_JUMPS: Dict[str, Tuple[int, ...]] = {"1": (50,), "2": (40, 60), "3": (25, 50, 75)}
TABLE2_JUMPS: Dict[str, Tuple[Tuple[int, ...], Tuple[int, ...]]] = {
    "(1,1)": ((40,), (60,)),
    "(1,2)": ((50,), (40, 60)),
    "(2,2)": ((40, 60), (30, 70)),
}
TABLE3_JUMPS: Dict[str, Tuple[int, ...]] = {"1": (50,), "2": (40, 60)}
TABLE3_DELTAS = (0, 5)
TABLE3_MEAN_SCALE = 2.0
ETA_MATCH = 5


class ChangePointDetector(Protocol):
    """Anything that maps a (Y, X) pair to estimated change points."""

    name: str

    def detect(self, y: ContinuousSeries, x: Optional[ContinuousSeries]) -> Sequence[int]:
        ...


class JointMosumDetector:
    """Joint mean+variance detector of the stress series alone"""

    def __init__(self, cfg: WindowConfig, threshold: float):
        self.cfg = cfg
        self.threshold = threshold
        self.name = f"Joint-MOSUM (G={cfg.G})"
        self.logger = setup_logger(__name__)

    def detect(self, y: ContinuousSeries, x: Optional[ContinuousSeries] = None) -> Sequence[int]:
        trace = joint_univariate(y, self.cfg)
        points = extract_changepoints(trace, self.threshold).points
        self.logger.debug(f"{self.name}: {list(points)}")
        return points


def merge_points(candidates: Sequence[Tuple[int, float]], radius: int) -> List[int]:
    """
    Deduplicate pooled change points.

    Candidates are taken by decreasing d2 (ties to the smaller k); one is
    dropped when an accepted point lies within +-radius.
    """
    accepted: List[int] = []
    for k, _ in sorted(candidates, key=lambda c: (-c[1], c[0])):
        if all(abs(k - a) > radius for a in accepted):
            accepted.append(k)
    return sorted(accepted)


class BiMosumEnsembleDetector:
    """Pooled change points of the four cross kinds"""

    def __init__(self, cfg: WindowConfig, threshold: float, kinds: Sequence[DetectorKind] = CROSS_KINDS):
        self.cfg = cfg
        self.threshold = threshold
        self.kinds = tuple(kinds)
        self.name = f"Bi-MOSUM (G={cfg.G})"
        self.logger = setup_logger(__name__)

    def detect(self, y: ContinuousSeries, x: Optional[ContinuousSeries]) -> Sequence[int]:
        if x is None:
            raise ValueError("the ensemble detector needs both series")
        moments = {"y": compute_local_moments(y, self.cfg), "x": compute_local_moments(x, self.cfg)}
        candidates: List[Tuple[int, float]] = []
        for kind in self.kinds:
            trace = compute_trace(kind, y, x, self.cfg, moments)
            cps = extract_changepoints(trace, self.threshold)
            candidates.extend((k, float(trace.d2[k - 1])) for k in cps.points)
        points = merge_points(candidates, self.cfg.screen_radius)
        self.logger.debug(f"{self.name}: {len(candidates)} candidates -> {points}")
        return points


@dataclass(frozen=True)
class BenchSettings:
    """Settings shared by every cell of a study"""

    alpha: float = 0.05
    eta: float = 0.2
    threshold_reps: int = 1000
    boot_reps: int = 1000
    workers: Optional[int] = None

    @property
    def pool_size(self) -> int:
        return self.workers or min(8, os.cpu_count() or 1)


def _map_replications(fn, replications: int, workers: int) -> list:
    """fn(r) for r = 0..R-1, results in replication order"""
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, range(replications)))


def evaluate_detector(spec: ScenarioSpec,
                      detector: ChangePointDetector,
                      replications: int,
                      eta_power: int = ETA_MATCH,
                      eta_fdr: int = ETA_MATCH,
                      metrics: Optional[RunMetrics] = None,
                      workers: int = 1) -> MetricReport:
    """
    Power and FDR of one detector on one scenario.

    True points are pooled across both series for bivariate scenarios.
    """
    label = f"{spec.name}|{detector.name}"

    def run(r: int) -> List[int]:
        y, x = generate(spec, r)
        estimates = [int(k) for k in detector.detect(y, x)]
        if metrics is not None:
            metrics.record_replication({"scenario": label, "replication": r, "estimates": estimates})
        return estimates

    estimates = _map_replications(run, replications, workers)
    truth = spec.pooled_points if spec.bivariate else spec.true_points
    power, fdr = power_fdr(estimates, truth, eta_power, eta_fdr)
    logger.debug(f"{label}: power={power:.3f} fdr={fdr:.3f}")
    return MetricReport(
        scenario=spec.name, method=detector.name, replications=replications,
        power=power, fdr=fdr, eta_power=eta_power, eta_fdr=eta_fdr,
        records=[{"replication": r, "estimates": est} for r, est in enumerate(estimates)],
    )


def replication_hotspots(y: ContinuousSeries,
                         x: ContinuousSeries,
                         cfg: WindowConfig,
                         threshold: float,
                         combination: CombinationSpec,
                         boot_reps: Optional[int],
                         seed: int) -> Dict[HotspotMode, List[Interval]]:
    """
    Hotspot intervals of one series pair under both rules.

    The CI rule is skipped when boot_reps is None.
    """
    moments = {"y": compute_local_moments(y, cfg), "x": compute_local_moments(x, cfg)}
    results = {
        kind: DetectionPipeline(kind, cfg).process(y, x, threshold, boot_reps,
                                                   derive_seed(seed, list(DetectorKind).index(kind)),
                                                   moments, workers=1)
        for kind in combination.required_kinds
    }
    out = {HotspotMode.THRESHOLD: list(hotspots_threshold(
        {k: res.trace for k, res in results.items()}, threshold, combination).intervals)}
    if boot_reps is not None:
        out[HotspotMode.CI] = list(hotspots_ci(
            {k: res.changepoints for k, res in results.items()}, combination, cfg.n, cfg.alpha).intervals)
    return out


def evaluate_hotspots(spec: ScenarioSpec,
                      cfg: WindowConfig,
                      threshold: float,
                      replications: int,
                      combination: Optional[CombinationSpec] = None,
                      boot_reps: Optional[int] = 1000,
                      metrics: Optional[RunMetrics] = None,
                      workers: int = 1) -> Dict[HotspotMode, MetricReport]:
    """
    Hit rate and mean covering length of both hotspot rules on one scenario.

    Both rules see the same replications; scoring uses the true points of Y.
    """
    combination = combination or CombinationSpec()
    label = f"{spec.name}|G={cfg.G}"

    def run(r: int) -> Dict[HotspotMode, List[Interval]]:
        y, x = generate(spec, r)
        hotspots = replication_hotspots(y, x, cfg, threshold, combination, boot_reps,
                                        derive_seed(spec.seed, r, 1))
        if metrics is not None:
            metrics.record_replication({
                "scenario": label, "replication": r,
                "hotspots": {mode.value: [list(iv) for iv in ivs] for mode, ivs in hotspots.items()},
            })
        return hotspots

    per_rep = _map_replications(run, replications, workers)
    reports = {}
    for mode in per_rep[0]:
        intervals = [rep[mode] for rep in per_rep]
        hit_rate, length = hit_rate_and_length(intervals, spec.true_points, spec.n)
        rule = "Thrs" if mode is HotspotMode.THRESHOLD else "CI"
        reports[mode] = MetricReport(
            scenario=spec.name, method=f"{rule} (G={cfg.G})", replications=replications,
            hit_rate=hit_rate, mean_interval_length=length,
            records=[{"replication": r, "intervals": [list(iv) for iv in ivs]} for r, ivs in enumerate(intervals)],
        )
        logger.debug(f"{label} {rule}: hit={hit_rate:.3f} length={length:.3f}")
    return reports


def study_threshold(settings: BenchSettings,
                    seed: int,
                    G: int,
                    cache: Optional[ThresholdCache] = None,
                    metrics: Optional[RunMetrics] = None,
                    n: int = SAMPLE_SIZE) -> float:
    """Studentized critical value for one bandwidth of a study"""
    req = ThresholdRequest(n=n, alpha=settings.alpha, B=settings.threshold_reps, seed=seed, bandwidth=G)
    return get_or_compute(cache, req, metrics=metrics, workers=settings.workers)


def _case_columns(prefix: str, values: Dict[int, Optional[float]]) -> Dict[str, Optional[float]]:
    return {f"{prefix}_case{c}": values.get(c) for c in CASES}


def run_table(table_id: int,
              replications: int = 500,
              seed: int = 0,
              bandwidths: Sequence[int] = (20, 40),
              settings: Optional[BenchSettings] = None,
              cache: Optional[ThresholdCache] = None,
              metrics: Optional[RunMetrics] = None) -> Tuple[pd.DataFrame, List[MetricReport]]:
    """
    Run one of the three studies over the full scenario x case grid.

    Args:
        table_id: 1 (univariate), 2 (bivariate ensemble) or 3 (hotspots)
        replications: Replications per cell
        seed: Master seed; scenario data depend on (seed, table, scenario, case)
        bandwidths: Bandwidths G to evaluate
        settings: Shared levels and replication counts
        cache: Critical-value cache
        metrics: Audit sink

    Returns:
        (wide table with one column per case, list of per-cell reports)
    """
    if table_id not in (1, 2, 3):
        raise ValueError(f"table must be 1, 2 or 3, got {table_id}")
    settings = settings or BenchSettings()
    metrics = metrics or RunMetrics()
    thresholds = {G: study_threshold(settings, seed, G, cache, metrics) for G in bandwidths}
    logger.info(f"Study {table_id}: R={replications}, G={list(bandwidths)}, "
                f"thresholds={[round(thresholds[G], 4) for G in bandwidths]}")

    runner = {1: _table_detection, 2: _table_detection, 3: _table_hotspots}[table_id]
    with metrics.timed(f"table{table_id}"):
        rows, reports = runner(table_id, replications, seed, bandwidths, settings, thresholds, metrics)
    return pd.DataFrame(rows), reports


def _table_detection(table_id, replications, seed, bandwidths, settings, thresholds, metrics):
    jumps = TABLE1_JUMPS if table_id == 1 else TABLE2_JUMPS
    eta_fdr = ETA_MATCH if table_id == 1 else 0
    rows, reports = [], []
    for s_idx, (label, points) in enumerate(jumps.items()):
        for G in bandwidths:
            cfg = WindowConfig(G=G, n=SAMPLE_SIZE, eta=settings.eta, alpha=settings.alpha)
            detector = (JointMosumDetector(cfg, thresholds[G]) if table_id == 1
                        else BiMosumEnsembleDetector(cfg, thresholds[G]))
            power, fdr = {}, {}
            for case_id in CASES:
                spec_kwargs = dict(case_id=case_id, n=SAMPLE_SIZE, name=f"t{table_id}:{label}:case{case_id}",
                                   seed=derive_seed(seed, table_id, s_idx, case_id))
                spec = (ScenarioSpec(y_points=points, **spec_kwargs) if table_id == 1
                        else ScenarioSpec(y_points=points[0], x_points=points[1], **spec_kwargs))
                report = evaluate_detector(spec, detector, replications, ETA_MATCH, eta_fdr,
                                           metrics, settings.pool_size)
                power[case_id], fdr[case_id] = report.power, report.fdr
                reports.append(report)
            rows.append({"jumps": label, "method": detector.name,
                         **_case_columns("power", power), **_case_columns("fdr", fdr)})
            logger.info(f"{label} {detector.name}: power {[round(power[c], 3) for c in CASES]}")
    return rows, reports


def _table_hotspots(table_id, replications, seed, bandwidths, settings, thresholds, metrics):
    rows, reports = [], []
    for s_idx, (label, points) in enumerate(TABLE3_JUMPS.items()):
        for delta in TABLE3_DELTAS:
            cells: Dict[Tuple[str, int], Dict[str, Dict[int, float]]] = {}
            for G in bandwidths:
                cfg = WindowConfig(G=G, n=SAMPLE_SIZE, eta=settings.eta, alpha=settings.alpha)
                for case_id in CASES:
                    spec = ScenarioSpec.lagged(
                        points, delta, case_id=case_id, n=SAMPLE_SIZE, mean_scale=TABLE3_MEAN_SCALE,
                        seed=derive_seed(seed, table_id, s_idx, delta, case_id),
                        name=f"t3:{label}:d{delta}:case{case_id}",
                    )
                    by_mode = evaluate_hotspots(spec, cfg, thresholds[G], replications,
                                                boot_reps=settings.boot_reps, metrics=metrics,
                                                workers=settings.pool_size)
                    for mode, report in by_mode.items():
                        cell = cells.setdefault((mode.value, G), {"hit": {}, "length": {}})
                        cell["hit"][case_id] = report.hit_rate
                        cell["length"][case_id] = report.mean_interval_length
                        reports.append(report)
            for mode in (HotspotMode.THRESHOLD, HotspotMode.CI):
                for G in bandwidths:
                    cell = cells[(mode.value, G)]
                    rows.append({"jumps": label, "delta": delta,
                                 "rule": "Thrs" if mode is HotspotMode.THRESHOLD else "CI", "G": G,
                                 **_case_columns("hit", cell["hit"]),
                                 **_case_columns("length", cell["length"])})
            logger.info(f"{label} jump(s), delta={delta}: done")
    return rows, reports


def transform_validity(trials: int = 200,
                       n: int = 200,
                       pmf: Sequence[float] = (0.1, 0.2, 0.4, 0.2, 0.1),
                       seed: int = 0,
                       level: float = 0.01) -> float:
    """
    Share of trials in which transformed i.i.d. categorical data pass a
    one-sample KS test against the standard normal at the given level.
    """
    pmf = np.asarray(pmf, dtype=float)
    categories = np.arange(1, pmf.size + 1)
    passed = 0
    for trial in range(trials):
        rng = np.random.Generator(np.random.PCG64(derive_seed(seed, trial)))
        codes = rng.choice(categories, size=n, p=pmf / pmf.sum())
        z, _ = to_continuous(DiscreteSeries(codes, levels=pmf.size), seed=derive_seed(seed, trial, 1))
        if stats.kstest(z.values, "norm").pvalue > level:
            passed += 1
    rate = passed / trials
    logger.info(f"Transform validity: {passed}/{trials} trials pass KS at level {level}")
    return rate


def null_calibration(threshold: float,
                     replications: int = 500,
                     n: int = SAMPLE_SIZE,
                     G: int = 20,
                     alpha: float = 0.05,
                     seed: int = 0,
                     workers: int = 1) -> float:
    """
    Share of i.i.d. N(0, 1) series on which Joint-MOSUM reports any change point.
    """
    cfg = WindowConfig(G=G, n=n, alpha=alpha)
    detector = JointMosumDetector(cfg, threshold)

    def run(r: int) -> bool:
        rng = np.random.Generator(np.random.PCG64(derive_seed(seed, r)))
        return len(detector.detect(ContinuousSeries(rng.standard_normal(n)))) > 0

    rate = float(np.mean(_map_replications(run, replications, workers)))
    logger.info(f"Null detection rate at G={G}, alpha={alpha}: {rate:.3f}")
    return rate

"""
Command-line front end

    detect      change points per detector kind
    hotspot     change points plus hotspot intervals
    simulate    simulation study tables
    threshold   compute or inspect cached critical values
    illustrate  run the two worked examples end to end

Exit codes: 0 success, 2 usage or configuration error, 1 runtime error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import pandas as pd

from src.aggregation.hotspots import CombinationSpec, HotspotMode
from src.aggregation.reporter import ResultReporter, format_runtime_text, summary_row
from src.core.controller import DetectionController, DetectionResult
from src.core.series import ContinuousSeries, SeriesKind, load_csv
from src.processing.critical_values import ThresholdCache, ThresholdRequest, get_or_compute
from src.processing.detectors import DetectorKind
from src.processing.local_stats import WindowConfig
from src.processing.transform import to_continuous
from src.simulation.bench import BenchSettings, run_table
from src.simulation.scenarios import illustration
from src.utils import config as defaults
from src.utils.config import RunConfig
from src.utils.logger import attach_file_handler, detach_file_handler, set_log_level, setup_logger
from src.utils.metrics import RunMetrics


EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _kind_list(text: str) -> Tuple[str, ...]:
    try:
        kinds = tuple(DetectorKind.parse(part).value for part in text.split(",") if part.strip())
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))
    if not kinds:
        raise argparse.ArgumentTypeError("expected at least one detector kind")
    return kinds


def _int_list(text: str) -> Tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("--quiet", action="store_true", help="warnings and errors only")
    common.add_argument("--seed", type=int, default=0, help="master analysis seed")
    common.add_argument("--alpha", type=float, default=defaults.DEFAULT_ALPHA, help="significance level")
    common.add_argument("--threshold-reps", type=int, default=defaults.DEFAULT_THRESHOLD_REPS,
                        help="Monte-Carlo replications for the critical value")
    common.add_argument("--no-cache", action="store_true", help="do not read or write the critical-value cache")
    common.add_argument("--rebuild-cache", action="store_true", help="recompute and overwrite cached critical values")
    common.add_argument("--workers", type=int, default=None, help="thread count for parallel work")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--format", choices=defaults.OUTPUT_FORMATS, default="json",
                        help="csv adds changepoints.csv and hotspots_<mode>.csv next to the JSON reports")

    analysis = argparse.ArgumentParser(add_help=False)
    analysis.add_argument("--eta", type=float, default=defaults.DEFAULT_ETA, help="screening fraction")
    analysis.add_argument("--boot-reps", type=int, default=defaults.DEFAULT_BOOT_REPS,
                          help="bootstrap replications for confidence intervals")
    analysis.add_argument("--mode", choices=defaults.HOTSPOT_MODES, default="threshold",
                          help="hotspot rule (ci also bootstraps change-point intervals)")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--input", required=True, help="CSV file with a header row")
    data.add_argument("--stress-col", default="stress", help="stress (Y) column")
    data.add_argument("--sensing-col", default=None, help="sensing (X) column")
    data.add_argument("--discrete", action="store_true", help="stress column holds ordinal categories 1..L")
    data.add_argument("--levels", type=int, default=None, help="number of stress categories")
    data.add_argument("--transform-seed", type=int, default=0, help="seed of the discrete-to-continuous transform")
    data.add_argument("--bandwidth", type=int, required=True, help="bandwidth G")

    combination = argparse.ArgumentParser(add_help=False)
    combination.add_argument("--combination", type=_kind_list, default=defaults.DEFAULT_CROSS_KINDS,
                             help="cross kinds united by the hotspot rules")
    combination.add_argument("--anchor", choices=("UniY", "UniX"), default="UniY",
                             help="univariate kind intersected with the cross evidence")

    parser = argparse.ArgumentParser(prog="hotspot-mosum",
                                     description="Joint mean/variance MOSUM change points and hotspots")
    sub = parser.add_subparsers(dest="command", required=True)

    detect = sub.add_parser("detect", parents=[common, analysis, data], help="change points per kind")
    detect.add_argument("--kinds", type=_kind_list, default=None,
                        help="detector kinds (default: UniY, plus the cross kinds when X is given)")

    hotspot = sub.add_parser("hotspot", parents=[common, analysis, data, combination],
                             help="hotspot intervals")
    hotspot.add_argument("--kinds", type=_kind_list, default=None, help="extra kinds to report")

    simulate = sub.add_parser("simulate", parents=[common], help="simulation study tables")
    simulate.add_argument("--table", type=int, choices=(1, 2, 3), required=True)
    simulate.add_argument("--replications", type=int, default=defaults.DEFAULT_REPLICATIONS)
    simulate.add_argument("--bandwidths", type=_int_list, default=defaults.DEFAULT_BANDWIDTHS)
    simulate.add_argument("--eta", type=float, default=defaults.DEFAULT_ETA)
    simulate.add_argument("--boot-reps", type=int, default=defaults.DEFAULT_BOOT_REPS)

    threshold = sub.add_parser("threshold", parents=[common], help="critical value for a series length")
    threshold.add_argument("--length", type=int, required=True, help="series length n")
    threshold.add_argument("--keep-sample", action="store_true", help="store the replication maxima in the cache")
    threshold.add_argument("--bandwidth", type=int, default=None,
                           help="calibrate on the detector at bandwidth G instead of the random-walk grid")

    illustrate = sub.add_parser("illustrate", parents=[common, analysis, combination],
                                help="worked examples on synthetic Likert data")
    illustrate.add_argument("--scenario", choices=defaults.ILLUSTRATION_SCENARIOS, default="mean")
    illustrate.add_argument("--bandwidth", type=int, default=20)
    illustrate.add_argument("--transform-seed", type=int, default=0)

    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """Resolve parsed arguments into a validated RunConfig."""
    values = {key: value for key, value in vars(args).items()
              if key in RunConfig.__dataclass_fields__ and value is not None}
    if getattr(args, "combination", None) is not None:
        values["cross_kinds"] = tuple(args.combination)
    if args.command in ("detect", "hotspot"):
        has_x = args.sensing_col is not None
        if args.kinds is None:
            values["kinds"] = defaults.DEFAULT_KINDS if has_x else ("UniY",)
    return RunConfig(**values)


class Application:
    """Runs one CLI command from a resolved RunConfig"""

    def __init__(self, config: RunConfig):
        self.config = config
        self.metrics = RunMetrics()
        self.logger = setup_logger(__name__)
        self.cache = None if config.no_cache else ThresholdCache(keep_sample=config.keep_sample)

    # -- data ---------------------------------------------------------------

    def _load(self, reporter: ResultReporter) -> Tuple[ContinuousSeries, Optional[ContinuousSeries]]:
        cfg = self.config
        if cfg.discrete:
            stress = load_csv(cfg.input, cfg.stress_col, SeriesKind.DISCRETE, cfg.levels)
            y, record = to_continuous(stress, seed=cfg.transform_seed)
            reporter.write_transform(record, stress.values)
        else:
            y = load_csv(cfg.input, cfg.stress_col, SeriesKind.CONTINUOUS)
        x = None
        if cfg.sensing_col is not None:
            x = load_csv(cfg.input, cfg.sensing_col, SeriesKind.CONTINUOUS)
        self.logger.info(f"Loaded n={y.n} from {cfg.input}" + (" (stress + sensing)" if x is not None else ""))
        return y, x

    def _kinds(self, x: Optional[ContinuousSeries], spec: Optional[CombinationSpec] = None) -> List[DetectorKind]:
        kinds = [DetectorKind(k) for k in self.config.kinds]
        if spec is not None:
            kinds += [k for k in spec.required_kinds if k not in kinds]
        if x is None:
            needs_x = [k.value for k in kinds if k is not DetectorKind.UNI_Y]
            if needs_x:
                raise ValueError(f"kinds {needs_x} need the sensing series (--sensing-col)")
        return kinds

    def _spec(self) -> CombinationSpec:
        return CombinationSpec(
            cross_kinds=tuple(DetectorKind(k) for k in self.config.cross_kinds),
            anchor=DetectorKind(self.config.anchor),
            mode=HotspotMode(self.config.mode),
        )

    def _detect(self, y, x, kinds: Sequence[DetectorKind], bootstrap: bool,
                spec: Optional[CombinationSpec] = None) -> DetectionResult:
        cfg = self.config
        self.config.validate(y.n)
        window = WindowConfig(G=cfg.bandwidth, n=y.n, eta=cfg.eta, alpha=cfg.alpha)
        controller = DetectionController(
            window, metrics=self.metrics, cache=self.cache,
            threshold_reps=cfg.threshold_reps, threshold_seed=cfg.seed,
            rebuild_cache=cfg.rebuild_cache, workers=cfg.workers,
        )
        result = controller.execute(y, x, kinds, boot_reps=cfg.boot_reps if bootstrap else None, seed=cfg.seed)
        if result.failures:
            self.logger.warning(f"Kinds failed: {[k.value for k in result.failures]}")
        if spec is not None:
            controller.fuse(result, spec)
        return result

    def _write_detection(self, reporter: ResultReporter, result: DetectionResult) -> None:
        reporter.write_traces(result.traces)
        reporter.write_changepoints(result.changepoints, result.failures, result.threshold)

    # -- commands -----------------------------------------------------------

    def cmd_detect(self) -> int:
        reporter = ResultReporter(self.config)
        y, x = self._load(reporter)
        result = self._detect(y, x, self._kinds(x), bootstrap=self.config.mode == "ci")
        self._write_detection(reporter, result)
        if not result.results:
            raise RuntimeError("every detector kind failed")
        print(summary_row(result.changepoints, [], label=Path(self.config.input).stem))
        return EXIT_OK

    def cmd_hotspot(self) -> int:
        reporter = ResultReporter(self.config)
        y, x = self._load(reporter)
        spec = self._spec()
        if x is None and spec.anchor is not DetectorKind.UNI_Y:
            raise ValueError("the UniX anchor needs the sensing series (--sensing-col)")
        result = self._detect(y, x, self._kinds(x, spec), bootstrap=spec.mode is HotspotMode.CI, spec=spec)
        self._write_detection(reporter, result)
        hotspots = result.hotspots[spec.mode.value]
        reporter.write_hotspots(hotspots)
        print(summary_row(result.changepoints, [hotspots], label=Path(self.config.input).stem))
        return EXIT_OK

    def cmd_illustrate(self) -> int:
        cfg = self.config
        reporter = ResultReporter(cfg)
        example = illustration(cfg.scenario, seed=cfg.seed)
        inputs = pd.DataFrame({
            "t": range(1, example.stress.n + 1),
            "stress": example.stress.values,
            "sensing": example.sensing.values,
        })
        reporter.write_frame(f"illustration_{cfg.scenario}.csv", inputs)

        y, record = to_continuous(example.stress, seed=cfg.transform_seed)
        reporter.write_transform(record, example.stress.values)
        spec = self._spec()
        result = self._detect(y, example.sensing, self._kinds(example.sensing, spec), bootstrap=True, spec=spec)
        self._write_detection(reporter, result)
        for hotspots in result.hotspots.values():
            reporter.write_hotspots(hotspots)
        print(f"true change points: Y {list(example.y_points)}, X {list(example.x_points)}")
        print(summary_row(result.changepoints, result.hotspots.values(), label=cfg.scenario))
        return EXIT_OK

    def cmd_simulate(self) -> int:
        cfg = self.config
        reporter = ResultReporter(cfg)
        settings = BenchSettings(alpha=cfg.alpha, eta=cfg.eta, threshold_reps=cfg.threshold_reps,
                                 boot_reps=cfg.boot_reps, workers=cfg.workers)
        table, reports = run_table(cfg.table, cfg.replications, cfg.seed, cfg.bandwidths,
                                   settings, self.cache, self.metrics)
        reporter.write_table(cfg.table, table, [r.to_dict() for r in reports], self.metrics.replication_records())
        with pd.option_context("display.width", 200, "display.max_columns", None):
            print(table.round(3).to_string(index=False))
        return EXIT_OK

    def cmd_threshold(self) -> int:
        cfg = self.config
        req = ThresholdRequest(n=cfg.length, alpha=cfg.alpha, B=cfg.threshold_reps, seed=cfg.seed,
                               bandwidth=cfg.bandwidth)
        value = get_or_compute(self.cache, req, rebuild=cfg.rebuild_cache, metrics=self.metrics, workers=cfg.workers)
        label = f"n={cfg.length}" if req.bandwidth is None else f"n={cfg.length}, G={req.bandwidth}"
        print(f"D_n({label}, alpha={cfg.alpha}) = {value:.6f} "
              f"[B={cfg.threshold_reps}, seed={cfg.seed}, {req.describe()}]")
        if self.cache is not None:
            print(f"cache: {self.cache.path}")
        return EXIT_OK

    def run(self) -> int:
        handler = None
        if self.config.command != "threshold":
            Path(self.config.out).mkdir(parents=True, exist_ok=True)
            handler = attach_file_handler(str(Path(self.config.out) / "run.log"))
        try:
            return getattr(self, f"cmd_{self.config.command}")()
        finally:
            self.logger.debug(format_runtime_text(self.metrics.get_summary()))
            if handler is not None:
                detach_file_handler(handler)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK

    if args.verbose:
        set_log_level(logging.DEBUG)
    elif args.quiet:
        set_log_level(logging.WARNING)
    logger = setup_logger(__name__)

    try:
        config = config_from_args(args)
        return Application(config).run()
    except ValueError as e:
        logger.error(str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:
        logger.exception(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

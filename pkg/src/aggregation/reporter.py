"""
Result Reporter - Writes run artifacts stamped with their configuration

JSON files carry the full RunConfig, the resolved seed and the config hash
under "run"; CSV files carry the same as leading "#" comment lines, so
`pandas.read_csv(path, comment="#")` reads them back. Nothing time-dependent
is written, so pinned-seed runs are byte-stable.
"""

import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional

import numpy as np
import pandas as pd

from src.aggregation.hotspots import HotspotSet
from src.processing.detectors import DetectorKind, DetectorTrace
from src.processing.segmentation import ChangePointSet
from src.processing.transform import TransformRecord
from src.utils.config import RunConfig
from src.utils.logger import setup_logger


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, DetectorKind):
        return value.value
    return value


class ResultReporter:
    """
    Writes detection, hotspot and simulation artifacts to an output directory.
    """

    FLOAT_FORMAT = "%.10g"

    def __init__(self, config: RunConfig, out_dir: Optional[str] = None):
        self.config = config
        self.out_dir = Path(out_dir or config.out)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.logger = setup_logger(__name__)
        self.written: List[Path] = []

    @property
    def stamp(self) -> Dict[str, Any]:
        return {
            "config": self.config.to_dict(),
            "seed": self.config.seed,
            "config_hash": self.config.fingerprint(),
        }

    def write_json(self, name: str, payload: Dict[str, Any]) -> Path:
        """Write payload plus the run stamp as canonical JSON"""
        path = self.out_dir / name
        body = dict(_jsonable(payload))
        body["run"] = self.stamp
        path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return self._track(path)

    def write_frame(self, name: str, frame: pd.DataFrame) -> Path:
        """Write a CSV preceded by "#" lines holding the run stamp"""
        path = self.out_dir / name
        stamp = self.stamp
        with path.open("w", encoding="utf-8", newline="") as fh:
            fh.write(f"# config_hash={stamp['config_hash']}\n")
            fh.write(f"# seed={stamp['seed']}\n")
            fh.write(f"# config={json.dumps(stamp['config'], sort_keys=True)}\n")
            frame.to_csv(fh, index=False, float_format=self.FLOAT_FORMAT, lineterminator="\n")
        return self._track(path)

    def _track(self, path: Path) -> Path:
        self.written.append(path)
        self.logger.debug(f"Wrote {path}")
        return path

    def write_traces(self, traces: Mapping[DetectorKind, DetectorTrace]) -> List[Path]:
        return [self.write_frame(f"trace_{kind.value}.csv", trace.to_frame())
                for kind, trace in sorted(traces.items(), key=lambda item: item[0].value)]

    def write_changepoints(self,
                           changepoints: Mapping[DetectorKind, ChangePointSet],
                           failures: Optional[Mapping[DetectorKind, str]] = None,
                           threshold: Optional[float] = None) -> Path:
        """
        Change-point report of every kind: JSON always, plus a flat CSV for --format csv.
        """
        payload = {
            "threshold": threshold,
            "kinds": {kind.value: cp.to_dict() for kind, cp in changepoints.items()},
            "failures": {kind.value: msg for kind, msg in (failures or {}).items()},
        }
        path = self.write_json("changepoints.json", payload)
        if self.config.format == "csv":
            self.write_frame("changepoints.csv", changepoint_frame(changepoints.values()))
        return path

    def write_hotspots(self, hotspots: HotspotSet) -> Path:
        """Hotspot JSON and shading CSV, plus an interval CSV for --format csv"""
        mode = hotspots.mode.value
        self.write_frame(f"shading_{mode}.csv", hotspots.shading_frame())
        if self.config.format == "csv":
            self.write_frame(f"hotspots_{mode}.csv", hotspot_frame(hotspots))
        return self.write_json(f"hotspots_{mode}.json", hotspots.to_dict())

    def write_transform(self, record: TransformRecord, codes: np.ndarray) -> Path:
        self.write_frame("transform.csv", record.to_frame(codes))
        return self.write_json("transform.json", record.to_dict())

    def write_table(self, table_id: int, table: pd.DataFrame,
                    cells: Iterable[Dict[str, Any]], records: Iterable[Dict[str, Any]]) -> Path:
        """Simulation grid CSV plus the per-cell and per-replication audit log"""
        self.write_json(f"table{table_id}_audit.json",
                        {"table": table_id, "cells": list(cells), "replications": list(records)})
        return self.write_frame(f"table{table_id}.csv", table)


def changepoint_frame(changepoints: Iterable[ChangePointSet]) -> pd.DataFrame:
    """One row per change point: kind, k, ci_lo, ci_hi"""
    rows = []
    for cp in sorted(changepoints, key=lambda c: c.kind.value):
        cis = cp.cis if cp.cis is not None else [(None, None)] * len(cp.points)
        for k, (lo, hi) in zip(cp.points, cis):
            rows.append({"kind": cp.kind.value, "k": k, "ci_lo": lo, "ci_hi": hi})
    return pd.DataFrame(rows, columns=["kind", "k", "ci_lo", "ci_hi"])


def hotspot_frame(hotspots: HotspotSet) -> pd.DataFrame:
    """One row per interval with its supporting cross kinds (lo, hi, kinds)"""
    provenance = hotspots.provenance or [()] * len(hotspots.intervals)
    rows = [{"lo": lo, "hi": hi, "kinds": "+".join(k.value for k in kinds)}
            for (lo, hi), kinds in zip(hotspots.intervals, provenance)]
    return pd.DataFrame(rows, columns=["lo", "hi", "kinds"])


def summary_row(changepoints: Mapping[DetectorKind, ChangePointSet],
                hotspots: Iterable[HotspotSet],
                label: str = "series") -> str:
    """
    One-line summary: change points per kind, then hotspot intervals per rule.

    Example:
        series | UniY: 50 | YX: 52 | YX2: - | Thrs: [37,61] | CI: [48,52]
    """
    cells = [label]
    for kind in sorted(changepoints, key=lambda k: list(DetectorKind).index(k)):
        points = changepoints[kind].points
        cells.append(f"{kind.value}: {', '.join(str(p) for p in points) if points else '-'}")
    for hotspot in hotspots:
        name = "Thrs" if hotspot.mode.value == "threshold" else "CI"
        spans = ", ".join(f"[{lo},{hi}]" for lo, hi in hotspot.intervals)
        cells.append(f"{name}: {spans or '-'}")
    return " | ".join(cells)


def format_runtime_text(summary: Dict[str, Any]) -> str:
    """
    Format a RunMetrics summary as human-readable text.
    """
    lines = [
        "═══════════════════════════════════════════",
        "  RUN SUMMARY",
        "═══════════════════════════════════════════",
    ]
    for stage, stats in sorted(summary.get("stages", {}).items()):
        lines.append(f"{stage:<14} {stats['total_ms']:>10.0f}ms  ({stats['count']} calls)")
    lines.append(f"Replications:  {summary.get('replications', 0)}")
    lines.append(f"Cache:         {summary.get('cache_hits', 0)} hits / {summary.get('cache_misses', 0)} misses")
    if summary.get("total_failures"):
        lines.append(f"Failures:      {summary['kind_failures']}")
    lines.append("═══════════════════════════════════════════")
    return "\n".join(lines)

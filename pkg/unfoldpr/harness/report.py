"""
This module writes experiment outputs:
report.json, per-metric summary CSVs, metric curves, training histories,
and solver traces.
"""

# --------------------------------------------------------------------------------
# Imports
# --------------------------------------------------------------------------------

import csv
import json
import logging

from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

from unfoldpr.core.metric_recovery import MetricCurve
from unfoldpr.core.solvers import SolverTrace
from unfoldpr.core.training import TrainingHistory
from unfoldpr.harness.experiment import METRICS, Report
from unfoldpr.utils.exceptions import ReportWriteError


# --------------------------------------------------------------------------------
# Globals
# --------------------------------------------------------------------------------

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ["method", "budget", "median", "q1", "q3", "n"]
CURVE_COLUMNS = ["layer", "r", "y", "f"]
HISTORY_COLUMNS = ["epoch", "train_loss", "val_loss"]
TRACE_COLUMNS = ["iteration", "objective", "primal_residual", "wall_time"]

summary_files = {
  "stoi": "summary.csv",
  "si_sdr": "summary_si_sdr.csv",
  "spectral_distance": "summary_spectral_distance.csv",
}


# --------------------------------------------------------------------------------
# CSV Helpers
# --------------------------------------------------------------------------------

def _cell(value) -> str:
  if isinstance(value, float):
    return repr(value)
  return str(value)


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
  try:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as csv_file:
      writer = csv.writer(csv_file, lineterminator="\n")
      writer.writerow(columns)
      for row in rows:
        writer.writerow([_cell(v) for v in row])
  except OSError as exc:
    raise ReportWriteError(f"cannot write {path}: {exc}") from exc
  return path


def write_curves_csv(curves: List[MetricCurve], path: Path) -> Path:
  return write_csv(Path(path), CURVE_COLUMNS, (row for curve in curves for row in curve.rows()))


def write_history_csv(history: TrainingHistory, path: Path) -> Path:
  return write_csv(Path(path), HISTORY_COLUMNS, ((rec.epoch, rec.train_loss, rec.val_loss) for rec in history.epochs))


def write_trace_csv(trace: SolverTrace, path: Path) -> Path:
  return write_csv(Path(path), TRACE_COLUMNS, ([row[c] for c in TRACE_COLUMNS] for row in trace.to_rows()))


# --------------------------------------------------------------------------------
# Report
# --------------------------------------------------------------------------------

def emit_report(
  report: Report,
  directory: Path,
  curves: Optional[Dict[str, List[MetricCurve]]] = None,
  histories: Optional[Dict[str, TrainingHistory]] = None
) -> List[Path]:
  directory = Path(directory)
  written: List[Path] = []

  try:
    directory.mkdir(parents=True, exist_ok=True)
    report_path = directory / "report.json"
    report_path.write_text(report.model_dump_json(indent=2) + "\n")
    written.append(report_path)

    timings_path = directory / "timings.json"
    timings_path.write_text(json.dumps(report.runtime_seconds, indent=2, sort_keys=True) + "\n")
    written.append(timings_path)
  except OSError as exc:
    raise ReportWriteError(f"cannot write report to {directory}: {exc}") from exc

  for metric in METRICS:
    rows = [(row.method, row.budget, row.median, row.q1, row.q3, row.n) for row in report.summary if row.metric == metric]
    written.append(write_csv(directory / summary_files[metric], SUMMARY_COLUMNS, rows))

  for name, model_curves in (curves or {}).items():
    written.append(write_curves_csv(model_curves, directory / "curves" / f"{name}.csv"))

  for name, history in (histories or {}).items():
    written.append(write_history_csv(history, directory / "history" / f"{name}.csv"))

  logger.info("wrote %d file(s) to %s", len(written), directory)
  return written


def load_report(path: Path) -> Report:
  return Report.model_validate_json(Path(path).read_text())

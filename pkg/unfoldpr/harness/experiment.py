"""
This module runs experiments:
every configured method on every test signal, with metrics and summary statistics.
"""

# --------------------------------------------------------------------------------
# Imports
# --------------------------------------------------------------------------------

import logging
import time

import numpy as np

from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from pydantic import BaseModel, Field
from tqdm import tqdm
from typing import Callable, Dict, List, Literal, Optional, Tuple

from unfoldpr.core.solvers import SolverTrace, admm_pr, griffin_lim
from unfoldpr.core.training import TrainingExample
from unfoldpr.core.unfolded import UnfoldedModel, iterate_model, uadmm_forward
from unfoldpr.harness import metrics
from unfoldpr.harness.audio import load_wav
from unfoldpr.harness.corpus import discover, prepare_example
from unfoldpr.utils.config import ExperimentConfig
from unfoldpr.utils.exceptions import DomainError, PhaseRetrievalError


# --------------------------------------------------------------------------------
# Globals
# --------------------------------------------------------------------------------

logger = logging.getLogger(__name__)

METRICS = ("stoi", "si_sdr", "spectral_distance")

Method = Literal["gla", "admm", "uadmm"]


# --------------------------------------------------------------------------------
# Report Models
# --------------------------------------------------------------------------------

class SignalResult(BaseModel):
  signal: str
  method: str
  budget: int
  stoi: Optional[float] = None
  si_sdr: Optional[float] = None
  spectral_distance: Optional[float] = None


class SummaryRow(BaseModel):
  metric: str
  method: str
  budget: int
  median: float
  q1: float
  q3: float
  n: int


class Failure(BaseModel):
  signal: str
  stage: str
  message: str


class ReportHeader(BaseModel):
  seed: int
  sample_rate: int
  window_length: int
  rho: float
  crop_seconds: Optional[float]
  split_limits: Dict[str, Optional[int]]
  gla_iters: int
  admm_budgets: List[int]
  iterations: List[int]
  models: List[str]
  floors: str = "magnitudes |h| and measurements r floored at 1e-8"


class Report(BaseModel):
  header: ReportHeader
  results: List[SignalResult] = []
  summary: List[SummaryRow] = []
  failures: List[Failure] = []
  runtime_seconds: Dict[str, float] = Field(default_factory=dict, exclude=True)


# --------------------------------------------------------------------------------
# Reconstruction
# --------------------------------------------------------------------------------

def reconstruct(
  example: TrainingExample,
  method: Method,
  iters: Optional[int],
  rho: float,
  model: Optional[UnfoldedModel] = None
) -> Tuple[np.ndarray, Optional[SolverTrace]]:
  """Runs one method from the example's initial estimate; returns (samples, trace)."""

  r, x0 = example.measurements, example.x0

  if method == "gla":
    x, trace = griffin_lim(r, x0, iters or 0)
    return x.samples, trace

  if method == "admm":
    state, trace = admm_pr(r, x0, None, rho, iters=iters or 0)
    return state.x.samples, trace

  if model is None:
    raise DomainError("method 'uadmm' needs a model")
  if iters is None:
    iters = model.T
  if model.T == 0 or iters % model.T or iters == 0:
    raise DomainError(f"UADMM iteration count must be a positive multiple of T={model.T}, got {iters}")
  return iterate_model(model, r, x0, iters // model.T).samples, None


def _score(example: TrainingExample, samples: np.ndarray, method: str, budget: int) -> SignalResult:
  est = example.reference.with_samples(samples)
  result = SignalResult(signal=example.name, method=method, budget=budget)

  result.si_sdr = metrics.si_sdr(example.reference, est)
  result.spectral_distance = metrics.spectral_distance(est, example.measurements)
  try:
    result.stoi = metrics.stoi(example.reference, est)
  except PhaseRetrievalError as exc:
    logger.warning("%s: STOI not available for %s-%d: %s", example.name, method, budget, exc)
  return result


def _evaluate_signal(
  example: TrainingExample,
  cfg: ExperimentConfig,
  models: Dict[str, UnfoldedModel]
) -> Tuple[List[SignalResult], List[Failure], Dict[str, float]]:
  results: List[SignalResult] = []
  failures: List[Failure] = []
  timings: Dict[str, float] = {}
  r, rho = example.measurements, cfg.solvers.rho

  def attempt(stage: str, run: Callable[[], None]) -> None:
    start = time.perf_counter()
    try:
      run()
    except PhaseRetrievalError as exc:
      logger.warning("%s: %s failed: %s", example.name, stage, exc)
      failures.append(Failure(signal=example.name, stage=stage, message=str(exc)))
    timings[stage] = time.perf_counter() - start

  def run_gla() -> None:
    x, _ = griffin_lim(r, example.x0, cfg.solvers.gla_iters)
    results.append(_score(example, x.samples, "gla", cfg.solvers.gla_iters))

  def run_admm() -> None:
    # one run, scored at each budget along the way
    x, lam, done = example.x0, None, 0
    for budget in sorted(set(cfg.solvers.admm_budgets)):
      state, _ = admm_pr(r, x, lam, rho, iters=budget - done)
      x, lam, done = state.x, state.lam, budget
      results.append(_score(example, x.samples, "admm", budget))

  def run_model(name: str, model: UnfoldedModel) -> Callable[[], None]:
    def run() -> None:
      x, lam, done = example.x0, None, 0
      for k in sorted(set(cfg.solvers.iterations)):
        for _ in range(k - done):
          x, lam, _ = uadmm_forward(model, r, x, lam)
        done = k
        results.append(_score(example, x.samples, f"uadmm:{name}", k * model.T))
    return run

  attempt("gla", run_gla)
  attempt("admm", run_admm)
  for name, model in models.items():
    attempt(f"uadmm:{name}", run_model(name, model))

  return results, failures, timings


# --------------------------------------------------------------------------------
# Aggregation
# --------------------------------------------------------------------------------

def summarize(results: List[SignalResult]) -> List[SummaryRow]:
  keys: List[Tuple[str, int]] = []
  for res in results:
    if (res.method, res.budget) not in keys:
      keys.append((res.method, res.budget))

  rows = []
  for metric in METRICS:
    for method, budget in keys:
      values = [
        getattr(res, metric) for res in results
        if res.method == method and res.budget == budget and getattr(res, metric) is not None]
      if not values:
        continue
      q1, median, q3 = np.percentile(values, [25, 50, 75])
      rows.append(SummaryRow(
        metric=metric, method=method, budget=budget,
        median=float(median), q1=float(q1), q3=float(q3), n=len(values)))
  return rows


def _header(cfg: ExperimentConfig, models: Dict[str, UnfoldedModel]) -> ReportHeader:
  return ReportHeader(
    seed=cfg.seed,
    sample_rate=cfg.data.sample_rate,
    window_length=cfg.stft.window_length,
    rho=cfg.solvers.rho,
    crop_seconds=cfg.data.crop_seconds,
    split_limits={"train": cfg.data.max_train, "val": cfg.data.max_val, "test": cfg.data.max_test},
    gla_iters=cfg.solvers.gla_iters,
    admm_budgets=sorted(set(cfg.solvers.admm_budgets)),
    iterations=sorted(set(cfg.solvers.iterations)),
    models=list(models))


# --------------------------------------------------------------------------------
# Experiment
# --------------------------------------------------------------------------------

def load_test_examples(cfg: ExperimentConfig) -> Tuple[List[TrainingExample], List[Failure]]:
  examples, failures = [], []
  for path in discover(Path(cfg.data.test_dir), cfg.data.max_test):
    try:
      signal = load_wav(path, cfg.data.crop_seconds, cfg.data.sample_rate)
      examples.append(prepare_example(path.name, signal, cfg.stft, cfg.seed))
    except PhaseRetrievalError as exc:
      logger.warning("%s: skipped: %s", path.name, exc)
      failures.append(Failure(signal=path.name, stage="load", message=str(exc)))
  return examples, failures


def run_experiment(
  cfg: ExperimentConfig,
  models: Optional[Dict[str, UnfoldedModel]] = None,
  examples: Optional[List[TrainingExample]] = None
) -> Report:
  models = models or {}
  failures: List[Failure] = []
  if examples is None:
    examples, failures = load_test_examples(cfg)

  report = Report(header=_header(cfg, models), failures=failures)
  start = time.perf_counter()

  with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
    outcomes = pool.map(lambda ex: _evaluate_signal(ex, cfg, models), examples)
    for results, signal_failures, timings in tqdm(outcomes, total=len(examples), desc="signals", disable=not cfg.progress):
      report.results.extend(results)
      report.failures.extend(signal_failures)
      for stage, seconds in timings.items():
        report.runtime_seconds[stage] = report.runtime_seconds.get(stage, 0.0) + seconds

  report.summary = summarize(report.results)
  report.runtime_seconds["total"] = time.perf_counter() - start
  logger.info("evaluated %d signal(s), %d result row(s), %d failure(s)", len(examples), len(report.results), len(report.failures))
  return report

"""
This module contains tests for the experiment runner.
"""

# --------------------------------------------------------------------------------
# Imports
# --------------------------------------------------------------------------------

import logging

import pytest

from unfoldpr.core.unfolded import UnfoldedModel
from unfoldpr.harness import metrics
from unfoldpr.harness.corpus import prepare_example, write_synthetic_corpus
from unfoldpr.harness.experiment import (
  SignalResult, load_test_examples, reconstruct, run_experiment, summarize)
from unfoldpr.harness.report import emit_report
from unfoldpr.utils.config import parse_config
from unfoldpr.utils.exceptions import DomainError


# --------------------------------------------------------------------------------
# Fixtures
# --------------------------------------------------------------------------------

@pytest.fixture
def tiny_config(clip_inputs, seed):
  return parse_config({
    "seed": seed,
    "data": {"sample_rate": clip_inputs.sample_rate, "crop_seconds": None},
    "stft": {"window_length": clip_inputs.window_length},
    "solvers": {"rho": 1e-3, "gla_iters": 5, "admm_budgets": [4, 2, 8], "iterations": [1, 2]},
  }, env={})


@pytest.fixture
def short_examples(clip_inputs, seed):
  return [
    prepare_example(f"clip{k}.wav", clip_inputs.speech(seed + k, seconds=0.1), clip_inputs.stft, seed)
    for k in range(2)]


def _rows(report, method):
  return [res for res in report.results if res.method == method]


# --------------------------------------------------------------------------------
# Reconstruction
# --------------------------------------------------------------------------------

def test_reconstruct_methods(short_examples):
  example = short_examples[0]
  gla, gla_trace = reconstruct(example, "gla", 3, 1e-3)
  admm, admm_trace = reconstruct(example, "admm", 3, 1e-3)
  uadmm, trace = reconstruct(example, "uadmm", None, 1e-3, UnfoldedModel.quadratic(T=3, C=1))
  assert len(gla_trace) == len(admm_trace) == 3
  assert trace is None
  assert gla.shape == admm.shape == uadmm.shape == example.reference.samples.shape


def test_reconstruct_checks_uadmm_arguments(short_examples):
  model = UnfoldedModel.quadratic(T=3, C=1)
  with pytest.raises(DomainError):
    reconstruct(short_examples[0], "uadmm", 4, 1e-3, model)
  with pytest.raises(DomainError):
    reconstruct(short_examples[0], "uadmm", 3, 1e-3)


# --------------------------------------------------------------------------------
# Experiment
# --------------------------------------------------------------------------------

def test_empty_test_set(tiny_config):
  report = run_experiment(tiny_config, examples=[])
  assert report.results == [] and report.summary == [] and report.failures == []
  assert report.header.admm_budgets == [2, 4, 8]


def test_rows_and_labels(tiny_config, short_examples):
  models = {"q": UnfoldedModel.quadratic(T=2, C=1, rho=1e-3)}
  report = run_experiment(tiny_config, models, short_examples)

  assert len(report.results) == 2 * (1 + 3 + 2)
  assert [res.budget for res in _rows(report, "gla")] == [5, 5]
  assert [res.budget for res in _rows(report, "admm")][:3] == [2, 4, 8]
  assert [res.budget for res in _rows(report, "uadmm:q")][:2] == [2, 4]
  assert report.header.models == ["q"]
  assert report.runtime_seconds["total"] > 0.0


def test_admm_budget_monotone_on_spectral_distance(tiny_config, short_examples):
  cfg = tiny_config.model_copy(update={"solvers": tiny_config.solvers.model_copy(update={"admm_budgets": [5, 50]})})
  report = run_experiment(cfg, examples=short_examples)
  medians = {row.budget: row.median for row in report.summary if row.metric == "spectral_distance" and row.method == "admm"}
  assert medians[50] <= medians[5]


def test_long_admm_beats_long_gla_on_spectral_distance(tiny_config, clip_inputs, seed):
  examples = [
    prepare_example(f"clip{k}.wav", clip_inputs.speech(seed + 20 + k), clip_inputs.stft, seed)
    for k in range(4)]
  solvers = tiny_config.solvers.model_copy(update={"gla_iters": 1500, "admm_budgets": [1500]})
  report = run_experiment(tiny_config.model_copy(update={"solvers": solvers}), examples=examples)

  medians = {row.method: row.median for row in report.summary if row.metric == "spectral_distance"}
  assert medians["admm"] < medians["gla"]


def test_incremental_admm_matches_separate_runs(tiny_config, short_examples):
  report = run_experiment(tiny_config, examples=short_examples[:1])
  example = short_examples[0]
  for res in _rows(report, "admm"):
    samples, _ = reconstruct(example, "admm", res.budget, 1e-3)
    expected = metrics.spectral_distance(example.reference.with_samples(samples), example.measurements)
    assert res.spectral_distance == pytest.approx(expected, rel=1e-9)


def test_quadratic_model_tracks_admm(tiny_config, short_examples):
  """A quadratic-initialized network run k times scores like ADMM at k*T iterations."""

  report = run_experiment(tiny_config, {"q": UnfoldedModel.quadratic(T=2, C=1, rho=1e-3)}, short_examples[:1])
  admm = {res.budget: res for res in _rows(report, "admm")}
  for res in _rows(report, "uadmm:q"):
    assert res.spectral_distance == pytest.approx(admm[res.budget].spectral_distance, rel=1e-6)
    assert res.si_sdr == pytest.approx(admm[res.budget].si_sdr, abs=1e-6)


def test_runs_are_deterministic(tiny_config, short_examples):
  models = {"q": UnfoldedModel.quadratic(T=2, C=1, rho=1e-3)}
  first = run_experiment(tiny_config, models, short_examples)
  second = run_experiment(tiny_config.model_copy(update={"workers": 2}), models, short_examples)
  assert first.model_dump() == second.model_dump()


def test_short_clips_have_no_stoi(tiny_config, short_examples, caplog):
  with caplog.at_level(logging.WARNING, logger="unfoldpr.harness.experiment"):
    report = run_experiment(tiny_config, examples=short_examples)
  assert all(res.stoi is None for res in report.results)
  assert all(res.si_sdr is not None for res in report.results)
  assert "STOI not available" in caplog.text
  assert {row.metric for row in report.summary} == {"si_sdr", "spectral_distance"}


def test_long_clip_has_stoi(tiny_config, clip_inputs, seed):
  example = prepare_example("long.wav", clip_inputs.speech(seed, seconds=1.5), clip_inputs.stft, seed)
  report = run_experiment(tiny_config, examples=[example])
  assert all(res.stoi is not None and -1.0 <= res.stoi <= 1.0 for res in report.results)


def test_model_failure_is_recorded(tiny_config, short_examples):
  bad = UnfoldedModel.quadratic(T=1, C=1)
  bad.params[:, bad.index_beta] = 1.0
  report = run_experiment(tiny_config, {"bad": bad}, short_examples)

  assert [f.stage for f in report.failures] == ["uadmm:bad", "uadmm:bad"]
  assert _rows(report, "uadmm:bad") == []
  assert len(_rows(report, "admm")) == 6


def test_unreadable_test_file_is_recorded(tiny_config, tmp_path, clip_inputs, seed):
  write_synthetic_corpus(tmp_path, {"test": 2}, 0.1, clip_inputs.sample_rate, seed)
  (tmp_path / "test" / "zz_broken.wav").write_bytes(b"RIFF\x00\x00")
  cfg = tiny_config.model_copy(update={"data": tiny_config.data.model_copy(update={"test_dir": str(tmp_path / "test")})})

  examples, failures = load_test_examples(cfg)
  assert [ex.name for ex in examples] == ["clip_000.wav", "clip_001.wav"]
  assert [(f.signal, f.stage) for f in failures] == [("zz_broken.wav", "load")]


# --------------------------------------------------------------------------------
# Summary
# --------------------------------------------------------------------------------

def test_summary_quartiles():
  results = [
    SignalResult(signal=f"s{k}", method="gla", budget=5, si_sdr=float(v), spectral_distance=0.1)
    for k, v in enumerate([1.0, 2.0, 3.0, 4.0])]
  rows = {row.metric: row for row in summarize(results)}

  assert set(rows) == {"si_sdr", "spectral_distance"}
  assert (rows["si_sdr"].median, rows["si_sdr"].q1, rows["si_sdr"].q3) == (2.5, 1.75, 3.25)
  assert rows["si_sdr"].n == 4
  assert rows["spectral_distance"].median == pytest.approx(0.1)


def test_same_seed_gives_identical_report_files(tiny_config, clip_inputs, seed, tmp_path):
  def run(directory):
    examples = [
      prepare_example(f"clip{k}.wav", clip_inputs.speech(seed + k, seconds=0.1), clip_inputs.stft, tiny_config.seed)
      for k in range(2)]
    emit_report(run_experiment(tiny_config, examples=examples), directory)
    return (directory / "report.json").read_bytes(), (directory / "summary_si_sdr.csv").read_bytes()

  assert run(tmp_path / "a") == run(tmp_path / "b")

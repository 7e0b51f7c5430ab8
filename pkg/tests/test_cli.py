"""
This module contains tests for the `pr` command line.
"""

# --------------------------------------------------------------------------------
# Imports
# --------------------------------------------------------------------------------

import csv
import json

import pytest

from unfoldpr.harness import cli
from unfoldpr.harness.audio import load_wav
from unfoldpr.harness.cli import EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION, main
from unfoldpr.utils.exceptions import DivergentLossError
from unfoldpr.utils.storage import ModelStorage


# --------------------------------------------------------------------------------
# Fixtures
# --------------------------------------------------------------------------------

@pytest.fixture(scope='module')
def workspace(tmp_path_factory):
  """A synthetic corpus, a tiny config and one trained untied checkpoint."""

  root = tmp_path_factory.mktemp("cli")
  data = root / "data"
  assert main([
    "synth", "--root", str(data), "--train", "2", "--val", "1", "--test", "2",
    "--seconds", "0.1", "--sample-rate", "8000", "--seed", "3"]) == EXIT_OK

  config = root / "config.json"
  config.write_text(json.dumps({
    "seed": 3,
    "data": {
      "train_dir": str(data / "train"), "val_dir": str(data / "val"), "test_dir": str(data / "test"),
      "sample_rate": 8000, "crop_seconds": None},
    "stft": {"window_length": 64},
    "solvers": {"rho": 0.001, "gla_iters": 3, "admm_budgets": [2, 4], "iterations": [1]},
    "model": {"layers": 2, "segments": 1},
    "train": {"max_epochs": 1, "batch_size": 2},
  }))

  model = root / "models" / "untied.json"
  assert main(["train", "--config", str(config), "--untied", "--out", str(model)]) == EXIT_OK
  return root, config, model


def _read_csv(path):
  with open(path, newline="") as csv_file:
    return list(csv.reader(csv_file))


# --------------------------------------------------------------------------------
# Exit Codes
# --------------------------------------------------------------------------------

def test_bad_arguments_exit_with_validation_code():
  with pytest.raises(SystemExit) as exc:
    main(["run", "--method", "nope"])
  assert exc.value.code == EXIT_VALIDATION


def test_missing_config_exits_with_validation_code(tmp_path):
  code = main([
    "run", "--config", str(tmp_path / "none.json"), "--method", "gla",
    "--in", str(tmp_path / "x.wav"), "--out", str(tmp_path / "y.wav")])
  assert code == EXIT_VALIDATION


def test_corrupt_checkpoint_exits_with_runtime_code(tmp_path):
  broken = tmp_path / "broken.json"
  broken.write_text("{not json")
  code = main([
    "recover-metric", "--model", str(broken), "--r", "1", "--ymin", "0", "--ymax", "3",
    "--points", "5", "--out", str(tmp_path / "c.csv")])
  assert code == EXIT_RUNTIME


def test_uadmm_without_model(workspace, tmp_path):
  root, config, _ = workspace
  code = main([
    "run", "--config", str(config), "--method", "uadmm",
    "--in", str(root / "data" / "test" / "clip_000.wav"), "--out", str(tmp_path / "y.wav")])
  assert code == EXIT_VALIDATION


def test_missing_train_directory(tmp_path):
  config = tmp_path / "config.json"
  config.write_text(json.dumps({"data": {"train_dir": str(tmp_path / "none")}}))
  assert main(["train", "--config", str(config), "--tied", "--out", str(tmp_path / "m.json")]) == EXIT_VALIDATION


# --------------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------------

def test_synth_layout(workspace):
  root, _, _ = workspace
  assert sorted(p.name for p in (root / "data" / "test").iterdir()) == ["clip_000.wav", "clip_001.wav"]
  assert len(load_wav(root / "data" / "train" / "clip_001.wav")) == 800


def test_run_writes_reconstruction_and_trace(workspace, tmp_path):
  root, config, _ = workspace
  source = root / "data" / "test" / "clip_000.wav"
  out = tmp_path / "admm.wav"
  trace = tmp_path / "trace.csv"

  assert main([
    "run", "--config", str(config), "--method", "admm", "--iters", "3",
    "--in", str(source), "--out", str(out), "--trace", str(trace)]) == EXIT_OK
  assert len(load_wav(out)) == len(load_wav(source))
  assert len(_read_csv(trace)) == 1 + 3


def test_run_with_model(workspace, tmp_path):
  root, config, model = workspace
  out = tmp_path / "uadmm.wav"
  assert main([
    "run", "--config", str(config), "--method", "uadmm", "--model", str(model),
    "--in", str(root / "data" / "test" / "clip_001.wav"), "--out", str(out)]) == EXIT_OK
  assert out.is_file()


def test_eval_writes_report(workspace, tmp_path):
  _, config, model = workspace
  report = tmp_path / "report"
  assert main(["eval", "--config", str(config), "--models", str(model), "--report", str(report)]) == EXIT_OK

  document = json.loads((report / "report.json").read_text())
  assert document["header"]["models"] == ["untied"]
  assert {res["method"] for res in document["results"]} == {"gla", "admm", "uadmm:untied"}
  assert len(document["results"]) == 2 * (1 + 2 + 1)
  for name in ("summary_si_sdr.csv", "curves/untied.csv", "curves/reference.csv", "history/untied.csv"):
    assert (report / name).is_file()
  assert len(_read_csv(report / "history" / "untied.csv")) == 1 + 2


def test_recover_metric(workspace, tmp_path):
  _, _, model = workspace
  out = tmp_path / "curves.csv"
  assert main([
    "recover-metric", "--model", str(model), "--r", "1.0", "--ymin", "0", "--ymax", "3",
    "--points", "7", "--out", str(out), "--with-reference"]) == EXIT_OK

  rows = _read_csv(out)
  assert rows[0] == ["layer", "r", "y", "f"]
  assert {row[0] for row in rows[1:]} >= {"1", "2", "quadratic", "kl"}


def test_recover_metric_rejects_bad_grid(workspace, tmp_path):
  _, _, model = workspace
  code = main([
    "recover-metric", "--model", str(model), "--r", "1.0", "--ymin", "3", "--ymax", "0",
    "--points", "7", "--out", str(tmp_path / "c.csv")])
  assert code == EXIT_VALIDATION


def test_unrecoverable_layer_keeps_outputs(workspace, tmp_path):
  _, config, model = workspace
  trained, metadata, history = ModelStorage(str(model)).load()
  params = trained.params.copy()
  params[1, trained.index_gamma1] = -1e-5
  bent = tmp_path / "bent.json"
  ModelStorage(str(bent)).save(trained.with_params(params), metadata, history)

  report = tmp_path / "report"
  assert main(["eval", "--config", str(config), "--models", str(bent), "--report", str(report)]) == EXIT_OK
  assert (report / "report.json").is_file()
  assert {row[0] for row in _read_csv(report / "curves" / "bent.csv")[1:]} == {"1"}

  out = tmp_path / "curves.csv"
  assert main([
    "recover-metric", "--model", str(bent), "--r", "1.0", "--ymin", "0", "--ymax", "3",
    "--points", "7", "--out", str(out)]) == EXIT_OK
  assert {row[0] for row in _read_csv(out)[1:]} == {"1"}


def test_diverging_training_exits_with_runtime_code(workspace, tmp_path, monkeypatch):
  _, config, _ = workspace

  def diverge(*args, **kwargs):
    raise DivergentLossError("forward pass diverged at epoch 1, batch 0")

  monkeypatch.setattr(cli, "train", diverge)
  assert main(["train", "--config", str(config), "--untied", "--out", str(tmp_path / "m.json")]) == EXIT_RUNTIME
  assert not (tmp_path / "m.json").exists()

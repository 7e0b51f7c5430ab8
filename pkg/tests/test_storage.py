"""
This module contains tests for checkpoint storage.
"""

# --------------------------------------------------------------------------------
# Imports
# --------------------------------------------------------------------------------

import logging

import numpy as np
import pytest

from tinydb import TinyDB

from testlib.numerics import random_model
from unfoldpr.core.training import EpochRecord, TrainingHistory
from unfoldpr.utils.exceptions import CheckpointError, NotFoundException
from unfoldpr.utils.storage import ModelDirectory, ModelStorage


# --------------------------------------------------------------------------------
# Fixtures
# --------------------------------------------------------------------------------

@pytest.fixture
def history():
  return TrainingHistory(
    epochs=[EpochRecord(0, -3.1, -2.9), EpochRecord(1, -4.0 / 3.0, 1e-300)],
    stopped_early=True,
    best_epoch=1)


# --------------------------------------------------------------------------------
# ModelStorage
# --------------------------------------------------------------------------------

def test_round_trip_is_bit_exact(tmp_path, rng, history):
  model = random_model(rng, 4, 3, tied=False, rho=1e-3)
  model.params[0, 0] = np.nextafter(1.0, 2.0)
  storage = ModelStorage(str(tmp_path / "m.json"))
  storage.save(model, {"note": "first"}, history)

  loaded, metadata, loaded_history = storage.load()
  assert (loaded.T, loaded.C, loaded.tied, loaded.rho) == (4, 3, False, 1e-3)
  np.testing.assert_array_equal(loaded.params, model.params)
  assert metadata == {"note": "first"}
  assert loaded_history.epochs == history.epochs
  assert loaded_history.stopped_early and loaded_history.best_epoch == 1


def test_save_overwrites(tmp_path, rng):
  storage = ModelStorage(str(tmp_path / "m.json"))
  storage.save(random_model(rng, 2, 1, tied=True))
  second = random_model(rng, 3, 2, tied=False)
  storage.save(second)

  loaded, metadata, history = storage.load()
  np.testing.assert_array_equal(loaded.params, second.params)
  assert metadata == {} and history.epochs == []


def test_summary(tmp_path, rng, history):
  storage = ModelStorage(str(tmp_path / "tied15.json"))
  storage.save(random_model(rng, 15, 3, tied=True), {"tied": True}, history)
  summary = storage.summary()
  assert summary.name == "tied15"
  assert (summary.T, summary.C, summary.tied, summary.epochs, summary.best_epoch) == (15, 3, True, 2, 1)


def test_unsupported_version(tmp_path, rng):
  path = tmp_path / "m.json"
  ModelStorage(str(path)).save(random_model(rng, 2, 1, tied=False))
  with TinyDB(str(path)) as db:
    db.table("model").update({"format_version": 99})
  with pytest.raises(CheckpointError, match="format_version"):
    ModelStorage(str(path)).load()


@pytest.mark.parametrize("content", ["{not json", "{}", '{"model": {"1": {"format_version": 1}}}'])
def test_corrupt_checkpoint(tmp_path, content: str):
  path = tmp_path / "bad.json"
  path.write_text(content)
  with pytest.raises(CheckpointError):
    ModelStorage(str(path)).load()


def test_missing_checkpoint(tmp_path):
  with pytest.raises(CheckpointError):
    ModelStorage(str(tmp_path / "missing.json")).load()


# --------------------------------------------------------------------------------
# ModelDirectory
# --------------------------------------------------------------------------------

def test_directory_lists_and_skips_corrupt(tmp_path, rng, caplog):
  directory = ModelDirectory(str(tmp_path))
  ModelStorage(str(tmp_path / "untied.json")).save(random_model(rng, 2, 1, tied=False))
  ModelStorage(str(tmp_path / "tied.json")).save(random_model(rng, 2, 1, tied=True))
  (tmp_path / "broken.json").write_text("{not json")

  assert directory.names() == ["broken", "tied", "untied"]
  with caplog.at_level(logging.WARNING, logger="unfoldpr.utils.storage"):
    summaries = directory.summaries()
  assert [s.name for s in summaries] == ["tied", "untied"]
  assert "broken" in caplog.text


def test_directory_get_unknown(tmp_path):
  directory = ModelDirectory(str(tmp_path))
  with pytest.raises(NotFoundException):
    directory.get("nope")
  with pytest.raises(NotFoundException):
    directory.get("../escape")


def test_directory_missing_is_empty(tmp_path):
  assert ModelDirectory(str(tmp_path / "none")).names() == []

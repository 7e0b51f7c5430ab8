"""
This module handles the persistence layer for trained models.

A checkpoint is one TinyDB document file with two tables:
"model" holds exactly one checkpoint document and "history" one document per epoch.
Floats are written as float.hex strings so a save/load round trip is bit-exact.
"""

# --------------------------------------------------------------------------------
# Imports
# --------------------------------------------------------------------------------

import json
import logging

import numpy as np

from pathlib import Path
from pydantic import BaseModel
from tinydb import TinyDB
from typing import Any, Dict, List, Optional, Tuple

from unfoldpr.core.training import EpochRecord, TrainingHistory
from unfoldpr.core.unfolded import UnfoldedModel
from unfoldpr.utils.exceptions import CheckpointError, NotFoundException


# --------------------------------------------------------------------------------
# Globals
# --------------------------------------------------------------------------------

logger = logging.getLogger(__name__)

format_version = 1
checkpoint_suffix = ".json"


# --------------------------------------------------------------------------------
# Models
# --------------------------------------------------------------------------------

class CheckpointSummary(BaseModel):
  name: str
  format_version: int
  T: int
  C: int
  tied: bool
  rho: float
  epochs: int
  best_epoch: int
  metadata: Dict[str, Any]


# --------------------------------------------------------------------------------
# Hex Encoding
# --------------------------------------------------------------------------------

def _to_hex(values: np.ndarray) -> List[List[str]]:
  return [[float(v).hex() for v in row] for row in np.atleast_2d(values)]


def _from_hex(rows: List[List[str]]) -> np.ndarray:
  return np.array([[float.fromhex(v) for v in row] for row in rows], dtype=np.float64)


# --------------------------------------------------------------------------------
# ModelStorage Class
# --------------------------------------------------------------------------------

class ModelStorage:


  def __init__(self, path: str) -> None:
    self.path = Path(path)
    self.name = self.path.stem


  # Private Methods

  def _open(self) -> TinyDB:
    try:
      return TinyDB(str(self.path), sort_keys=True, indent=1)
    except OSError as exc:
      raise CheckpointError(f"{self.path}: cannot open checkpoint: {exc}") from exc


  def _read_document(self) -> Tuple[dict, List[dict]]:
    if not self.path.is_file():
      raise CheckpointError(f"{self.path}: checkpoint file does not exist")

    db = self._open()
    try:
      models = db.table("model").all()
      epochs = sorted(db.table("history").all(), key=lambda doc: doc["epoch"])
    except (json.JSONDecodeError, ValueError, KeyError, AttributeError) as exc:
      raise CheckpointError(f"{self.path}: corrupt checkpoint: {exc}") from exc
    finally:
      db.close()

    if len(models) != 1:
      raise CheckpointError(f"{self.path}: expected one model document, found {len(models)}")
    return dict(models[0]), [dict(doc) for doc in epochs]


  # Checkpoints

  def save(self, model: UnfoldedModel, metadata: Optional[Dict[str, Any]] = None, history: Optional[TrainingHistory] = None) -> None:
    history = history or TrainingHistory()
    document = {
      "format_version": format_version,
      "T": model.T,
      "C": model.C,
      "tied": model.tied,
      "rho": float(model.rho).hex(),
      "params": _to_hex(model.params),
      "stopped_early": history.stopped_early,
      "best_epoch": history.best_epoch,
      "metadata": metadata or {},
    }

    try:
      self.path.parent.mkdir(parents=True, exist_ok=True)
      db = self._open()
      db.drop_tables()
      db.table("model").insert(document)
      db.table("history").insert_multiple([
        {"epoch": rec.epoch, "train_loss": float(rec.train_loss).hex(), "val_loss": float(rec.val_loss).hex()}
        for rec in history.epochs])
      db.close()
    except (OSError, TypeError, ValueError) as exc:
      raise CheckpointError(f"{self.path}: cannot write checkpoint: {exc}") from exc


  def load(self) -> Tuple[UnfoldedModel, Dict[str, Any], TrainingHistory]:
    document, epochs = self._read_document()

    version = document.get("format_version")
    if version != format_version:
      raise CheckpointError(f"{self.path}: unsupported format_version {version!r} (expected {format_version})")

    try:
      model = UnfoldedModel(
        T=int(document["T"]),
        C=int(document["C"]),
        tied=bool(document["tied"]),
        rho=float.fromhex(document["rho"]),
        params=_from_hex(document["params"]))
      history = TrainingHistory(
        epochs=[EpochRecord(int(doc["epoch"]), float.fromhex(doc["train_loss"]), float.fromhex(doc["val_loss"])) for doc in epochs],
        stopped_early=bool(document.get("stopped_early", False)),
        best_epoch=int(document.get("best_epoch", 0)))
    except (KeyError, TypeError, ValueError) as exc:
      raise CheckpointError(f"{self.path}: malformed checkpoint document: {exc}") from exc

    return model, dict(document.get("metadata", {})), history


  def summary(self) -> CheckpointSummary:
    model, metadata, history = self.load()
    return CheckpointSummary(
      name=self.name,
      format_version=format_version,
      T=model.T,
      C=model.C,
      tied=model.tied,
      rho=model.rho,
      epochs=len(history.epochs),
      best_epoch=history.best_epoch,
      metadata=metadata)


# --------------------------------------------------------------------------------
# Model Directory
# --------------------------------------------------------------------------------

class ModelDirectory:
  """Named checkpoints stored as <model_dir>/<name>.json."""


  def __init__(self, model_dir: str) -> None:
    self.model_dir = Path(model_dir)


  def get(self, name: str) -> ModelStorage:
    path = self.model_dir / f"{name}{checkpoint_suffix}"
    if "/" in name or "\\" in name or not path.is_file():
      raise NotFoundException(f"model {name!r}")
    return ModelStorage(str(path))


  def names(self) -> List[str]:
    if not self.model_dir.is_dir():
      return []
    return sorted(p.stem for p in self.model_dir.glob(f"*{checkpoint_suffix}"))


  def summaries(self) -> List[CheckpointSummary]:
    summaries = []
    for name in self.names():
      try:
        summaries.append(self.get(name).summary())
      except CheckpointError as exc:
        logger.warning("skipping unreadable checkpoint: %s", exc)
    return summaries

"""
This module provides training for the unfolded ADMM network:
the waveform loss (negative SI-SDR), the ADAM update and the minibatch loop
with early stopping on a validation set.
"""

# --------------------------------------------------------------------------------
# Imports
# --------------------------------------------------------------------------------

import logging

import numpy as np

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pydantic import BaseModel, ConfigDict, Field
from tqdm import tqdm
from typing import List, Sequence, Tuple

from unfoldpr.core.transforms import Measurements, Signal
from unfoldpr.core.unfolded import BETA_GUARD, UnfoldedModel, uadmm_backward, uadmm_forward
from unfoldpr.utils.exceptions import DivergentLossError, ShapeError, SignalError


# --------------------------------------------------------------------------------
# Globals
# --------------------------------------------------------------------------------

logger = logging.getLogger(__name__)

LOSS_FLOOR_DB = -60.0
GAMMA1_FLOOR = 1e-6
_DB = 10.0 / np.log(10.0)
_TINY = 1e-20


# --------------------------------------------------------------------------------
# Models
# --------------------------------------------------------------------------------

class TrainConfig(BaseModel):
  model_config = ConfigDict(extra="forbid")

  learning_rate: float = Field(default=1e-4, ge=0.0)
  batch_size: int = Field(default=10, gt=0)
  max_epochs: int = Field(default=200, ge=0)
  patience: int = Field(default=1, gt=0)
  seed: int = 0
  adam_beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
  adam_beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
  adam_eps: float = Field(default=1e-8, gt=0.0)
  restore_best: bool = True
  workers: int = Field(default=1, gt=0)
  progress: bool = False


@dataclass(frozen=True)
class TrainingExample:
  name: str
  reference: Signal
  measurements: Measurements
  x0: Signal


@dataclass
class AdamState:
  m: np.ndarray
  v: np.ndarray
  t: int = 0

  @classmethod
  def zeros_like(cls, params: np.ndarray) -> "AdamState":
    return cls(np.zeros_like(params), np.zeros_like(params), 0)


@dataclass(frozen=True)
class EpochRecord:
  epoch: int
  train_loss: float
  val_loss: float


@dataclass
class TrainingHistory:
  epochs: List[EpochRecord] = field(default_factory=list)
  stopped_early: bool = False
  best_epoch: int = 0

  def train_losses(self) -> np.ndarray:
    return np.array([rec.train_loss for rec in self.epochs])

  def val_losses(self) -> np.ndarray:
    return np.array([rec.val_loss for rec in self.epochs])


# --------------------------------------------------------------------------------
# Loss
# --------------------------------------------------------------------------------

def training_loss(x_est, x_ref) -> Tuple[float, np.ndarray]:
  """
  Negative scale-invariant SDR in dB, floored at -60 dB, and its gradient with
  respect to x_est. The gradient is zero where the floor is active.
  """

  est = np.asarray(getattr(x_est, "samples", x_est), dtype=np.float64)
  ref = np.asarray(getattr(x_ref, "samples", x_ref), dtype=np.float64)
  if est.shape != ref.shape:
    raise ShapeError(f"estimate shape {est.shape} != reference shape {ref.shape}")

  ref_energy = float(np.dot(ref, ref))
  if ref_energy == 0.0:
    raise SignalError("SI-SDR is undefined for a zero reference")

  alpha = float(np.dot(est, ref)) / ref_energy
  target = alpha * ref
  error = est - target
  target_energy = float(np.dot(target, target)) + _TINY
  error_energy = float(np.dot(error, error)) + _TINY

  loss = _DB * (np.log(error_energy) - np.log(target_energy))
  if loss <= LOSS_FLOOR_DB:
    return LOSS_FLOOR_DB, np.zeros_like(est)

  grad = 2.0 * _DB * (error / error_energy - target / target_energy)
  return float(loss), grad


def si_sdr(x_est, x_ref) -> float:
  loss, _ = training_loss(x_est, x_ref)
  return -loss


# --------------------------------------------------------------------------------
# ADAM
# --------------------------------------------------------------------------------

def adam_update(params: np.ndarray, grads: np.ndarray, state: AdamState, cfg: TrainConfig) -> Tuple[np.ndarray, AdamState]:
  if params.shape != grads.shape or params.shape != state.m.shape:
    raise ShapeError(f"ADAM shapes differ: params {params.shape}, grads {grads.shape}, state {state.m.shape}")

  t = state.t + 1
  m = cfg.adam_beta1 * state.m + (1.0 - cfg.adam_beta1) * grads
  v = cfg.adam_beta2 * state.v + (1.0 - cfg.adam_beta2) * grads * grads
  m_hat = m / (1.0 - cfg.adam_beta1 ** t)
  v_hat = v / (1.0 - cfg.adam_beta2 ** t)

  new_params = params - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
  return new_params, AdamState(m, v, t)


def project_beta(params: np.ndarray, previous: np.ndarray, index_beta: int) -> np.ndarray:
  """Keeps every beta at least BETA_GUARD away from 1, on the side it came from."""

  projected = params.copy()
  beta = projected[:, index_beta]
  close = np.abs(beta - 1.0) < BETA_GUARD
  if np.any(close):
    side = np.where(previous[:, index_beta] >= 1.0, 1.0, -1.0)
    beta[close] = 1.0 + side[close] * BETA_GUARD
  return projected


def project_gamma1(params: np.ndarray, index_gamma1: int) -> np.ndarray:
  """Keeps every gamma1 at or above GAMMA1_FLOOR, so each layer stays a prox of some f_r."""

  projected = params.copy()
  projected[:, index_gamma1] = np.maximum(projected[:, index_gamma1], GAMMA1_FLOOR)
  return projected


# --------------------------------------------------------------------------------
# Training Loop
# --------------------------------------------------------------------------------

def loss_and_gradient(model: UnfoldedModel, example: TrainingExample) -> Tuple[float, np.ndarray]:
  x_T, _, tape = uadmm_forward(model, example.measurements, example.x0)
  loss, grad_xT = training_loss(x_T, example.reference)
  return loss, uadmm_backward(model, tape, grad_xT)


def evaluate_loss(model: UnfoldedModel, examples: Sequence[TrainingExample]) -> float:
  losses = [training_loss(uadmm_forward(model, ex.measurements, ex.x0)[0], ex.reference)[0] for ex in examples]
  return float(np.mean(losses))


def _batch_gradient(
  model: UnfoldedModel,
  batch: Sequence[TrainingExample],
  pool: ThreadPoolExecutor
) -> Tuple[List[float], np.ndarray]:
  results = list(pool.map(lambda ex: loss_and_gradient(model, ex), batch))
  losses = [loss for loss, _ in results]
  grads = np.mean([grad for _, grad in results], axis=0)
  return losses, grads


def _evaluate_at(model: UnfoldedModel, examples: Sequence[TrainingExample], split: str, epoch: int) -> float:
  try:
    loss = evaluate_loss(model, examples)
  except DivergentLossError as exc:
    raise DivergentLossError(f"{split} evaluation diverged at epoch {epoch}: {exc}") from exc
  if not np.isfinite(loss):
    raise DivergentLossError(f"non-finite {split} loss at epoch {epoch}")
  return loss


def _check_finite(loss_values: Sequence[float], grads: np.ndarray, epoch: int, batch_index: int) -> None:
  if not np.all(np.isfinite(loss_values)) or not np.all(np.isfinite(grads)):
    raise DivergentLossError(
      f"non-finite loss or gradient at epoch {epoch}, batch {batch_index}: "
      f"losses={list(loss_values)}, max |grad|={np.nanmax(np.abs(grads))}")


def train(
  model: UnfoldedModel,
  train_set: Sequence[TrainingExample],
  val_set: Sequence[TrainingExample],
  cfg: TrainConfig
) -> Tuple[UnfoldedModel, TrainingHistory]:
  if not train_set or not val_set:
    raise SignalError("training and validation sets must be nonempty")

  rng = np.random.default_rng(cfg.seed)
  params = model.params.copy()
  state = AdamState.zeros_like(params)
  history = TrainingHistory()

  current = model.with_params(params)
  best_val = _evaluate_at(current, val_set, "validation", 0)
  best_params = params.copy()
  history.epochs.append(EpochRecord(0, _evaluate_at(current, train_set, "training", 0), best_val))
  logger.info("epoch 0: train %.4f dB, val %.4f dB", history.epochs[0].train_loss, best_val)

  bad_epochs = 0
  with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
    for epoch in tqdm(range(1, cfg.max_epochs + 1), desc="epochs", disable=not cfg.progress):
      order = rng.permutation(len(train_set))
      epoch_losses = []

      for batch_index, start in enumerate(range(0, len(order), cfg.batch_size)):
        batch = [train_set[i] for i in order[start:start + cfg.batch_size]]
        try:
          losses, grads = _batch_gradient(model.with_params(params), batch, pool)
        except DivergentLossError as exc:
          raise DivergentLossError(f"forward pass diverged at epoch {epoch}, batch {batch_index}: {exc}") from exc
        _check_finite(losses, grads, epoch, batch_index)
        epoch_losses.extend(losses)

        updated, state = adam_update(params, grads, state, cfg)
        params = project_gamma1(project_beta(updated, params, model.index_beta), model.index_gamma1)

      val_loss = _evaluate_at(model.with_params(params), val_set, "validation", epoch)

      history.epochs.append(EpochRecord(epoch, float(np.mean(epoch_losses)), val_loss))
      logger.info("epoch %d: train %.4f dB, val %.4f dB", epoch, history.epochs[-1].train_loss, val_loss)

      if val_loss > best_val:
        bad_epochs += 1
        if bad_epochs >= cfg.patience:
          history.stopped_early = True
          logger.info("validation loss increased for %d epoch(s); stopping at epoch %d", bad_epochs, epoch)
          break
      else:
        best_val = val_loss
        best_params = params.copy()
        history.best_epoch = epoch
        bad_epochs = 0

  final = best_params if cfg.restore_best else params
  return model.with_params(final), history

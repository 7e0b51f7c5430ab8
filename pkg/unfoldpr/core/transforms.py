"""
This module provides the linear measurement operator:
a short-time Fourier transform with a self-dual sine window,
its exact adjoint, and magnitude measurements.

The window, 50% overlap and unitary DFT make the STFT a tight frame,
so that the adjoint is also the left inverse (A^H A = I).
"""

# --------------------------------------------------------------------------------
# Imports
# --------------------------------------------------------------------------------

import math

import numpy as np

from dataclasses import dataclass
from functools import lru_cache
from pydantic import BaseModel, ConfigDict, field_validator
from typing import Literal

from unfoldpr.utils.exceptions import ShapeError, SignalError


# --------------------------------------------------------------------------------
# Models
# --------------------------------------------------------------------------------

class StftConfig(BaseModel):
  model_config = ConfigDict(extra="forbid", frozen=True)

  window_length: int = 1024
  fft_norm: Literal["unitary"] = "unitary"

  @field_validator("window_length")
  @classmethod
  def _check_window_length(cls, value: int) -> int:
    if value < 2 or value % 2:
      raise ValueError(f"window_length must be even and >= 2, got {value}")
    return value

  @property
  def hop(self) -> int:
    return self.window_length // 2


@dataclass(frozen=True)
class Signal:
  samples: np.ndarray
  sample_rate: int

  def __post_init__(self) -> None:
    samples = np.asarray(self.samples, dtype=np.float64)
    if samples.ndim != 1 or samples.size == 0:
      raise SignalError(f"signal must be a nonempty 1-D array, got shape {samples.shape}")
    if not np.all(np.isfinite(samples)):
      raise SignalError("signal contains non-finite samples")
    if self.sample_rate <= 0:
      raise SignalError(f"sample rate must be positive, got {self.sample_rate}")
    object.__setattr__(self, "samples", samples)

  def __len__(self) -> int:
    return self.samples.size

  def with_samples(self, samples: np.ndarray) -> "Signal":
    return Signal(samples, self.sample_rate)


@dataclass(frozen=True)
class Spectrogram:
  coeffs: np.ndarray
  config: StftConfig
  signal_length: int
  sample_rate: int = 1

  def flat(self) -> np.ndarray:
    return self.coeffs.reshape(-1)


@dataclass(frozen=True)
class Measurements:
  r: np.ndarray
  config: StftConfig
  signal_length: int
  sample_rate: int = 1

  def __post_init__(self) -> None:
    r = np.asarray(self.r, dtype=np.float64)
    if np.any(r < 0) or not np.all(np.isfinite(r)):
      raise SignalError("measurements must be finite and nonnegative")
    object.__setattr__(self, "r", r)

  def operator(self) -> "StftOperator":
    return get_operator(self.config.window_length, self.signal_length)


# --------------------------------------------------------------------------------
# Window
# --------------------------------------------------------------------------------

def make_sine_window(length: int) -> np.ndarray:
  if length < 2 or length % 2:
    raise ValueError(f"sine window length must be even and >= 2, got {length}")
  n = np.arange(length, dtype=np.float64)
  return np.sin(np.pi * (n + 0.5) / length)


# --------------------------------------------------------------------------------
# StftOperator Class
# --------------------------------------------------------------------------------

class StftOperator:
  """
  Framing, windowing and unitary DFT for signals of one fixed length.

  Signals are zero-padded by window_length/2 on both ends and the frame count
  is chosen so every nominal sample is covered by exactly two frames.
  The trailing partial frame is zero-filled.
  """


  def __init__(self, window_length: int, signal_length: int) -> None:
    if signal_length <= 0:
      raise SignalError(f"signal length must be positive, got {signal_length}")
    self.window_length = window_length
    self.hop = window_length // 2
    self.signal_length = signal_length
    self.n_frames = math.ceil(signal_length / self.hop) + 1
    self.padded_length = (self.n_frames + 1) * self.hop
    self.window = make_sine_window(window_length)


  @property
  def shape(self) -> tuple:
    return (self.window_length, self.n_frames)


  # Private Methods

  def _frames(self, padded: np.ndarray) -> np.ndarray:
    head = padded[:self.n_frames * self.hop].reshape(self.n_frames, self.hop)
    tail = padded[self.hop:(self.n_frames + 1) * self.hop].reshape(self.n_frames, self.hop)
    return np.concatenate([head, tail], axis=1).T


  def _overlap_add(self, frames: np.ndarray) -> np.ndarray:
    padded = np.zeros(self.padded_length, dtype=frames.dtype)
    padded[:self.n_frames * self.hop].reshape(self.n_frames, self.hop)[:] += frames[:self.hop].T
    padded[self.hop:(self.n_frames + 1) * self.hop].reshape(self.n_frames, self.hop)[:] += frames[self.hop:].T
    return padded


  # Operator

  def forward(self, x: np.ndarray) -> np.ndarray:
    if x.shape != (self.signal_length,):
      raise ShapeError(f"expected signal of length {self.signal_length}, got shape {x.shape}")
    padded = np.zeros(self.padded_length, dtype=np.float64)
    padded[self.hop:self.hop + self.signal_length] = x
    frames = self._frames(padded) * self.window[:, None]
    return np.fft.fft(frames, axis=0, norm="ortho")


  def adjoint(self, coeffs: np.ndarray) -> np.ndarray:
    if coeffs.shape != self.shape:
      raise ShapeError(f"expected coefficients of shape {self.shape}, got {coeffs.shape}")
    frames = np.fft.ifft(coeffs, axis=0, norm="ortho") * self.window[:, None]
    padded = self._overlap_add(frames)
    return padded[self.hop:self.hop + self.signal_length].real.copy()


@lru_cache(maxsize=32)
def get_operator(window_length: int, signal_length: int) -> StftOperator:
  return StftOperator(window_length, signal_length)


# --------------------------------------------------------------------------------
# Transforms
# --------------------------------------------------------------------------------

def stft(signal: Signal, cfg: StftConfig) -> Spectrogram:
  op = get_operator(cfg.window_length, len(signal))
  return Spectrogram(op.forward(signal.samples), cfg, len(signal), signal.sample_rate)


def istft(spec: Spectrogram) -> Signal:
  op = get_operator(spec.config.window_length, spec.signal_length)
  if spec.coeffs.shape != op.shape:
    raise ShapeError(
      f"spectrogram shape {spec.coeffs.shape} does not match config "
      f"(window {spec.config.window_length}, length {spec.signal_length}) -> {op.shape}")
  return Signal(op.adjoint(spec.coeffs), spec.sample_rate)


def measure(signal: Signal, cfg: StftConfig) -> Measurements:
  spec = stft(signal, cfg)
  return Measurements(np.abs(spec.coeffs), cfg, len(signal), signal.sample_rate)

"""
This module provides evaluation metrics: STOI, SI-SDR and spectral distance.
"""

# --------------------------------------------------------------------------------
# Imports
# --------------------------------------------------------------------------------

import threading
import warnings

import numpy as np

from pystoi import stoi as pystoi_stoi

from unfoldpr.core.training import si_sdr as _si_sdr
from unfoldpr.core.transforms import Measurements, Signal
from unfoldpr.utils.exceptions import MetricError, ShapeError


# --------------------------------------------------------------------------------
# Globals
# --------------------------------------------------------------------------------

STOI_MIN_SECONDS = 0.384

# warnings.catch_warnings swaps interpreter-wide state
_stoi_lock = threading.Lock()


# --------------------------------------------------------------------------------
# Metrics
# --------------------------------------------------------------------------------

def _check_pair(ref: Signal, est: Signal) -> None:
  if len(ref) != len(est):
    raise ShapeError(f"reference has {len(ref)} samples, estimate has {len(est)}")
  if ref.sample_rate != est.sample_rate:
    raise ShapeError(f"sample rates differ: {ref.sample_rate} Hz vs {est.sample_rate} Hz")


def stoi(ref: Signal, est: Signal) -> float:
  _check_pair(ref, est)
  if len(ref) < STOI_MIN_SECONDS * ref.sample_rate:
    raise MetricError(f"STOI needs at least {STOI_MIN_SECONDS} s of audio, got {len(ref) / ref.sample_rate:.3f} s")
  if not np.any(ref.samples):
    raise MetricError("STOI is undefined for a silent reference")

  with _stoi_lock, warnings.catch_warnings(record=True) as caught:
    warnings.simplefilter("always")
    score = pystoi_stoi(ref.samples, est.samples, ref.sample_rate, extended=False)

  # pystoi warns and returns a placeholder when too little non-silent audio remains
  for warning in caught:
    if "Not enough STFT frames" in str(warning.message):
      raise MetricError(f"STOI: {warning.message}")
  return float(score)


def si_sdr(ref: Signal, est: Signal) -> float:
  _check_pair(ref, est)
  return _si_sdr(est, ref)


def spectral_distance(est: Signal, r: Measurements) -> float:
  """||  |A est| - r || / || r ||."""

  norm = float(np.linalg.norm(r.r))
  if norm == 0.0:
    raise MetricError("spectral distance is undefined for zero measurements")
  return float(np.linalg.norm(np.abs(r.operator().forward(est.samples)) - r.r)) / norm

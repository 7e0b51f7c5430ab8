"""
This module provides datasets:
WAV discovery, per-signal seeding, example preparation,
and a synthetic speech-like corpus for running without external audio.
"""

# --------------------------------------------------------------------------------
# Imports
# --------------------------------------------------------------------------------

import hashlib
import logging

import numpy as np

from pathlib import Path
from scipy.signal import lfilter
from typing import Dict, List, Optional, Union

from unfoldpr.core.solvers import random_phase_init
from unfoldpr.core.training import TrainingExample
from unfoldpr.core.transforms import Signal, StftConfig, measure
from unfoldpr.harness.audio import load_wav, write_wav
from unfoldpr.utils.exceptions import SignalError


# --------------------------------------------------------------------------------
# Globals
# --------------------------------------------------------------------------------

logger = logging.getLogger(__name__)

PEAK = 0.5
NOISE_FLOOR = 2e-4

# (first, second, third) formant centres in Hz for a few vowel-like shapes
_VOWELS = [
  (730.0, 1090.0, 2440.0),
  (270.0, 2290.0, 3010.0),
  (530.0, 1840.0, 2480.0),
  (570.0, 840.0, 2410.0),
  (300.0, 870.0, 2240.0),
]


# --------------------------------------------------------------------------------
# Seeds and Examples
# --------------------------------------------------------------------------------

def signal_seed(seed: int, name: str) -> int:
  digest = hashlib.sha256(f"{seed}:{name}".encode("utf-8")).digest()
  return int.from_bytes(digest[:8], "little")


def prepare_example(name: str, signal: Signal, stft_cfg: StftConfig, seed: int) -> TrainingExample:
  """Measures the signal and draws its seeded random-phase initial estimate."""

  r = measure(signal, stft_cfg)
  x0 = random_phase_init(r, np.random.default_rng(signal_seed(seed, name)))
  return TrainingExample(name=name, reference=signal, measurements=r, x0=x0)


def discover(directory: Union[str, Path], limit: Optional[int] = None) -> List[Path]:
  directory = Path(directory)
  if not directory.is_dir():
    raise SignalError(f"dataset directory does not exist: {directory}")
  paths = sorted(p for p in directory.iterdir() if p.is_file() and p.suffix.lower() == ".wav")
  return paths if limit is None else paths[:limit]


def load_examples(
  directory: Union[str, Path],
  limit: Optional[int],
  stft_cfg: StftConfig,
  seed: int,
  crop_seconds: Optional[float] = None,
  expected_rate: Optional[int] = None
) -> List[TrainingExample]:
  examples = []
  for path in discover(directory, limit):
    signal = load_wav(path, crop_seconds, expected_rate)
    examples.append(prepare_example(path.name, signal, stft_cfg, seed))
  logger.info("loaded %d example(s) from %s", len(examples), directory)
  return examples


# --------------------------------------------------------------------------------
# Synthetic Corpus
# --------------------------------------------------------------------------------

def _resonate(source: np.ndarray, freq: float, bandwidth: float, sample_rate: int) -> np.ndarray:
  radius = np.exp(-np.pi * bandwidth / sample_rate)
  theta = 2.0 * np.pi * freq / sample_rate
  return lfilter([1.0 - radius], [1.0, -2.0 * radius * np.cos(theta), radius ** 2], source)


def synthesize_clip(seconds: float, sample_rate: int, rng: np.random.Generator) -> Signal:
  """
  A voiced harmonic source with a gliding, vibrating pitch, shaped by
  formant resonances that change per syllable, under a syllable-rate
  envelope with short pauses, over a faint noise floor. Peak amplitude is 0.5.
  """

  n = int(round(seconds * sample_rate))
  if n < 2:
    raise SignalError(f"clip of {seconds} s at {sample_rate} Hz is too short")
  t = np.arange(n) / sample_rate

  base = rng.uniform(100.0, 200.0)
  glide = rng.uniform(-0.2, 0.2) * t / max(seconds, 1e-9)
  vibrato = 0.03 * np.sin(2.0 * np.pi * rng.uniform(4.0, 6.0) * t + rng.uniform(0.0, 2.0 * np.pi))
  f0 = base * (1.0 + glide + vibrato)
  phase = 2.0 * np.pi * np.cumsum(f0) / sample_rate

  harmonics = max(1, min(40, int(0.45 * sample_rate / f0.max())))
  source = sum(np.sin(k * phase) / k for k in range(1, harmonics + 1))
  source = source + 0.02 * rng.standard_normal(n)

  out = np.zeros(n)
  start = 0
  voiced_any = False
  while start < n:
    length = min(n - start, int(rng.uniform(0.12, 0.3) * sample_rate))
    length = max(length, 1)
    pause = rng.random() < 0.2 and voiced_any
    if not pause:
      segment = source[start:start + length]
      formants = _VOWELS[rng.integers(len(_VOWELS))]
      shaped = sum(
        _resonate(segment, f * rng.uniform(0.9, 1.1), 80.0 + 40.0 * i, sample_rate) / (i + 1)
        for i, f in enumerate(formants) if f < 0.45 * sample_rate)
      out[start:start + length] = shaped * np.hanning(length + 2)[1:-1]
      voiced_any = True
    start += length

  peak = np.max(np.abs(out))
  if peak == 0.0:
    raise SignalError("synthetic clip came out silent")
  out = PEAK * out / peak + NOISE_FLOOR * rng.standard_normal(n)
  return Signal(PEAK * out / np.max(np.abs(out)), sample_rate)


def write_synthetic_corpus(
  root: Union[str, Path],
  counts: Dict[str, int],
  seconds: float,
  sample_rate: int,
  seed: int
) -> Dict[str, List[Path]]:
  """Writes <root>/<split>/clip_NNN.wav as 16-bit PCM for every split in counts."""

  root = Path(root)
  written: Dict[str, List[Path]] = {}
  for split, count in counts.items():
    paths = []
    for i in range(count):
      path = root / split / f"clip_{i:03d}.wav"
      rng = np.random.default_rng(signal_seed(seed, f"{split}/{path.name}"))
      write_wav(path, synthesize_clip(seconds, sample_rate, rng), encoding="pcm16")
      paths.append(path)
    written[split] = paths
    logger.info("wrote %d synthetic clip(s) to %s", count, root / split)
  return written

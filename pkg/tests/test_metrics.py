"""
This module contains tests for the evaluation metrics.
"""

# --------------------------------------------------------------------------------
# Imports
# --------------------------------------------------------------------------------

import numpy as np
import pytest

from concurrent.futures import ThreadPoolExecutor

from unfoldpr.core.transforms import Signal, measure
from unfoldpr.harness.metrics import STOI_MIN_SECONDS, si_sdr, spectral_distance, stoi
from unfoldpr.utils.exceptions import MetricError, ShapeError


# --------------------------------------------------------------------------------
# Fixtures
# --------------------------------------------------------------------------------

@pytest.fixture(scope='module')
def long_clip(clip_inputs, seed):
  return clip_inputs.speech(seed + 100, seconds=1.5)


# --------------------------------------------------------------------------------
# STOI
# --------------------------------------------------------------------------------

def test_stoi_identical_is_one(long_clip):
  assert stoi(long_clip, long_clip) == pytest.approx(1.0, abs=1e-6)


def test_stoi_drops_with_noise(long_clip, rng):
  noisy = long_clip.with_samples(long_clip.samples + 0.3 * rng.standard_normal(len(long_clip)))
  assert stoi(long_clip, noisy) < stoi(long_clip, long_clip)


def test_stoi_rejects_short_audio(clip_inputs, seed):
  short = clip_inputs.speech(seed, seconds=STOI_MIN_SECONDS / 2)
  with pytest.raises(MetricError):
    stoi(short, short)


def test_stoi_rejects_silent_reference(long_clip):
  silent = long_clip.with_samples(np.zeros(len(long_clip)))
  with pytest.raises(MetricError):
    stoi(silent, long_clip)


def test_stoi_rejects_mostly_silent_audio(rng):
  samples = np.zeros(16000)
  samples[8000:8800] = rng.standard_normal(800)
  signal = Signal(samples, 16000)
  with pytest.raises(MetricError):
    stoi(signal, signal)


def test_stoi_rejects_mismatched_pair(long_clip):
  with pytest.raises(ShapeError):
    stoi(long_clip, long_clip.with_samples(long_clip.samples[:-1]))
  with pytest.raises(ShapeError):
    stoi(long_clip, Signal(long_clip.samples, long_clip.sample_rate * 2))


# --------------------------------------------------------------------------------
# SI-SDR and Spectral Distance
# --------------------------------------------------------------------------------

def test_si_sdr_identical_hits_ceiling(long_clip):
  assert si_sdr(long_clip, long_clip) == 60.0


def test_si_sdr_ignores_sign_and_scale(long_clip, rng):
  noisy = long_clip.samples + 0.1 * rng.standard_normal(len(long_clip))
  base = si_sdr(long_clip, long_clip.with_samples(noisy))
  assert si_sdr(long_clip, long_clip.with_samples(-2.0 * noisy)) == pytest.approx(base, abs=1e-9)


def test_spectral_distance_zero_for_consistent_signal(speech_clip, speech_measurements):
  assert spectral_distance(speech_clip, speech_measurements) <= 1e-12
  flipped = speech_clip.with_samples(-speech_clip.samples)
  assert spectral_distance(flipped, speech_measurements) <= 1e-12


def test_spectral_distance_positive_for_other_signal(speech_measurements, clip_inputs, seed):
  other = clip_inputs.noise(seed, speech_measurements.signal_length)
  assert spectral_distance(other, speech_measurements) > 0.1


def test_spectral_distance_rejects_zero_measurements(clip_inputs):
  zero = Signal(np.zeros(200), clip_inputs.sample_rate)
  with pytest.raises(MetricError):
    spectral_distance(zero, measure(zero, clip_inputs.stft))


def test_stoi_decreases_with_noise_level(long_clip, rng):
  noise = rng.standard_normal(len(long_clip))
  scores = [stoi(long_clip, long_clip.with_samples(long_clip.samples + level * noise)) for level in (0.01, 0.05, 0.2)]
  assert scores[0] > scores[1] > scores[2]


def test_stoi_of_white_noise_is_below_small_noise(long_clip, rng):
  small = long_clip.with_samples(long_clip.samples + 0.01 * rng.standard_normal(len(long_clip)))
  white = long_clip.with_samples(0.2 * rng.standard_normal(len(long_clip)))
  assert stoi(long_clip, white) < stoi(long_clip, small)


def test_stoi_flags_mostly_silent_audio_under_threads(long_clip, rng):
  samples = np.zeros(16000)
  samples[8000:8800] = rng.standard_normal(800)
  quiet = Signal(samples, 16000)

  def score(k):
    signal = quiet if k % 2 else long_clip
    try:
      return stoi(signal, signal)
    except MetricError:
      return None

  with ThreadPoolExecutor(max_workers=4) as pool:
    scores = list(pool.map(score, range(16)))
  assert [s is None for s in scores] == [bool(k % 2) for k in range(16)]

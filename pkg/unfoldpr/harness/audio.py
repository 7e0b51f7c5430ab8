"""
This module provides WAV ingestion and writing.

Reading walks the RIFF chunks itself so that malformed files are reported with
the byte offset where parsing failed. Supported encodings are 16-bit PCM and
32-bit IEEE float, plain or WAVE_FORMAT_EXTENSIBLE.
"""

# --------------------------------------------------------------------------------
# Imports
# --------------------------------------------------------------------------------

import io
import logging
import math
import struct

import numpy as np

from pathlib import Path
from scipy.io import wavfile
from scipy.signal import resample_poly
from typing import BinaryIO, Literal, Optional, Union

from unfoldpr.core.transforms import Signal
from unfoldpr.utils.exceptions import SignalError, WavFormatError


# --------------------------------------------------------------------------------
# Globals
# --------------------------------------------------------------------------------

logger = logging.getLogger(__name__)

FORMAT_PCM = 0x0001
FORMAT_FLOAT = 0x0003
FORMAT_EXTENSIBLE = 0xFFFE

_DTYPES = {
  (FORMAT_PCM, 16): ("<i2", 32768.0),
  (FORMAT_FLOAT, 32): ("<f4", 1.0),
}


# --------------------------------------------------------------------------------
# Parsing
# --------------------------------------------------------------------------------

def _read_format(data: bytes, offset: int, size: int, path: Optional[str]):
  if size < 16:
    raise WavFormatError(f"fmt chunk too small ({size} bytes)", offset, path)

  audio_format, channels, rate, _, _, bits = struct.unpack_from("<HHIIHH", data, offset)
  if audio_format == FORMAT_EXTENSIBLE:
    if size < 40:
      raise WavFormatError(f"extensible fmt chunk too small ({size} bytes)", offset, path)
    audio_format = struct.unpack_from("<H", data, offset + 24)[0]

  if (audio_format, bits) not in _DTYPES:
    raise WavFormatError(f"unsupported encoding: format tag {audio_format:#06x} with {bits} bits", offset, path)
  if channels < 1 or rate < 1:
    raise WavFormatError(f"invalid fmt chunk: {channels} channel(s) at {rate} Hz", offset, path)
  return audio_format, channels, rate, bits


def parse_wav(data: bytes, path: Optional[str] = None) -> Signal:
  if len(data) < 12:
    raise WavFormatError("file too short for a RIFF header", len(data), path)
  if data[0:4] != b"RIFF":
    raise WavFormatError(f"missing RIFF tag (found {data[0:4]!r})", 0, path)
  if data[8:12] != b"WAVE":
    raise WavFormatError(f"missing WAVE tag (found {data[8:12]!r})", 8, path)

  fmt = None
  offset = 12
  while True:
    if offset + 8 > len(data):
      raise WavFormatError("no data chunk found before end of file", offset, path)

    chunk_id, size = struct.unpack_from("<4sI", data, offset)
    body = offset + 8

    if chunk_id == b"fmt ":
      if body + size > len(data):
        raise WavFormatError(f"fmt chunk truncated: declares {size} bytes, {len(data) - body} available", offset, path)
      fmt = _read_format(data, body, size, path)

    elif chunk_id == b"data":
      if fmt is None:
        raise WavFormatError("data chunk before fmt chunk", offset, path)
      if body + size > len(data):
        raise WavFormatError(f"data chunk truncated: declares {size} bytes, {len(data) - body} available", offset, path)
      return _decode(data[body:body + size], fmt, path)

    offset = body + size + (size & 1)


def _decode(payload: bytes, fmt, path: Optional[str]) -> Signal:
  audio_format, channels, rate, bits = fmt
  dtype, scale = _DTYPES[(audio_format, bits)]

  frame_bytes = channels * bits // 8
  frames = len(payload) // frame_bytes
  if frames == 0:
    raise SignalError(f"{path or '<wav>'}: no audio frames")

  samples = np.frombuffer(payload[:frames * frame_bytes], dtype=dtype).reshape(frames, channels)
  if channels > 1:
    logger.warning("%s: %d channels, keeping the first channel only", path or "<wav>", channels)

  return Signal(samples[:, 0].astype(np.float64) / scale, rate)


# --------------------------------------------------------------------------------
# Files
# --------------------------------------------------------------------------------

def crop(signal: Signal, seconds: Optional[float]) -> Signal:
  if seconds is None:
    return signal
  count = int(round(seconds * signal.sample_rate))
  if count < 1:
    raise SignalError(f"crop of {seconds} s leaves no samples at {signal.sample_rate} Hz")
  return signal.with_samples(signal.samples[:count])


def load_wav(
  path: Union[str, Path],
  crop_seconds: Optional[float] = None,
  expected_rate: Optional[int] = None
) -> Signal:
  path = str(path)
  with open(path, "rb") as wav_file:
    signal = parse_wav(wav_file.read(), path)

  if expected_rate is not None and signal.sample_rate != expected_rate:
    raise SignalError(f"{path}: sample rate {signal.sample_rate} Hz differs from the configured {expected_rate} Hz")
  return crop(signal, crop_seconds)


def write_wav(
  target: Union[str, Path, BinaryIO],
  signal: Signal,
  encoding: Literal["pcm16", "float32"] = "float32"
) -> None:
  if encoding == "pcm16":
    clipped = np.clip(signal.samples, -1.0, 32767.0 / 32768.0)
    data = np.round(clipped * 32768.0).astype(np.int16)
  else:
    data = signal.samples.astype(np.float32)

  if isinstance(target, (str, Path)):
    Path(target).parent.mkdir(parents=True, exist_ok=True)
    target = str(target)
  wavfile.write(target, signal.sample_rate, data)


def wav_bytes(signal: Signal, encoding: Literal["pcm16", "float32"] = "float32") -> bytes:
  buffer = io.BytesIO()
  write_wav(buffer, signal, encoding)
  return buffer.getvalue()


# --------------------------------------------------------------------------------
# Resampling
# --------------------------------------------------------------------------------

def resample(signal: Signal, rate: int) -> Signal:
  """Polyphase windowed-sinc resampling. Never applied implicitly."""

  if rate <= 0:
    raise SignalError(f"target sample rate must be positive, got {rate}")
  if rate == signal.sample_rate:
    return signal

  g = math.gcd(rate, signal.sample_rate)
  samples = resample_poly(signal.samples, rate // g, signal.sample_rate // g)
  return Signal(samples, rate)

"""
This module provides exceptions for the toolkit.

Every error raised on purpose derives from PhaseRetrievalError.
ValidationError covers bad inputs (CLI exit code 1, HTTP 422);
RuntimeFailure covers computations that could not complete (exit code 2).
"""

# --------------------------------------------------------------------------------
# Imports
# --------------------------------------------------------------------------------

from typing import Optional


# --------------------------------------------------------------------------------
# Base Exceptions
# --------------------------------------------------------------------------------

class PhaseRetrievalError(Exception):
  pass


class ValidationError(PhaseRetrievalError):
  pass


class RuntimeFailure(PhaseRetrievalError):
  pass


# --------------------------------------------------------------------------------
# Validation Exceptions
# --------------------------------------------------------------------------------

class ConfigError(ValidationError):
  pass


class ShapeError(ValidationError):
  pass


class SignalError(ValidationError):
  pass


class DomainError(ValidationError):
  pass


class InversionError(ValidationError):
  pass


class TapeMismatchError(ValidationError):
  pass


class MetricError(ValidationError):
  pass


class NotFoundException(ValidationError):
  def __init__(self, what: str):
    super().__init__(f"Not found: {what}")
    self.what = what


class WavFormatError(ValidationError):
  def __init__(self, message: str, offset: Optional[int] = None, path: Optional[str] = None):
    where = f" at byte offset {offset}" if offset is not None else ""
    source = f"{path}: " if path else ""
    super().__init__(f"{source}{message}{where}")
    self.offset = offset
    self.path = path


# --------------------------------------------------------------------------------
# Runtime Exceptions
# --------------------------------------------------------------------------------

class BracketError(RuntimeFailure):
  def __init__(self, message: str, lower: float, upper: float):
    super().__init__(f"{message} (search domain [{lower:.6g}, {upper:.6g}])")
    self.lower = lower
    self.upper = upper


class DivergentLossError(RuntimeFailure):
  pass


class CheckpointError(RuntimeFailure):
  pass


class ReportWriteError(RuntimeFailure):
  pass

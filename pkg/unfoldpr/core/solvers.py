"""
This module provides the classical phase-retrieval baselines:
the Griffin-Lim algorithm and the Bregman ADMM iteration (magnitude measurements).
"""

# --------------------------------------------------------------------------------
# Imports
# --------------------------------------------------------------------------------

import logging
import time

import numpy as np

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

from unfoldpr.core.divergence import EPS, prox_quadratic
from unfoldpr.core.transforms import Measurements, Signal, StftOperator
from unfoldpr.utils.exceptions import DomainError, ShapeError


# --------------------------------------------------------------------------------
# Globals
# --------------------------------------------------------------------------------

logger = logging.getLogger(__name__)

ProxFunction = Callable[[np.ndarray, np.ndarray, float], np.ndarray]


# --------------------------------------------------------------------------------
# Models
# --------------------------------------------------------------------------------

@dataclass(frozen=True)
class AdmmState:
  x: Signal
  lam: np.ndarray
  rho: float


@dataclass(frozen=True)
class TraceRecord:
  iteration: int
  objective: float
  primal_residual: float
  wall_time: float


@dataclass
class SolverTrace:
  records: List[TraceRecord] = field(default_factory=list)

  def __len__(self) -> int:
    return len(self.records)

  def objectives(self) -> np.ndarray:
    return np.array([rec.objective for rec in self.records])

  def to_rows(self) -> List[Dict[str, float]]:
    return [vars(rec).copy() for rec in self.records]


# --------------------------------------------------------------------------------
# Helpers
# --------------------------------------------------------------------------------

def magnitude_and_phase(h: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
  """Returns (|h| floored at EPS, angle of h in [0, 2*pi)), with angle(0) = 0."""

  theta = np.mod(np.angle(h), 2.0 * np.pi)
  return np.maximum(np.abs(h), EPS), theta


def random_phase_init(r: Measurements, rng: np.random.Generator) -> Signal:
  phase = rng.uniform(0.0, 2.0 * np.pi, size=r.r.shape)
  return Signal(r.operator().adjoint(r.r * np.exp(1j * phase)), r.sample_rate)


def _check_start(r: Measurements, x0: Signal) -> StftOperator:
  op = r.operator()
  if len(x0) != r.signal_length:
    raise ShapeError(f"initial signal has length {len(x0)}, measurements expect {r.signal_length}")
  if r.r.shape != op.shape:
    raise ShapeError(f"measurements shape {r.r.shape} does not match operator shape {op.shape}")
  return op


# --------------------------------------------------------------------------------
# Griffin-Lim
# --------------------------------------------------------------------------------

def griffin_lim(r: Measurements, x0: Signal, iters: int) -> Tuple[Signal, SolverTrace]:
  if iters < 0:
    raise DomainError(f"iteration count must be >= 0, got {iters}")

  op = _check_start(r, x0)
  x = x0.samples.copy()
  trace = SolverTrace()
  start = time.perf_counter()

  for it in range(iters):
    _, theta = magnitude_and_phase(op.forward(x))
    target = r.r * np.exp(1j * theta)
    x = op.adjoint(target)

    coeffs = op.forward(x)
    trace.records.append(TraceRecord(
      iteration=it + 1,
      objective=float(np.linalg.norm(np.abs(coeffs) - r.r)),
      primal_residual=float(np.linalg.norm(coeffs - target)),
      wall_time=time.perf_counter() - start))

  logger.debug("griffin_lim: %d iterations in %.3fs", iters, time.perf_counter() - start)
  return x0.with_samples(x), trace


# --------------------------------------------------------------------------------
# ADMM
# --------------------------------------------------------------------------------

def admm_pr(
  r: Measurements,
  x0: Signal,
  lambda0: Optional[np.ndarray],
  rho: float,
  prox: ProxFunction = prox_quadratic,
  iters: int = 1
) -> Tuple[AdmmState, SolverTrace]:
  """
  Runs the ADMM updates for the "left" Bregman phase-retrieval problem:

    h     = A x + lambda / rho
    u     = prox(|h|, r, rho)
    theta = angle(h)
    x     = A^H (u e^{i theta} - lambda / rho)
    lambda = lambda + rho (A x - u e^{i theta})
  """

  if not rho > 0:
    raise DomainError(f"rho must be positive, got {rho}")
  if iters < 0:
    raise DomainError(f"iteration count must be >= 0, got {iters}")

  op = _check_start(r, x0)
  lam = np.zeros(op.shape, dtype=np.complex128) if lambda0 is None else np.asarray(lambda0, dtype=np.complex128)
  if lam.size != r.r.size:
    raise ShapeError(f"lambda has {lam.size} entries, measurements have {r.r.size}")
  lam = lam.reshape(op.shape).copy()

  x = x0.samples.copy()
  ax = op.forward(x)
  trace = SolverTrace()
  start = time.perf_counter()

  for it in range(iters):
    h = ax + lam / rho
    magnitudes, theta = magnitude_and_phase(h)
    u = prox(magnitudes, r.r, rho)
    target = u * np.exp(1j * theta)

    x = op.adjoint(target - lam / rho)
    ax = op.forward(x)
    residual = ax - target
    lam = lam + rho * residual

    trace.records.append(TraceRecord(
      iteration=it + 1,
      objective=float(np.linalg.norm(np.abs(ax) - r.r)),
      primal_residual=float(np.linalg.norm(residual)),
      wall_time=time.perf_counter() - start))

  logger.debug("admm_pr: %d iterations (rho=%g) in %.3fs", iters, rho, time.perf_counter() - start)
  return AdmmState(x=x0.with_samples(x), lam=lam, rho=rho), trace

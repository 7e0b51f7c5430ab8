"""
This module provides metric recovery for trained sublayers.

A sublayer F(y, r) = APL(gamma1 * y + gamma2 * q(r)) is the proximity operator
of an implicit function f_r. Given the layer parameters, f_r is rebuilt from
the APL inverse and the APL antiderivative, up to an additive constant.
"""

# --------------------------------------------------------------------------------
# Imports
# --------------------------------------------------------------------------------

import logging

import numpy as np

from dataclasses import dataclass, field
from typing import List, Union

from unfoldpr.core.divergence import EPS, bregman_terms, beta_generator
from unfoldpr.core.unfolded import APLParams, LayerParams, UnfoldedModel, apl_forward, beta_term
from unfoldpr.utils.exceptions import DomainError, InversionError


# --------------------------------------------------------------------------------
# Globals
# --------------------------------------------------------------------------------

logger = logging.getLogger(__name__)

# an APL piece counts as increasing when its slope is at least that of a lone segment with |w_tilde| = 1e-6
W_TILDE_TOLERANCE = 1e-6
SLOPE_TOLERANCE = W_TILDE_TOLERANCE ** 2


# --------------------------------------------------------------------------------
# Models
# --------------------------------------------------------------------------------

@dataclass
class MetricCurve:
  r_value: float
  y_grid: np.ndarray
  f_values: np.ndarray
  layer_index: Union[int, str]
  missing: np.ndarray = field(default_factory=lambda: np.empty(0))

  def rows(self) -> List[tuple]:
    return [(self.layer_index, self.r_value, float(y), float(f)) for y, f in zip(self.y_grid, self.f_values)]


# --------------------------------------------------------------------------------
# APL Inverse and Antiderivative
# --------------------------------------------------------------------------------

def _inverse_parts(p: APLParams, y: np.ndarray):
  numerator = y.copy()
  denominator = (y >= apl_forward(p, np.zeros(1))[0]).astype(np.float64)
  for w_c, b_c in zip(p.w, p.b):
    active = y <= apl_forward(p, np.array([b_c]))[0]
    numerator = numerator - w_c * b_c * active
    denominator = denominator - w_c * active
  return numerator, denominator


def apl_invertible_mask(p: APLParams, y: np.ndarray) -> np.ndarray:
  """True where y lies on a strictly increasing piece of the APL."""

  _, denominator = _inverse_parts(p, np.asarray(y, dtype=np.float64))
  return denominator >= SLOPE_TOLERANCE


def apl_inverse(p: APLParams, y: np.ndarray) -> np.ndarray:
  y = np.asarray(y, dtype=np.float64)
  numerator, denominator = _inverse_parts(p, y)

  flat = denominator < SLOPE_TOLERANCE
  if np.any(flat):
    raise InversionError(
      f"APL is flat at {int(np.sum(flat))} input(s), first at y={float(y[flat].flat[0])!r}; "
      f"slopes w={p.w.tolist()}, biases b={p.b.tolist()}")

  return numerator / denominator


def apl_antiderivative(p: APLParams, z: np.ndarray) -> float:
  """
  Continuous antiderivative of the APL, summed over coordinates:

    z^2/2 on z >= 0, plus -w_c (b_c - z)^2 / 2 on z <= b_c for every segment.
  """

  z = np.asarray(z, dtype=np.float64)
  total = np.sum(0.5 * z ** 2 * (z >= 0.0))
  for w_c, b_c in zip(p.w, p.b):
    total += np.sum(w_c * (-0.5 * z ** 2 + b_c * z - 0.5 * b_c ** 2) * (z <= b_c))
  return float(total)


def sigma_eval(p: APLParams, y: np.ndarray) -> float:
  y = np.asarray(y, dtype=np.float64)
  z = apl_inverse(p, y)
  return float(np.dot(z.ravel(), y.ravel()) - 0.5 * np.dot(y.ravel(), y.ravel()) - apl_antiderivative(p, z))


# --------------------------------------------------------------------------------
# Metric Recovery
# --------------------------------------------------------------------------------

def _check_layer(p: LayerParams) -> None:
  if not p.gamma1 > 0:
    raise DomainError(f"metric recovery needs gamma1 > 0, got {p.gamma1}")
  if not np.any(p.apl.b >= 0.0):
    logger.warning("no APL bias is nonnegative (b=%s); the recovered metric may not be a valid prox", p.apl.b.tolist())


def _evaluate_metric(p: LayerParams, r: float, y: np.ndarray) -> np.ndarray:
  z = apl_inverse(p.apl, y)
  q = float(beta_term(np.array([r]), p.beta)[0])

  antiderivative = np.array([apl_antiderivative(p.apl, z_k) for z_k in z.ravel()]).reshape(y.shape)
  return (z - p.gamma2 * q) * y / p.gamma1 - 0.5 * y ** 2 - antiderivative / p.gamma1


def recover_metric(p: LayerParams, r: float, y: np.ndarray) -> np.ndarray:
  """Pointwise f_r(y), the function whose proximity operator is sublayer_F(., r)."""

  _check_layer(p)
  return _evaluate_metric(p, r, np.asarray(y, dtype=np.float64))


def _curve(p: LayerParams, r: float, y_grid: np.ndarray, label: Union[int, str]) -> MetricCurve:
  try:
    _check_layer(p)
  except DomainError as exc:
    logger.warning("layer %s cannot be recovered, all %d grid point(s) omitted: %s", label, y_grid.size, exc)
    return MetricCurve(float(r), np.empty(0), np.empty(0), label, y_grid.copy())

  valid = apl_invertible_mask(p.apl, y_grid)
  values = _evaluate_metric(p, r, y_grid[valid]) if np.any(valid) else np.empty(0)
  if values.size:
    values = values - np.min(values)
  if not np.all(valid):
    logger.debug("layer %s: %d grid point(s) outside the invertible range", label, int(np.sum(~valid)))
  return MetricCurve(float(r), y_grid[valid], values, label, y_grid[~valid])


def _check_grid(y_grid: np.ndarray) -> np.ndarray:
  y_grid = np.asarray(y_grid, dtype=np.float64)
  if y_grid.ndim != 1 or y_grid.size == 0 or np.any(np.diff(y_grid) <= 0):
    raise DomainError("y grid must be a nonempty strictly increasing 1-D array")
  return y_grid


def sample_metric_curve(m: UnfoldedModel, r: float, y_grid: np.ndarray) -> List[MetricCurve]:
  y_grid = _check_grid(y_grid)
  if m.tied:
    return [_curve(m.layer(0), r, y_grid, "tied")]
  return [_curve(m.layer(t), r, y_grid, t + 1) for t in range(m.T)]


def reference_curves(r: float, y_grid: np.ndarray, rho: float) -> List[MetricCurve]:
  """rho^-1 * D(y | r) for the quadratic and Kullback-Leibler divergences, min-shifted."""

  y_grid = _check_grid(y_grid)
  if not rho > 0:
    raise DomainError(f"rho must be positive, got {rho}")

  valid = y_grid >= 0.0
  y = y_grid[valid]
  q = np.full(y.shape, max(float(r), EPS))

  curves = []
  for label, beta in (("quadratic", 2.0), ("kl", 1.0)):
    values = bregman_terms(beta_generator(beta), y, q) / rho
    if values.size:
      values = values - np.min(values)
    curves.append(MetricCurve(float(r), y.copy(), values, label, y_grid[~valid]))
  return curves

"""
This module provides Bregman-divergence algebra:
beta-divergence generators, the closed-form quadratic prox,
and a brute-force prox oracle for divergences without a closed form.
"""

# --------------------------------------------------------------------------------
# Imports
# --------------------------------------------------------------------------------

import numpy as np

from dataclasses import dataclass
from scipy.optimize import minimize_scalar
from scipy.special import xlogy
from typing import Callable, Tuple

from unfoldpr.utils.exceptions import BracketError, DomainError, ShapeError


# --------------------------------------------------------------------------------
# Globals
# --------------------------------------------------------------------------------

EPS = 1e-8
ORACLE_XATOL = 1e-10


# --------------------------------------------------------------------------------
# Generator
# --------------------------------------------------------------------------------

@dataclass(frozen=True)
class Generator:
  beta: float
  psi: Callable[[np.ndarray], np.ndarray]
  psi_prime: Callable[[np.ndarray], np.ndarray]

  @property
  def singular_at_zero(self) -> bool:
    # psi' blows up at 0 for beta <= 1
    return self.beta <= 1.0


def beta_generator(beta: float) -> Generator:
  beta = float(beta)

  if beta == 1.0:
    return Generator(
      beta=beta,
      psi=lambda z: xlogy(z, z) - z,
      psi_prime=lambda z: np.log(z))

  if beta == 0.0:
    return Generator(
      beta=beta,
      psi=lambda z: -np.log(z),
      psi_prime=lambda z: -1.0 / z)

  return Generator(
    beta=beta,
    psi=lambda z: np.power(z, beta) / (beta * (beta - 1.0)),
    psi_prime=lambda z: np.power(z, beta - 1.0) / (beta - 1.0))


def quadratic() -> Generator:
  return beta_generator(2.0)


def kullback_leibler() -> Generator:
  return beta_generator(1.0)


def itakura_saito() -> Generator:
  return beta_generator(0.0)


# --------------------------------------------------------------------------------
# Private Functions
# --------------------------------------------------------------------------------

def _as_matching(*arrays: np.ndarray) -> Tuple[np.ndarray, ...]:
  converted = tuple(np.asarray(a, dtype=np.float64) for a in arrays)
  shape = converted[0].shape
  for a in converted[1:]:
    if a.shape != shape:
      raise ShapeError(f"shape mismatch: {shape} vs {a.shape}")
  return converted


def _check_rho(rho: float) -> None:
  if not rho > 0:
    raise DomainError(f"rho must be positive, got {rho}")


def _floor(z: np.ndarray) -> np.ndarray:
  return np.maximum(z, EPS)


def _minimize_coordinate(objective: Callable[[float], float], upper: float) -> float:
  result = minimize_scalar(
    objective,
    bounds=(EPS, upper),
    method="bounded",
    options={"xatol": ORACLE_XATOL, "maxiter": 2000})

  z = float(result.x)
  if not result.success or z >= upper * (1.0 - 1e-6):
    raise BracketError("prox minimum could not be bracketed", EPS, upper)
  return z


# --------------------------------------------------------------------------------
# Divergences
# --------------------------------------------------------------------------------

def bregman_eval(gen: Generator, p: np.ndarray, q: np.ndarray) -> float:
  p, q = _as_matching(p, q)

  if np.any(p < 0):
    raise DomainError("p must be nonnegative")
  if gen.singular_at_zero and np.any(q <= 0):
    raise DomainError(f"q must be positive for beta={gen.beta}")
  if gen.beta <= 0.0 and np.any(p <= 0):
    raise DomainError(f"p must be positive for beta={gen.beta}")

  return float(max(np.sum(bregman_terms(gen, p, q)), 0.0))


def bregman_terms(gen: Generator, p: np.ndarray, q: np.ndarray) -> np.ndarray:
  """Per-coordinate divergence terms, without domain checks."""

  return gen.psi(p) - gen.psi(q) - gen.psi_prime(q) * (p - q)


# --------------------------------------------------------------------------------
# Proximity Operators
# --------------------------------------------------------------------------------

def prox_quadratic(y: np.ndarray, r: np.ndarray, rho: float) -> np.ndarray:
  _check_rho(rho)
  y, r = _as_matching(y, r)
  inv_rho = 1.0 / rho
  return (y + inv_rho * r) / (1.0 + inv_rho)


def prox_bruteforce(gen: Generator, r: np.ndarray, rho: float, y: np.ndarray) -> np.ndarray:
  """
  Coordinate-wise argmin over [EPS, z_max] of D_psi(z | r) + rho/2 (z - y)^2.

  Used as a test oracle only. z_max = 10 * max(y, r, 1) per coordinate.
  """

  _check_rho(rho)
  y, r = _as_matching(y, r)
  r_floored = _floor(r)
  out = np.empty_like(y)

  for k in np.ndindex(y.shape):
    rk, yk = r_floored[k], y[k]
    psi_r, dpsi_r = gen.psi(rk), gen.psi_prime(rk)

    def objective(z: float) -> float:
      return gen.psi(z) - psi_r - dpsi_r * (z - rk) + 0.5 * rho * (z - yk) ** 2

    out[k] = _minimize_coordinate(objective, 10.0 * max(yk, r[k], 1.0))

  return out


def prox_generator_bruteforce(gen: Generator, rho: float, y: np.ndarray, r: np.ndarray) -> np.ndarray:
  """Coordinate-wise argmin of psi(z) + rho/2 (z - y)^2; r only sets the search ceiling."""

  _check_rho(rho)
  y, r = _as_matching(y, r)
  out = np.empty_like(y)

  for k in np.ndindex(y.shape):
    yk = y[k]
    out[k] = _minimize_coordinate(
      lambda z: gen.psi(z) + 0.5 * rho * (z - yk) ** 2,
      10.0 * max(yk, r[k], 1.0))

  return out


def prox_shift_check(gen: Generator, r: np.ndarray, rho: float, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
  y, r = _as_matching(y, r)
  lhs = prox_bruteforce(gen, r, rho, y)
  shifted = y + gen.psi_prime(_floor(r)) / rho
  rhs = prox_generator_bruteforce(gen, rho, shifted, r)
  return lhs, rhs


def bregman_prox(gen: Generator) -> Callable[[np.ndarray, np.ndarray, float], np.ndarray]:
  """Adapts a generator to the (|h|, r, rho) prox signature used by the solvers."""

  if gen.beta == 2.0:
    return lambda magnitudes, r, rho: prox_quadratic(magnitudes, r, rho)
  return lambda magnitudes, r, rho: prox_bruteforce(gen, r, rho, magnitudes)


def scalar_prox_bruteforce(func: Callable[[float], float], y: float, lower: float, upper: float) -> float:
  """argmin over [lower, upper] of func(z) + (z - y)^2 / 2, for convex func."""

  result = minimize_scalar(
    lambda z: func(z) + 0.5 * (z - y) ** 2,
    bounds=(lower, upper),
    method="bounded",
    options={"xatol": ORACLE_XATOL, "maxiter": 2000})
  if not result.success:
    raise BracketError("scalar prox minimization did not converge", lower, upper)
  return float(result.x)

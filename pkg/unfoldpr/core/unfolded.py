"""
This module provides the unfolded ADMM network (UADMM).

Each layer mirrors one ADMM iteration, with the proximity operator replaced
by a trainable sublayer F(y, r) = APL(gamma1 * y + gamma2 * r^(beta-1) / (beta-1)).
The forward pass records a Tape, and uadmm_backward replays it in reverse to
get gradients of a scalar loss with respect to every layer parameter.
"""

# --------------------------------------------------------------------------------
# Imports
# --------------------------------------------------------------------------------

import numpy as np

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from unfoldpr.core.divergence import EPS
from unfoldpr.core.solvers import magnitude_and_phase
from unfoldpr.core.transforms import Measurements, Signal, StftOperator
from unfoldpr.utils.exceptions import DivergentLossError, DomainError, ShapeError, TapeMismatchError


# --------------------------------------------------------------------------------
# Globals
# --------------------------------------------------------------------------------

BETA_GUARD = 1e-3


# --------------------------------------------------------------------------------
# Parameter Models
# --------------------------------------------------------------------------------

@dataclass(frozen=True)
class APLParams:
  w_tilde: np.ndarray
  b: np.ndarray

  def __post_init__(self) -> None:
    w_tilde = np.atleast_1d(np.asarray(self.w_tilde, dtype=np.float64))
    b = np.atleast_1d(np.asarray(self.b, dtype=np.float64))
    if w_tilde.ndim != 1 or w_tilde.size < 1 or w_tilde.shape != b.shape:
      raise ShapeError(f"APL needs matching 1-D slopes and biases, got {w_tilde.shape} and {b.shape}")
    object.__setattr__(self, "w_tilde", w_tilde)
    object.__setattr__(self, "b", b)

  @property
  def w(self) -> np.ndarray:
    return -self.w_tilde ** 2

  @property
  def segments(self) -> int:
    return self.w_tilde.size


@dataclass(frozen=True)
class LayerParams:
  apl: APLParams
  gamma1: float
  gamma2: float
  beta: float

  def to_vector(self) -> np.ndarray:
    return np.concatenate([self.apl.w_tilde, self.apl.b, [self.gamma1, self.gamma2, self.beta]])

  @classmethod
  def from_vector(cls, vector: np.ndarray, segments: int) -> "LayerParams":
    vector = np.asarray(vector, dtype=np.float64)
    if vector.shape != (2 * segments + 3,):
      raise ShapeError(f"layer vector must have {2 * segments + 3} entries, got {vector.shape}")
    return cls(
      apl=APLParams(vector[:segments].copy(), vector[segments:2 * segments].copy()),
      gamma1=float(vector[2 * segments]),
      gamma2=float(vector[2 * segments + 1]),
      beta=float(vector[2 * segments + 2]))

  @classmethod
  def quadratic(cls, rho: float, segments: int, slope: float = 0.0) -> "LayerParams":
    """
    Parameters for which F equals the quadratic prox on nonnegative inputs.

    A nonzero slope keeps that property (biases are 0) and makes the APL
    strictly increasing.
    """

    inv_rho = 1.0 / rho
    return cls(
      apl=APLParams(np.full(segments, float(slope)), np.zeros(segments)),
      gamma1=1.0 / (1.0 + inv_rho),
      gamma2=inv_rho / (1.0 + inv_rho),
      beta=2.0)


@dataclass
class UnfoldedModel:
  """
  T layers sharing one parameter block (tied) or holding one block each (untied).

  params has shape (blocks, 2C + 3): slopes w_tilde, biases b, gamma1, gamma2, beta.
  """

  T: int
  C: int
  tied: bool
  rho: float
  params: np.ndarray

  def __post_init__(self) -> None:
    if self.T < 0 or self.C < 1:
      raise DomainError(f"need T >= 0 and C >= 1, got T={self.T}, C={self.C}")
    if not self.rho > 0:
      raise DomainError(f"rho must be positive, got {self.rho}")
    self.params = np.array(self.params, dtype=np.float64)
    if self.params.shape != (self.blocks, 2 * self.C + 3):
      raise ShapeError(f"params must have shape {(self.blocks, 2 * self.C + 3)}, got {self.params.shape}")

  @property
  def blocks(self) -> int:
    return 1 if self.tied else max(self.T, 1)

  def block_index(self, t: int) -> int:
    return 0 if self.tied else t

  def layer(self, t: int) -> LayerParams:
    return LayerParams.from_vector(self.params[self.block_index(t)], self.C)

  def layers(self) -> List[LayerParams]:
    return [LayerParams.from_vector(row, self.C) for row in self.params]

  def with_params(self, params: np.ndarray) -> "UnfoldedModel":
    return UnfoldedModel(self.T, self.C, self.tied, self.rho, params)

  def copy(self) -> "UnfoldedModel":
    return self.with_params(self.params.copy())

  def untied(self) -> "UnfoldedModel":
    return UnfoldedModel(self.T, self.C, False, self.rho, np.repeat(self.params[:1], max(self.T, 1), axis=0))

  # Positions in a parameter row

  @property
  def index_gamma1(self) -> int:
    return 2 * self.C

  @property
  def index_gamma2(self) -> int:
    return 2 * self.C + 1

  @property
  def index_beta(self) -> int:
    return 2 * self.C + 2

  @classmethod
  def quadratic(cls, T: int = 15, C: int = 3, tied: bool = False, rho: float = 1e-3, slope: float = 0.0) -> "UnfoldedModel":
    row = LayerParams.quadratic(rho, C, slope).to_vector()
    blocks = 1 if tied else max(T, 1)
    return cls(T, C, tied, rho, np.tile(row, (blocks, 1)))


@dataclass
class Tape:
  """Per-layer intermediates of one forward pass; xs and lams include the initial state."""

  T: int
  tied: bool
  blocks: int
  r_floored: np.ndarray
  op: StftOperator
  xs: List[np.ndarray] = field(default_factory=list)
  lams: List[np.ndarray] = field(default_factory=list)
  h: List[np.ndarray] = field(default_factory=list)
  magnitude: List[np.ndarray] = field(default_factory=list)
  theta: List[np.ndarray] = field(default_factory=list)
  pre_activation: List[np.ndarray] = field(default_factory=list)
  u: List[np.ndarray] = field(default_factory=list)

  def __len__(self) -> int:
    return len(self.h)


# --------------------------------------------------------------------------------
# APL and Sublayer
# --------------------------------------------------------------------------------

def apl_forward(p: APLParams, y: np.ndarray) -> np.ndarray:
  y = np.asarray(y, dtype=np.float64)
  out = np.maximum(y, 0.0)
  for w_c, b_c in zip(p.w, p.b):
    out = out + w_c * np.maximum(-y + b_c, 0.0)
  return out


def apl_slope(p: APLParams, y: np.ndarray) -> np.ndarray:
  """Right-hand derivative of the APL unit."""

  slope = (y >= 0.0).astype(np.float64)
  for w_c, b_c in zip(p.w, p.b):
    slope = slope - w_c * (y < b_c)
  return slope


def _check_beta(beta: float) -> None:
  if abs(beta - 1.0) <= BETA_GUARD:
    raise DomainError(f"beta={beta} is within {BETA_GUARD} of the singular value 1")


def beta_term(r: np.ndarray, beta: float) -> np.ndarray:
  """r^(beta-1) / (beta-1) with r floored at EPS."""

  _check_beta(beta)
  return np.power(np.maximum(r, EPS), beta - 1.0) / (beta - 1.0)


def beta_term_dbeta(r: np.ndarray, beta: float) -> np.ndarray:
  r = np.maximum(r, EPS)
  d = beta - 1.0
  return np.power(r, d) * (np.log(r) * d - 1.0) / d ** 2


def sublayer_F(p: LayerParams, y: np.ndarray, r: np.ndarray) -> np.ndarray:
  return apl_forward(p.apl, p.gamma1 * np.asarray(y, dtype=np.float64) + p.gamma2 * beta_term(r, p.beta))


# --------------------------------------------------------------------------------
# Forward Pass
# --------------------------------------------------------------------------------

def uadmm_forward(
  m: UnfoldedModel,
  r: Measurements,
  x0: Signal,
  lambda0: Optional[np.ndarray] = None
) -> Tuple[Signal, np.ndarray, Tape]:
  op = r.operator()
  if len(x0) != r.signal_length:
    raise ShapeError(f"initial signal has length {len(x0)}, measurements expect {r.signal_length}")

  lam = np.zeros(op.shape, dtype=np.complex128) if lambda0 is None else np.asarray(lambda0, dtype=np.complex128)
  if lam.size != r.r.size:
    raise ShapeError(f"lambda has {lam.size} entries, measurements have {r.r.size}")
  lam = lam.reshape(op.shape).copy()

  tape = Tape(T=m.T, tied=m.tied, blocks=m.blocks, r_floored=np.maximum(r.r, EPS), op=op)
  x = x0.samples.copy()
  ax = op.forward(x)
  tape.xs.append(x)
  tape.lams.append(lam)

  layers = m.layers()
  for t in range(m.T):
    p = layers[m.block_index(t)]

    # L1
    h = ax + lam / m.rho

    # NL
    magnitude, theta = magnitude_and_phase(h)
    pre = p.gamma1 * magnitude + p.gamma2 * beta_term(r.r, p.beta)
    u = apl_forward(p.apl, pre)
    target = u * np.exp(1j * theta)

    # L2
    x = op.adjoint(target - lam / m.rho)
    ax = op.forward(x)
    lam = lam + m.rho * (ax - target)
    if not np.all(np.isfinite(x)):
      raise DivergentLossError(f"UADMM iterate is non-finite after layer {t + 1} of {m.T}")

    tape.h.append(h)
    tape.magnitude.append(magnitude)
    tape.theta.append(theta)
    tape.pre_activation.append(pre)
    tape.u.append(u)
    tape.xs.append(x)
    tape.lams.append(lam)

  return x0.with_samples(x), lam, tape


# --------------------------------------------------------------------------------
# Backward Pass
# --------------------------------------------------------------------------------

def uadmm_backward(m: UnfoldedModel, tape: Tape, grad_xT: np.ndarray) -> np.ndarray:
  """
  Gradients of a scalar loss with respect to m.params, given dL/dx_T.

  Complex adjoints use the convention zbar = dL/dRe(z) + i dL/dIm(z).
  """

  if tape.T != m.T or tape.tied != m.tied or tape.blocks != m.blocks or len(tape) != m.T:
    raise TapeMismatchError(
      f"tape (T={tape.T}, tied={tape.tied}, layers={len(tape)}) does not match "
      f"model (T={m.T}, tied={m.tied})")

  grad_xT = np.asarray(grad_xT, dtype=np.float64)
  if grad_xT.shape != tape.xs[-1].shape:
    raise ShapeError(f"upstream gradient shape {grad_xT.shape} != signal shape {tape.xs[-1].shape}")

  grads = np.zeros_like(m.params)
  op = tape.op
  layers = m.layers()
  rho = m.rho
  x_bar = grad_xT.copy()
  lam_bar = np.zeros(op.shape, dtype=np.complex128)

  for t in reversed(range(m.T)):
    k = m.block_index(t)
    p = layers[k]
    h, magnitude, pre, u = tape.h[t], tape.magnitude[t], tape.pre_activation[t], tape.u[t]
    phase = np.exp(1j * tape.theta[t])

    # lam_t = lam_{t-1} + rho (A x_t - v)
    x_bar = x_bar + rho * op.adjoint(lam_bar)
    v_bar = -rho * lam_bar
    lam_prev_bar = lam_bar.copy()

    # x_t = Re A^H (v - lam_{t-1} / rho)
    w = op.forward(x_bar)
    v_bar = v_bar + w
    lam_prev_bar = lam_prev_bar - w / rho

    # v = u e^{i theta}
    u_bar = np.real(np.conj(phase) * v_bar)
    phase_bar = u * v_bar

    # u = APL(pre)
    pre_bar = u_bar * apl_slope(p.apl, pre)
    for c in range(m.C):
      hinge = np.maximum(p.apl.b[c] - pre, 0.0)
      grads[k, c] += np.sum(u_bar * hinge) * (-2.0 * p.apl.w_tilde[c])
      grads[k, m.C + c] += p.apl.w[c] * np.sum(u_bar * (pre < p.apl.b[c]))

    # pre = gamma1 |h| + gamma2 q(r, beta)
    grads[k, m.index_gamma1] += np.sum(pre_bar * magnitude)
    grads[k, m.index_gamma2] += np.sum(pre_bar * beta_term(tape.r_floored, p.beta))
    grads[k, m.index_beta] += p.gamma2 * np.sum(pre_bar * beta_term_dbeta(tape.r_floored, p.beta))
    magnitude_bar = p.gamma1 * pre_bar * (np.abs(h) > EPS)

    # |h| and e^{i angle(h)}
    h_bar = magnitude_bar * phase + (phase_bar - np.real(np.conj(phase_bar) * phase) * phase) / magnitude

    # h = A x_{t-1} + lam_{t-1} / rho
    x_bar = op.adjoint(h_bar)
    lam_bar = lam_prev_bar + h_bar / rho

  return grads


# --------------------------------------------------------------------------------
# Iterated Model
# --------------------------------------------------------------------------------

def iterate_model(
  m: UnfoldedModel,
  r: Measurements,
  x0: Signal,
  k: int,
  lambda0: Optional[np.ndarray] = None
) -> Signal:
  """Applies the whole network k times, carrying (x, lambda) between applications."""

  if k < 1:
    raise DomainError(f"number of applications must be >= 1, got {k}")

  x, lam = x0, lambda0
  for _ in range(k):
    x, lam, _ = uadmm_forward(m, r, x, lam)
  return x

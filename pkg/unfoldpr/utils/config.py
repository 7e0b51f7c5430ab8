"""
This module provides the experiment configuration:
typed sections read from one JSON document, with unknown keys rejected.
"""

# --------------------------------------------------------------------------------
# Imports
# --------------------------------------------------------------------------------

import json
import os

from pathlib import Path
from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticValidationError, field_validator
from typing import List, Mapping, Optional

from unfoldpr import default_config_path, seed_env_var
from unfoldpr.core.training import TrainConfig
from unfoldpr.core.transforms import StftConfig
from unfoldpr.utils.exceptions import ConfigError


# --------------------------------------------------------------------------------
# Models
# --------------------------------------------------------------------------------

class DataConfig(BaseModel):
  model_config = ConfigDict(extra="forbid")

  train_dir: str = "data/train"
  val_dir: str = "data/val"
  test_dir: str = "data/test"
  sample_rate: int = Field(default=16000, gt=0)
  crop_seconds: Optional[float] = Field(default=2.0, gt=0.0)
  max_train: Optional[int] = Field(default=40, ge=0)
  max_val: Optional[int] = Field(default=4, ge=0)
  max_test: Optional[int] = Field(default=10, ge=0)


class SolverConfig(BaseModel):
  model_config = ConfigDict(extra="forbid")

  rho: float = Field(default=1e-3, gt=0.0)
  gla_iters: int = Field(default=1500, ge=0)
  admm_budgets: List[int] = [15, 30, 75, 150, 1500]
  iterations: List[int] = [1, 2, 4]

  @field_validator("admm_budgets")
  @classmethod
  def _check_budgets(cls, value: List[int]) -> List[int]:
    if any(b < 0 for b in value):
      raise ValueError(f"ADMM budgets must be >= 0, got {value}")
    return value

  @field_validator("iterations")
  @classmethod
  def _check_iterations(cls, value: List[int]) -> List[int]:
    if any(k < 1 for k in value):
      raise ValueError(f"iterated-model counts must be >= 1, got {value}")
    return value


class ModelConfig(BaseModel):
  model_config = ConfigDict(extra="forbid")

  layers: int = Field(default=15, ge=0)
  segments: int = Field(default=3, ge=1)
  apl_slope_init: float = 0.0


class MetricCurveConfig(BaseModel):
  model_config = ConfigDict(extra="forbid")

  r: float = Field(default=1.0, ge=0.0)
  ymin: float = 0.0
  ymax: float = 3.0
  points: int = Field(default=61, ge=2)


class ServiceConfig(BaseModel):
  model_config = ConfigDict(extra="forbid")

  model_dir: str = "models"


class ExperimentConfig(BaseModel):
  model_config = ConfigDict(extra="forbid")

  seed: int = 0
  data: DataConfig = DataConfig()
  stft: StftConfig = StftConfig()
  solvers: SolverConfig = SolverConfig()
  model: ModelConfig = ModelConfig()
  train: TrainConfig = TrainConfig()
  metric_curve: MetricCurveConfig = MetricCurveConfig()
  output_dir: str = "out"
  workers: int = Field(default=1, gt=0)
  progress: bool = False
  service: ServiceConfig = ServiceConfig()


# --------------------------------------------------------------------------------
# Loading
# --------------------------------------------------------------------------------

def _describe(exc: PydanticValidationError) -> str:
  return "; ".join(f"{'.'.join(str(loc) for loc in err['loc'])}: {err['msg']}" for err in exc.errors())


def parse_config(document: dict, env: Optional[Mapping[str, str]] = None, source: str = "<config>") -> ExperimentConfig:
  env = os.environ if env is None else env
  try:
    cfg = ExperimentConfig(**document)
  except PydanticValidationError as exc:
    raise ConfigError(f"{source}: {_describe(exc)}") from exc
  except TypeError as exc:
    raise ConfigError(f"{source}: top level must be an object") from exc

  if env.get(seed_env_var):
    try:
      seed = int(env[seed_env_var])
    except ValueError as exc:
      raise ConfigError(f"{seed_env_var} must be an integer, got {env[seed_env_var]!r}") from exc
    cfg = cfg.model_copy(update={"seed": seed, "train": cfg.train.model_copy(update={"seed": seed})})

  return cfg


def load_config(path: str = default_config_path, env: Optional[Mapping[str, str]] = None) -> ExperimentConfig:
  try:
    with open(path) as config_json:
      document = json.load(config_json)
  except FileNotFoundError as exc:
    raise ConfigError(f"config file not found: {path}") from exc
  except json.JSONDecodeError as exc:
    raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc

  return parse_config(document, env, source=path)


def check_paths(cfg: ExperimentConfig, *sections: str) -> None:
  """Checks that the named data directories ("train", "val", "test") exist."""

  for section in sections:
    directory = getattr(cfg.data, f"{section}_dir", None)
    if directory is None:
      raise ConfigError(f"unknown data section {section!r}")
    if not Path(directory).is_dir():
      raise ConfigError(f"data.{section}_dir does not exist: {directory}")

"""
This module provides routes for the API:
stored models, their learned metrics, and reconstruction of uploaded audio.
"""

# --------------------------------------------------------------------------------
# Imports
# --------------------------------------------------------------------------------

import numpy as np

from fastapi import APIRouter, Depends, File, Query, UploadFile
from fastapi.responses import Response
from pydantic import BaseModel
from typing import List, Literal, Optional, Union

from unfoldpr.core.metric_recovery import MetricCurve, sample_metric_curve
from unfoldpr.harness.audio import parse_wav, wav_bytes
from unfoldpr.harness.corpus import prepare_example
from unfoldpr.harness.experiment import reconstruct
from unfoldpr.utils.config import ExperimentConfig
from unfoldpr.utils.dependencies import get_config, get_model_directory
from unfoldpr.utils.exceptions import ValidationError
from unfoldpr.utils.storage import CheckpointSummary, ModelDirectory


# --------------------------------------------------------------------------------
# Router
# --------------------------------------------------------------------------------

router = APIRouter(
  prefix="/api",
  tags=["API"]
)


# --------------------------------------------------------------------------------
# Models
# --------------------------------------------------------------------------------

class CurveOut(BaseModel):
  layer: Union[int, str]
  r: float
  y: List[float]
  f: List[float]
  missing: List[float]


class MetricCurves(BaseModel):
  model: str
  curves: List[CurveOut]


def _curve_out(curve: MetricCurve) -> CurveOut:
  return CurveOut(
    layer=curve.layer_index,
    r=curve.r_value,
    y=curve.y_grid.tolist(),
    f=curve.f_values.tolist(),
    missing=curve.missing.tolist())


# --------------------------------------------------------------------------------
# Routes for models
# --------------------------------------------------------------------------------

@router.get(
  path="/models",
  summary="List stored models",
  response_model=List[CheckpointSummary]
)
async def get_models(
  models: ModelDirectory = Depends(get_model_directory)
) -> List[CheckpointSummary]:
  """Lists every readable checkpoint in the model directory."""

  return models.summaries()


@router.get(
  path="/models/{name}",
  summary="Get one stored model",
  response_model=CheckpointSummary
)
async def get_model(
  name: str,
  models: ModelDirectory = Depends(get_model_directory)
) -> CheckpointSummary:
  return models.get(name).summary()


@router.get(
  path="/models/{name}/metric",
  summary="Sample the learned metric of a stored model",
  response_model=MetricCurves
)
async def get_model_metric(
  name: str,
  r: float = Query(default=1.0, ge=0.0),
  ymin: float = 0.0,
  ymax: float = 3.0,
  points: int = Query(default=61, ge=2, le=10000),
  models: ModelDirectory = Depends(get_model_directory)
) -> MetricCurves:
  """
  Samples f_r on an even grid, one curve per layer (or one for a tied model).
  Grid points where the APL cannot be inverted are listed under "missing".
  """

  if not ymax > ymin:
    raise ValidationError(f"ymax must exceed ymin, got [{ymin}, {ymax}]")

  model, _, _ = models.get(name).load()
  curves = sample_metric_curve(model, r, np.linspace(ymin, ymax, points))
  return MetricCurves(model=name, curves=[_curve_out(c) for c in curves])


# --------------------------------------------------------------------------------
# Routes for reconstruction
# --------------------------------------------------------------------------------

@router.post(
  path="/reconstruct",
  summary="Reconstruct an uploaded WAV file from its STFT magnitudes",
  response_class=Response
)
async def post_reconstruct(
  file: UploadFile = File(...),
  method: Literal["gla", "admm", "uadmm"] = "gla",
  iters: Optional[int] = Query(default=None, ge=0, le=100000),
  model: Optional[str] = None,
  cfg: ExperimentConfig = Depends(get_config),
  models: ModelDirectory = Depends(get_model_directory)
) -> Response:
  """Returns the reconstruction as a 32-bit float WAV file."""

  name = file.filename or "upload.wav"
  signal = parse_wav(await file.read(), name)
  example = prepare_example(name, signal, cfg.stft, cfg.seed)

  network = None
  if method == "uadmm":
    if not model:
      raise ValidationError("query parameter 'model' is required for method 'uadmm'")
    network, _, _ = models.get(model).load()
  elif iters is None:
    iters = cfg.solvers.gla_iters if method == "gla" else max(cfg.solvers.admm_budgets, default=0)

  samples, _ = reconstruct(example, method, iters, cfg.solvers.rho, network)
  return Response(content=wav_bytes(signal.with_samples(samples)), media_type="audio/wav")

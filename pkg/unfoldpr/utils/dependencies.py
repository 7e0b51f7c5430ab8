"""
This module provides dependency getters for the service routes.
"""

# --------------------------------------------------------------------------------
# Imports
# --------------------------------------------------------------------------------

import logging
import os

from fastapi import Depends
from functools import lru_cache

from unfoldpr import config_env_var, default_config_path
from unfoldpr.utils.config import ExperimentConfig, load_config
from unfoldpr.utils.storage import ModelDirectory


# --------------------------------------------------------------------------------
# Globals
# --------------------------------------------------------------------------------

logger = logging.getLogger(__name__)


# --------------------------------------------------------------------------------
# Getters
# --------------------------------------------------------------------------------

@lru_cache(maxsize=1)
def get_config() -> ExperimentConfig:
  path = os.environ.get(config_env_var, default_config_path)
  if not os.path.isfile(path):
    logger.warning("config file %s not found, serving with defaults", path)
    return ExperimentConfig()
  return load_config(path)


def get_model_directory(cfg: ExperimentConfig = Depends(get_config)) -> ModelDirectory:
  return ModelDirectory(cfg.service.model_dir)

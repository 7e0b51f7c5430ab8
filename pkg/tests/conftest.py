"""
This module provides fixtures for testing.

Shared constants live in inputs.json so that every test module draws
the same clip sizes, model shapes and tolerances.
"""

# --------------------------------------------------------------------------------
# Imports
# --------------------------------------------------------------------------------

import json
import pytest

import numpy as np

from testlib.inputs import ClipInputs, GradientCheck, ModelInputs
from unfoldpr.core.transforms import measure


# --------------------------------------------------------------------------------
# Private Functions
# --------------------------------------------------------------------------------

def _section(inputs, key, *fields):
  assert key in inputs, f"inputs are missing '{key}' key"
  for name in fields:
    assert name in inputs[key], f"input '{key}' is missing '{name}'"
  return inputs[key]


# --------------------------------------------------------------------------------
# Input Fixtures
# --------------------------------------------------------------------------------

@pytest.fixture(scope='session')
def test_inputs():
  with open('inputs.json') as inputs_json:
    data = json.load(inputs_json)
  return data


@pytest.fixture(scope='session')
def seed(test_inputs):
  assert 'seed' in test_inputs, "inputs are missing 'seed' key"
  return test_inputs['seed']


@pytest.fixture(scope='session')
def clip_inputs(test_inputs):
  data = _section(test_inputs, 'clip', 'sample_rate', 'seconds', 'window_length')
  return ClipInputs(data['sample_rate'], data['seconds'], data['window_length'])


@pytest.fixture(scope='session')
def model_inputs(test_inputs):
  data = _section(test_inputs, 'model', 'layers', 'segments', 'rho')
  return ModelInputs(data['layers'], data['segments'], data['rho'])


@pytest.fixture(scope='session')
def gradient_check(test_inputs):
  data = _section(test_inputs, 'gradient_check', 'step', 'rtol', 'draws')
  return GradientCheck(data['step'], data['rtol'], data['draws'])


# --------------------------------------------------------------------------------
# Signal Fixtures
# --------------------------------------------------------------------------------

@pytest.fixture
def rng(seed):
  return np.random.default_rng(seed)


@pytest.fixture(scope='session')
def speech_clip(clip_inputs, seed):
  return clip_inputs.speech(seed)


@pytest.fixture(scope='session')
def speech_measurements(speech_clip, clip_inputs):
  return measure(speech_clip, clip_inputs.stft)

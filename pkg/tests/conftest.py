import copy
import json
from pathlib import Path

import numpy as np
import pytest

from core.desired import pendulum_fig1
from core.types import TrackingProblem
from models.zoo import ModelSpec, make_model

FIXTURE_DIR = Path(__file__).resolve().parent.parent / 'data' / 'fixtures'

PENDULUM_CONFIG = {
    'schema': 1,
    'name': 'pendulum_small',
    'model': {'name': 'pendulum'},
    'cost': {'S': [1.0, 1.0], 'epsilon': 0.02},
    'desired': {'preset': 'pendulum_fig1'},
    'time': {'t0': 0.0, 't1': 1.0, 'dt': 0.01},
    'boundary': {'x0': [-1.0, -1.0], 'x1': [-1.0, -1.0]},
    'method': 'composite',
}


@pytest.fixture
def fixture_path():
    return lambda name: str(FIXTURE_DIR / name)


@pytest.fixture
def pendulum_problem():
    """Factory for the pendulum tracking problem on [0, 1]"""
    def make(epsilon=1e-2, xd=None, x0=(-1.0, -1.0), x1=(-1.0, -1.0), S=None):
        return TrackingProblem(
            system=make_model(ModelSpec('pendulum')),
            S=np.eye(2) if S is None else S,
            epsilon=epsilon,
            xd=pendulum_fig1() if xd is None else xd,
            t0=0.0, t1=1.0, x0=np.array(x0), x1=np.array(x1),
        )
    return make


@pytest.fixture
def pendulum_config():
    """Editable copy of a small pendulum config document"""
    return copy.deepcopy(PENDULUM_CONFIG)


@pytest.fixture
def write_config(tmp_path):
    def write(data, name='config.json'):
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding='utf-8')
        return str(path)
    return write

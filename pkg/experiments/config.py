"""
Experiment Configuration
JSON experiment files (schema 1) and environment-driven settings
"""

import json
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from core.desired import PRESETS, DesiredTrajectory, Term
from core.errors import DimensionMismatchError, ParseError, TrackingError
from core.types import TrackingProblem
from models.zoo import ModelSpec, make_model, make_realizable_target

SCHEMA_VERSION = 1
METHODS = ('outer', 'composite', 'exact0', 'oracle', 'compare')
NEEDS_POSITIVE_EPSILON = ('composite', 'oracle', 'compare')
ALLOWED_KEYS = {
    'shooting': ('segments', 'integrator_tol', 'newton_tol', 'max_newton_iters', 'jacobian',
                 'max_segment_growth', 'method', 'fd_step', 'workers', 'warm_start'),
    'feedback': ('sample_dt', 'disturbance'),
    'samples': ('lo', 'hi', 'count', 'seed'),
}


class Settings:
    """Environment defaults; values from .env are loaded by the entry script"""

    def __init__(self, output_dir: Optional[str] = None, log_level: Optional[str] = None,
                 workers: Optional[int] = None, rtol: Optional[float] = None):
        self.output_dir = output_dir or os.getenv('TRACKING_OUTPUT_DIR', 'results')
        self.log_level = (log_level or os.getenv('TRACKING_LOG_LEVEL', 'INFO')).upper()
        self.workers = int(workers or os.getenv('TRACKING_WORKERS', '4'))
        self.rtol = float(rtol or os.getenv('TRACKING_RTOL', '1e-10'))
        if self.workers < 1:
            raise ValueError("TRACKING_WORKERS must be at least 1")
        if self.rtol <= 0:
            raise ValueError("TRACKING_RTOL must be positive")


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Validated experiment description with boundary states resolved"""

    model: ModelSpec
    S: np.ndarray
    epsilon: float
    desired: DesiredTrajectory
    t0: float
    t1: float
    dt: float
    x0: np.ndarray
    x1: np.ndarray
    method: str
    output: str = ''
    shooting: Dict = field(default_factory=dict)
    feedback: Dict = field(default_factory=dict)
    samples: Dict = field(default_factory=dict)
    name: str = 'experiment'

    def build_problem(self, epsilon: Optional[float] = None) -> TrackingProblem:
        return TrackingProblem(
            system=make_model(self.model), S=self.S,
            epsilon=self.epsilon if epsilon is None else epsilon,
            xd=self.desired, t0=self.t0, t1=self.t1, x0=self.x0, x1=self.x1,
        )

    def grid(self) -> np.ndarray:
        steps = max(1, int(round((self.t1 - self.t0) / self.dt)))
        return np.linspace(self.t0, self.t1, steps + 1)

    def to_dict(self) -> Dict:
        """Fully resolved form; parsing it again reproduces this config"""
        data = {
            'schema': SCHEMA_VERSION,
            'name': self.name,
            'model': self.model.to_dict(),
            'cost': {'S': self.S.tolist(), 'epsilon': self.epsilon},
            'desired': self.desired.to_dict(),
            'time': {'t0': self.t0, 't1': self.t1, 'dt': self.dt},
            'boundary': {'x0': self.x0.tolist(), 'x1': self.x1.tolist()},
            'method': self.method,
            'output': self.output,
        }
        for key in ('shooting', 'feedback', 'samples'):
            if getattr(self, key):
                data[key] = dict(getattr(self, key))
        return data


def _require(data: Dict, key: str, path: str):
    if not isinstance(data, dict) or key not in data:
        raise ParseError(f"Missing required entry '{key}'", field=f"{path}.{key}".lstrip('.'))
    return data[key]


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"Expected a number, got {value!r}", field=path)
    return float(value)


def _vector(value, path: str, n: int) -> np.ndarray:
    if not isinstance(value, list):
        raise ParseError(f"Expected a list of numbers, got {value!r}", field=path)
    vec = np.array([_number(v, f"{path}[{i}]") for i, v in enumerate(value)])
    if vec.size != n:
        raise DimensionMismatchError(f"Expected {n} entries, got {vec.size}", field=path)
    return vec


def _terms(value, path: str) -> List[Term]:
    if not isinstance(value, list):
        raise ParseError("Expected a list of terms", field=path)
    terms = []
    for i, item in enumerate(value):
        try:
            terms.append(Term.from_dict(item))
        except (ValueError, TypeError, AttributeError) as exc:
            raise ParseError(str(exc), field=f"{path}[{i}]")
    return terms


def _weight(value, n: int) -> np.ndarray:
    path = 'cost.S'
    if isinstance(value, list) and value and all(not isinstance(v, list) for v in value):
        S = np.diag(_vector(value, path, n))
    elif isinstance(value, list):
        if len(value) != n:
            raise DimensionMismatchError(f"Expected {n} rows, got {len(value)}", field=path)
        S = np.array([_vector(row, f"{path}[{i}]", n) for i, row in enumerate(value)])
    else:
        raise ParseError("S must be a list (diagonal) or a list of rows", field=path)
    if not np.allclose(S, S.T) or np.linalg.eigvalsh(0.5 * (S + S.T)).min() <= 0:
        raise ParseError("S must be symmetric positive definite", field=path)
    return S


def _desired(value, system, n: int) -> DesiredTrajectory:
    if not isinstance(value, dict):
        raise ParseError("Expected an object", field='desired')
    if 'preset' in value:
        preset = value['preset']
        if preset not in PRESETS:
            raise ParseError(f"Unknown preset {preset!r}; choose one of {sorted(PRESETS)}", field='desired.preset')
        xd = PRESETS[preset]()
    elif 'realizable_from' in value:
        xd = make_realizable_target(system, _terms(value['realizable_from'], 'desired.realizable_from'))
    elif 'components' in value:
        comps = value['components']
        if not isinstance(comps, list):
            raise ParseError("Expected a list of term lists", field='desired.components')
        xd = DesiredTrajectory.from_terms(
            [_terms(c, f"desired.components[{i}]") for i, c in enumerate(comps)])
    else:
        raise ParseError("Give one of 'preset', 'realizable_from' or 'components'", field='desired')
    if xd.n != n:
        raise DimensionMismatchError(f"Desired trajectory has {xd.n} components, model has {n}", field='desired')
    return xd


def parse_config_dict(data: Dict, source: str = '<config>') -> ExperimentConfig:
    """Validate an already-loaded config document"""
    if not isinstance(data, dict):
        raise ParseError("Top level must be a JSON object")
    schema = _require(data, 'schema', '')
    if schema != SCHEMA_VERSION:
        raise ParseError(f"Unsupported schema {schema!r}; this version reads schema {SCHEMA_VERSION}", field='schema')

    model_data = _require(data, 'model', '')
    try:
        spec = ModelSpec(name=_require(model_data, 'name', 'model'), params=dict(model_data.get('params', {})))
        system = make_model(spec)
    except TrackingError as exc:
        raise ParseError(exc.message, field='model')
    except (ValueError, TypeError) as exc:
        raise ParseError(str(exc), field='model')
    n = system.n

    cost = _require(data, 'cost', '')
    S = _weight(_require(cost, 'S', 'cost'), n)
    epsilon = _number(_require(cost, 'epsilon', 'cost'), 'cost.epsilon')
    if epsilon < 0:
        raise ParseError("epsilon must be nonnegative", field='cost.epsilon')

    time = _require(data, 'time', '')
    t0 = _number(_require(time, 't0', 'time'), 'time.t0')
    t1 = _number(_require(time, 't1', 'time'), 'time.t1')
    dt = _number(_require(time, 'dt', 'time'), 'time.dt')
    if t1 <= t0:
        raise ParseError("t1 must be greater than t0", field='time.t1')
    if dt <= 0 or dt > t1 - t0:
        raise ParseError("dt must be positive and no longer than the horizon", field='time.dt')

    try:
        xd = _desired(_require(data, 'desired', ''), system, n)
    except TrackingError as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(exc.message, field='desired')

    boundary = _require(data, 'boundary', '')
    from_desired = boundary.get('from_desired', False)
    resolved = {}
    for key, t in (('x0', t0), ('x1', t1)):
        if key in boundary:
            resolved[key] = _vector(boundary[key], f"boundary.{key}", n)
        elif from_desired is True or (isinstance(from_desired, list) and key in from_desired):
            resolved[key] = xd.evaluate(t)[0]
        else:
            raise ParseError(f"Missing '{key}' (or set from_desired)", field=f"boundary.{key}")

    method = data.get('method', 'composite')
    if method not in METHODS:
        raise ParseError(f"Unknown method {method!r}; choose one of {METHODS}", field='method')
    if epsilon == 0.0 and method in NEEDS_POSITIVE_EPSILON:
        raise ParseError(f"Method '{method}' needs epsilon > 0; use method 'exact0' for the ε=0 limit",
                         field='cost.epsilon')

    for key in ('shooting', 'feedback', 'samples'):
        if key in data and not isinstance(data[key], dict):
            raise ParseError("Expected an object", field=key)
    for key, allowed in ALLOWED_KEYS.items():
        for name in data.get(key, {}):
            if name not in allowed:
                raise ParseError(f"Unknown setting; choose from {sorted(allowed)}", field=f"{key}.{name}")
    output = data.get('output', '')
    if not isinstance(output, str):
        raise ParseError("Expected a directory path", field='output')

    return ExperimentConfig(
        model=spec, S=S, epsilon=epsilon, desired=xd, t0=t0, t1=t1, dt=dt,
        x0=resolved['x0'], x1=resolved['x1'], method=method, output=output,
        shooting=dict(data.get('shooting', {})), feedback=dict(data.get('feedback', {})),
        samples=dict(data.get('samples', {})),
        name=str(data.get('name', os.path.splitext(os.path.basename(source))[0])),
    )


def parse_config(path: str) -> ExperimentConfig:
    """
    Read and validate a JSON experiment file.

    Raises:
        ParseError: with the offending field or JSON line
        DimensionMismatchError: if vectors disagree with the model dimension
    """
    if not os.path.exists(path):
        raise ParseError(f"Config file not found: {path}. Please check the path")
    with open(path, 'r', encoding='utf-8') as f:
        text = f.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"Invalid JSON: {exc.msg}", line=exc.lineno)
    return parse_config_dict(data, source=path)

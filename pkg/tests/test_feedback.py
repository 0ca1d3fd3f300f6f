import numpy as np
import numpy.testing as npt
import pytest

from core.errors import HorizonTooShortError, ParseError
from core.types import Flavor
from experiments.config import Settings, parse_config_dict
from experiments.feedback import FeedbackLoop, open_loop_response, sampled_feedback
from experiments.runner import run_experiment

SETTINGS = Settings(workers=1)


@pytest.fixture
def cfg(pendulum_config):
    return parse_config_dict(pendulum_config)


def test_single_sample_is_open_loop(cfg):
    closed = sampled_feedback(cfg, 1.0, settings=SETTINGS)
    opened = open_loop_response(cfg, settings=SETTINGS)
    assert closed.flavor is Flavor.CLOSED_LOOP
    assert closed.lam is None
    npt.assert_array_equal(closed.x, opened.x)
    npt.assert_array_equal(closed.grid, cfg.grid())


def test_plant_follows_composite(cfg):
    plant = open_loop_response(cfg, settings=SETTINGS)
    planned = run_experiment(cfg, SETTINGS).solutions['composite']
    npt.assert_allclose(plant.x[0], cfg.x0)
    assert np.max(np.abs(plant.x - planned.x)) < 0.2


def test_sample_times(cfg):
    loop = FeedbackLoop(cfg, 0.25, settings=SETTINGS)
    npt.assert_allclose(loop.sample_times(), [0.0, 0.25, 0.5, 0.75])


def test_horizon_too_short(cfg):
    with pytest.raises(HorizonTooShortError):
        sampled_feedback(cfg, 0.15, settings=SETTINGS)


def test_sample_interval_below_grid_step(cfg):
    with pytest.raises(ParseError):
        FeedbackLoop(cfg, 0.001)


def test_bad_disturbance(cfg):
    with pytest.raises(ParseError):
        FeedbackLoop(cfg, 0.25, disturbance=[1.0, 2.0, 3.0])


def test_predictions_match_without_disturbance(cfg):
    loop = FeedbackLoop(cfg, 0.25, settings=SETTINGS)
    traj = loop.run()
    assert [entry['time'] for entry in loop.log] == [0.0, 0.25, 0.5, 0.75]
    assert max(entry['prediction_gap'] for entry in loop.log) < 1e-9
    assert traj.grid[-1] == 1.0
    assert np.all(np.diff(traj.grid) > 0)


def test_feedback_rejects_constant_disturbance(cfg):
    push = [0.0, 0.5]
    opened = open_loop_response(cfg, disturbance=push, settings=SETTINGS)
    loop = FeedbackLoop(cfg, 0.25, disturbance=push, settings=SETTINGS)
    closed = loop.run()
    miss_open = np.max(np.abs(opened.x[-1] - cfg.x1))
    miss_closed = np.max(np.abs(closed.x[-1] - cfg.x1))
    assert miss_closed < miss_open
    assert max(entry['prediction_gap'] for entry in loop.log[1:]) > 0.0


def test_callable_disturbance(cfg):
    closed = sampled_feedback(cfg, 0.5, disturbance=lambda t: np.array([0.0, 0.1 * t]), settings=SETTINGS)
    assert closed.grid.size == cfg.grid().size

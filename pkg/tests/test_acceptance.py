"""Acceptance-level runs on the pendulum; the ε=1e-3 oracle runs are marked slow"""

import numpy as np
import pytest

from core.desired import pendulum_fig1_realizable
from experiments.config import Settings, parse_config
from experiments.runner import LAYER_EXCLUSION, layer_refined_grid, run_experiment
from oracle.metrics import cost_terms, feedforward_energy
from oracle.shooting import ShootingConfig, solve_tpbvp
from perturbation.composite import kick_impulse_check, layer_width, solve_composite
from perturbation.outer import solve_outer


@pytest.mark.parametrize('eps', [1e-2, 1e-3, 1e-4])
def test_layer_width_matches_gain(pendulum_problem, eps):
    problem = pendulum_problem(epsilon=eps)
    grid = np.linspace(0.0, 1.0, 101)
    composite = solve_composite(solve_outer(problem, grid=grid), grid)
    # √s2 · b(x0) = 1 · (1 + 1/4)
    assert layer_width(composite, 'left') == pytest.approx(eps / 1.25, rel=0.05)


def test_kick_impulse_at_small_epsilon(pendulum_problem):
    rows = kick_impulse_check(pendulum_problem(epsilon=0.0), [1e-4])
    assert rows[0]['relative_error'] < 0.02


@pytest.mark.slow
def test_pendulum_composite_against_oracle(fixture_path):
    cfg = parse_config(fixture_path('pendulum_fig1.json'))
    result = run_experiment(cfg, Settings(workers=2))
    comparison = result.metrics
    eps = cfg.epsilon
    assert comparison['exclude_width'] == pytest.approx(LAYER_EXCLUSION * eps)
    assert comparison['state_max_interior'] <= 5e-3
    t_worst = comparison['state_argmax_time']
    assert min(t_worst - cfg.t0, cfg.t1 - t_worst) <= 20 * eps


@pytest.mark.slow
def test_realizable_target_costs_at_most_feedforward(pendulum_problem):
    xd = pendulum_fig1_realizable()
    x0, _ = xd.evaluate(0.0)
    x1, _ = xd.evaluate(1.0)
    problem = pendulum_problem(epsilon=1e-3, xd=xd, x0=x0, x1=x1)
    grid = layer_refined_grid(np.linspace(0.0, 1.0, 2001), problem, (1.25, 1.25))
    guess = solve_composite(solve_outer(problem, grid=grid), grid).trajectory
    oracle = solve_tpbvp(problem, ShootingConfig(initial_guess=guess), grid)
    energy = feedforward_energy(problem, grid)
    assert cost_terms(oracle, problem)['total'] <= 1.1 * problem.epsilon ** 2 * energy

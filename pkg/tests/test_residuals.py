import numpy as np
import pytest

from core.desired import pendulum_fig1
from core.types import Flavor, TrackingProblem, TrajectorySolution
from experiments.runner import layer_refined_grid
from models.zoo import ModelSpec, make_model
from oracle.residuals import optimality_residuals, w_matrix
from oracle.shooting import ShootingConfig, solve_tpbvp
from perturbation.composite import solve_composite
from perturbation.outer import solve_outer


@pytest.fixture(scope='module')
def pendulum_pair():
    problem = TrackingProblem(system=make_model(ModelSpec('pendulum')), S=np.eye(2), epsilon=0.02,
                              xd=pendulum_fig1(), t0=0.0, t1=1.0, x0=[-1.0, -1.0], x1=[-1.0, -1.0])
    grid = layer_refined_grid(np.linspace(0.0, 1.0, 2001), problem, (1.25, 1.25))
    composite = solve_composite(solve_outer(problem, grid=grid), grid).trajectory
    oracle = solve_tpbvp(problem, ShootingConfig(initial_guess=composite), grid)
    return problem, composite, oracle


def test_oracle_satisfies_necessary_conditions(pendulum_pair):
    problem, _, oracle = pendulum_pair
    report = optimality_residuals(oracle, problem, exclude_width=10 * problem.epsilon)
    assert report.stationarity_max <= 1e-8
    assert report.state_defect_max <= 5e-3
    assert report.costate_defect_max <= 5e-3
    assert report.projection_identity_max <= 1e-4
    assert report.samples > 0
    assert set(report.to_dict()['rearranged_max']) == {'costate_q', 'singular_p', 'dynamics_q'}


def test_composite_projection_identity(pendulum_pair):
    problem, composite, _ = pendulum_pair
    report = optimality_residuals(composite, problem, exclude_width=10 * problem.epsilon)
    assert report.projection_identity_max <= 1e-6
    assert report.stationarity_max <= 1e-10
    # Q(ẋ − R) vanishes on the outer manifold and the layers only move Px
    assert report.rearranged_max['dynamics_q'] <= 1e-3


def test_needs_costates(pendulum_pair):
    problem, composite, _ = pendulum_pair
    plant = TrajectorySolution(grid=composite.grid, x=composite.x, lam=None, u=composite.u,
                               flavor=Flavor.CLOSED_LOOP)
    with pytest.raises(ValueError):
        optimality_residuals(plant, problem)


def test_exclusion_too_wide(pendulum_pair):
    problem, _, oracle = pendulum_pair
    with pytest.raises(ValueError):
        optimality_residuals(oracle, problem, exclude_width=0.6)


def test_w_matrix_vanishes_for_constant_b():
    gB = np.zeros((2, 1, 2))
    bg = np.array([[0.0, 1.0]])
    assert np.all(w_matrix(gB, bg, np.array([1.0, 2.0])) == 0.0)


def test_rearranged_form_matches_raw_conditions(pendulum_pair):
    problem, _, oracle = pendulum_pair
    report = optimality_residuals(oracle, problem, exclude_width=10 * problem.epsilon)
    bound = 10.0 * report.raw_max + 1e-3
    for name, value in report.rearranged_max.items():
        assert value <= bound, name

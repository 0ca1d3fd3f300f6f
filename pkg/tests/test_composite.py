import numpy as np
import numpy.testing as npt
import pytest

from core.desired import pendulum_fig1_realizable
from core.errors import MatchingFailureError
from core.types import Flavor
from oracle.residuals import optimality_residuals
from perturbation.composite import (compose, control_signal, exact_eps0, kick_impulse_check, layer_width,
                                    rebind_outer, solve_composite)
from perturbation.inner import inner_left_2d, solve_boundary_layers
from perturbation.outer import solve_outer
from perturbation.projectors import projector_set

GRID = np.linspace(0.0, 1.0, 1001)


@pytest.fixture
def pendulum_composite(pendulum_problem):
    outer = solve_outer(pendulum_problem(epsilon=1e-2), grid=GRID)
    return solve_composite(outer, GRID)


def test_endpoints_are_exact(pendulum_composite):
    traj = pendulum_composite.trajectory
    assert traj.flavor is Flavor.COMPOSITE
    npt.assert_array_equal(traj.x[0], [-1.0, -1.0])
    npt.assert_array_equal(traj.x[-1], [-1.0, -1.0])


def test_interior_follows_outer(pendulum_composite):
    traj = pendulum_composite.trajectory
    interior = (GRID >= 0.3) & (GRID <= 0.7)
    npt.assert_allclose(traj.x[interior], pendulum_composite.outer.X[interior], atol=1e-8)


def test_unactuated_component_has_no_layer(pendulum_composite):
    state = pendulum_composite.evaluate(GRID)
    npt.assert_allclose(state['x'][:, 0], state['X'][:, 0], atol=1e-14)


def test_stationarity_and_projection(pendulum_composite, pendulum_problem):
    report = optimality_residuals(pendulum_composite.trajectory, pendulum_problem(epsilon=1e-2),
                                  exclude_width=0.1)
    assert report.stationarity_max < 1e-10
    assert report.projection_identity_max < 1e-6


def test_control_signal_uses_analytic_derivative(pendulum_composite, pendulum_problem):
    problem = pendulum_problem(epsilon=1e-2)
    traj = pendulum_composite.trajectory
    u = control_signal(traj, problem.system, problem.S)
    npt.assert_allclose(u, traj.u)


def test_layer_width_scales_with_epsilon(pendulum_composite):
    assert layer_width(pendulum_composite, 'left') == pytest.approx(1e-2 / 1.25, rel=1e-3)
    assert layer_width(pendulum_composite, 'right') == pytest.approx(1e-2 / 1.25, rel=1e-3)


def test_matching_failure(pendulum_problem):
    outer = solve_outer(pendulum_problem(epsilon=1e-2), grid=GRID)
    _, right = solve_boundary_layers(outer)
    y_init = outer.endpoint('left')['X'][1]
    bad_left = inner_left_2d(outer.problem, y_init + 0.1)
    with pytest.raises(MatchingFailureError):
        compose(outer, bad_left, right, GRID)


def test_compose_needs_positive_epsilon(pendulum_problem):
    outer = solve_outer(pendulum_problem(epsilon=0.0), grid=GRID)
    y_init = outer.endpoint('left')['X'][1]
    layer = inner_left_2d(outer.problem, y_init)
    with pytest.raises(ValueError):
        compose(outer, layer, layer, GRID)


def test_exact_eps0_kicks(pendulum_problem):
    problem = pendulum_problem(epsilon=0.0)
    outer = solve_outer(problem, grid=GRID)
    traj = exact_eps0(problem, outer, GRID)
    assert traj.flavor is Flavor.EXACT_EPS0
    npt.assert_array_equal(traj.x[0], problem.x0)
    npt.assert_array_equal(traj.x[-1], problem.x1)
    npt.assert_allclose(traj.x[1:-1], outer.X[1:-1])
    assert len(traj.kicks) == 2
    left, right = traj.kicks
    y0, y1 = outer.X[0, 1], outer.X[-1, 1]
    assert left.time == 0.0 and right.time == 1.0
    npt.assert_allclose(left.strength, [2 * 0.8 * (y0 + 1.0)], rtol=1e-12)
    npt.assert_allclose(right.strength, [-2 * 0.8 * (y1 + 1.0)], rtol=1e-12)
    npt.assert_allclose(left.jump, [0.0, y0 + 1.0], atol=1e-14)


def test_exact_eps0_endpoint_control_is_regular_part(pendulum_problem):
    problem = pendulum_problem(epsilon=0.0)
    outer = solve_outer(problem, grid=GRID)
    traj = exact_eps0(problem, outer, GRID)
    system = problem.system
    for k in (0, 1, GRID.size // 2, -1):
        ps = projector_set(system, problem.S, outer.X[k])
        npt.assert_allclose(traj.u[k], ps.bg @ (outer.Xdot[k] - system.drift(outer.X[k])), rtol=1e-12, atol=1e-12)


def test_realizable_on_target_has_no_jumps(pendulum_problem):
    xd = pendulum_fig1_realizable()
    x0, _ = xd.evaluate(0.0)
    x1, _ = xd.evaluate(1.0)
    problem = pendulum_problem(epsilon=0.0, xd=xd, x0=x0, x1=x1)
    traj = exact_eps0(problem, grid=GRID)
    for kick in traj.kicks:
        assert np.max(np.abs(kick.strength)) < 1e-7


def test_rebind_keeps_outer_values(pendulum_problem):
    outer = solve_outer(pendulum_problem(epsilon=1e-2), grid=GRID)
    other = rebind_outer(outer, outer.problem.with_epsilon(1e-3))
    assert other.problem.epsilon == 1e-3
    npt.assert_array_equal(other.X, outer.X)


def test_kick_impulse_converges(pendulum_problem):
    problem = pendulum_problem(epsilon=0.0)
    rows = kick_impulse_check(problem, [1e-2, 1e-3])
    assert [r['epsilon'] for r in rows] == [1e-2, 1e-3]
    assert rows[1]['relative_error'] < rows[0]['relative_error']
    assert rows[1]['relative_error'] < 0.01
    assert rows[0]['kick_strength'] == pytest.approx(2 * rows[0]['expected'])

import numpy as np
import numpy.testing as npt
import pytest

from core.types import DeltaKick, Flavor, TrajectorySolution
from models.zoo import ModelSpec, make_model, sample_box
from perturbation.projectors import latin_hypercube_samples


def test_problem_validation(pendulum_problem):
    with pytest.raises(ValueError):
        pendulum_problem(S=np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(ValueError):
        pendulum_problem(S=np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        pendulum_problem(x0=[0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        pendulum_problem(epsilon=-1.0)


def test_problem_copies(pendulum_problem):
    problem = pendulum_problem(epsilon=0.1)
    assert problem.with_epsilon(0.01).epsilon == 0.01
    later = problem.with_start(0.5, [2.0, 3.0])
    assert later.t0 == 0.5 and later.horizon == 0.5
    npt.assert_allclose(later.x0, [2.0, 3.0])
    grid = problem.uniform_grid(0.1)
    assert grid.size == 11 and grid[-1] == 1.0


def test_trajectory_validation():
    grid = np.linspace(0.0, 1.0, 5)
    x = np.zeros((5, 2))
    u = np.zeros((5, 1))
    with pytest.raises(ValueError):
        TrajectorySolution(grid=grid[::-1], x=x, lam=x, u=u, flavor=Flavor.COMPOSITE)
    with pytest.raises(ValueError):
        TrajectorySolution(grid=grid, x=x[:4], lam=x, u=u, flavor=Flavor.COMPOSITE)
    bad = x.copy()
    bad[2, 0] = np.nan
    with pytest.raises(ValueError):
        TrajectorySolution(grid=grid, x=bad, lam=x, u=u, flavor=Flavor.COMPOSITE)
    kick = DeltaKick(time=0.0, strength=np.array([1.0]), jump=np.zeros(2))
    with pytest.raises(ValueError):
        TrajectorySolution(grid=grid, x=x, lam=x, u=u, flavor=Flavor.COMPOSITE, kicks=(kick,))
    traj = TrajectorySolution(grid=grid, x=x, lam=None, u=u, flavor=Flavor.CLOSED_LOOP)
    assert traj.lam is None and traj.n == 2 and traj.p == 1


def test_resample_is_linear():
    grid = np.linspace(0.0, 1.0, 3)
    x = np.column_stack([grid, 2 * grid])
    traj = TrajectorySolution(grid=grid, x=x, lam=x, u=grid, flavor=Flavor.ORACLE)
    fine = traj.resample(np.array([0.25, 0.75]))
    npt.assert_allclose(fine.x, [[0.25, 0.5], [0.75, 1.5]])
    npt.assert_allclose(fine.u[:, 0], [0.25, 0.75])


def test_kick_dict():
    kick = DeltaKick(time=1.0, strength=np.array([-0.5]), jump=np.array([0.0, 0.25]))
    assert kick.to_dict() == {'time': 1.0, 'strength': [-0.5], 'jump': [0.0, 0.25]}


@pytest.mark.parametrize('name', ['pendulum', 'fhn', 'sir', 'generic2d'])
def test_model_gradients_match_finite_differences(name):
    system = make_model(ModelSpec(name))
    lo, hi = sample_box(name)
    errors = system.gradient_errors(latin_hypercube_samples(lo, hi, count=8, seed=3))
    assert errors['gradR'] < 1e-6
    assert errors['gradB'] < 1e-6

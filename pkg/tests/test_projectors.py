import numpy as np
import numpy.testing as npt
import pytest

from core.errors import InsufficientSamplesError, SingularGramError
from core.types import ControlAffineSystem
from models.zoo import ModelSpec, make_model, sample_box
from perturbation.projectors import (default_samples, latin_hypercube_samples, projector_set,
                                     projectors_from_matrices, verify_linearizing)


def random_spd(rng, n):
    M = rng.standard_normal((n, n))
    return M @ M.T + n * np.eye(n)


def test_identities_on_random_instances():
    rng = np.random.default_rng(42)
    for _ in range(200):
        n = int(rng.integers(2, 6))
        p = int(rng.integers(1, n))
        B = rng.standard_normal((n, p))
        S = random_spd(rng, n)
        ps = projectors_from_matrices(B, S)
        for name, value in ps.identity_residuals().items():
            assert value < 1e-9, name


def test_scale_covariance():
    rng = np.random.default_rng(7)
    B = rng.standard_normal((4, 2))
    S = random_spd(rng, 4)
    c = 7.3
    base = projectors_from_matrices(B, S)
    scaled = projectors_from_matrices(B, c * S)
    npt.assert_allclose(scaled.P, base.P, atol=1e-12)
    npt.assert_allclose(scaled.Q, base.Q, atol=1e-12)
    npt.assert_allclose(scaled.bg, base.bg, atol=1e-12)
    npt.assert_allclose(scaled.gamma, base.gamma, atol=1e-12)
    npt.assert_allclose(scaled.omega, base.omega / c, atol=1e-12)


def test_pendulum_projectors():
    system = make_model(ModelSpec('pendulum'))
    ps = projector_set(system, np.eye(2), np.array([-1.0, 0.3]))
    npt.assert_allclose(ps.P, [[0.0, 0.0], [0.0, 1.0]], atol=1e-15)
    npt.assert_allclose(ps.Q, [[1.0, 0.0], [0.0, 0.0]], atol=1e-15)
    npt.assert_allclose(ps.bg, [[0.0, 0.8]], atol=1e-15)
    npt.assert_allclose(ps.gamma, [[0.0, 0.0], [0.0, 0.64]], atol=1e-15)


def test_rank_deficient_input():
    S = np.eye(3)
    with pytest.raises(SingularGramError):
        projectors_from_matrices(np.zeros((3, 1)), S)
    with pytest.raises(SingularGramError):
        projectors_from_matrices(np.array([[1.0, 2.0], [0.0, 0.0], [1.0, 2.0]]), S)
    sir = make_model(ModelSpec('sir'))
    with pytest.raises(SingularGramError):
        projector_set(sir, np.eye(2), np.array([0.0, 0.5]))


@pytest.mark.parametrize('name', ['pendulum', 'fhn', 'sir', 'generic2d'])
def test_registry_models_are_linearizing(name):
    system = make_model(ModelSpec(name))
    lo, hi = sample_box(name)
    report = verify_linearizing(system, np.diag([1.0, 2.0]), latin_hypercube_samples(lo, hi))
    assert report.passed
    assert report.source == 'declared'
    assert report.samples_used == 64
    assert report.omega_deviation < 1e-12


def test_fitted_affine_part():
    # no declared affine part: Q·R is fitted
    system = ControlAffineSystem(
        n=2, p=1,
        R=lambda s: np.array([2.0 * s[0] - s[1] + 0.5, np.sin(s[0])]),
        gradR=lambda s: np.array([[2.0, -1.0], [np.cos(s[0]), 0.0]]),
        B=lambda s: np.array([[0.0], [1.0]]),
        gradB=lambda s: np.zeros((2, 1, 2)),
    )
    report = verify_linearizing(system, np.eye(2), latin_hypercube_samples([-1, -1], [1, 1], count=20))
    assert report.passed and report.source == 'fitted'
    npt.assert_allclose(report.fitted_A[0], [2.0, -1.0], atol=1e-10)
    npt.assert_allclose(report.fitted_b[0], 0.5, atol=1e-10)


def test_detects_non_linearizing_systems():
    curved = ControlAffineSystem(
        n=2, p=1,
        R=lambda s: np.array([s[0] ** 2, 0.0]),
        gradR=lambda s: np.array([[2 * s[0], 0.0], [0.0, 0.0]]),
        B=lambda s: np.array([[0.0], [1.0]]),
        gradB=lambda s: np.zeros((2, 1, 2)),
    )
    report = verify_linearizing(curved, np.eye(2), latin_hypercube_samples([-1, -1], [1, 1]))
    assert report.omega_constant and not report.qr_affine and not report.passed

    tilted = ControlAffineSystem(
        n=2, p=1,
        R=lambda s: np.zeros(2),
        gradR=lambda s: np.zeros((2, 2)),
        B=lambda s: np.array([[1.0], [s[0]]]),
        gradB=lambda s: np.array([[[0.0, 0.0]], [[1.0, 0.0]]]),
    )
    report = verify_linearizing(tilted, np.eye(2), latin_hypercube_samples([-1, -1], [1, 1]))
    assert not report.omega_constant and not report.passed


def test_insufficient_samples():
    system = make_model(ModelSpec('pendulum'))
    with pytest.raises(InsufficientSamplesError):
        verify_linearizing(system, np.eye(2), np.zeros((3, 2)) + np.arange(3)[:, None])
    collinear = np.column_stack([np.linspace(0, 1, 10), np.linspace(0, 1, 10)])
    with pytest.raises(InsufficientSamplesError):
        verify_linearizing(system, np.eye(2), collinear)


def test_default_samples_cover_boundary(pendulum_problem):
    problem = pendulum_problem()
    samples = default_samples(problem, count=32)
    assert samples.shape == (32, 2)
    assert np.all(samples.min(axis=0) >= -4.0 - 1e-12)
    assert np.all(samples.max(axis=0) <= 2.0 + 4 * np.pi)

import numpy as np
import numpy.testing as npt
import pytest

from core.desired import pendulum_fig1_profile
from core.errors import NotMechanicalFormError
from models.zoo import (REGISTRY, ModelSpec, make_fitzhugh_nagumo, make_generic2d, make_model,
                        make_realizable_target, sample_box)


def test_registry_builds_every_model():
    for name in REGISTRY:
        system = make_model(ModelSpec(name))
        lo, hi = sample_box(name)
        x = 0.5 * (lo + hi)
        assert system.drift(x).shape == (system.n,)
        assert system.input_matrix(x).shape == (system.n, system.p)
        assert system.has_full_rank(x)


def test_model_spec_validation():
    with pytest.raises(ValueError):
        ModelSpec('lorenz')
    with pytest.raises(ValueError):
        ModelSpec('fhn', {'beta': 1.0})
    spec = ModelSpec('fhn', {'c': 0.1})
    assert spec.params['c'] == 0.1 and spec.params['a'] == 0.7


def test_fhn_planar_coefficients():
    system = make_fitzhugh_nagumo(a=0.7, b_fhn=0.8, c=0.08)
    npt.assert_allclose(system.planar, (0.056, -0.064, 0.08))
    x = np.array([0.3, -1.2])
    npt.assert_allclose(system.drift(x)[0], 0.08 * (-1.2 + 0.7 - 0.8 * 0.3))
    assert system.constant_B


def test_pendulum_gain():
    system = make_model(ModelSpec('pendulum'))
    npt.assert_allclose(system.input_matrix([-1.0, 5.0]), [[0.0], [1.25]])
    assert not system.constant_B


def test_generic2d_expressions():
    system = make_generic2d(a0=1.0, a1=-0.5, a2=2.0, drift="sin(x) - y^3/3", gain="1 + 0.5*cos(x)")
    x = np.array([0.4, 1.5])
    npt.assert_allclose(system.drift(x), [1.0 - 0.2 + 3.0, np.sin(0.4) - 1.125])
    npt.assert_allclose(system.input_matrix(x)[1, 0], 1 + 0.5 * np.cos(0.4))
    assert not system.constant_B
    assert make_generic2d(gain="2").constant_B
    with pytest.raises(ValueError):
        make_generic2d(a2=0.0)


def test_realizable_target():
    system = make_model(ModelSpec('pendulum'))
    xd = make_realizable_target(system, pendulum_fig1_profile())
    value, deriv = xd.evaluate(np.linspace(0, 1, 5))
    npt.assert_allclose(value[:, 1], deriv[:, 0], atol=1e-12)
    with pytest.raises(NotMechanicalFormError):
        make_realizable_target(make_model(ModelSpec('fhn')), pendulum_fig1_profile())

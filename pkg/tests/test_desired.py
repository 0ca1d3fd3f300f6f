import numpy as np
import numpy.testing as npt
import pytest

from core.desired import (DesiredTrajectory, Term, eval_desired, pendulum_fig1, pendulum_fig1_profile,
                          pendulum_fig1_realizable, stack_components)


def test_term_values_and_derivatives():
    t = np.array([0.0, 0.25, 0.5])
    cos = Term('cos', 2.0, omega=np.pi)
    npt.assert_allclose(cos.value(t), 2.0 * np.cos(np.pi * t))
    (d,) = cos.derivative_terms()
    npt.assert_allclose(d.value(t), -2.0 * np.pi * np.sin(np.pi * t))

    poly = Term('poly', 3.0, power=2)
    (dp,) = poly.derivative_terms()
    npt.assert_allclose(dp.value(t), 6.0 * t)
    assert Term('constant', 5.0).derivative_terms() == []


def test_unknown_term_kind():
    with pytest.raises(ValueError):
        Term('tan', 1.0)


def test_pendulum_literal_target():
    xd = pendulum_fig1()
    value, deriv = xd.evaluate(0.0)
    npt.assert_allclose(value, [1.0, 1.0], atol=1e-15)
    npt.assert_allclose(deriv, [-2.0, -2.0 + 4 * np.pi], atol=1e-12)
    value, _ = xd.evaluate(1.0)
    npt.assert_allclose(value, [-1.0, -1.0], atol=1e-12)


def test_realizable_target_uses_derivative():
    xd = pendulum_fig1_realizable()
    t = np.linspace(0.0, 1.0, 11)
    value, deriv = xd.evaluate(t)
    npt.assert_allclose(value[:, 1], deriv[:, 0], atol=1e-12)
    npt.assert_allclose(value[:, 1], -2 * np.pi * np.sin(2 * np.pi * t) - 2.0, atol=1e-12)


def test_evaluate_shapes():
    xd = pendulum_fig1()
    value, deriv = xd.evaluate(0.3)
    assert value.shape == (2,) and deriv.shape == (2,)
    value, deriv = xd.evaluate(np.linspace(0, 1, 7))
    assert value.shape == (7, 2) and deriv.shape == (7, 2)


def test_dict_form_reproduces_trajectory():
    xd = pendulum_fig1()
    again = DesiredTrajectory.from_dict(xd.to_dict())
    assert again == xd


def test_callable_trajectory():
    xd = DesiredTrajectory(value_fn=lambda t: [np.sin(t)], derivative_fn=lambda t: [np.cos(t)], dimension=1)
    value, deriv = xd.evaluate(np.array([0.0, 1.0]))
    npt.assert_allclose(value[:, 0], np.sin([0.0, 1.0]))
    npt.assert_allclose(deriv[:, 0], np.cos([0.0, 1.0]))
    assert not xd.is_serializable
    with pytest.raises(ValueError):
        xd.to_dict()
    with pytest.raises(ValueError):
        DesiredTrajectory(value_fn=lambda t: [t], dimension=1)


def test_stack_and_constant():
    xd = stack_components([Term('constant', 1.0)], [Term('poly', 1.0, power=1)])
    value, deriv = xd.evaluate(2.0)
    npt.assert_allclose(value, [1.0, 2.0])
    npt.assert_allclose(deriv, [0.0, 1.0])
    npt.assert_allclose(DesiredTrajectory.constant([3.0, 4.0]).evaluate(7.0)[0], [3.0, 4.0])


@pytest.mark.parametrize("terms, t, expected", [
    (pendulum_fig1_profile(), 1.0, (-1.0, -2.0)),
    ((Term('constant', 4.5),), 13.0, (4.5, 0.0)),
    ((Term('poly', 1.0, power=2),), 3.0, (9.0, 6.0)),
])
def test_eval_desired(terms, t, expected):
    value, deriv = eval_desired(DesiredTrajectory(components=(terms,)), t)
    npt.assert_allclose([value[0], deriv[0]], expected, atol=1e-12)

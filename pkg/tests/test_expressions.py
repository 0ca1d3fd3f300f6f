import numpy as np
import numpy.testing as npt
import pytest

from core.errors import ExpressionParseError
from models.expressions import parse_expression


def test_evaluate_and_precedence():
    expr = parse_expression("sin(x) - y^3/3")
    npt.assert_allclose(expr(0.5, 2.0), np.sin(0.5) - 8.0 / 3.0)
    npt.assert_allclose(parse_expression("2 + 3*4")(0, 0), 14.0)
    npt.assert_allclose(parse_expression("-2^2")(0, 0), -4.0)
    npt.assert_allclose(parse_expression("2**3")(0, 0), 8.0)
    npt.assert_allclose(parse_expression("pi*x")(1.0, 0.0), np.pi)


def test_broadcasting():
    expr = parse_expression("1")
    out = expr(np.zeros(3), np.zeros(3))
    assert out.shape == (3,)
    npt.assert_allclose(out, 1.0)
    npt.assert_allclose(parse_expression("x*y")(np.array([1.0, 2.0]), 3.0), [3.0, 6.0])


def test_derivatives():
    expr = parse_expression("x*exp(y) + cos(x)^2 - y^3/3")
    x, y = 0.7, -0.4
    dx = expr.diff('x')
    dy = expr.diff('y')
    npt.assert_allclose(dx(x, y), np.exp(y) - 2 * np.cos(x) * np.sin(x), rtol=1e-12)
    npt.assert_allclose(dy(x, y), x * np.exp(y) - y ** 2, rtol=1e-12)
    quotient = parse_expression("x/(1 + y^2)")
    npt.assert_allclose(quotient.diff('y')(2.0, 1.0), -2.0 * 2.0 * 1.0 / 4.0)


def test_dependencies():
    expr = parse_expression("1 + 0.5*cos(x)")
    assert expr.depends_on('x')
    assert not expr.depends_on('y')
    assert not expr.diff('x').depends_on('y')


@pytest.mark.parametrize('text', ["x +", "foo(x)", "x^y", "(x", "3 $ 4", "z"])
def test_rejects_malformed(text):
    with pytest.raises(ExpressionParseError):
        parse_expression(text)


def test_error_position():
    with pytest.raises(ExpressionParseError) as info:
        parse_expression("x + q")
    assert info.value.position == 4
    assert info.value.exit_code == 2


def test_empty_text():
    with pytest.raises(ExpressionParseError):
        parse_expression("   ")

"""The restricted component grammar: + - * / ^, sin cos exp log, pi, x, y.

Exponentiation is spelled with a caret and parses right-associatively;
everything lands in sympy so later code can differentiate exactly.
"""

import pytest
import sympy as sp

from lorentzlab.errors import ExpressionError
from lorentzlab.expressions import X_SYMBOL, Y_SYMBOL, as_expression, parse_expression


x, y = X_SYMBOL, Y_SYMBOL


def test_anchor_component():
    assert parse_expression("2*x*y^2") == 2 * x * y**2


def test_precedence_and_rational_literals():
    assert parse_expression("1/2") == sp.Rational(1, 2)
    assert parse_expression("1 + 2*3") == 7
    assert parse_expression("(1 + 2)*3") == 9
    # caret binds tighter than unary minus and is right-associative
    assert parse_expression("-x^2") == -(x**2)
    assert parse_expression("2^3^2") == 512


def test_functions_and_pi():
    e = parse_expression("sin(2*pi*x)*cos(2*pi*y)")
    assert e == sp.sin(2 * sp.pi * x) * sp.cos(2 * sp.pi * y)
    assert parse_expression("exp(log(x))").simplify() == x


def test_unary_minus_and_division():
    assert parse_expression("-x/2 + y") == -x / 2 + y
    assert parse_expression("x*(1 - x)") == x * (1 - x)


def test_float_and_scientific_literals():
    assert parse_expression("0.25*x") == sp.Float(0.25) * x
    assert float(parse_expression("1e-3")) == 1e-3


def test_error_positions():
    with pytest.raises(ExpressionError) as info:
        parse_expression("2*x*)y")
    assert info.value.line == 1 and info.value.col == 5

    with pytest.raises(ExpressionError) as info:
        parse_expression("x +\n* y")
    assert info.value.line == 2 and info.value.col == 1


def test_unknown_names_rejected():
    with pytest.raises(ExpressionError):
        parse_expression("tan(x)")
    with pytest.raises(ExpressionError):
        parse_expression("x + z")
    # python power spelling is outside the grammar
    with pytest.raises(ExpressionError):
        parse_expression("x**2")


def test_unbalanced_parens():
    with pytest.raises(ExpressionError):
        parse_expression("sin(x")
    with pytest.raises(ExpressionError):
        parse_expression("")


def test_as_expression_coercions():
    assert as_expression("x + y") == x + y
    assert as_expression(3) == sp.Integer(3)
    assert as_expression(x * y) == x * y

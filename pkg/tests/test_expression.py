from __future__ import annotations

import math

import pytest

from sldkit.model.dual import Dual
from sldkit.model.expression import (
    Binary,
    ExpressionSyntaxError,
    Neg,
    Number,
    Param,
    evaluate,
    evaluate_constant,
    free_parameters,
    parse_expression,
    pretty,
)


def test_precedence_and_right_associative_power() -> None:
    assert evaluate_constant(parse_expression("1 + 2 * 3")) == 7
    assert evaluate_constant(parse_expression("2 ^ 3 ^ 2")) == pytest.approx(512)
    assert evaluate_constant(parse_expression("-2 ^ 2")) == pytest.approx(-4)
    assert evaluate_constant(parse_expression("(1 + 2) * 3")) == 9


def test_unary_minus_binds_tighter_than_product() -> None:
    expr = parse_expression("-a * b")
    assert expr == Binary("*", Neg(Param("a")), Param("b"))


def test_constants_functions_and_imaginary_unit() -> None:
    assert evaluate_constant(parse_expression("cos(pi)")) == pytest.approx(-1.0)
    assert evaluate_constant(parse_expression("ln(e)")) == pytest.approx(1.0)
    assert evaluate_constant(parse_expression("exp(i * pi)")) == pytest.approx(-1.0 + 0j)
    assert evaluate_constant(parse_expression("sqrt(2) ^ 2")) == pytest.approx(2.0)


def test_scientific_notation() -> None:
    assert parse_expression("1.5e-3") == Number(1.5e-3)
    assert evaluate_constant(parse_expression("2E2 / 4")) == 50


def test_free_parameters_ignores_reserved_names() -> None:
    expr = parse_expression("theta * sin(phi) + pi - i * e")
    assert free_parameters(expr) == frozenset({"theta", "phi"})


def test_evaluate_carries_derivative() -> None:
    expr = parse_expression("sin(theta) ^ 2 + theta * exp(theta)")
    theta = 0.4
    out = evaluate(expr, {"theta": Dual.variable(theta, True)})
    assert complex(out.value).real == pytest.approx(math.sin(theta) ** 2 + theta * math.exp(theta))
    expected = 2 * math.sin(theta) * math.cos(theta) + (1 + theta) * math.exp(theta)
    assert complex(out.deriv).real == pytest.approx(expected)


def test_unseeded_parameter_has_no_derivative() -> None:
    env = {"a": Dual.variable(2.0, False), "b": Dual.variable(3.0, True)}
    out = evaluate(parse_expression("a * b"), env)
    assert complex(out.deriv) == 2.0


def test_pretty_round_trips() -> None:
    for text in ["1 + 2 * x", "-(a - b) / c ^ 2", "sqrt(x) * cos(2 * pi * y)", "i * theta"]:
        expr = parse_expression(text)
        assert parse_expression(pretty(expr)) == expr


@pytest.mark.parametrize(
    ("text", "offset"),
    [
        ("1 +", 3),
        ("sin 2", 4),
        ("(1 + 2", 6),
        ("1 $ 2", 2),
        ("1.2.3", 0),
        ("2 3", 2),
    ],
)
def test_syntax_errors_report_byte_offset(text: str, offset: int) -> None:
    with pytest.raises(ExpressionSyntaxError) as excinfo:
        parse_expression(text)
    assert excinfo.value.offset == offset
    assert f"at byte {offset}" in str(excinfo.value)
    assert excinfo.value.expected

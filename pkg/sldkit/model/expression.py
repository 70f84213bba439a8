"""Arithmetic expression language used for model entries.

Grammar (loosest to tightest): ``+ -`` < ``* /`` < unary ``-`` < ``^`` (right
associative). Calls take one argument: ``sin cos tan exp ln sqrt``. ``pi`` and
``e`` are constants, ``i`` is the imaginary unit; every other identifier is a
parameter reference.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Literal as TypingLiteral
from typing import cast

from sldkit.errors import InputError
from sldkit.model.dual import FUNCTIONS, Dual

BinaryOp = TypingLiteral["+", "-", "*", "/", "^"]

CONSTANTS: dict[str, float] = {"pi": math.pi, "e": math.e}
IMAGINARY_UNIT = "i"
RESERVED = frozenset({*CONSTANTS, IMAGINARY_UNIT, *FUNCTIONS})

_BINDING_POWER: dict[str, int] = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}
_UNARY_MINUS_BP = 30
_OPERAND_START = frozenset({"number", "identifier", "(", "-"})


class ExpressionSyntaxError(InputError):
    def __init__(self, message: str, offset: int, expected: frozenset[str]) -> None:
        listed = ", ".join(sorted(expected)) if expected else "nothing"
        super().__init__(f"{message} at byte {offset}; expected one of: {listed}")
        self.offset = offset
        self.expected = expected


@dataclass(frozen=True)
class Number:
    value: float


@dataclass(frozen=True)
class ImaginaryUnit:
    pass


@dataclass(frozen=True)
class Constant:
    name: str


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: Expression


@dataclass(frozen=True)
class Binary:
    op: BinaryOp
    left: Expression
    right: Expression


@dataclass(frozen=True)
class Call:
    func: str
    arg: Expression


Expression = Number | ImaginaryUnit | Constant | Param | Neg | Binary | Call


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    offset: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    raw = text.encode("utf-8")
    pos = 0
    while pos < len(raw):
        ch = chr(raw[pos])
        if not ch.isascii():
            raise ExpressionSyntaxError(
                f"unexpected byte 0x{raw[pos]:02x}", pos, _OPERAND_START
            )
        if ch.isspace():
            pos += 1
            continue
        if ch.isdigit() or (ch == "." and pos + 1 < len(raw) and chr(raw[pos + 1]).isdigit()):
            start = pos
            while pos < len(raw) and (chr(raw[pos]).isdigit() or raw[pos] == ord(".")):
                pos += 1
            if pos < len(raw) and raw[pos] in b"eE":
                look = pos + 1
                if look < len(raw) and raw[look] in b"+-":
                    look += 1
                if look < len(raw) and chr(raw[look]).isdigit():
                    pos = look
                    while pos < len(raw) and chr(raw[pos]).isdigit():
                        pos += 1
            literal = raw[start:pos].decode("ascii")
            if literal.count(".") > 1:
                raise ExpressionSyntaxError(
                    f"malformed number {literal!r}", start, frozenset({"number"})
                )
            tokens.append(_Token("number", literal, start))
            continue
        if ch.isalpha() or ch == "_":
            start = pos
            while pos < len(raw) and (chr(raw[pos]).isalnum() or raw[pos] == ord("_")):
                pos += 1
            tokens.append(_Token("identifier", raw[start:pos].decode("ascii"), start))
            continue
        if ch in "+-*/^()":
            tokens.append(_Token(ch, ch, pos))
            pos += 1
            continue
        raise ExpressionSyntaxError(f"unexpected character {ch!r}", pos, _OPERAND_START)
    tokens.append(_Token("end", "", len(raw)))
    return tokens


class _Parser:
    def __init__(self, text: str) -> None:
        self._tokens = _tokenize(text)
        self._index = 0

    def _peek(self) -> _Token:
        return self._tokens[self._index]

    def _advance(self) -> _Token:
        token = self._tokens[self._index]
        self._index += 1
        return token

    def _expect(self, kind: str) -> _Token:
        token = self._peek()
        if token.kind != kind:
            raise ExpressionSyntaxError(
                f"unexpected {_describe(token)}", token.offset, frozenset({kind})
            )
        return self._advance()

    def parse(self) -> Expression:
        expr = self._expression(0)
        token = self._peek()
        if token.kind != "end":
            raise ExpressionSyntaxError(
                f"unexpected {_describe(token)}",
                token.offset,
                frozenset({*_BINDING_POWER, "end"}),
            )
        return expr

    def _expression(self, rbp: int) -> Expression:
        left = self._prefix(self._advance())
        while True:
            token = self._peek()
            lbp = _BINDING_POWER.get(token.kind, 0)
            if lbp <= rbp:
                return left
            self._advance()
            # ^ is right-associative: parse its right operand one notch looser.
            right_bp = lbp - 1 if token.kind == "^" else lbp
            left = Binary(cast(BinaryOp, token.kind), left, self._expression(right_bp))

    def _prefix(self, token: _Token) -> Expression:
        if token.kind == "number":
            return Number(float(token.text))
        if token.kind == "-":
            return Neg(self._expression(_UNARY_MINUS_BP))
        if token.kind == "(":
            inner = self._expression(0)
            self._expect(")")
            return inner
        if token.kind == "identifier":
            name = token.text
            if name in FUNCTIONS:
                self._expect("(")
                arg = self._expression(0)
                self._expect(")")
                return Call(name, arg)
            if name in CONSTANTS:
                return Constant(name)
            if name == IMAGINARY_UNIT:
                return ImaginaryUnit()
            return Param(name)
        raise ExpressionSyntaxError(
            f"unexpected {_describe(token)}", token.offset, _OPERAND_START
        )


def _describe(token: _Token) -> str:
    if token.kind == "end":
        return "end of input"
    return f"{token.kind} {token.text!r}" if token.kind in {"number", "identifier"} else repr(
        token.text
    )


def parse_expression(text: str) -> Expression:
    return _Parser(text).parse()


def pretty(expr: Expression) -> str:
    """Fully parenthesized rendering; ``parse_expression(pretty(x)) == x``."""
    match expr:
        case Number(value):
            return repr(value)
        case ImaginaryUnit():
            return IMAGINARY_UNIT
        case Constant(name) | Param(name):
            return name
        case Neg(operand):
            return f"(-{pretty(operand)})"
        case Binary(op, left, right):
            return f"({pretty(left)} {op} {pretty(right)})"
        case Call(func, arg):
            return f"{func}({pretty(arg)})"


def free_parameters(expr: Expression) -> frozenset[str]:
    match expr:
        case Param(name):
            return frozenset({name})
        case Neg(operand):
            return free_parameters(operand)
        case Binary(_, left, right):
            return free_parameters(left) | free_parameters(right)
        case Call(_, arg):
            return free_parameters(arg)
        case _:
            return frozenset()


def evaluate(expr: Expression, env: Mapping[str, Dual]) -> Dual:
    match expr:
        case Number(value):
            return Dual.constant(value)
        case ImaginaryUnit():
            return Dual.constant(1j)
        case Constant(name):
            return Dual.constant(CONSTANTS[name])
        case Param(name):
            return env[name]
        case Neg(operand):
            return -evaluate(operand, env)
        case Binary(op, left, right):
            a = evaluate(left, env)
            b = evaluate(right, env)
            if op == "+":
                return a + b
            if op == "-":
                return a - b
            if op == "*":
                return a * b
            if op == "/":
                return a / b
            return a**b
        case Call(func, arg):
            return FUNCTIONS[func](evaluate(arg, env))


def evaluate_constant(expr: Expression) -> complex:
    return complex(evaluate(expr, {}).value)

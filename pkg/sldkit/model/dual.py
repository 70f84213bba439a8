"""Forward-mode dual numbers over complex scalars and numpy arrays.

A ``Dual`` carries a value and its derivative with respect to one real
parameter. Values may be complex scalars or arrays; arrays follow numpy
broadcasting, and ``@`` applies the product rule to matrix products.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np

Number = complex | float | int


@dataclass(frozen=True, eq=False)
class Dual:
    value: Any
    deriv: Any

    # ndarray (op) Dual must dispatch to the reflected Dual method, not broadcast over it.
    __array_ufunc__ = None

    @staticmethod
    def constant(value: Any) -> Dual:
        arr = np.asarray(value, dtype=np.complex128)
        if arr.ndim == 0:
            return Dual(np.complex128(arr), np.complex128(0))
        return Dual(arr, np.zeros_like(arr))

    @staticmethod
    def variable(value: Number, seeded: bool) -> Dual:
        return Dual(np.complex128(value), np.complex128(1.0 if seeded else 0.0))

    @staticmethod
    def stack(items: Sequence[Dual]) -> Dual:
        return Dual(
            np.array([item.value for item in items], dtype=np.complex128),
            np.array([item.deriv for item in items], dtype=np.complex128),
        )

    def __add__(self, other: object) -> Dual:
        o = lift(other)
        return Dual(self.value + o.value, self.deriv + o.deriv)

    __radd__ = __add__

    def __sub__(self, other: object) -> Dual:
        o = lift(other)
        return Dual(self.value - o.value, self.deriv - o.deriv)

    def __rsub__(self, other: object) -> Dual:
        return lift(other) - self

    def __neg__(self) -> Dual:
        return Dual(-self.value, -self.deriv)

    def __mul__(self, other: object) -> Dual:
        o = lift(other)
        return Dual(self.value * o.value, self.value * o.deriv + self.deriv * o.value)

    __rmul__ = __mul__

    def __truediv__(self, other: object) -> Dual:
        o = lift(other)
        quotient = self.value / o.value
        return Dual(quotient, (self.deriv - quotient * o.deriv) / o.value)

    def __rtruediv__(self, other: object) -> Dual:
        return lift(other) / self

    def __matmul__(self, other: object) -> Dual:
        o = lift(other)
        return Dual(self.value @ o.value, self.value @ o.deriv + self.deriv @ o.value)

    def __rmatmul__(self, other: object) -> Dual:
        return lift(other) @ self

    def __pow__(self, other: object) -> Dual:
        o = lift(other)
        if np.all(o.deriv == 0):
            exponent = o.value
            powered = self.value**exponent
            if np.all(self.deriv == 0):
                return Dual(powered, np.zeros_like(powered))
            return Dual(powered, exponent * self.value ** (exponent - 1) * self.deriv)
        return exp(o * log(self))

    def __rpow__(self, other: object) -> Dual:
        return lift(other) ** self

    def conj(self) -> Dual:
        # Derivatives are taken along a real parameter, so conjugation commutes with d/dtheta.
        return Dual(np.conj(self.value), np.conj(self.deriv))

    def dagger(self) -> Dual:
        return Dual(np.conj(self.value).T, np.conj(self.deriv).T)

    def sum(self) -> Dual:
        return Dual(np.sum(self.value), np.sum(self.deriv))

    def trace(self) -> Dual:
        return Dual(np.trace(self.value), np.trace(self.deriv))

    def outer(self, other: Dual) -> Dual:
        return Dual(
            np.outer(self.value, other.value),
            np.outer(self.deriv, other.value) + np.outer(self.value, other.deriv),
        )

    def diag(self) -> Dual:
        return Dual(np.diag(self.value), np.diag(self.deriv))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.value)) and np.all(np.isfinite(self.deriv)))


def lift(x: object) -> Dual:
    if isinstance(x, Dual):
        return x
    return Dual.constant(x)


def _unary(
    fn: Callable[[Any], Any], dfn: Callable[[Any], Any]
) -> Callable[[Dual], Dual]:
    def apply(x: Dual) -> Dual:
        return Dual(fn(x.value), dfn(x.value) * x.deriv)

    return apply


sin = _unary(np.sin, np.cos)
cos = _unary(np.cos, lambda v: -np.sin(v))
tan = _unary(np.tan, lambda v: 1.0 / np.cos(v) ** 2)
exp = _unary(np.exp, np.exp)
log = _unary(np.log, lambda v: 1.0 / v)
sqrt = _unary(np.sqrt, lambda v: 0.5 / np.sqrt(v))

FUNCTIONS: dict[str, Callable[[Dual], Dual]] = {
    "sin": sin,
    "cos": cos,
    "tan": tan,
    "exp": exp,
    "ln": log,
    "sqrt": sqrt,
}

"""Truncated power series with exact or float coefficients."""

from __future__ import annotations

from fractions import Fraction
from math import factorial
from typing import Sequence


class TruncatedSeries:
    """Power series c_0 + c_1 z + ... + c_K z^K known modulo z^(K+1).

    Coefficients are Fractions (exact mode) or floats; arithmetic between
    two series keeps the smaller order.
    """

    __slots__ = ("coefficients",)

    def __init__(self, coefficients: Sequence, order: int | None = None):
        coeffs = list(coefficients)
        if order is not None:
            if order < 0:
                raise ValueError("order must be nonnegative")
            coeffs = (coeffs + [0] * (order + 1))[: order + 1]
        if not coeffs:
            raise ValueError("a series needs at least one coefficient")
        self.coefficients = [c if isinstance(c, (Fraction, float)) else Fraction(c) for c in coeffs]

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    def __getitem__(self, n: int):
        return self.coefficients[n]

    def __len__(self) -> int:
        return len(self.coefficients)

    def __repr__(self) -> str:
        return f"TruncatedSeries({self.coefficients!r})"

    def __eq__(self, other) -> bool:
        return isinstance(other, TruncatedSeries) and self.coefficients == other.coefficients

    def _coerce(self, other) -> "TruncatedSeries":
        if isinstance(other, TruncatedSeries):
            return other
        return TruncatedSeries([other], order=self.order)

    def __add__(self, other) -> "TruncatedSeries":
        other = self._coerce(other)
        k = min(self.order, other.order)
        return TruncatedSeries([self[i] + other[i] for i in range(k + 1)])

    __radd__ = __add__

    def __neg__(self) -> "TruncatedSeries":
        return TruncatedSeries([-c for c in self.coefficients])

    def __sub__(self, other) -> "TruncatedSeries":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "TruncatedSeries":
        return self._coerce(other) - self

    def __mul__(self, other) -> "TruncatedSeries":
        if not isinstance(other, TruncatedSeries):
            return TruncatedSeries([c * other for c in self.coefficients])
        k = min(self.order, other.order)
        out = []
        for n in range(k + 1):
            acc = self[0] * other[n]
            for i in range(1, n + 1):
                acc += self[i] * other[n - i]
            out.append(acc)
        return TruncatedSeries(out)

    __rmul__ = __mul__

    def reciprocal(self) -> "TruncatedSeries":
        if self[0] == 0:
            raise ZeroDivisionError("series with zero constant term has no reciprocal")
        inv = [1 / self[0]]
        for n in range(1, self.order + 1):
            acc = self[1] * inv[n - 1]
            for i in range(2, n + 1):
                acc += self[i] * inv[n - i]
            inv.append(-acc * inv[0])
        return TruncatedSeries(inv)

    def __truediv__(self, other) -> "TruncatedSeries":
        if not isinstance(other, TruncatedSeries):
            return TruncatedSeries([c / other for c in self.coefficients])
        return self * other.reciprocal()

    def __rtruediv__(self, other) -> "TruncatedSeries":
        return self._coerce(other) * self.reciprocal()

    def compose_linear(self, c) -> "TruncatedSeries":
        """The series of f(c z)."""
        out, power = [], 1
        for coeff in self.coefficients:
            out.append(coeff * power)
            power = power * c
        return TruncatedSeries(out)

    def shift_down(self) -> "TruncatedSeries":
        """(f(z) - f(0)) / z, losing one order."""
        if self.order == 0:
            raise ValueError("cannot shift an order-0 series")
        return TruncatedSeries(self.coefficients[1:])

    def times_z(self) -> "TruncatedSeries":
        """z f(z) at the same order (the top coefficient is dropped)."""
        return TruncatedSeries([self[0] * 0] + self.coefficients[:-1])

    @classmethod
    def exponential(cls, c, order: int) -> "TruncatedSeries":
        """Series of exp(c z)."""
        out, term = [], c ** 0
        for n in range(order + 1):
            out.append(term / factorial(n) if isinstance(term, float) else Fraction(term) / factorial(n))
            term = term * c
        return cls(out)

    @classmethod
    def geometric(cls, order: int, ratio=1) -> "TruncatedSeries":
        """Series of 1 / (1 - ratio z)."""
        return cls([Fraction(ratio) ** n if not isinstance(ratio, float) else ratio ** n
                    for n in range(order + 1)])

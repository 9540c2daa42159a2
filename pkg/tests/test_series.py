from fractions import Fraction
from math import factorial

import pytest
from hypothesis import given, strategies as st

from ipslab.series import TruncatedSeries

small = st.fractions(min_value=-3, max_value=3, max_denominator=12)


def unit_series(order):
    return st.lists(small, min_size=order, max_size=order).map(
        lambda tail: TruncatedSeries([Fraction(1)] + tail))


@given(unit_series(8), unit_series(8))
def test_multiply_then_divide_roundtrip(a, b):
    assert (a * b) / b == a


@given(unit_series(6))
def test_reciprocal_is_inverse(a):
    assert a * a.reciprocal() == TruncatedSeries([1], order=6)


@given(unit_series(6), small)
def test_compose_linear_is_multiplicative(a, c):
    b = TruncatedSeries.geometric(6)
    assert (a * b).compose_linear(c) == a.compose_linear(c) * b.compose_linear(c)


def test_orders_take_minimum():
    a = TruncatedSeries([1, 2, 3])
    b = TruncatedSeries([1, 1])
    assert (a + b).order == 1 and (a * b).order == 1


def test_exponential_and_geometric():
    e = TruncatedSeries.exponential(Fraction(2), 5)
    assert e.coefficients == [Fraction(2) ** n / factorial(n) for n in range(6)]
    assert e * TruncatedSeries.exponential(Fraction(-2), 5) == TruncatedSeries([1], order=5)
    g = TruncatedSeries.geometric(4, Fraction(1, 3))
    assert g * TruncatedSeries([1, Fraction(-1, 3)], order=4) == TruncatedSeries([1], order=4)


def test_float_exponential():
    e = TruncatedSeries.exponential(0.5, 3)
    assert e.coefficients == pytest.approx([1, 0.5, 0.125, 0.125 / 6])


def test_shift_and_times_z():
    a = TruncatedSeries([0, 1, 2, 3])
    assert a.shift_down() == TruncatedSeries([1, 2, 3])
    assert a.times_z() == TruncatedSeries([0, 0, 1, 2])


def test_errors():
    with pytest.raises(ZeroDivisionError):
        TruncatedSeries([0, 1]).reciprocal()
    with pytest.raises(ValueError):
        TruncatedSeries([])
    with pytest.raises(ValueError):
        TruncatedSeries([1]).shift_down()

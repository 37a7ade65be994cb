from fractions import Fraction

import pytest

from gnorm.helpers import (float_down, float_up, fraction_to_str, is_psd_exact,
                           rationalize, root_ceil, root_floor, sqrt_down,
                           sqrt_up, str_to_fraction)


def test_rounds_floats_in_the_right_direction():
    third = Fraction(1, 3)
    assert Fraction(float_down(third)) <= third <= Fraction(float_up(third))
    assert float_down(Fraction(1, 2)) == float_up(Fraction(1, 2)) == 0.5


def test_has_correct_root_floor_and_ceil():
    assert root_floor(Fraction(16), 2) == 4
    assert root_ceil(Fraction(16), 2) == 4
    low, high = root_floor(Fraction(2), 2, 10), root_ceil(Fraction(2), 2, 10)
    assert low**2 < 2 < high**2
    assert high - low == Fraction(1, 10**10)


def test_has_correct_square_roots():
    assert sqrt_up(Fraction(16)) == 4.0
    assert sqrt_down(Fraction(9, 4)) == 1.5
    assert sqrt_down(Fraction(2)) <= 2**0.5 <= sqrt_up(Fraction(2))


def test_raises_exception_for_negative_root():
    with pytest.raises(ValueError):
        root_floor(Fraction(-1), 2)


def test_raises_exception_for_invalid_root_order():
    with pytest.raises(ValueError):
        root_floor(Fraction(2), 0)


def test_rationalizes_with_bounded_denominator():
    assert rationalize(0.5) == Fraction(1, 2)
    assert rationalize(1 / 3, 100) == Fraction(1, 3)
    assert rationalize(3.14159265, 10).denominator <= 10


def test_raises_exception_for_non_finite_rationalization():
    with pytest.raises(ValueError):
        rationalize(float("nan"))


def test_accepts_psd_matrices():
    assert is_psd_exact([[Fraction(2), Fraction(-1)], [Fraction(-1), Fraction(2)]])
    assert is_psd_exact([[Fraction(1), Fraction(1)], [Fraction(1), Fraction(1)]])
    assert is_psd_exact([[Fraction(0)]])
    assert is_psd_exact([])


def test_rejects_indefinite_matrices():
    assert not is_psd_exact([[Fraction(1), Fraction(2)], [Fraction(2), Fraction(1)]])
    assert not is_psd_exact([[Fraction(0), Fraction(1)], [Fraction(1), Fraction(0)]])
    assert not is_psd_exact([[Fraction(-1, 10**9)]])


def test_raises_exception_for_asymmetric_matrix():
    with pytest.raises(ValueError):
        is_psd_exact([[Fraction(1), Fraction(0)], [Fraction(1), Fraction(1)]])


def test_converts_fractions_to_strings_and_back():
    assert fraction_to_str(Fraction(3)) == "3"
    assert fraction_to_str(Fraction(-3, 4)) == "-3/4"
    assert str_to_fraction("-3/4") == Fraction(-3, 4)


def test_raises_exception_for_invalid_fraction_string():
    with pytest.raises(ValueError):
        str_to_fraction("1/0")
    with pytest.raises(ValueError):
        str_to_fraction("one")

import math
from fractions import Fraction
from typing import List, Sequence

from sympy import integer_nthroot

from gnorm import config


def float_down(value: Fraction) -> float:
    """Largest float that is not above the exact value."""
    result = float(value)
    if Fraction(result) > value:
        result = math.nextafter(result, -math.inf)
    return result


def float_up(value: Fraction) -> float:
    """Smallest float that is not below the exact value."""
    result = float(value)
    if Fraction(result) < value:
        result = math.nextafter(result, math.inf)
    return result


def root_floor(value: Fraction, k: int, digits: int = config.DEFAULT_DIGITS) -> Fraction:
    """Decimal truncation of the k-th root of a nonnegative rational, never above the true root.

    Args:
        value: A nonnegative exact rational.
        k: The root order, at least 1.
        digits: Number of decimal digits kept.

    Returns:
        A rational r = m / 10^digits with r <= value^(1/k) < r + 10^-digits.
    """
    if value < 0:
        raise ValueError("Cannot take the root of a negative value: {}".format(value))
    if k < 1:
        raise ValueError("Invalid root order: {}".format(k))
    scale = 10**digits
    scaled = (value.numerator * scale**k) // value.denominator
    root, _ = integer_nthroot(scaled, k)
    return Fraction(int(root), scale)


def root_ceil(value: Fraction, k: int, digits: int = config.DEFAULT_DIGITS) -> Fraction:
    """Decimal rounding of the k-th root of a nonnegative rational, never below the true root."""
    lower = root_floor(value, k, digits)
    if lower**k == value:
        return lower
    return lower + Fraction(1, 10**digits)


def sqrt_down(value: Fraction, digits: int = config.DEFAULT_DIGITS) -> float:
    return float_down(root_floor(value, 2, digits))


def sqrt_up(value: Fraction, digits: int = config.DEFAULT_DIGITS) -> float:
    return float_up(root_ceil(value, 2, digits))


def rationalize(value: float, cap: int = config.DENOMINATOR_CAP) -> Fraction:
    """Best rational approximation with a bounded denominator (continued fractions)."""
    if not math.isfinite(value):
        raise ValueError("Cannot rationalize non-finite value: {}".format(value))
    return Fraction(value).limit_denominator(cap)


def is_psd_exact(matrix: Sequence[Sequence[Fraction]]) -> bool:
    """Decides positive semidefiniteness of a symmetric rational matrix exactly.

    Symmetric Gaussian elimination with diagonal pivoting: a zero pivot requires a zero
    remaining row, a negative pivot rejects.

    Raises:
        ValueError: If the matrix is not square and symmetric.
    """
    n = len(matrix)
    a: List[List[Fraction]] = [[Fraction(entry) for entry in row] for row in matrix]
    for i, row in enumerate(a):
        if len(row) != n:
            raise ValueError("Matrix is not square")
        for j in range(i):
            if row[j] != a[j][i]:
                raise ValueError("Matrix is not symmetric at ({}, {})".format(i, j))
    remaining = list(range(n))
    while remaining:
        pivot = max(remaining, key=lambda i: a[i][i])
        d = a[pivot][pivot]
        if d < 0:
            return False
        if d == 0:
            return all(a[i][j] == 0 for i in remaining for j in remaining)
        remaining.remove(pivot)
        for i in remaining:
            if a[i][pivot] == 0:
                continue
            factor = a[i][pivot] / d
            row_i = a[i]
            row_p = a[pivot]
            for j in remaining:
                if row_p[j] != 0:
                    row_i[j] -= factor * row_p[j]
    return True


def fraction_to_str(value: Fraction) -> str:
    return (
        str(value.numerator)
        if value.denominator == 1
        else "{}/{}".format(value.numerator, value.denominator)
    )


def str_to_fraction(value: str) -> Fraction:
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError):
        raise ValueError("Invalid rational value: '{}'".format(value))

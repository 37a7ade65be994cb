import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import sparse

from gnorm import config
from gnorm.errors import ResourceLimitError, StructureClassError
from gnorm.group_ring import RingElement, multiply, star
from gnorm.helpers import float_down, rationalize, root_floor, sqrt_down
from gnorm.presentation import (NormalForm, StructureKind, ball, invert_form,
                                multiply_forms, normal_form)

logger = logging.getLogger(__name__)

DENSE_EIGENSOLVER_CAP = 1_500


def _require_normal_form(a: RingElement) -> None:
    if a.presentation.kind == StructureKind.GENERIC:
        raise StructureClassError(
            "Reduced norm lower bounds need a presentation with a normal form"
        )


# --------------------------------------------------------------------#
#                               Moments                              #
# --------------------------------------------------------------------#


@dataclass(frozen=True)
class MomentEntry:
    n: int
    moment: Fraction
    bound: Fraction

    @property
    def value(self) -> float:
        """The 2n-th root of the moment, rounded down to a float."""
        return float_down(self.bound)


@dataclass
class MomentSequence:
    element: RingElement
    entries: List[MomentEntry] = field(default_factory=list)

    @property
    def best(self) -> Optional[MomentEntry]:
        return self.entries[-1] if self.entries else None

    def is_monotone(self) -> bool:
        return all(x.bound <= y.bound for x, y in zip(self.entries, self.entries[1:]))


class MomentLadder:
    """Exact trace moments of a*a, extended on demand.

    Keeps the powers P_m = (a*a)^m and uses tau(P_2m) = sum P_m[g]^2 and
    tau(P_2m+1) = sum P_m[g] P_m+1[g], which hold because every P_m is self-adjoint.
    """

    def __init__(
        self,
        a: RingElement,
        digits: int = config.DEFAULT_DIGITS,
        support_cap: int = config.SUPPORT_CAP,
    ) -> None:
        _require_normal_form(a)
        self.element = a
        self.digits = digits
        self.support_cap = support_cap
        self._square = multiply(star(a), a)
        self._powers: List[RingElement] = [
            RingElement(a.presentation, {normal_form(a.presentation.identity(), a.presentation): 1}),
            self._square,
        ]
        self.sequence = MomentSequence(a)

    def _power(self, m: int) -> RingElement:
        while len(self._powers) <= m:
            power = multiply(self._powers[-1], self._square)
            if len(power.coefficients) > self.support_cap:
                raise ResourceLimitError(
                    "support", len(power.coefficients), self.support_cap, self.sequence
                )
            self._powers.append(power)
        return self._powers[m]

    def moment(self, n: int) -> Fraction:
        """tau((a*a)^n), exactly."""
        if n < 0:
            raise ValueError("Invalid moment order: {}".format(n))
        m = n // 2
        left = self._power(m).coefficients
        if n % 2 == 0:
            return sum((value * value for value in left.values()), Fraction(0))
        right = self._power(m + 1).coefficients
        return sum(
            (value * right.get(form, Fraction(0)) for form, value in left.items()),
            Fraction(0),
        )

    def extend_to(self, n_max: int) -> MomentSequence:
        """Appends the entries up to n_max to the sequence.

        Raises:
            ResourceLimitError: If a power exceeds the support cap; `partial` holds the completed entries.
        """
        start = len(self.sequence.entries) + 1
        for n in range(start, n_max + 1):
            moment = self.moment(n)
            entry = MomentEntry(n, moment, root_floor(moment, 2 * n, self.digits))
            self.sequence.entries.append(entry)
            logger.debug("Moment %d: bound %s", n, entry.value)
        return self.sequence


def moment_lower_sequence(
    a: RingElement, n_max: int, digits: int = config.DEFAULT_DIGITS
) -> MomentSequence:
    """Certified lower bounds tau((a*a)^n)^(1/2n) on the reduced norm for n = 1..n_max.

    Raises:
        StructureClassError: For generic presentations.
        ResourceLimitError: If a power of a*a exceeds the support cap.
    """
    if n_max < 1:
        raise ValueError("Invalid moment order: {}".format(n_max))
    return MomentLadder(a, digits).extend_to(n_max)


# --------------------------------------------------------------------#
#                             Compression                            #
# --------------------------------------------------------------------#


@dataclass(frozen=True)
class CompressionBound:
    """Lower bound from the compression of a*a to the span of a ball of group elements.

    `rayleigh` is the exact Rayleigh quotient of `vector` (indexed like `forms`), and
    `value` its square root rounded down.
    """

    radius: int
    forms: Tuple[NormalForm, ...]
    vector: Tuple[Fraction, ...]
    rayleigh: Fraction
    estimate: float
    digits: int = config.DEFAULT_DIGITS

    @property
    def dimension(self) -> int:
        return len(self.forms)

    @property
    def value(self) -> float:
        return sqrt_down(self.rayleigh, self.digits) if self.rayleigh > 0 else 0.0


def ball_forms(a: RingElement, radius: int) -> List[NormalForm]:
    """Distinct group elements of word length at most radius, in order of their first shortlex word."""
    p = a.presentation
    seen: Dict[NormalForm, None] = {}
    for u in ball(p, radius):
        seen.setdefault(normal_form(u, p), None)
    return list(seen)


def compression_rows(
    square: RingElement, forms: List[NormalForm]
) -> List[Dict[int, Fraction]]:
    """Sparse exact rows of M[g, h] = (a*a) coefficient at g h^-1, restricted to the given elements."""
    index = {form: i for i, form in enumerate(forms)}
    rows: List[Dict[int, Fraction]] = []
    terms = list(square.coefficients.items())
    for g in forms:
        row: Dict[int, Fraction] = {}
        for k, value in terms:
            j = index.get(multiply_forms(invert_form(k), g))
            if j is not None:
                row[j] = row.get(j, Fraction(0)) + value
        rows.append(row)
    return rows


def _top_eigenvector(matrix: sparse.csr_matrix, iterations: int) -> Tuple[np.ndarray, float]:
    n = matrix.shape[0]
    if n <= DENSE_EIGENSOLVER_CAP:
        values, vectors = np.linalg.eigh(matrix.toarray())
        v = vectors[:, -1]
    else:
        v = np.ones(n)
    v = v / np.linalg.norm(v)
    estimate = float(v @ (matrix @ v))
    for _ in range(iterations):
        w = matrix @ v
        norm = np.linalg.norm(w)
        if norm == 0:
            break
        v = w / norm
        previous, estimate = estimate, float(v @ (matrix @ v))
        if abs(estimate - previous) <= config.RAYLEIGH_TOLERANCE * max(abs(estimate), 1.0):
            break
    return v, estimate


def exact_rayleigh(rows: List[Dict[int, Fraction]], vector: List[Fraction]) -> Fraction:
    numerator = sum(
        (
            vector[i] * sum((value * vector[j] for j, value in row.items()), Fraction(0))
            for i, row in enumerate(rows)
            if vector[i] != 0
        ),
        Fraction(0),
    )
    denominator = sum((x * x for x in vector), Fraction(0))
    return numerator / denominator


def compression_lower_bound(
    a: RingElement,
    radius: int,
    iterations: int = config.COMPRESSION_ITERATIONS,
    digits: int = config.DEFAULT_DIGITS,
) -> CompressionBound:
    """Certified lower bound on the reduced norm of a from a finite-rank compression.

    The top eigenvector of the compression matrix is approximated (eigh start, then power
    iteration), rationalized and its Rayleigh quotient recomputed exactly.

    Args:
        a: An element of a group ring with normal forms.
        radius: Radius of the ball spanning the test space.
        iterations: Maximum number of power iterations.

    Raises:
        ValueError: If the radius is negative.
        StructureClassError: For generic presentations.
        ResourceLimitError: If the ball exceeds the configured cap.
    """
    _require_normal_form(a)
    if radius < 0:
        raise ValueError("Invalid compression radius: {}".format(radius))
    square = multiply(star(a), a)
    forms = ball_forms(a, radius)
    rows = compression_rows(square, forms)
    n = len(forms)
    data, row_index, column_index = [], [], []
    for i, row in enumerate(rows):
        for j, value in row.items():
            row_index.append(i)
            column_index.append(j)
            data.append(float(value))
    matrix = sparse.csr_matrix((data, (row_index, column_index)), shape=(n, n))
    v, estimate = _top_eigenvector(matrix, iterations)
    scale = np.max(np.abs(v))
    vector = [rationalize(float(x / scale)) for x in v] if scale > 0 else []
    if not any(vector):
        vector = [Fraction(1)] + [Fraction(0)] * (n - 1)
    rayleigh = exact_rayleigh(rows, vector)
    bound = CompressionBound(radius, tuple(forms), tuple(vector), rayleigh, estimate, digits)
    logger.debug(
        "Compression radius %d (dimension %d): bound %s", radius, n, bound.value
    )
    return bound

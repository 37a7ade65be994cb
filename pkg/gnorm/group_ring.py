import re
from dataclasses import dataclass
from fractions import Fraction
from types import MappingProxyType
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from gnorm import config
from gnorm.errors import (ElementSyntaxError, InputError, ResourceLimitError,
                          StructureClassError)
from gnorm.helpers import fraction_to_str
from gnorm.presentation import (NormalForm, Presentation, StructureKind, Word,
                                format_word, identity_form, invert_form, lift,
                                multiply_forms, normal_form, reduce_word)

TOKEN_REGEX = re.compile(
    r"\s*(?:(?P<number>[0-9]+(?:/[0-9]+)?)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*^()]))"
)


def form_of(u: Word, p: Presentation) -> NormalForm:
    """Key of a group element in ring elements over p (free reduction only for generic presentations)."""
    if p.kind == StructureKind.GENERIC:
        return NormalForm(StructureKind.GENERIC, u)
    return normal_form(u, p)


class RingElement:
    """Sparse element of the rational group ring of a presented group, keyed by normal forms."""

    _presentation: Presentation
    _coefficients: Dict[NormalForm, Fraction]

    def __init__(
        self,
        presentation: Presentation,
        coefficients: Optional[Mapping[NormalForm, Fraction | int]] = None,
    ) -> None:
        """Creates a ring element.

        Args:
            presentation: The presented group.
            coefficients: Map from normal forms of the presentation's class to rational coefficients. Zero coefficients are dropped.

        Raises:
            StructureClassError: If a key is not a normal form of the presentation's class.
        """
        self._presentation = presentation
        self._coefficients = {}
        for form, value in (coefficients or {}).items():
            if form.kind != presentation.kind:
                raise StructureClassError(
                    "Normal form of class '{}' in a ring element of class '{}'".format(
                        form.kind.value, presentation.kind.value
                    )
                )
            value = Fraction(value)
            if value != 0:
                self._coefficients[form] = value

    # --------------------------------------------------------------------#
    #                             Properties                             #
    # --------------------------------------------------------------------#

    @property
    def presentation(self) -> Presentation:
        return self._presentation

    @property
    def coefficients(self) -> Mapping[NormalForm, Fraction]:
        return MappingProxyType(self._coefficients)

    @property
    def is_zero(self) -> bool:
        return not self._coefficients

    @property
    def is_integral(self) -> bool:
        return all(value.denominator == 1 for value in self._coefficients.values())

    # --------------------------------------------------------------------#
    #                           Public methods                           #
    # --------------------------------------------------------------------#

    def terms(self) -> List[Tuple[NormalForm, Fraction]]:
        """Terms in shortlex order of their canonical words."""
        return sorted(
            self._coefficients.items(),
            key=lambda item: lift(item[0], self._presentation).sort_key,
        )

    def coefficient(self, form: NormalForm) -> Fraction:
        return self._coefficients.get(form, Fraction(0))

    def support(self) -> List[Word]:
        return [lift(form, self._presentation) for form, _ in self.terms()]

    def __add__(self, other: "RingElement") -> "RingElement":
        return add(self, other)

    def __sub__(self, other: "RingElement") -> "RingElement":
        return subtract(self, other)

    def __neg__(self) -> "RingElement":
        return scale(self, -1)

    def __mul__(self, other: "RingElement | Fraction | int") -> "RingElement":
        if isinstance(other, RingElement):
            return multiply(self, other)
        return scale(self, other)

    def __rmul__(self, other: Fraction | int) -> "RingElement":
        return scale(self, other)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, RingElement)
            and self._presentation == other._presentation
            and self._coefficients == other._coefficients
        )

    def __hash__(self) -> int:
        return hash((self._presentation, frozenset(self._coefficients.items())))

    def __str__(self) -> str:
        return format_element(self)

    def __repr__(self) -> str:
        return "RingElement({!r})".format(format_element(self))


@dataclass(frozen=True)
class MatrixAssignment:
    """One complex square matrix per generator, all of the same dimension."""

    matrices: Tuple[np.ndarray, ...]

    def __post_init__(self):
        if not self.matrices:
            raise ValueError("A matrix assignment needs at least one matrix")
        k = self.matrices[0].shape[0]
        for matrix in self.matrices:
            if matrix.ndim != 2 or matrix.shape != (k, k):
                raise ValueError(
                    "All assigned matrices must be square of dimension {}, got {}".format(
                        k, matrix.shape
                    )
                )

    @property
    def dimension(self) -> int:
        return self.matrices[0].shape[0]


# --------------------------------------------------------------------#
#                            Constructors                            #
# --------------------------------------------------------------------#


def constant(p: Presentation, value: Fraction | int) -> RingElement:
    return RingElement(p, {identity_form(p): Fraction(value)})


def from_word(p: Presentation, u: Word, value: Fraction | int = 1) -> RingElement:
    return RingElement(p, {form_of(u, p): Fraction(value)})


class _ElementParser:
    def __init__(self, text: str, p: Presentation) -> None:
        self.p = p
        self.names = {g.name: g.index for g in p.alphabet}
        self.tokens: List[Tuple[str, str, int]] = []
        position = 0
        text = text.rstrip()
        while position < len(text):
            match = TOKEN_REGEX.match(text, position)
            if match is None or match.end() == position:
                raise ElementSyntaxError(
                    "Unexpected character '{}'".format(text[position]), position + 1
                )
            kind = match.lastgroup
            assert kind is not None
            self.tokens.append((kind, match.group(kind), match.start(kind) + 1))
            position = match.end()
        self.index = 0
        self.length = len(text)

    def peek(self) -> Optional[Tuple[str, str, int]]:
        return self.tokens[self.index] if self.index < len(self.tokens) else None

    def take(self) -> Tuple[str, str, int]:
        token = self.peek()
        if token is None:
            raise ElementSyntaxError("Unexpected end of input", self.length + 1)
        self.index += 1
        return token

    def expect(self, value: str) -> None:
        kind, text, column = self.take()
        if kind != "op" or text != value:
            raise ElementSyntaxError("Expected '{}'".format(value), column)

    def integer(self) -> int:
        sign = 1
        token = self.take()
        if token[0] == "op" and token[1] in "+-":
            sign = -1 if token[1] == "-" else 1
            token = self.take()
        if token[0] != "number" or "/" in token[1]:
            raise ElementSyntaxError("Expected an integer exponent", token[2])
        return sign * int(token[1])

    def exponent(self) -> int:
        """An optional '^' integer, 1 if absent."""
        token = self.peek()
        if token is None or token[0] != "op" or token[1] != "^":
            return 1
        self.take()
        power = self.integer()
        if abs(power) > config.SUPPORT_CAP:
            raise ResourceLimitError("power", abs(power), config.SUPPORT_CAP)
        return power

    def expression(self) -> RingElement:
        result = RingElement(self.p)
        sign = 1
        token = self.peek()
        if token is not None and token[0] == "op" and token[1] in "+-":
            sign = -1 if token[1] == "-" else 1
            self.take()
        while True:
            result = add(result, scale(self.term(), sign))
            token = self.peek()
            if token is None or token[0] != "op" or token[1] not in "+-":
                return result
            sign = -1 if token[1] == "-" else 1
            self.take()

    def term(self) -> RingElement:
        coefficient = Fraction(1)
        letters: List[int] = []
        factors: List[RingElement] = []
        while True:
            kind, text, column = self.take()
            if kind == "number":
                coefficient *= Fraction(text)
            elif kind == "name":
                if text not in self.names:
                    raise ElementSyntaxError(
                        "Unknown generator '{}'".format(text), column
                    )
                power = self.exponent()
                letter = self.names[text] + 1
                monomial = [letter if power > 0 else -letter] * abs(power)
                if factors:
                    factors.append(
                        from_word(self.p, reduce_word(monomial, self.p.alphabet_size))
                    )
                else:
                    letters.extend(monomial)
            elif kind == "op" and text == "(":
                inner = self.expression()
                self.expect(")")
                power = self.exponent()
                if power < 0:
                    raise ElementSyntaxError(
                        "Negative powers of sums are not supported", column
                    )
                if power != 1:
                    product = constant(self.p, 1)
                    for _ in range(power):
                        product = multiply(product, inner)
                    inner = product
                if not factors:
                    factors.append(
                        from_word(self.p, reduce_word(letters, self.p.alphabet_size))
                    )
                factors.append(inner)
            else:
                raise ElementSyntaxError("Unexpected '{}'".format(text), column)
            token = self.peek()
            if token is None or token[0] != "op" or token[1] != "*":
                break
            self.take()
        if not factors:
            return from_word(
                self.p, reduce_word(letters, self.p.alphabet_size), coefficient
            )
        result = scale(factors[0], coefficient)
        for factor in factors[1:]:
            result = multiply(result, factor)
        return result


def parse_element(text: str, p: Presentation) -> RingElement:
    """Parses a group ring element such as `2 + x*y^-1 - 3/2*y^2` or `(1+x)*(1-y)`.

    Numbers are integer or rational coefficients, `1` is the identity, words follow the word
    grammar of presentations. Parenthesized sums need multiplication and are not available
    for generic presentations.

    Raises:
        ElementSyntaxError: On malformed input or unknown generators.
        ResourceLimitError: If an exponent exceeds the support cap.
    """
    parser = _ElementParser(text, p)
    if not parser.tokens:
        raise ElementSyntaxError("Empty element", 1)
    result = parser.expression()
    token = parser.peek()
    if token is not None:
        raise ElementSyntaxError("Unexpected '{}'".format(token[1]), token[2])
    return result


def format_element(a: RingElement) -> str:
    """Canonical printing: terms in shortlex order with explicit signs."""
    terms = a.terms()
    if not terms:
        return "0"
    parts = []
    for i, (form, value) in enumerate(terms):
        word = lift(form, a.presentation)
        magnitude = abs(value)
        if word.is_identity:
            body = fraction_to_str(magnitude)
        elif magnitude == 1:
            body = format_word(word, a.presentation)
        else:
            body = "{}*{}".format(fraction_to_str(magnitude), format_word(word, a.presentation))
        if i == 0:
            parts.append(body if value > 0 else "-" + body)
        else:
            parts.append(("+ " if value > 0 else "- ") + body)
    return " ".join(parts)


# --------------------------------------------------------------------#
#                             Arithmetic                             #
# --------------------------------------------------------------------#


def _check_compatible(a: RingElement, b: RingElement) -> None:
    if a.presentation != b.presentation:
        raise StructureClassError(
            "Ring elements belong to different presentations or classes"
        )


def add(a: RingElement, b: RingElement) -> RingElement:
    _check_compatible(a, b)
    result = dict(a.coefficients)
    for form, value in b.coefficients.items():
        result[form] = result.get(form, Fraction(0)) + value
    return RingElement(a.presentation, result)


def subtract(a: RingElement, b: RingElement) -> RingElement:
    return add(a, scale(b, -1))


def scale(a: RingElement, factor: Fraction | int) -> RingElement:
    factor = Fraction(factor)
    return RingElement(
        a.presentation, {form: factor * value for form, value in a.coefficients.items()}
    )


def multiply(a: RingElement, b: RingElement) -> RingElement:
    """Exact convolution over normal forms.

    Raises:
        StructureClassError: For different presentations or a generic presentation.
    """
    _check_compatible(a, b)
    if a.presentation.kind == StructureKind.GENERIC:
        raise StructureClassError(
            "Multiplication needs a normal form; generic presentations have none"
        )
    result: Dict[NormalForm, Fraction] = {}
    right = b.terms()
    for f, x in a.terms():
        for g, y in right:
            key = multiply_forms(f, g)
            result[key] = result.get(key, Fraction(0)) + x * y
    return RingElement(a.presentation, result)


def star(a: RingElement) -> RingElement:
    """The involution: coefficients are real, so the coefficient of g in a* is the coefficient of g^-1 in a."""
    return RingElement(
        a.presentation, {invert_form(form): value for form, value in a.coefficients.items()}
    )


def trace(a: RingElement) -> Fraction:
    """The canonical trace: the coefficient of the identity."""
    return a.coefficient(identity_form(a.presentation))


def l1_norm(a: RingElement) -> Fraction:
    return sum((abs(value) for value in a.coefficients.values()), Fraction(0))


def is_self_adjoint(a: RingElement) -> bool:
    return star(a) == a


def radius(a: RingElement) -> int:
    """Length of the longest canonical word in the support."""
    return max((len(u) for u in a.support()), default=0)


def lift_to_free(a: RingElement) -> RingElement:
    """The element of the free group ring built from canonical words, with the same image in the presented group."""
    free = a.presentation.free_presentation()
    result: Dict[NormalForm, Fraction] = {}
    for form, value in a.coefficients.items():
        key = NormalForm(StructureKind.FREE, lift(form, a.presentation))
        result[key] = result.get(key, Fraction(0)) + value
    return RingElement(free, result)


def _inverse(matrix: np.ndarray) -> np.ndarray:
    try:
        if np.linalg.cond(matrix) > 1e12:
            raise np.linalg.LinAlgError("ill-conditioned")
        return np.linalg.inv(matrix)
    except np.linalg.LinAlgError:
        raise InputError("Singular matrix assigned to a generator used with an inverse")


def word_matrix(
    u: Word, m: MatrixAssignment, inverses: Optional[Dict[int, np.ndarray]] = None
) -> np.ndarray:
    """Image of a word: product of the assigned matrices (inverses for negative letters), left to right."""
    inverses = {} if inverses is None else inverses
    result = np.eye(m.dimension, dtype=complex)
    for letter in u.letters:
        if letter > 0:
            result = result @ m.matrices[letter - 1]
        else:
            if -letter not in inverses:
                inverses[-letter] = _inverse(m.matrices[-letter - 1])
            result = result @ inverses[-letter]
    return result


def relator_residual(p: Presentation, m: MatrixAssignment) -> float:
    """Largest Frobenius distance between a relator's image and the identity."""
    identity = np.eye(m.dimension)
    inverses: Dict[int, np.ndarray] = {}
    return max(
        (
            float(np.linalg.norm(word_matrix(r, m, inverses) - identity))
            for r in p.relators
        ),
        default=0.0,
    )


def evaluate(a: RingElement, m: MatrixAssignment) -> np.ndarray:
    """Image of a under the homomorphism defined by the matrix assignment.

    Raises:
        ValueError: If the number of matrices does not match the alphabet.
        InputError: If a matrix used with an inverse is singular or the assignment violates a relator.
    """
    p = a.presentation
    if len(m.matrices) != p.alphabet_size:
        raise ValueError(
            "Expected {} matrices, got {}".format(p.alphabet_size, len(m.matrices))
        )
    if p.relators and relator_residual(p, m) > config.UNITARY_TOLERANCE:
        raise InputError("Matrix assignment does not satisfy the relators")
    inverses: Dict[int, np.ndarray] = {}
    result = np.zeros((m.dimension, m.dimension), dtype=complex)
    for form, value in a.terms():
        result += float(value) * word_matrix(lift(form, p), m, inverses)
    return result

import logging
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from lxml import etree

from gnorm import config
from gnorm.assembler import Assembler
from gnorm.config import GN
from gnorm.errors import CertificationError, InputError
from gnorm.group_ring import RingElement, lift_to_free, l1_norm, multiply, star
from gnorm.helpers import (fraction_to_str, is_psd_exact, rationalize,
                           sqrt_up, str_to_fraction)
from gnorm.presentation import Presentation, Word, format_word, parse_word
from gnorm.sos_program import SosProgram

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GramBlock:
    """Exact Gram matrix of one block; `relator_index` is None for the hermitian squares block."""

    relator_index: Optional[int]
    exponent: int
    index: Tuple[Word, ...]
    gram: Tuple[Tuple[Fraction, ...], ...]

    def relator(self, p: Presentation) -> Optional[Word]:
        if self.relator_index is None:
            return None
        r = p.relators[self.relator_index]
        return r if self.exponent > 0 else r.inverse()

    def contribution(self, p: Presentation) -> Dict[Word, Fraction]:
        """Coefficients of sum C[i, j] g_i^-1 (1 - r) g_j in the free group ring."""
        r = self.relator(p)
        result: Dict[Word, Fraction] = {}
        inverses = [g.inverse() for g in self.index]
        for i, left in enumerate(inverses):
            shifted = None if r is None else left * r
            for j, g in enumerate(self.index):
                value = self.gram[i][j]
                if value == 0:
                    continue
                w = left * g
                result[w] = result.get(w, Fraction(0)) + value
                if shifted is not None:
                    w = shifted * g
                    result[w] = result.get(w, Fraction(0)) - value
        return result


def residual_of(
    a: RingElement, p: Presentation, lambda_: Fraction, blocks: Sequence[GramBlock]
) -> Dict[Word, Fraction]:
    """Exact residual L - a*a - sum of block contributions, in the free group ring, zeros dropped."""
    free = lift_to_free(a)
    square = multiply(star(free), free)
    result: Dict[Word, Fraction] = {p.identity(): lambda_}
    for form, value in square.coefficients.items():
        w = form.value
        assert isinstance(w, Word)
        result[w] = result.get(w, Fraction(0)) - value
    for block in blocks:
        for w, value in block.contribution(p).items():
            result[w] = result.get(w, Fraction(0)) - value
    return {w: value for w, value in result.items() if value != 0}


class UpperCertificate(Assembler):
    """Exact certificate L - a*a = sum of Gram block contributions + residual, in the free group ring.

    The squared norm bound is L + ||residual||_1; `bound` is its square root rounded up.
    """

    def __init__(
        self,
        level: int,
        lambda_: Fraction,
        blocks: Sequence[GramBlock],
        residual: Dict[Word, Fraction],
        presentation: Presentation,
        digits: int = config.DEFAULT_DIGITS,
    ) -> None:
        self.level = level
        self.lambda_ = lambda_
        self.blocks = tuple(blocks)
        self.residual = dict(residual)
        self.presentation = presentation
        self.digits = digits

    # --------------------------------------------------------------------#
    #                             Properties                             #
    # --------------------------------------------------------------------#

    @property
    def residual_l1(self) -> Fraction:
        return sum((abs(value) for value in self.residual.values()), Fraction(0))

    @property
    def bound_square(self) -> Fraction:
        return self.lambda_ + self.residual_l1

    @property
    def bound(self) -> float:
        return sqrt_up(self.bound_square, self.digits)

    # --------------------------------------------------------------------#
    #                           Public methods                           #
    # --------------------------------------------------------------------#

    def verify(self, a: RingElement) -> bool:
        """Re-checks exact positive semidefiniteness of every block and the ring identity."""
        return verify_certificate(self, a)

    def to_dict(self) -> Dict[str, Any]:
        p = self.presentation
        return {
            "level": self.level,
            "lambda": fraction_to_str(self.lambda_),
            "bound_square": fraction_to_str(self.bound_square),
            "bound": self.bound,
            "blocks": [
                {
                    "relator": block.relator_index,
                    "exponent": block.exponent,
                    "index": [format_word(g, p) for g in block.index],
                    "gram": [[fraction_to_str(value) for value in row] for row in block.gram],
                }
                for block in self.blocks
            ],
            "residual": {
                format_word(w, p): fraction_to_str(value)
                for w, value in sorted(self.residual.items(), key=lambda item: item[0].sort_key)
            },
        }

    @staticmethod
    def from_dict(data: Dict[str, Any], presentation: Presentation) -> "UpperCertificate":
        """Reads a certificate written by to_dict.

        Raises:
            InputError: If a field is missing or malformed.
        """
        try:
            blocks = [
                GramBlock(
                    block["relator"],
                    int(block["exponent"]),
                    tuple(parse_word(g, presentation) for g in block["index"]),
                    tuple(
                        tuple(str_to_fraction(value) for value in row)
                        for row in block["gram"]
                    ),
                )
                for block in data["blocks"]
            ]
            residual = {
                parse_word(w, presentation): str_to_fraction(value)
                for w, value in data["residual"].items()
            }
            return UpperCertificate(
                int(data["level"]),
                str_to_fraction(data["lambda"]),
                blocks,
                residual,
                presentation,
            )
        except (KeyError, TypeError, ValueError) as error:
            if isinstance(error, InputError):
                raise
            raise InputError("Malformed certificate: {}".format(error))

    def to_xml(self) -> etree._Element:
        p = self.presentation
        return GN.certificate(
            *[
                GN.block(
                    *[
                        GN.row(" ".join(fraction_to_str(value) for value in row))
                        for row in block.gram
                    ],
                    index=" ".join(format_word(g, p) for g in block.index),
                    relator="" if block.relator_index is None else str(block.relator_index),
                    exponent=str(block.exponent),
                )
                for block in self.blocks
            ],
            *[
                GN.residual(fraction_to_str(value), word=format_word(w, p))
                for w, value in sorted(self.residual.items(), key=lambda item: item[0].sort_key)
            ],
            level=str(self.level),
            squareBound=fraction_to_str(self.bound_square),
            bound=repr(self.bound),
        )


def verify_certificate(certificate: UpperCertificate, a: RingElement) -> bool:
    """Standalone check: every Gram block is exactly PSD and L - a*a - blocks equals the stored residual."""
    p = certificate.presentation
    try:
        for block in certificate.blocks:
            if len(block.gram) != len(block.index):
                return False
            if block.relator_index is not None and not 0 <= block.relator_index < len(
                p.relators
            ):
                return False
            if not is_psd_exact(block.gram):
                return False
    except ValueError:
        return False
    if lift_to_free(a).presentation.alphabet_size != p.alphabet_size:
        return False
    return residual_of(a, p, certificate.lambda_, certificate.blocks) == {
        w: value for w, value in certificate.residual.items() if value != 0
    }


def l1_certificate(a: RingElement, p: Presentation) -> UpperCertificate:
    """Level 0 certificate with L = ||a||_1^2.

    With coefficients c of the lifted support, the Gram matrix has C[g, g] = sum over h != g of
    |c_g c_h| and C[g, h] = -c_g c_h, a sum of the PSD terms |c_g c_h| (g - s h)*(g - s h).
    The residual is zero.
    """
    terms = sorted(
        ((form.value, value) for form, value in lift_to_free(a).coefficients.items()),
        key=lambda item: item[0].sort_key,  # type: ignore
    )
    index = tuple(w for w, _ in terms)  # type: ignore
    values = [value for _, value in terms]
    total = sum((abs(value) for value in values), Fraction(0))
    gram = tuple(
        tuple(
            abs(x) * (total - abs(x)) if i == j else -x * y
            for j, y in enumerate(values)
        )
        for i, x in enumerate(values)
    )
    blocks = [GramBlock(None, 1, index, gram)] if index else []
    lambda_ = l1_norm(a) ** 2
    residual = residual_of(a, p, lambda_, blocks)
    return UpperCertificate(0, lambda_, blocks, residual, p)


# --------------------------------------------------------------------#
#                          Rationalization                           #
# --------------------------------------------------------------------#


def _rational_symmetric(matrix: np.ndarray, cap: int) -> Tuple[Tuple[Fraction, ...], ...]:
    n = matrix.shape[0]
    rows: List[List[Fraction]] = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            value = rationalize(float(matrix[i, j]), cap)
            rows[i][j] = value
            rows[j][i] = value
    return tuple(tuple(row) for row in rows)


def _clip(matrix: np.ndarray, delta: float) -> np.ndarray:
    values, vectors = np.linalg.eigh(matrix)
    return (vectors * np.maximum(values, delta)) @ vectors.T


def _build(
    a: RingElement,
    program: SosProgram,
    lambda_: Fraction,
    grams: Sequence[Tuple[Tuple[Fraction, ...], ...]],
) -> UpperCertificate:
    blocks = [
        GramBlock(block.relator_index, block.exponent, block.index, gram)
        for block, gram in zip(program.blocks, grams)
    ]
    residual = residual_of(a, program.presentation, lambda_, blocks)
    return UpperCertificate(program.level, lambda_, blocks, residual, program.presentation)


def certify(
    a: RingElement,
    program: SosProgram,
    lambda_value: float,
    grams: Sequence[np.ndarray],
    delta: float = config.CLIP_DELTA,
    retries: int = config.CLIP_RETRIES,
) -> UpperCertificate:
    """Turns a numeric solution into an exact certificate.

    First tries to snap the Gram matrices to nearby rationals with small denominators without
    clipping. Then clips eigenvalues below delta, rationalizes and verifies positivity exactly,
    multiplying delta by 10 after each failure. The certificate with the smaller bound wins.

    Args:
        a: The element.
        program: The assembled program the numeric solution belongs to.
        lambda_value: Numeric value of L.
        grams: Numeric Gram matrices, one per program block.

    Raises:
        CertificationError: If no clipped attempt verifies.
    """
    if len(grams) != len(program.blocks):
        raise ValueError(
            "Expected {} Gram matrices, got {}".format(len(program.blocks), len(grams))
        )
    symmetric = [(g + g.T) / 2 for g in grams]
    candidates = []
    snapped = [_rational_symmetric(g, config.SNAP_DENOMINATOR_CAP) for g in symmetric]
    if all(is_psd_exact(g) for g in snapped):
        candidates.append(
            _build(a, program, rationalize(lambda_value, config.SNAP_DENOMINATOR_CAP), snapped)
        )
        logger.debug("Snapped certificate: %s", candidates[-1].bound)
    for attempt in range(retries):
        clipped = [
            _rational_symmetric(_clip(g, delta), config.DENOMINATOR_CAP) for g in symmetric
        ]
        if all(is_psd_exact(g) for g in clipped):
            candidates.append(
                _build(a, program, rationalize(lambda_value, config.DENOMINATOR_CAP), clipped)
            )
            logger.debug("Clipped certificate (delta %g): %s", delta, candidates[-1].bound)
            break
        warnings.warn(
            "Clipped Gram matrices are not PSD after rationalization at delta {}; retrying".format(
                delta
            )
        )
        delta *= 10
    if not candidates:
        raise CertificationError(
            "Gram matrices failed exact PSD verification after {} retries".format(retries)
        )
    return min(candidates, key=lambda certificate: certificate.bound_square)

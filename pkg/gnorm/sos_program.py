import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from gnorm import config
from gnorm.errors import ResourceLimitError
from gnorm.group_ring import (RingElement, lift_to_free, multiply, radius,
                              star)
from gnorm.presentation import NormalForm, Presentation, StructureKind, Word, ball

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SosBlock:
    """One Gram block of the program.

    The hermitian squares block has no relator. A relator block for r^e contributes
    b*(1 - r^e)b, where b ranges over the span of `index`.
    """

    relator_index: Optional[int]
    exponent: int
    relator: Optional[Word]
    index: Tuple[Word, ...]

    @property
    def size(self) -> int:
        return len(self.index)

    @property
    def label(self) -> str:
        if self.relator_index is None:
            return "squares"
        return "relator {}{}".format(self.relator_index, "" if self.exponent > 0 else "^-1")


class SosProgram:
    """Exact data of the program "minimize L such that L - a*a lies in Q_n".

    Rows are the words where the identity L - a*a = sum of block contributions is compared,
    in shortlex order. A Gram matrix C of a block contributes C[i, j] to the row of
    g_i^-1 g_j and, for relator blocks, -C[i, j] to the row of g_i^-1 r g_j.
    """

    def __init__(self, a: RingElement, presentation: Presentation, level: int) -> None:
        """Assembles the program.

        Args:
            a: The element, over the presentation or its free cover. It is lifted to the free group ring.
            presentation: Supplies the relators.
            level: The ball radius of the Gram blocks; at least the radius of a.

        Raises:
            ValueError: If the level is below the radius of a.
            ResourceLimitError: If the ball or the number of rows exceeds the configured caps.
        """
        self.presentation = presentation
        self.level = level
        self.element = lift_to_free(a)
        if self.element.presentation.alphabet_size != presentation.alphabet_size:
            raise ValueError("Element and presentation have different alphabets")
        if level < radius(self.element):
            raise ValueError(
                "Level {} is below the radius {} of the element".format(
                    level, radius(self.element)
                )
            )
        self.square = multiply(star(self.element), self.element)
        words = tuple(ball(presentation, level))
        self.blocks: List[SosBlock] = [SosBlock(None, 1, None, words)]
        for i, r in enumerate(presentation.relators):
            self.blocks.append(SosBlock(i, 1, r, words))
            self.blocks.append(SosBlock(i, -1, r.inverse(), words))
        numbering: Dict[Word, int] = {}
        inverses = [g.inverse() for g in words]
        tables = []
        for block in self.blocks:
            lefts = inverses if block.relator is None else [g * block.relator for g in inverses]
            table = np.empty((len(words), len(words)), dtype=np.int64)
            for i, left in enumerate(lefts):
                for j, g in enumerate(words):
                    table[i, j] = numbering.setdefault(left * g, len(numbering))
            if len(numbering) > config.SDP_ROW_CAP:
                raise ResourceLimitError("rows", len(numbering), config.SDP_ROW_CAP)
            tables.append(table)
        rows = set(numbering)
        rows.add(presentation.identity())
        rows.update(form.value for form in self.square.coefficients)  # type: ignore
        self.rows: List[Word] = sorted(rows, key=lambda w: w.sort_key)
        if len(self.rows) > config.SDP_ROW_CAP:
            raise ResourceLimitError("rows", len(self.rows), config.SDP_ROW_CAP)
        self.row_index: Dict[Word, int] = {w: k for k, w in enumerate(self.rows)}
        remap = np.empty(len(numbering), dtype=np.int64)
        for w, k in numbering.items():
            remap[k] = self.row_index[w]
        self._tables = [remap[table] for table in tables]
        logger.debug(
            "Assembled level %d program: %d blocks of size %d, %d rows",
            level,
            len(self.blocks),
            len(words),
            len(self.rows),
        )

    # --------------------------------------------------------------------#
    #                             Properties                             #
    # --------------------------------------------------------------------#

    @property
    def row_count(self) -> int:
        return len(self.rows)

    @property
    def block_sizes(self) -> List[int]:
        return [block.size for block in self.blocks]

    @property
    def identity_row(self) -> int:
        return self.row_index[self.presentation.identity()]

    # --------------------------------------------------------------------#
    #                           Public methods                           #
    # --------------------------------------------------------------------#

    def block_rows(self, block: int) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        """Rows receiving +C[i, j] and, for relator blocks, -C[i, j]."""
        if self.blocks[block].relator is None:
            return self._tables[0], None
        return self._tables[0], self._tables[block]

    def square_coefficient(self, w: Word) -> Fraction:
        return self.square.coefficient(NormalForm(StructureKind.FREE, w))

    def rhs(self) -> np.ndarray:
        """Coefficients of a*a on the rows."""
        return np.array([float(self.square_coefficient(w)) for w in self.rows])

    def constraint_matrices(self, block: int) -> sparse.csr_matrix:
        """Sparse (rows, n * n) map of the symmetrized block parts of the constraint map, negated.

        Row w holds the row-major flattening of -(F_w + F_w^T) / 2 with
        F_w[i, j] = [g_i^-1 g_j = w] - [g_i^-1 r g_j = w].
        """
        n = self.blocks[block].size
        plus, minus = self.block_rows(block)
        i, j = np.indices((n, n))
        rows = [plus.ravel(), plus.ravel()]
        columns = [(i * n + j).ravel(), (j * n + i).ravel()]
        values = [np.full(n * n, -0.5), np.full(n * n, -0.5)]
        if minus is not None:
            rows += [minus.ravel(), minus.ravel()]
            columns += columns[:2]
            values += [np.full(n * n, 0.5), np.full(n * n, 0.5)]
        data = sparse.coo_matrix(
            (np.concatenate(values), (np.concatenate(rows), np.concatenate(columns))),
            shape=(self.row_count, n * n),
        )
        return data.tocsr()

    def contribution(
        self, grams: Sequence[Sequence[Sequence[Fraction]]]
    ) -> Dict[Word, Fraction]:
        """Exact row coefficients of the sum of all block contributions for the given Gram matrices."""
        result: Dict[Word, Fraction] = {}
        for block, gram in enumerate(grams):
            plus, minus = self.block_rows(block)
            n = self.blocks[block].size
            for i in range(n):
                for j in range(n):
                    value = Fraction(gram[i][j])
                    if value == 0:
                        continue
                    w = self.rows[plus[i, j]]
                    result[w] = result.get(w, Fraction(0)) + value
                    if minus is not None:
                        w = self.rows[minus[i, j]]
                        result[w] = result.get(w, Fraction(0)) - value
        return result


def assemble_sos_program(a: RingElement, p: Presentation, level: int) -> SosProgram:
    return SosProgram(a, p, level)


class MomentProgram:
    """Moment form of the program: maximize phi(a*a) over functionals phi on the rows with phi(e) = 1
    and every localized moment matrix positive semidefinite.
    """

    def __init__(self, program: SosProgram) -> None:
        self.program = program

    def trace_functional(self) -> Dict[Word, float]:
        return {self.program.presentation.identity(): 1.0}

    def objective(self, phi: Mapping[Word, float]) -> float:
        return sum(
            float(value) * phi.get(form.value, 0.0)  # type: ignore
            for form, value in self.program.square.coefficients.items()
        )

    def moment_matrices(self, phi: Mapping[Word, float]) -> List[np.ndarray]:
        """Symmetrized localized moment matrices M[i, j] = phi(g_i^-1 g_j) - phi(g_i^-1 r g_j)."""
        values = np.array([phi.get(w, 0.0) for w in self.program.rows])
        result = []
        for block in range(len(self.program.blocks)):
            plus, minus = self.program.block_rows(block)
            matrix = values[plus]
            if minus is not None:
                matrix = matrix - values[minus]
            result.append((matrix + matrix.T) / 2)
        return result

    def feasibility(
        self, phi: Mapping[Word, float], tolerance: float = config.SOLVER_TOLERANCE
    ) -> Dict[str, bool]:
        """Flags for the normalization phi(e) = 1 and for positivity of every block."""
        flags = {
            "normalized": abs(phi.get(self.program.presentation.identity(), 0.0) - 1.0)
            <= tolerance
        }
        for block, matrix in zip(self.program.blocks, self.moment_matrices(phi)):
            flags[block.label] = bool(np.linalg.eigvalsh(matrix)[0] >= -tolerance)
        return flags

    def is_feasible(
        self, phi: Mapping[Word, float], tolerance: float = config.SOLVER_TOLERANCE
    ) -> bool:
        return all(self.feasibility(phi, tolerance).values())


def assemble_dual_program(a: RingElement, p: Presentation, level: int) -> MomentProgram:
    return MomentProgram(SosProgram(a, p, level))

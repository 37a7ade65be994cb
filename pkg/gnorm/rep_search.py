import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import unitary_group

from gnorm import config
from gnorm.errors import InputError, ResourceLimitError, StructureClassError
from gnorm.group_ring import (MatrixAssignment, RingElement, evaluate,
                              radius, relator_residual)
from gnorm.lambda_lower import compression_lower_bound
from gnorm.presentation import (NormalForm, Presentation, StructureKind, Word,
                                ball, lift, normal_form)
from gnorm.word_problem import PermutationQuotient

logger = logging.getLogger(__name__)

DIMENSION_CAP = 512

SEARCH_NOTE = "search, not exhaustive"


# --------------------------------------------------------------------#
#                           Unitary tuples                           #
# --------------------------------------------------------------------#


@dataclass(frozen=True)
class UnitaryTuple:
    """One unitary per generator with the reason the relators hold: `exact:<class>` or `verified`."""

    matrices: Tuple[np.ndarray, ...]
    feasibility: str

    @property
    def dimension(self) -> int:
        return self.matrices[0].shape[0] if self.matrices else 0

    @property
    def assignment(self) -> MatrixAssignment:
        return MatrixAssignment(self.matrices)

    def unitarity_defect(self) -> float:
        identity = np.eye(self.dimension)
        return max(
            (float(np.linalg.norm(u.conj().T @ u - identity)) for u in self.matrices),
            default=0.0,
        )

    def verify(self, p: Presentation) -> bool:
        """True if every matrix is unitary and every relator evaluates to the identity, both within tolerance."""
        return (
            len(self.matrices) == p.alphabet_size
            and self.unitarity_defect() <= config.UNITARY_TOLERANCE
            and (not p.relators or relator_residual(p, self.assignment) <= config.UNITARY_TOLERANCE)
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dimension": self.dimension,
            "feasibility": self.feasibility,
            "matrices": [
                [[[float(z.real), float(z.imag)] for z in row] for row in u]
                for u in self.matrices
            ],
        }

    @staticmethod
    def from_dict(data: Dict[str, Any]) -> "UnitaryTuple":
        matrices = tuple(
            np.array([[complex(re, im) for re, im in row] for row in u], dtype=complex)
            for u in data["matrices"]
        )
        return UnitaryTuple(matrices, data["feasibility"])


@dataclass(frozen=True)
class RepresentationBound:
    """Certified lower bound on the universal norm from an exact finite-dimensional representation."""

    value: float
    representation: UnitaryTuple
    trial: int
    source: str
    note: str = SEARCH_NOTE


# --------------------------------------------------------------------#
#                           Linear algebra                           #
# --------------------------------------------------------------------#


def _psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    values, vectors = np.linalg.eigh((matrix + matrix.conj().T) / 2)
    return (vectors * np.sqrt(np.clip(values, 0.0, None))) @ vectors.conj().T


def choi_dilate(t: np.ndarray) -> np.ndarray:
    """Unitary [[T, sqrt(1 - T T*)], [sqrt(1 - T* T), -T*]] of twice the dimension.

    Singular values of T above the contraction clip are clipped first.
    """
    t = np.asarray(t, dtype=complex)
    if t.ndim != 2 or t.shape[0] != t.shape[1]:
        raise ValueError("Expected a square matrix, got shape {}".format(t.shape))
    u, s, vh = np.linalg.svd(t)
    if s.size and s[0] > config.CONTRACTION_CLIP:
        t = (u * np.minimum(s, config.CONTRACTION_CLIP)) @ vh
    k = t.shape[0]
    identity = np.eye(k)
    return np.block(
        [
            [t, _psd_sqrt(identity - t @ t.conj().T)],
            [_psd_sqrt(identity - t.conj().T @ t), -t.conj().T],
        ]
    )


def polar(matrix: np.ndarray) -> np.ndarray:
    """Closest unitary: the polar factor from the singular value decomposition."""
    u, _, vh = np.linalg.svd(matrix)
    return u @ vh


def sigma_max_lower(
    matrix: np.ndarray, iterations: int = config.REPRESENTATION_ITERATIONS
) -> Tuple[float, np.ndarray]:
    """Lower estimate of the largest singular value from an explicit unit vector, minus the slack.

    Starts from the top right singular vector and refines it by power iteration on M* M.
    """
    if matrix.size == 0:
        return 0.0, np.zeros(0)
    _, _, vh = np.linalg.svd(matrix)
    v = vh[0].conj()
    gram = matrix.conj().T @ matrix
    value = float(np.linalg.norm(matrix @ v))
    for _ in range(iterations):
        w = gram @ v
        norm = np.linalg.norm(w)
        if norm == 0:
            break
        candidate = w / norm
        candidate_value = float(np.linalg.norm(matrix @ candidate))
        if candidate_value <= value * (1 + config.RAYLEIGH_TOLERANCE):
            if candidate_value > value:
                v, value = candidate, candidate_value
            break
        v, value = candidate, candidate_value
    return max(0.0, value / float(np.linalg.norm(v)) - config.REPRESENTATION_SLACK), v


# --------------------------------------------------------------------#
#                        Exact constructions                         #
# --------------------------------------------------------------------#


def _haar(k: int, rng: np.random.Generator) -> np.ndarray:
    if k == 1:
        return np.array([[np.exp(2j * np.pi * rng.random())]])
    return unitary_group.rvs(k, random_state=rng)


def _word_products(u: Word, matrices: Sequence[np.ndarray]) -> List[np.ndarray]:
    """Factors of the word's image, one per letter (inverses as conjugate transposes)."""
    return [
        matrices[letter - 1] if letter > 0 else matrices[-letter - 1].conj().T
        for letter in u.letters
    ]


def _gradients(
    a: RingElement, matrices: Sequence[np.ndarray], left: np.ndarray, right: np.ndarray
) -> List[np.ndarray]:
    """Euclidean gradient of Re <left, a(U) right> with respect to every U_i."""
    p = a.presentation
    k = matrices[0].shape[0]
    gradients = [np.zeros((k, k), dtype=complex) for _ in matrices]
    for form, coefficient in a.terms():
        u = lift(form, p)
        factors = _word_products(u, matrices)
        prefixes = [np.eye(k, dtype=complex)]
        for factor in factors:
            prefixes.append(prefixes[-1] @ factor)
        suffix = np.eye(k, dtype=complex)
        for position in range(len(factors) - 1, -1, -1):
            letter = u.letters[position]
            before = prefixes[position]
            if letter > 0:
                gradients[letter - 1] += float(coefficient) * np.outer(
                    before.conj().T @ left, (suffix @ right).conj()
                )
            else:
                gradients[-letter - 1] += float(coefficient) * np.outer(
                    suffix @ right, (before.conj().T @ left).conj()
                )
            suffix = factors[position] @ suffix
    return gradients


def _norm_of(a: RingElement, matrices: Sequence[np.ndarray]) -> Tuple[float, np.ndarray, np.ndarray]:
    image = evaluate(a, MatrixAssignment(tuple(matrices)))
    u, s, vh = np.linalg.svd(image)
    return float(s[0]), u[:, 0], vh[0].conj()


def _ascend(
    a: RingElement,
    factors: List[np.ndarray],
    assemble: Callable[[List[np.ndarray]], List[np.ndarray]],
    project: Callable[[List[np.ndarray], List[np.ndarray]], List[np.ndarray]],
    steps: int,
) -> List[np.ndarray]:
    """Gradient ascent of the operator norm with polar retraction and an adaptive step."""
    step = 0.5
    value, left, right = _norm_of(a, assemble(factors))
    for _ in range(steps):
        full = _gradients(a, assemble(factors), left, right)
        gradients = project(factors, full)
        candidate = [polar(f + step * g) for f, g in zip(factors, gradients)]
        candidate_value, candidate_left, candidate_right = _norm_of(a, assemble(candidate))
        if candidate_value > value:
            factors, value, left, right = candidate, candidate_value, candidate_left, candidate_right
            step *= 1.5
        else:
            step /= 2
            if step < 1e-8:
                break
    return factors


def _partial_trace(matrix: np.ndarray, dims: Sequence[int], keep: int) -> np.ndarray:
    tensor = matrix.reshape(tuple(dims) + tuple(dims))
    count = len(dims)
    for axis in range(count - 1, -1, -1):
        if axis == keep:
            continue
        current = tensor.ndim // 2
        tensor = np.trace(tensor, axis1=axis, axis2=axis + current)
    return tensor


def _kron_all(factors: Sequence[np.ndarray]) -> np.ndarray:
    result = np.eye(1, dtype=complex)
    for factor in factors:
        result = np.kron(result, factor)
    return result


def _free_trial(
    a: RingElement, k: int, rng: np.random.Generator, steps: int
) -> UnitaryTuple:
    n = a.presentation.alphabet_size
    factors = [_haar(k, rng) for _ in range(n)]
    factors = _ascend(a, factors, lambda fs: fs, lambda fs, gs: gs, steps)
    return UnitaryTuple(tuple(factors), "exact:free")


def _product_trial(
    a: RingElement, k: int, rng: np.random.Generator, steps: int
) -> UnitaryTuple:
    p = a.presentation
    blocks = p.structure.blocks
    dims = [k] * len(blocks)
    n = p.alphabet_size

    def embed(generator: int, factor: np.ndarray) -> np.ndarray:
        block = p.block_of(generator)
        return _kron_all(
            [factor if b == block else np.eye(k, dtype=complex) for b in range(len(blocks))]
        )

    def assemble(factors: List[np.ndarray]) -> List[np.ndarray]:
        return [embed(i, f) for i, f in enumerate(factors)]

    def project(factors: List[np.ndarray], gradients: List[np.ndarray]) -> List[np.ndarray]:
        return [_partial_trace(g, dims, p.block_of(i)) for i, g in enumerate(gradients)]

    factors = _ascend(a, [_haar(k, rng) for _ in range(n)], assemble, project, steps)
    return UnitaryTuple(tuple(assemble(factors)), "exact:product-of-frees")


def _abelian_trial(
    a: RingElement, k: int, rng: np.random.Generator, steps: int
) -> UnitaryTuple:
    """Diagonal phases: every diagonal entry is a character, optimized independently."""
    p = a.presentation
    n = p.alphabet_size
    exponents = np.array(
        [form.value for form, _ in a.terms()], dtype=float  # type: ignore
    ).reshape(-1, n)
    coefficients = np.array([float(value) for _, value in a.terms()])
    angles = 2 * np.pi * rng.random((k, n))

    def value_of(theta: np.ndarray) -> Tuple[float, complex, np.ndarray]:
        phases = np.exp(1j * exponents @ theta)
        f = complex(coefficients @ phases)
        return abs(f), f, phases

    for row in range(k):
        step = 0.5
        theta = angles[row]
        value, f, phases = value_of(theta)
        for _ in range(steps):
            gradient = 2 * np.real(np.conj(f) * 1j * ((coefficients * phases) @ exponents))
            candidate = theta + step * gradient
            candidate_value, candidate_f, candidate_phases = value_of(candidate)
            if candidate_value > value:
                theta, value, f, phases = candidate, candidate_value, candidate_f, candidate_phases
                step *= 1.5
            else:
                step /= 2
                if step < 1e-10:
                    break
        angles[row] = theta
    matrices = tuple(np.diag(np.exp(1j * angles[:, i])) for i in range(n))
    return UnitaryTuple(matrices, "exact:free-abelian")


TRIALS: Dict[StructureKind, Callable[..., UnitaryTuple]] = {
    StructureKind.FREE: _free_trial,
    StructureKind.FREE_ABELIAN: _abelian_trial,
    StructureKind.PRODUCT_OF_FREES: _product_trial,
}


def trivial_representation(p: Presentation, k: int = 1) -> UnitaryTuple:
    return UnitaryTuple(
        tuple(np.eye(k, dtype=complex) for _ in range(p.alphabet_size)),
        "exact:{}".format(p.kind.value),
    )


def _evaluate_bound(a: RingElement, representation: UnitaryTuple) -> float:
    value, _ = sigma_max_lower(evaluate(a, representation.assignment))
    return value


def structured_rep_lower_bound(
    a: RingElement,
    dimension: int,
    trials: int,
    seed: int = 0,
    steps: int = config.ASCENT_STEPS,
    workers: Optional[int] = None,
) -> RepresentationBound:
    """Best certified lower bound on the universal norm over exact representations of the given dimension.

    Trial 0 is the trivial representation. Further trials start from random unitaries of the
    presentation's class (Haar unitaries, tensor factors per block or diagonal phases) and
    run a local ascent. Trial t is seeded with (seed, t); the best value wins, ties go to the
    smaller trial index.

    Raises:
        ValueError: If dimension or trials are below 1.
        StructureClassError: For generic presentations, which need a finite quotient.
        ResourceLimitError: If the representation dimension exceeds the cap.
    """
    p = a.presentation
    if dimension < 1 or trials < 1:
        raise ValueError(
            "Invalid dimension {} or trial count {}".format(dimension, trials)
        )
    if p.kind not in TRIALS:
        raise StructureClassError(
            "Generic presentations need a permutation quotient for exact representations"
        )
    total = dimension ** len(p.structure.blocks) if p.kind == StructureKind.PRODUCT_OF_FREES else dimension
    if total > DIMENSION_CAP:
        raise ResourceLimitError("dimension", total, DIMENSION_CAP)
    trial = TRIALS[p.kind]

    def run(t: int) -> Tuple[float, int, UnitaryTuple]:
        if t == 0:
            representation = trivial_representation(p)
        else:
            representation = trial(a, dimension, np.random.default_rng([seed, t]), steps)
        return _evaluate_bound(a, representation), t, representation

    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="rep-trial") as pool:
        results = list(pool.map(run, range(trials)))
    value, t, representation = max(results, key=lambda item: (item[0], -item[1]))
    logger.debug("Representation search in dimension %d: %s (trial %d)", dimension, value, t)
    return RepresentationBound(value, representation, t, "representation")


def permutation_matrices(q: PermutationQuotient) -> UnitaryTuple:
    matrices = []
    for image in q.images:
        matrix = np.zeros((q.degree, q.degree), dtype=complex)
        for point, target in enumerate(image):
            matrix[target, point] = 1
        matrices.append(matrix)
    return UnitaryTuple(tuple(matrices), "exact:quotient")


def quotient_rep_lower_bound(a: RingElement, q: PermutationQuotient) -> RepresentationBound:
    """Certified lower bound from the permutation representation of a finite quotient.

    Raises:
        InputError: If the quotient does not satisfy the relators.
    """
    if not q.verify(a.presentation):
        raise InputError("Permutation quotient does not satisfy the relators")
    representation = permutation_matrices(q)
    return RepresentationBound(_evaluate_bound(a, representation), representation, 0, "quotient")


def dilation_lower_bound(a: RingElement, radius_: int) -> RepresentationBound:
    """Lower bound on the universal norm of a free group element from Choi dilations.

    The left regular representation is compressed to the ball of radius `radius_ + deg a`,
    every generator's compression is dilated to a unitary, and a is evaluated on the padded
    top eigenvector of the compression bound of the same radius.

    Raises:
        StructureClassError: If the presentation is not free.
    """
    p = a.presentation
    if p.kind != StructureKind.FREE:
        raise StructureClassError("Dilation bounds are available for free groups only")
    compression = compression_lower_bound(a, radius_)
    forms: List[NormalForm] = [normal_form(u, p) for u in ball(p, radius_ + radius(a))]
    if 2 * len(forms) > DIMENSION_CAP * 4:
        raise ResourceLimitError("dimension", 2 * len(forms), DIMENSION_CAP * 4)
    index = {form: i for i, form in enumerate(forms)}
    n = len(forms)
    unitaries = []
    for generator in range(1, p.alphabet_size + 1):
        x = p.word(generator)
        t = np.zeros((n, n), dtype=complex)
        for form, j in index.items():
            i = index.get(normal_form(x * lift(form, p), p))
            if i is not None:
                t[i, j] = 1
        unitaries.append(choi_dilate(t))
    xi = np.zeros(2 * n, dtype=complex)
    for form, value in zip(compression.forms, compression.vector):
        xi[index[form]] = float(value)
    representation = UnitaryTuple(tuple(unitaries), "exact:free")
    image = evaluate(a, representation.assignment) @ xi
    value = max(
        0.0,
        float(np.linalg.norm(image) / np.linalg.norm(xi)) - config.REPRESENTATION_SLACK,
    )
    return RepresentationBound(value, representation, 0, "dilation")


def choi_dimension_bound(a: RingElement) -> int:
    """Advisory dimension 4 |A|^d at which Choi dilations realize the compressions of degree d exactly."""
    return 4 * a.presentation.alphabet_size ** radius(a)

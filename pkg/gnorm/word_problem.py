import itertools
import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

from lxml import etree

from gnorm import config
from gnorm.assembler import Assembler
from gnorm.config import GN
from gnorm.errors import (AlphabetMismatchError, CertificationError,
                          ResourceLimitError, StructureClassError)
from gnorm.presentation import (NormalForm, Presentation, StructureKind, Word,
                                ball, commutator_pair, conjugate,
                                form_is_identity, format_word, lift,
                                normal_form, reduce_word)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SearchBudget:
    """Step-counted budget of the generic word-problem search; each search gets `steps` steps."""

    steps: int = config.WORD_SEARCH_STEPS
    max_depth: int = config.WORD_SEARCH_DEPTH
    max_degree: int = config.WORD_SEARCH_DEGREE

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("Invalid step budget: {}".format(self.steps))
        if self.max_depth < 1:
            raise ValueError("Invalid consequence depth: {}".format(self.max_depth))
        if self.max_degree < 1:
            raise ValueError("Invalid quotient degree: {}".format(self.max_degree))


class StepCounter:
    """Counts enumeration steps; stops when the limit is reached or the search was cancelled."""

    def __init__(self, limit: int, cancelled: Optional[threading.Event] = None) -> None:
        self.limit = limit
        self.steps = 0
        self._cancelled = cancelled

    def tick(self, steps: int = 1) -> bool:
        if self.steps >= self.limit or (
            self._cancelled is not None and self._cancelled.is_set()
        ):
            return False
        self.steps += steps
        return True


# --------------------------------------------------------------------#
#                              Witnesses                             #
# --------------------------------------------------------------------#


@dataclass(frozen=True)
class ConsequenceFactor:
    """The conjugate g r^e g^-1 of relator number `relator_index` (0-based) by `conjugator`."""

    conjugator: Word
    relator_index: int
    exponent: int

    def word(self, p: Presentation) -> Word:
        r = p.relators[self.relator_index]
        return conjugate(self.conjugator, r if self.exponent > 0 else r.inverse())

    def to_dict(self, p: Presentation) -> Dict[str, Any]:
        return {
            "conjugator": format_word(self.conjugator, p),
            "relator": self.relator_index,
            "exponent": self.exponent,
            "word": format_word(self.word(p), p),
        }


@dataclass(frozen=True)
class PermutationQuotient:
    """A homomorphism to the symmetric group on {0, ..., degree - 1}.

    `images[i][k]` is the image of point k under generator i. A word acts as the composition
    of its letters, the rightmost letter first, which matches products of permutation matrices.
    """

    degree: int
    images: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        for image in self.images:
            if sorted(image) != list(range(self.degree)):
                raise ValueError(
                    "Not a permutation of {} points: {}".format(self.degree, image)
                )

    @property
    def inverses(self) -> Tuple[Tuple[int, ...], ...]:
        return tuple(_inverse_permutation(image) for image in self.images)

    def evaluate(self, u: Word) -> Tuple[int, ...]:
        """The permutation of a word as a tuple of point images."""
        return _apply_word(self.images, self.inverses, u.letters, self.degree)

    def is_trivial_on(self, u: Word) -> bool:
        return self.evaluate(u) == tuple(range(self.degree))

    def verify(self, p: Presentation) -> bool:
        """True if the generator count matches and every relator maps to the identity permutation."""
        return len(self.images) == p.alphabet_size and all(
            self.is_trivial_on(r) for r in p.relators
        )

    def to_dict(self, p: Optional[Presentation] = None) -> Dict[str, Any]:
        result: Dict[str, Any] = {
            "degree": self.degree,
            "images": [list(image) for image in self.images],
        }
        if p is not None:
            result["generators"] = p.names
        return result


def _inverse_permutation(image: Sequence[int]) -> Tuple[int, ...]:
    inverse = [0] * len(image)
    for point, target in enumerate(image):
        inverse[target] = point
    return tuple(inverse)


def _apply_word(
    images: Sequence[Sequence[int]],
    inverses: Sequence[Sequence[int]],
    letters: Sequence[int],
    degree: int,
) -> Tuple[int, ...]:
    result = []
    for point in range(degree):
        for letter in reversed(letters):
            point = images[letter - 1][point] if letter > 0 else inverses[-letter - 1][point]
        result.append(point)
    return tuple(result)


# --------------------------------------------------------------------#
#                              Verdicts                              #
# --------------------------------------------------------------------#


class Verdict(Assembler):
    _word: Word
    _presentation: Presentation

    def __init__(self, word: Word, presentation: Presentation) -> None:
        self._word = word
        self._presentation = presentation

    @property
    def word(self) -> Word:
        return self._word

    @property
    def presentation(self) -> Presentation:
        return self._presentation

    @property
    def kind(self) -> str:
        return type(self).__name__.lower()

    def verify(self) -> bool:
        return True

    def _details(self) -> Dict[str, Any]:
        return {}

    def to_dict(self) -> Dict[str, Any]:
        result = {
            "verdict": self.kind,
            "word": format_word(self._word, self._presentation),
            "presentation": self._presentation.to_text(),
        }
        result.update(self._details())
        return result

    def to_xml(self) -> etree._Element:
        return GN.verdict(
            GN.word(format_word(self._word, self._presentation)),
            *self._xml_children(),
            kind=self.kind,
        )

    def _xml_children(self) -> List[etree._Element]:
        return []


class Trivial(Verdict):
    """The word lies in the normal closure of the relators; the witness is a product of conjugated relators."""

    _factors: Tuple[ConsequenceFactor, ...] = ()

    def __init__(
        self, word: Word, presentation: Presentation, factors: Sequence[ConsequenceFactor]
    ) -> None:
        super().__init__(word, presentation)
        self._factors = tuple(factors)

    @property
    def factors(self) -> Tuple[ConsequenceFactor, ...]:
        return self._factors

    def verify(self) -> bool:
        product = self._presentation.identity()
        for factor in self._factors:
            if not 0 <= factor.relator_index < len(self._presentation.relators):
                return False
            product = product * factor.word(self._presentation)
        return product == self._word

    def _details(self) -> Dict[str, Any]:
        return {"factors": [f.to_dict(self._presentation) for f in self._factors]}

    def _xml_children(self) -> List[etree._Element]:
        return [
            GN.factor(
                conjugator=format_word(f.conjugator, self._presentation),
                relator=str(f.relator_index),
                exponent=str(f.exponent),
            )
            for f in self._factors
        ]


class Nontrivial(Verdict):
    """The word is not the identity; the witness is a finite quotient or a normal form."""

    _witness: PermutationQuotient | NormalForm

    def __init__(
        self,
        word: Word,
        presentation: Presentation,
        witness: PermutationQuotient | NormalForm,
    ) -> None:
        super().__init__(word, presentation)
        self._witness = witness

    @property
    def witness(self) -> PermutationQuotient | NormalForm:
        return self._witness

    def verify(self) -> bool:
        p = self._presentation
        if isinstance(self._witness, PermutationQuotient):
            return self._witness.verify(p) and not self._witness.is_trivial_on(self._word)
        return normal_form(self._word, p) == self._witness and not form_is_identity(
            self._witness
        )

    def _details(self) -> Dict[str, Any]:
        if isinstance(self._witness, PermutationQuotient):
            return {"quotient": self._witness.to_dict(self._presentation)}
        return {"normal_form": format_word(lift(self._witness, self._presentation), self._presentation)}

    def _xml_children(self) -> List[etree._Element]:
        if isinstance(self._witness, PermutationQuotient):
            return [
                GN.quotient(
                    *[
                        GN.image(" ".join(str(point) for point in image), generator=name)
                        for name, image in zip(self._presentation.names, self._witness.images)
                    ],
                    degree=str(self._witness.degree),
                )
            ]
        return [
            GN.normalForm(format_word(lift(self._witness, self._presentation), self._presentation))
        ]


class Exhausted(Verdict):
    """Neither search produced a witness within the budget."""

    def __init__(
        self, word: Word, presentation: Presentation, steps: int, budget: SearchBudget
    ) -> None:
        super().__init__(word, presentation)
        self.steps = steps
        self.budget = budget

    def _details(self) -> Dict[str, Any]:
        return {
            "steps": self.steps,
            "budget": {
                "steps": self.budget.steps,
                "max_depth": self.budget.max_depth,
                "max_degree": self.budget.max_degree,
            },
        }

    def _xml_children(self) -> List[etree._Element]:
        return [GN.budget(steps=str(self.steps))]


# --------------------------------------------------------------------#
#                       Consequence enumeration                      #
# --------------------------------------------------------------------#


def _conjugates(p: Presentation, depth: int) -> List[Tuple[Word, ConsequenceFactor]]:
    """Distinct conjugates g r^e g^-1 for g in ball(depth), in (g shortlex, relator, +1 before -1) order."""
    seen = set()
    result = []
    inverses = [r.inverse() for r in p.relators]
    for g in ball(p, depth):
        for index, r in enumerate(p.relators):
            for exponent, power in ((1, r), (-1, inverses[index])):
                c = conjugate(g, power)
                if c not in seen:
                    seen.add(c)
                    result.append((c, ConsequenceFactor(g, index, exponent)))
    return result


def _products(
    p: Presentation,
    conjugates: Sequence[Tuple[Word, ConsequenceFactor]],
    count: int,
    counter: Optional[StepCounter] = None,
) -> Optional[Dict[Word, Tuple[ConsequenceFactor, ...]]]:
    """All products of at most `count` conjugates with their first factorization in deterministic order.

    Returns None when the counter runs out.
    """
    table: Dict[Word, Tuple[ConsequenceFactor, ...]] = {p.identity(): ()}
    frontier = [p.identity()]
    for _ in range(count):
        found = []
        for u in frontier:
            for c, factor in conjugates:
                if counter is not None and not counter.tick():
                    return None
                v = u * c
                if v not in table:
                    table[v] = table[u] + (factor,)
                    found.append(v)
            if len(table) > config.BALL_CAP:
                raise ResourceLimitError("consequences", len(table), config.BALL_CAP)
        frontier = sorted(found, key=lambda word: word.sort_key)
    return table


def enumerate_consequences(p: Presentation, depth: int) -> Iterator[Word]:
    """Streams elements of the normal closure of the relators.

    Depth d contributes the products of at most d conjugates g r^(+-1) g^-1 with g in ball(d).
    Each word is emitted once, the identity first, then depth by depth in shortlex order.

    Raises:
        ValueError: If depth is below 1.
        ResourceLimitError: If a depth has too many products.
    """
    if depth < 1:
        raise ValueError("Invalid consequence depth: {}".format(depth))
    seen = {p.identity()}
    yield p.identity()
    if not p.relators:
        return
    for d in range(1, depth + 1):
        table = _products(p, _conjugates(p, d), d)
        assert table is not None
        for w in sorted((w for w in table if w not in seen), key=lambda word: word.sort_key):
            seen.add(w)
            yield w


def _find_consequence(
    w: Word, p: Presentation, max_depth: int, counter: StepCounter
) -> Optional[Tuple[ConsequenceFactor, ...]]:
    """Meet in the middle: w = u v with u, v products of at most ceil(d/2) conjugates from ball(d)."""
    if w.is_identity:
        return ()
    if not p.relators:
        return None
    for d in range(1, max_depth + 1):
        half = _products(p, _conjugates(p, d), math.ceil(d / 2), counter)
        if half is None:
            return None
        for v, right in half.items():
            if not counter.tick():
                return None
            left = half.get(w * v.inverse())
            if left is not None:
                logger.debug("Found consequence of length %d at depth %d", len(left) + len(right), d)
                return left + right
    return None


# --------------------------------------------------------------------#
#                        Finite quotient search                      #
# --------------------------------------------------------------------#


def enumerate_finite_quotients(
    p: Presentation, max_degree: int, counter: Optional[StepCounter] = None
) -> Iterator[PermutationQuotient]:
    """Streams every generator tuple of permutations of degree at most max_degree that satisfies all relators.

    Tuples come in lexicographic order of (degree, tuple). A relator is checked as soon as all its
    generators are assigned.

    Raises:
        ValueError: If max_degree is below 1.
        ResourceLimitError: If max_degree exceeds the configured cap.
    """
    if max_degree < 1:
        raise ValueError("Invalid quotient degree: {}".format(max_degree))
    if max_degree > config.QUOTIENT_DEGREE_CAP:
        raise ResourceLimitError("degree", max_degree, config.QUOTIENT_DEGREE_CAP)
    n = p.alphabet_size
    checks: List[List[Word]] = [[] for _ in range(max(n, 1))]
    for r in p.relators:
        checks[max(abs(letter) for letter in r.letters) - 1].append(r)
    for m in range(1, max_degree + 1):
        permutations = list(itertools.permutations(range(m)))
        inverse_of = {image: _inverse_permutation(image) for image in permutations}
        identity = tuple(range(m))

        def extend(
            images: List[Tuple[int, ...]], inverses: List[Tuple[int, ...]]
        ) -> Iterator[PermutationQuotient]:
            i = len(images)
            if i == n:
                yield PermutationQuotient(m, tuple(images))
                return
            for image in permutations:
                if counter is not None and not counter.tick():
                    return
                candidate = images + [image]
                candidate_inverses = inverses + [inverse_of[image]]
                if all(
                    _apply_word(candidate, candidate_inverses, r.letters, m) == identity
                    for r in checks[i]
                ):
                    yield from extend(candidate, candidate_inverses)

        yield from extend([], [])
        if counter is not None and counter.steps >= counter.limit:
            return


def _find_quotient(
    w: Word, p: Presentation, max_degree: int, counter: StepCounter
) -> Optional[PermutationQuotient]:
    for quotient in enumerate_finite_quotients(p, max_degree, counter):
        if not quotient.is_trivial_on(w):
            logger.debug("Found quotient of degree %d", quotient.degree)
            return quotient
    return None


# --------------------------------------------------------------------#
#                          Structured deciders                       #
# --------------------------------------------------------------------#


def _commutator_as_conjugate(
    a: int, b: int, p: Presentation
) -> Tuple[Word, int, int]:
    """Finds g, i, e with a b a^-1 b^-1 = g r_i^e g^-1, g a word in the two generators involved."""
    target = reduce_word([a, b, -a, -b], p.alphabet_size)
    i, j = sorted((abs(a), abs(b)))
    pair = frozenset({i - 1, j - 1})
    candidates = [
        reduce_word(
            [(i if abs(letter) == 1 else j) * (1 if letter > 0 else -1) for letter in g.letters],
            p.alphabet_size,
        )
        for g in ball(2, 3)
    ]
    for index, r in enumerate(p.relators):
        if commutator_pair(r) != pair:
            continue
        for g in candidates:
            for exponent, power in ((1, r), (-1, r.inverse())):
                if conjugate(g, power) == target:
                    return g, index, exponent
    raise StructureClassError(
        "No relator expresses the commutator of '{}' and '{}'".format(
            p.alphabet[i - 1].name, p.alphabet[j - 1].name
        )
    )


def commutator_witness(w: Word, p: Presentation) -> List[ConsequenceFactor]:
    """Bubble sorts the letters of w by generator (free abelian) or block (product of frees).

    Every swap of adjacent letters a, b after a prefix P contributes the conjugate
    P [a, b] P^-1, so w is the product of the returned factors times the sorted word.
    """
    if p.kind == StructureKind.FREE_ABELIAN:
        def key(letter: int) -> int:
            return abs(letter) - 1
    elif p.kind == StructureKind.PRODUCT_OF_FREES:
        def key(letter: int) -> int:
            return p.block_of(abs(letter) - 1)
    else:
        raise StructureClassError(
            "Commutator witnesses need a free abelian or product of free groups presentation"
        )
    letters = list(w.letters)
    factors = []
    cache: Dict[Tuple[int, int], Tuple[Word, int, int]] = {}
    for end in range(len(letters) - 1, 0, -1):
        for i in range(end):
            a, b = letters[i], letters[i + 1]
            if key(a) > key(b):
                if (a, b) not in cache:
                    cache[(a, b)] = _commutator_as_conjugate(a, b, p)
                g, index, exponent = cache[(a, b)]
                prefix = reduce_word(letters[:i], p.alphabet_size)
                factors.append(ConsequenceFactor(prefix * g, index, exponent))
                letters[i], letters[i + 1] = b, a
    return factors


def _decide_structured(w: Word, p: Presentation) -> Verdict:
    form = normal_form(w, p)
    if not form_is_identity(form):
        return Nontrivial(w, p, form)
    if p.kind == StructureKind.FREE:
        return Trivial(w, p, ())
    return Trivial(w, p, commutator_witness(w, p))


# --------------------------------------------------------------------#
#                           Parallel search                          #
# --------------------------------------------------------------------#


class _ResultCell:
    """Holds the first verified verdict; later offers are ignored."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.value: Optional[Verdict] = None

    def offer(self, verdict: Verdict) -> bool:
        with self._lock:
            if self.value is not None:
                return False
            self.value = verdict
            return True


def _search_consequences(
    w: Word,
    p: Presentation,
    budget: SearchBudget,
    cancelled: threading.Event,
    cell: _ResultCell,
) -> int:
    counter = StepCounter(budget.steps, cancelled)
    try:
        factors = _find_consequence(w, p, budget.max_depth, counter)
    except ResourceLimitError as error:
        logger.info("Consequence search stopped: %s", error)
        return counter.steps
    if factors is not None:
        verdict = Trivial(w, p, factors)
        if verdict.verify() and cell.offer(verdict):
            cancelled.set()
    return counter.steps


def _search_quotients(
    w: Word,
    p: Presentation,
    budget: SearchBudget,
    cancelled: threading.Event,
    cell: _ResultCell,
) -> int:
    counter = StepCounter(budget.steps, cancelled)
    degree = min(budget.max_degree, config.QUOTIENT_DEGREE_CAP)
    quotient = _find_quotient(w, p, degree, counter)
    if quotient is not None:
        verdict = Nontrivial(w, p, quotient)
        if verdict.verify() and cell.offer(verdict):
            cancelled.set()
    return counter.steps


def decide_word(
    w: Word, p: Presentation, budget: Optional[SearchBudget] = None
) -> Verdict:
    """Decides whether w represents the identity of the presented group.

    Free, free abelian and product of free groups presentations are decided through normal
    forms. Generic presentations run the consequence search and the finite quotient search
    concurrently; the first verified witness wins and cancels the other search.

    Args:
        w: A word over the presentation's alphabet.
        p: The presentation.
        budget: Step budget of each search (generic presentations only).

    Returns:
        Trivial or Nontrivial with a verified witness, or Exhausted.

    Raises:
        AlphabetMismatchError: If w is over another alphabet.
        CertificationError: If a witness does not verify.
    """
    if w.alphabet_size != p.alphabet_size:
        raise AlphabetMismatchError("Word is not over the presentation's alphabet")
    budget = SearchBudget() if budget is None else budget
    if p.kind != StructureKind.GENERIC:
        verdict = _decide_structured(w, p)
    elif w.is_identity:
        verdict = Trivial(w, p, ())
    else:
        cancelled = threading.Event()
        cell = _ResultCell()
        with ThreadPoolExecutor(max_workers=2, thread_name_prefix="word-search") as pool:
            futures = [
                pool.submit(_search_consequences, w, p, budget, cancelled, cell),
                pool.submit(_search_quotients, w, p, budget, cancelled, cell),
            ]
            steps = sum(future.result() for future in futures)
        verdict = cell.value if cell.value is not None else Exhausted(w, p, steps, budget)
    if not verdict.verify():
        raise CertificationError(
            "The {} witness for '{}' does not verify".format(verdict.kind, format_word(w, p))
        )
    logger.info("Word '%s' is %s", format_word(w, p), verdict.kind)
    return verdict

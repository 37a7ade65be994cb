import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, FrozenSet, Iterator, List, Optional, Sequence, Tuple

from gnorm import config
from gnorm.errors import (AlphabetMismatchError, InputError,
                          PresentationSyntaxError, ResourceLimitError,
                          StructureClassError, UnknownGeneratorError)

NAME_REGEX = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")

TERM_REGEX = re.compile(
    r"(?P<name>[A-Za-z_][A-Za-z0-9_]*)(?:\^(?P<power>[+-]?[0-9]+))?|(?P<one>1)"
)

LINE_REGEX = re.compile(r"^\s*(?P<key>[A-Za-z]+)\s*:(?P<value>.*)$")

PRODUCT_REGEX = re.compile(r"^product-of-frees\((?P<blocks>[^()]*)\)$")


def letter_rank(letter: int) -> int:
    """Shortlex rank of a signed letter: generators in alphabet order, each inverse right after its generator."""
    return 2 * (abs(letter) - 1) + (0 if letter > 0 else 1)


# --------------------------------------------------------------------#
#                             Value types                            #
# --------------------------------------------------------------------#


@dataclass(frozen=True)
class Generator:
    index: int
    name: str


@dataclass(frozen=True)
class Word:
    """A freely reduced word over an alphabet of `alphabet_size` generators.

    Letters are signed generator indices starting at 1; -i is the inverse of generator i.
    """

    letters: Tuple[int, ...]
    alphabet_size: int

    def __post_init__(self):
        previous = 0
        for letter in self.letters:
            if letter == 0 or abs(letter) > self.alphabet_size:
                raise InputError(
                    "Letter {} out of range for an alphabet of size {}".format(
                        letter, self.alphabet_size
                    )
                )
            if letter == -previous:
                raise InputError("Word {} is not freely reduced".format(self.letters))
            previous = letter

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self) -> Iterator[int]:
        return iter(self.letters)

    def __mul__(self, other: "Word") -> "Word":
        return multiply_words(self, other)

    @property
    def is_identity(self) -> bool:
        return not self.letters

    @property
    def sort_key(self) -> Tuple[int, Tuple[int, ...]]:
        return (len(self.letters), tuple(letter_rank(letter) for letter in self.letters))

    def inverse(self) -> "Word":
        return invert_word(self)


class StructureKind(str, Enum):
    FREE = "free"
    FREE_ABELIAN = "free-abelian"
    PRODUCT_OF_FREES = "product-of-frees"
    GENERIC = "generic"


@dataclass(frozen=True)
class StructureClass:
    """Declared structure of a presented group; `blocks` partitions the generator indices for products of free groups."""

    kind: StructureKind
    blocks: Tuple[Tuple[int, ...], ...] = ()

    @property
    def has_normal_form(self) -> bool:
        return self.kind != StructureKind.GENERIC


@dataclass(frozen=True)
class NormalForm:
    """Canonical representative of a group element.

    FREE: a reduced Word. FREE_ABELIAN: a tuple of exponents. PRODUCT_OF_FREES: a tuple of
    reduced Words, one per block. GENERIC: a freely reduced Word with no relation applied
    (syntactic key used by ring elements of generic presentations).
    """

    kind: StructureKind
    value: object


# --------------------------------------------------------------------#
#                          Free group words                          #
# --------------------------------------------------------------------#


def reduce_word(letters: Sequence[int], alphabet_size: int) -> Word:
    """Freely reduces a raw sequence of signed letters.

    Raises:
        InputError: If a letter references a generator outside the alphabet.
    """
    stack: List[int] = []
    for letter in letters:
        if letter == 0 or abs(letter) > alphabet_size:
            raise InputError(
                "Letter {} out of range for an alphabet of size {}".format(
                    letter, alphabet_size
                )
            )
        if stack and stack[-1] == -letter:
            stack.pop()
        else:
            stack.append(letter)
    return Word(tuple(stack), alphabet_size)


def identity_word(alphabet_size: int) -> Word:
    return Word((), alphabet_size)


def multiply_words(u: Word, v: Word) -> Word:
    if u.alphabet_size != v.alphabet_size:
        raise AlphabetMismatchError(
            "Cannot multiply words over alphabets of size {} and {}".format(
                u.alphabet_size, v.alphabet_size
            )
        )
    left = list(u.letters)
    right = v.letters
    i = 0
    while left and i < len(right) and left[-1] == -right[i]:
        left.pop()
        i += 1
    return Word(tuple(left) + right[i:], u.alphabet_size)


def invert_word(u: Word) -> Word:
    return Word(tuple(-letter for letter in reversed(u.letters)), u.alphabet_size)


def conjugate(g: Word, r: Word) -> Word:
    """Reduced form of g r g^-1."""
    return multiply_words(multiply_words(g, r), invert_word(g))


def ball_size(alphabet_size: int, radius: int) -> int:
    if radius < 0:
        raise ValueError("Invalid ball radius: {}".format(radius))
    if alphabet_size == 0:
        return 1
    size, sphere = 1, 2 * alphabet_size
    for _ in range(radius):
        size += sphere
        sphere *= 2 * alphabet_size - 1
    return size


def ball(
    alphabet: "int | Presentation", radius: int, cap: int = config.BALL_CAP
) -> List[Word]:
    """All reduced words of length at most `radius` in the free group, in shortlex order.

    Relations are never applied. Shortlex uses the alphabet order with every inverse letter
    ranked right after its generator.

    Raises:
        ResourceLimitError: If the ball has more than `cap` elements.
    """
    alphabet_size = alphabet if isinstance(alphabet, int) else alphabet.alphabet_size
    size = ball_size(alphabet_size, radius)
    if size > cap:
        raise ResourceLimitError("ball", size, cap)
    letters = sorted(
        [i for i in range(1, alphabet_size + 1)] + [-i for i in range(1, alphabet_size + 1)],
        key=letter_rank,
    )
    words = [identity_word(alphabet_size)]
    sphere = [()]
    for _ in range(radius):
        next_sphere = []
        for prefix in sphere:
            for letter in letters:
                if prefix and prefix[-1] == -letter:
                    continue
                next_sphere.append(prefix + (letter,))
        words.extend(Word(letters_, alphabet_size) for letters_ in next_sphere)
        sphere = next_sphere
    return words


def commutator_pair(u: Word) -> Optional[FrozenSet[int]]:
    """Returns the generator indices {i, j} if u is a commutator of two distinct generators (any signs), None otherwise."""
    letters = u.letters
    if (
        len(letters) == 4
        and letters[2] == -letters[0]
        and letters[3] == -letters[1]
        and abs(letters[0]) != abs(letters[1])
    ):
        return frozenset({abs(letters[0]) - 1, abs(letters[1]) - 1})
    return None


# --------------------------------------------------------------------#
#                             Presentation                           #
# --------------------------------------------------------------------#


class Presentation:
    _alphabet: Tuple[Generator, ...] = ()
    _relators: Tuple[Word, ...] = ()
    _structure: StructureClass = StructureClass(StructureKind.FREE)

    def __init__(
        self,
        names: Sequence[str],
        relators: Sequence[Word] = (),
        structure: Optional[StructureClass] = None,
    ) -> None:
        """Creates a validated presentation.

        Args:
            names: The generator names, in alphabet order.
            relators: Nonempty reduced relator words over the alphabet.
            structure: The declared structure class. Defaults to free without relators and generic otherwise.

        Raises:
            InputError: If the names are invalid, a relator is empty or over another alphabet.
            StructureClassError: If the declared class does not match the relators.
        """
        seen = set()
        for name in names:
            if not NAME_REGEX.match(name):
                raise InputError("Invalid generator name: '{}'".format(name))
            if name in seen:
                raise InputError("Duplicate generator name: '{}'".format(name))
            seen.add(name)
        self._alphabet = tuple(Generator(i, name) for i, name in enumerate(names))
        for relator in relators:
            if relator.alphabet_size != len(self._alphabet):
                raise AlphabetMismatchError(
                    "Relator over an alphabet of size {} in a presentation with {} generators".format(
                        relator.alphabet_size, len(self._alphabet)
                    )
                )
            if relator.is_identity:
                raise InputError("Relators must be nonempty reduced words")
        self._relators = tuple(relators)
        if structure is None:
            structure = StructureClass(
                StructureKind.FREE if not relators else StructureKind.GENERIC
            )
        self._validate_structure(structure)
        self._structure = structure
        self._block_of = {
            generator: block_index
            for block_index, block in enumerate(structure.blocks)
            for generator in block
        }

    # --------------------------------------------------------------------#
    #                             Properties                             #
    # --------------------------------------------------------------------#

    @property
    def alphabet(self) -> Tuple[Generator, ...]:
        return self._alphabet

    @property
    def alphabet_size(self) -> int:
        return len(self._alphabet)

    @property
    def names(self) -> List[str]:
        return [generator.name for generator in self._alphabet]

    @property
    def relators(self) -> Tuple[Word, ...]:
        return self._relators

    @property
    def structure(self) -> StructureClass:
        return self._structure

    @property
    def kind(self) -> StructureKind:
        return self._structure.kind

    # --------------------------------------------------------------------#
    #                           Private helpers                          #
    # --------------------------------------------------------------------#

    def _validate_structure(self, structure: StructureClass) -> None:
        n = len(self._alphabet)
        if structure.kind == StructureKind.FREE:
            if self._relators:
                raise StructureClassError("A free presentation cannot have relators")
            return
        if structure.kind == StructureKind.GENERIC:
            return
        if structure.kind == StructureKind.FREE_ABELIAN:
            required = {frozenset({i, j}) for i in range(n) for j in range(i + 1, n)}
            same_block = None
        else:
            members = [g for block in structure.blocks for g in block]
            if sorted(members) != list(range(n)) or any(
                not block for block in structure.blocks
            ):
                raise StructureClassError(
                    "Product blocks must be nonempty, disjoint and cover the alphabet"
                )
            same_block = {g: i for i, block in enumerate(structure.blocks) for g in block}
            required = {
                frozenset({i, j})
                for i in range(n)
                for j in range(i + 1, n)
                if same_block[i] != same_block[j]
            }
        found = set()
        for relator in self._relators:
            pair = commutator_pair(relator)
            if pair is None:
                raise StructureClassError(
                    "Relator '{}' is not a commutator of generators".format(
                        self.format_word(relator)
                    )
                )
            if pair not in required:
                raise StructureClassError(
                    "Relator '{}' is inconsistent with class '{}'".format(
                        self.format_word(relator), self.format_structure(structure)
                    )
                )
            found.add(pair)
        missing = required - found
        if missing:
            i, j = sorted(min(missing, key=sorted))
            raise StructureClassError(
                "Class '{}' requires a commutator relator for {} and {}".format(
                    self.format_structure(structure),
                    self._alphabet[i].name,
                    self._alphabet[j].name,
                )
            )

    # --------------------------------------------------------------------#
    #                           Public methods                           #
    # --------------------------------------------------------------------#

    def generator_index(self, name: str) -> int:
        for generator in self._alphabet:
            if generator.name == name:
                return generator.index
        raise UnknownGeneratorError(name)

    def block_of(self, generator: int) -> int:
        """Block index of a generator (0-based index) in a product of free groups."""
        return self._block_of[generator]

    def identity(self) -> Word:
        return identity_word(self.alphabet_size)

    def word(self, *letters: int) -> Word:
        return reduce_word(letters, self.alphabet_size)

    def parse_word(self, text: str) -> Word:
        return parse_word(text, self)

    def format_word(self, u: Word) -> str:
        return format_word(u, self)

    def format_structure(self, structure: Optional[StructureClass] = None) -> str:
        structure = self._structure if structure is None else structure
        if structure.kind != StructureKind.PRODUCT_OF_FREES:
            return structure.kind.value
        return "product-of-frees({})".format(
            ";".join(
                " ".join(self._alphabet[g].name for g in block)
                for block in structure.blocks
            )
        )

    def with_structure(self, structure: StructureClass) -> "Presentation":
        return Presentation(self.names, self._relators, structure)

    def free_presentation(self) -> "Presentation":
        """The free presentation on the same alphabet."""
        return Presentation(self.names, (), StructureClass(StructureKind.FREE))

    def to_text(self) -> str:
        return "generators: {}\nrelators: {}\nclass: {}\n".format(
            " ".join(self.names),
            " ".join(self.format_word(r) for r in self._relators),
            self.format_structure(),
        )

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Presentation)
            and self.names == other.names
            and self._relators == other._relators
            and self._structure == other._structure
        )

    def __hash__(self) -> int:
        return hash((tuple(self.names), self._relators, self._structure))

    def __repr__(self) -> str:
        return "Presentation({!r})".format(self.to_text())


# --------------------------------------------------------------------#
#                               Parsing                              #
# --------------------------------------------------------------------#


def _parse_letters(
    text: str, names: Dict[str, int], line: int = 1, column: int = 1
) -> List[int]:
    letters: List[int] = []
    if not text:
        raise PresentationSyntaxError("Empty word", line, column)
    position = 0
    while True:
        match = TERM_REGEX.match(text, position)
        if match is None:
            raise PresentationSyntaxError(
                "Expected a generator name or '1'", line, column + position
            )
        if match.group("name") is not None:
            name = match.group("name")
            if name not in names:
                raise UnknownGeneratorError(name)
            power = int(match.group("power") or 1)
            if abs(power) > config.SUPPORT_CAP:
                raise ResourceLimitError("power", abs(power), config.SUPPORT_CAP)
            letter = names[name] + 1
            letters.extend([letter if power > 0 else -letter] * abs(power))
        position = match.end()
        if position == len(text):
            return letters
        if text[position] != "*":
            raise PresentationSyntaxError("Expected '*'", line, column + position)
        position += 1


def parse_word(text: str, p: Presentation) -> Word:
    """Parses `term ('*' term)*` with term = name ('^' integer)? or '1'; whitespace is ignored."""
    names = {g.name: g.index for g in p.alphabet}
    compact = "".join(text.split())
    return reduce_word(_parse_letters(compact, names), p.alphabet_size)


def _parse_structure(
    value: str, names: Dict[str, int], line: int, column: int
) -> StructureClass:
    value = value.strip()
    if value == "free":
        return StructureClass(StructureKind.FREE)
    if value == "free-abelian":
        return StructureClass(StructureKind.FREE_ABELIAN)
    if value == "generic":
        return StructureClass(StructureKind.GENERIC)
    match = PRODUCT_REGEX.match(value)
    if match is None:
        raise PresentationSyntaxError(
            "Unknown class '{}'".format(value), line, column
        )
    blocks = []
    for block in match.group("blocks").split(";"):
        members = []
        for name in block.replace(",", " ").split():
            if name not in names:
                raise UnknownGeneratorError(name)
            members.append(names[name])
        blocks.append(tuple(members))
    return StructureClass(StructureKind.PRODUCT_OF_FREES, tuple(blocks))


def parse_presentation(text: str) -> Presentation:
    """Parses the line-oriented presentation format.

    Lines have the form `generators: <name> ...`, `relators: <word> ...` and
    `class: free | free-abelian | product-of-frees(<block>;<block>) | generic`. Blank lines and
    `#` comments are ignored; the class line is optional.

    Raises:
        PresentationSyntaxError: On malformed lines, with line and column.
        UnknownGeneratorError: If a relator or block names an unknown generator.
        StructureClassError: If the declared class does not match the relators.
    """
    fields: Dict[str, Tuple[str, int, int]] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        content = raw.split("#", 1)[0]
        if not content.strip():
            continue
        match = LINE_REGEX.match(content)
        if match is None:
            raise PresentationSyntaxError("Expected '<key>: <value>'", number, 1)
        key = match.group("key")
        if key not in ("generators", "relators", "class"):
            raise PresentationSyntaxError(
                "Unknown key '{}'".format(key), number, match.start("key") + 1
            )
        if key in fields:
            raise PresentationSyntaxError(
                "Duplicate key '{}'".format(key), number, match.start("key") + 1
            )
        fields[key] = (match.group("value"), number, match.start("value") + 1)
    if "generators" not in fields:
        raise PresentationSyntaxError("Missing 'generators' line", 1, 1)
    value, number, _ = fields["generators"]
    generator_names = value.split()
    names = {name: i for i, name in enumerate(generator_names)}
    relators = []
    if "relators" in fields:
        value, number, column = fields["relators"]
        for match in re.finditer(r"\S+", value):
            letters = _parse_letters(
                match.group(0), names, number, column + match.start()
            )
            relators.append(reduce_word(letters, len(generator_names)))
    structure = None
    if "class" in fields:
        value, number, column = fields["class"]
        structure = _parse_structure(value, names, number, column)
    return Presentation(generator_names, relators, structure)


def load_presentation(source: str | Path) -> Presentation:
    """Reads and parses a presentation from a local file or an http(s) URL (cached)."""
    if isinstance(source, str) and re.match(r"^https?://", source):
        return parse_presentation(config.get_presentation_cache().get(source))
    try:
        text = Path(source).read_text(encoding="utf-8")
    except OSError as error:
        raise InputError("Cannot read presentation '{}': {}".format(source, error))
    return parse_presentation(text)


def format_word(u: Word, p: Presentation) -> str:
    if u.is_identity:
        return "1"
    terms = []
    letters = u.letters
    i = 0
    while i < len(letters):
        j = i
        while j < len(letters) and letters[j] == letters[i]:
            j += 1
        name = p.alphabet[abs(letters[i]) - 1].name
        power = (j - i) * (1 if letters[i] > 0 else -1)
        terms.append(name if power == 1 else "{}^{}".format(name, power))
        i = j
    return "*".join(terms)


# --------------------------------------------------------------------#
#                            Normal forms                            #
# --------------------------------------------------------------------#


def normal_form(u: Word, p: Presentation) -> NormalForm:
    """Canonical representative of the image of u in the presented group.

    Raises:
        StructureClassError: For generic presentations, which have no normal form.
    """
    if u.alphabet_size != p.alphabet_size:
        raise AlphabetMismatchError("Word is not over the presentation's alphabet")
    kind = p.kind
    if kind == StructureKind.FREE:
        return NormalForm(kind, u)
    if kind == StructureKind.FREE_ABELIAN:
        exponents = [0] * p.alphabet_size
        for letter in u.letters:
            exponents[abs(letter) - 1] += 1 if letter > 0 else -1
        return NormalForm(kind, tuple(exponents))
    if kind == StructureKind.PRODUCT_OF_FREES:
        components: List[List[int]] = [[] for _ in p.structure.blocks]
        for letter in u.letters:
            components[p.block_of(abs(letter) - 1)].append(letter)
        return NormalForm(
            kind,
            tuple(reduce_word(component, p.alphabet_size) for component in components),
        )
    raise StructureClassError("Generic presentations have no normal form")


def identity_form(p: Presentation) -> NormalForm:
    if p.kind == StructureKind.GENERIC:
        return NormalForm(StructureKind.GENERIC, p.identity())
    return normal_form(p.identity(), p)


def lift(form: NormalForm, p: Presentation) -> Word:
    """The canonical free-group word representing a normal form."""
    if form.kind in (StructureKind.FREE, StructureKind.GENERIC):
        assert isinstance(form.value, Word)
        return form.value
    if form.kind == StructureKind.FREE_ABELIAN:
        assert isinstance(form.value, tuple)
        letters: List[int] = []
        for i, exponent in enumerate(form.value):
            letters.extend([(i + 1) if exponent > 0 else -(i + 1)] * abs(exponent))
        return Word(tuple(letters), p.alphabet_size)
    assert isinstance(form.value, tuple)
    return Word(
        tuple(letter for component in form.value for letter in component.letters),
        p.alphabet_size,
    )


def multiply_forms(f: NormalForm, g: NormalForm) -> NormalForm:
    if f.kind != g.kind:
        raise StructureClassError(
            "Cannot multiply normal forms of classes '{}' and '{}'".format(
                f.kind.value, g.kind.value
            )
        )
    if f.kind == StructureKind.FREE_ABELIAN:
        assert isinstance(f.value, tuple) and isinstance(g.value, tuple)
        return NormalForm(f.kind, tuple(a + b for a, b in zip(f.value, g.value)))
    if f.kind == StructureKind.PRODUCT_OF_FREES:
        assert isinstance(f.value, tuple) and isinstance(g.value, tuple)
        return NormalForm(
            f.kind, tuple(multiply_words(u, v) for u, v in zip(f.value, g.value))
        )
    assert isinstance(f.value, Word) and isinstance(g.value, Word)
    return NormalForm(f.kind, multiply_words(f.value, g.value))


def invert_form(f: NormalForm) -> NormalForm:
    if f.kind == StructureKind.FREE_ABELIAN:
        assert isinstance(f.value, tuple)
        return NormalForm(f.kind, tuple(-a for a in f.value))
    if f.kind == StructureKind.PRODUCT_OF_FREES:
        assert isinstance(f.value, tuple)
        return NormalForm(f.kind, tuple(invert_word(u) for u in f.value))
    assert isinstance(f.value, Word)
    return NormalForm(f.kind, invert_word(f.value))


def form_is_identity(f: NormalForm) -> bool:
    if f.kind == StructureKind.FREE_ABELIAN:
        assert isinstance(f.value, tuple)
        return not any(f.value)
    if f.kind == StructureKind.PRODUCT_OF_FREES:
        assert isinstance(f.value, tuple)
        return all(u.is_identity for u in f.value)
    assert isinstance(f.value, Word)
    return f.value.is_identity

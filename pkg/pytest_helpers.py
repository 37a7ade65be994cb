import itertools
import math
import random
from fractions import Fraction
from typing import Any, List

from lxml import etree

from gnorm.assembler import Assembler
from gnorm.config import REPORT_NSS
from gnorm.group_ring import RingElement, from_word
from gnorm.presentation import Presentation, Word, reduce_word


def e(value: Any) -> List[etree._Element]:
    """Makes sure that the provided value is a List of etree._Elements. Raises an exception otherwise."""
    if not isinstance(value, List):
        raise Exception("Not a list")
    list: List[etree._Element] = value
    return list


def xp(assembler: Assembler, xpath: str) -> List[etree._Element]:
    """Evaluates an xpath on the assembler's xml content. Raises an exception if it doesn't produce XML."""
    xml = assembler.to_xml()
    if xml is None:
        raise Exception("XML is empty")
    return e(xml.xpath(xpath, namespaces=REPORT_NSS))


def xps(assembler: Assembler, xpath: str) -> etree._Element:
    """Evaluates an xpath, asserts that it only has a single element and returns the element."""
    list = xp(assembler, xpath)
    assert len(list) == 1
    return list[0]


def closed_walks(alphabet_size: int, length: int) -> int:
    """Counts the letter strings of the given length over x_i and their inverses that freely reduce to the identity."""
    letters = [i for i in range(1, alphabet_size + 1)] + [-i for i in range(1, alphabet_size + 1)]
    return sum(
        1
        for string in itertools.product(letters, repeat=length)
        if reduce_word(string, alphabet_size).is_identity
    )


def central_binomial(n: int) -> Fraction:
    return Fraction(math.comb(2 * n, n))


def random_letters(rng: random.Random, alphabet_size: int, max_length: int) -> List[int]:
    """A raw, not necessarily reduced, string of at most max_length signed letters."""
    length = rng.randint(0, max_length)
    return [rng.choice((1, -1)) * rng.randint(1, alphabet_size) for _ in range(length)]


def random_word(rng: random.Random, p: Presentation, max_length: int) -> Word:
    return reduce_word(random_letters(rng, p.alphabet_size, max_length), p.alphabet_size)


def random_element(
    rng: random.Random, p: Presentation, max_support: int = 6, max_length: int = 3
) -> RingElement:
    """A ring element with at most max_support terms and small integer coefficients; may be zero."""
    a = RingElement(p)
    for _ in range(rng.randint(0, max_support)):
        a = a + from_word(p, random_word(rng, p, max_length), rng.randint(-5, 5))
    return a

import itertools
import random

import pytest

from gnorm.errors import (AlphabetMismatchError, InputError,
                          PresentationSyntaxError, ResourceLimitError,
                          StructureClassError, UnknownGeneratorError)
from gnorm.presentation import (NormalForm, StructureKind, ball, ball_size,
                                conjugate, format_word, invert_form,
                                invert_word, lift, load_presentation,
                                multiply_forms, multiply_words, normal_form,
                                parse_presentation, parse_word, reduce_word)
from pytest_helpers import random_letters, random_word


def test_parses_free_abelian_presentation(z2):
    assert z2.names == ["x", "y"]
    assert len(z2.relators) == 1
    assert z2.kind == StructureKind.FREE_ABELIAN


def test_parses_free_presentation_with_empty_relators():
    p = parse_presentation("generators: x y\nrelators:\nclass: free")
    assert p.kind == StructureKind.FREE
    assert p.relators == ()


def test_defaults_to_generic_with_relators(commutator):
    assert commutator.kind == StructureKind.GENERIC


def test_raises_exception_for_unknown_generator():
    with pytest.raises(UnknownGeneratorError) as info:
        parse_presentation("generators: x\nrelators: x*q")
    assert info.value.name == "q"


def test_raises_exception_with_position_for_syntax_error():
    with pytest.raises(PresentationSyntaxError) as info:
        parse_presentation("generators: x y\nrelators: x*y*+")
    assert info.value.line == 2


def test_raises_exception_for_missing_generators():
    with pytest.raises(PresentationSyntaxError):
        parse_presentation("relators: x")


def test_raises_exception_for_missing_commutator():
    with pytest.raises(StructureClassError):
        parse_presentation("generators: x y z\nrelators: x*y*x^-1*y^-1\nclass: free-abelian")


def test_raises_exception_for_free_class_with_relators():
    with pytest.raises(StructureClassError):
        parse_presentation("generators: x\nrelators: x^2\nclass: free")


def test_raises_exception_for_inconsistent_product_relator():
    with pytest.raises(StructureClassError):
        parse_presentation(
            "generators: a b c\nrelators: a*b*a^-1*b^-1 a*c*a^-1*c^-1 b*c*b^-1*c^-1\n"
            "class: product-of-frees(a b; c)"
        )


def test_round_trips_presentation_text(f2xf2):
    assert parse_presentation(f2xf2.to_text()) == f2xf2


def test_reduces_words():
    assert reduce_word([1, -1, 2], 2).letters == (2,)
    assert reduce_word([], 2).is_identity
    assert reduce_word([1, 2, -2, -1], 2).is_identity


def test_raises_exception_for_letter_out_of_range():
    with pytest.raises(InputError):
        reduce_word([3], 2)


def test_multiplies_and_inverts_words(f2):
    xy = f2.word(1, 2)
    assert multiply_words(xy, f2.word(-2)) == f2.word(1)
    assert xy.inverse().letters == (-2, -1)
    assert invert_word(xy) == xy.inverse()
    assert (xy * xy.inverse()).is_identity


def test_raises_exception_for_mixed_alphabets(f2, z):
    with pytest.raises(AlphabetMismatchError):
        multiply_words(f2.word(1), z.word(1))


def test_conjugates_words(f2):
    assert conjugate(f2.word(1), f2.word(2)) == f2.word(1, 2, -1)


def test_parses_and_formats_words(f2):
    u = parse_word("x^2 * y^-1 * y * y^-3", f2)
    assert u.letters == (1, 1, -2, -2, -2)
    assert format_word(u, f2) == "x^2*y^-3"
    assert format_word(f2.identity(), f2) == "1"
    assert parse_word("1", f2).is_identity


def test_has_correct_free_abelian_normal_form(z2):
    assert normal_form(z2.word(1, 2, -1), z2) == NormalForm(StructureKind.FREE_ABELIAN, (0, 1))


def test_has_correct_product_normal_form():
    p = parse_presentation(
        "generators: x y z w\n"
        "relators: x*z*x^-1*z^-1 x*w*x^-1*w^-1 y*z*y^-1*z^-1 y*w*y^-1*w^-1\n"
        "class: product-of-frees(x y; z w)"
    )
    form = normal_form(p.word(1, 3, 2), p)
    assert form.value == (p.word(1, 2), p.word(3))


def test_free_normal_form_is_identity_map(f2):
    assert normal_form(f2.word(1, 1), f2).value == f2.word(1, 1)


def test_raises_exception_for_generic_normal_form(commutator):
    with pytest.raises(StructureClassError):
        normal_form(commutator.word(1), commutator)


def test_lifts_normal_forms_to_words(z2):
    form = NormalForm(StructureKind.FREE_ABELIAN, (2, -1))
    assert lift(form, z2).letters == (1, 1, -2)
    assert normal_form(lift(form, z2), z2) == form


def test_has_group_law_on_normal_forms(z2):
    f = normal_form(z2.word(1, 2), z2)
    g = normal_form(z2.word(-2, 1), z2)
    assert multiply_forms(f, g).value == (2, 0)
    assert multiply_forms(f, invert_form(f)).value == (0, 0)


def test_has_correct_ball_sizes(f2, z):
    assert [format_word(u, f2) for u in ball(f2, 1)] == ["1", "x", "x^-1", "y", "y^-1"]
    assert len(ball(f2, 2)) == ball_size(2, 2) == 17
    assert len(ball(z, 3)) == 7


def test_ball_is_in_shortlex_order(f2):
    words = ball(f2, 3)
    assert words == sorted(words, key=lambda u: u.sort_key)


def test_raises_exception_for_oversized_ball(f2):
    with pytest.raises(ResourceLimitError) as info:
        ball(f2, 3, cap=10)
    assert info.value.limit == "ball"


def test_loads_presentation_from_file(presentation_file, z2):
    assert load_presentation(presentation_file(z2.to_text())) == z2


def test_raises_exception_for_missing_file(tmp_path):
    with pytest.raises(InputError):
        load_presentation(tmp_path / "missing.txt")


def test_reduces_random_strings_consistently():
    rng = random.Random(21)
    for _ in range(1000):
        alphabet_size = rng.randint(1, 4)
        s = random_letters(rng, alphabet_size, 12)
        t = random_letters(rng, alphabet_size, 12)
        u, v = reduce_word(s, alphabet_size), reduce_word(t, alphabet_size)
        assert reduce_word(u.letters, alphabet_size) == u
        assert len(u) <= len(s)
        assert reduce_word(s + t, alphabet_size) == multiply_words(u, v)


@pytest.mark.parametrize("alphabet_size", [0, 1, 2, 3])
def test_has_ball_size_of_enumerated_ball(alphabet_size):
    letters = [i for i in range(1, alphabet_size + 1)] + [-i for i in range(1, alphabet_size + 1)]
    reached = set()
    for n in range(6):
        for string in itertools.product(letters, repeat=n):
            reached.add(reduce_word(string, alphabet_size))
        assert ball_size(alphabet_size, n) == len(reached) == len(ball(alphabet_size, n))


@pytest.mark.parametrize("name", ["f2", "z2", "f2xf2"])
def test_has_multiplicative_normal_forms(name, request):
    p = request.getfixturevalue(name)
    rng = random.Random(22)
    for _ in range(1000):
        u, v = random_word(rng, p, 8), random_word(rng, p, 8)
        assert normal_form(u * v, p) == multiply_forms(normal_form(u, p), normal_form(v, p))
        assert normal_form(u.inverse(), p) == invert_form(normal_form(u, p))

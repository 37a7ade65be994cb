import random
from fractions import Fraction

import numpy as np
import pytest
from scipy.stats import unitary_group

from gnorm import config
from gnorm.errors import (ElementSyntaxError, InputError, ResourceLimitError,
                          StructureClassError)
from gnorm.group_ring import (MatrixAssignment, constant, evaluate,
                              format_element, from_word, is_self_adjoint,
                              l1_norm, lift_to_free, multiply, parse_element,
                              radius, star, trace)
from gnorm.presentation import StructureKind
from pytest_helpers import random_element


def test_parses_element_with_three_terms(f2):
    a = parse_element("2 + x*y^-1 - 3*y^2", f2)
    assert len(a.terms()) == 3
    assert format_element(a) == "2 + x*y^-1 - 3*y^2"


def test_parses_symmetric_generator_sum(laplacian_f2):
    assert format_element(laplacian_f2) == "x + x^-1 + y + y^-1"
    assert is_self_adjoint(laplacian_f2)


def test_reduces_words_while_parsing(f2):
    assert parse_element("x*x^-1", f2) == constant(f2, 1)


def test_parses_rational_coefficients_and_products(z):
    a = parse_element("3/2*(1 + x)*(1 - x)", z)
    assert a == parse_element("3/2 - 3/2*x^2", z)


def test_parses_powers_of_sums(z):
    assert parse_element("(1 + x)^2", z) == parse_element("1 + 2*x + x^2", z)


def test_raises_exception_for_oversized_powers_in_element(f2, z):
    with pytest.raises(ResourceLimitError) as info:
        parse_element("1 + x^999999999", f2)
    assert info.value.limit == "power"
    with pytest.raises(ResourceLimitError):
        parse_element("y*x^-{}".format(config.SUPPORT_CAP + 1), f2)
    with pytest.raises(ResourceLimitError):
        parse_element("(1 + x)^999999999", z)
    assert parse_element("x^3*x^-3", f2) == constant(f2, 1)


def test_raises_exception_for_unknown_generator_in_element(f2):
    with pytest.raises(ElementSyntaxError) as info:
        parse_element("x + q", f2)
    assert info.value.column == 5


def test_raises_exception_for_malformed_element(f2):
    with pytest.raises(ElementSyntaxError):
        parse_element("x + ", f2)
    with pytest.raises(ElementSyntaxError):
        parse_element("", f2)
    with pytest.raises(ElementSyntaxError):
        parse_element("x $ y", f2)


def test_multiplies_on_z(z):
    a = parse_element("1 + x", z)
    assert multiply(a, star(a)) == parse_element("2 + x + x^-1", z)


def test_multiplies_on_free_group(f2):
    product = multiply(parse_element("x + y", f2), parse_element("x^-1", f2))
    assert product == parse_element("1 + y*x^-1", f2)


def test_has_unit_law(laplacian_f2, f2):
    assert multiply(laplacian_f2, constant(f2, 1)) == laplacian_f2


def test_multiplies_in_product_of_frees(f2xf2):
    product = multiply(parse_element("a*c", f2xf2), parse_element("c^-1*b", f2xf2))
    assert product == parse_element("a*b", f2xf2)


def test_raises_exception_for_generic_multiplication(commutator):
    a = parse_element("x + y", commutator)
    with pytest.raises(StructureClassError):
        multiply(a, a)


def test_adds_in_generic_presentation(commutator):
    a = parse_element("x*y", commutator) - parse_element("y*x", commutator)
    assert len(a.terms()) == 2


def test_has_correct_involution(f2):
    a = parse_element("2*x + 3*y", f2)
    b = parse_element("1 - x*y + y^2", f2)
    assert star(a) == parse_element("2*x^-1 + 3*y^-1", f2)
    assert star(star(a)) == a
    assert star(multiply(a, b)) == multiply(star(b), star(a))


def test_has_correct_trace(z):
    assert trace(parse_element("2 + 3*x", z)) == 2
    assert trace(parse_element("x", z)) == 0
    a = parse_element("1 + x", z)
    assert trace(multiply(star(a), a)) == 2


def test_has_correct_l1_norm(f2, laplacian_f2):
    assert l1_norm(parse_element("1 - x", f2)) == 2
    assert l1_norm(laplacian_f2) == 4
    assert l1_norm(constant(f2, 0)) == 0


def test_has_correct_radius(z2, f2):
    assert radius(parse_element("x*y - 2", f2)) == 2
    assert radius(parse_element("y*x*y^-1", z2)) == 1
    assert radius(constant(f2, 5)) == 0


def test_lifts_to_free_group(z2):
    free = lift_to_free(parse_element("y*x + 2", z2))
    assert free.presentation.kind == StructureKind.FREE
    assert format_element(free) == "2 + x*y"


def test_evaluates_on_matrices(z):
    a = parse_element("x + x^-1", z)
    m = MatrixAssignment((np.array([[0, 1], [1, 0]], dtype=complex),))
    assert np.allclose(evaluate(a, m), [[0, 2], [2, 0]])
    assert np.allclose(evaluate(constant(z, 1), m), np.eye(2))


def test_evaluation_is_multiplicative(f2):
    rng = np.random.default_rng(7)
    m = MatrixAssignment(tuple(rng.normal(size=(3, 3)) + 2 * np.eye(3) for _ in range(2)))
    a = parse_element("1 + x*y^-1 - 2*y", f2)
    b = parse_element("x^2 + 1/2*y", f2)
    assert np.allclose(evaluate(multiply(a, b), m), evaluate(a, m) @ evaluate(b, m))


def test_raises_exception_for_wrong_matrix_count(f2):
    with pytest.raises(ValueError):
        evaluate(parse_element("x", f2), MatrixAssignment((np.eye(2),)))


def test_raises_exception_for_violated_relators(z2):
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    y = np.diag([1, -1]).astype(complex)
    with pytest.raises(InputError):
        evaluate(parse_element("x", z2), MatrixAssignment((x, y)))


def test_builds_monomials(f2):
    assert from_word(f2, f2.word(1, 2), Fraction(1, 2)) == parse_element("1/2*x*y", f2)


@pytest.mark.parametrize("name", ["f2", "f2xf2"])
def test_has_tracial_trace_on_random_elements(name, request):
    p = request.getfixturevalue(name)
    rng = random.Random(11)
    for _ in range(500):
        a, b = random_element(rng, p), random_element(rng, p)
        assert trace(multiply(a, b)) == trace(multiply(b, a))


@pytest.mark.parametrize("name", ["f2", "z2", "f2xf2"])
def test_has_faithful_trace_on_random_elements(name, request):
    p = request.getfixturevalue(name)
    rng = random.Random(12)
    for _ in range(300):
        a = random_element(rng, p)
        value = trace(multiply(star(a), a))
        assert value == sum(c * c for c in a.coefficients.values())
        assert (value == 0) == (a == constant(p, 0))


@pytest.mark.parametrize("name", ["f2", "z2", "f2xf2"])
def test_has_submultiplicative_l1_norm(name, request):
    p = request.getfixturevalue(name)
    rng = random.Random(13)
    for _ in range(300):
        a, b = random_element(rng, p), random_element(rng, p)
        assert l1_norm(multiply(a, b)) <= l1_norm(a) * l1_norm(b)
        assert l1_norm(star(a)) == l1_norm(a)


def _unitaries(name: str, rng: np.random.Generator) -> MatrixAssignment:
    if name == "f2":
        return MatrixAssignment(tuple(unitary_group.rvs(3, random_state=rng) for _ in range(2)))
    if name == "z2":
        return MatrixAssignment(
            tuple(np.diag(np.exp(2j * np.pi * rng.random(3))) for _ in range(2))
        )
    left = [np.kron(unitary_group.rvs(2, random_state=rng), np.eye(2)) for _ in range(2)]
    right = [np.kron(np.eye(2), unitary_group.rvs(2, random_state=rng)) for _ in range(2)]
    return MatrixAssignment(tuple(left + right))


@pytest.mark.parametrize("name", ["f2", "z2", "f2xf2"])
def test_maps_star_to_adjoint_under_unitary_assignments(name, request):
    p = request.getfixturevalue(name)
    rng = random.Random(14)
    matrices = np.random.default_rng(14)
    for _ in range(50):
        a = random_element(rng, p)
        m = _unitaries(name, matrices)
        image = evaluate(a, m)
        assert np.abs(evaluate(star(a), m) - image.conj().T).max() <= 1e-10

import numpy as np
import pytest

from gnorm.errors import InputError, StructureClassError
from gnorm.group_ring import parse_element
from gnorm.lambda_lower import compression_lower_bound
from gnorm.rep_search import (choi_dilate, choi_dimension_bound,
                              dilation_lower_bound, permutation_matrices,
                              quotient_rep_lower_bound, sigma_max_lower,
                              structured_rep_lower_bound,
                              trivial_representation)
from gnorm.word_problem import PermutationQuotient

KLEIN_REGULAR = PermutationQuotient(4, ((1, 0, 3, 2), (2, 3, 0, 1)))


def test_dilates_zero_to_swap():
    assert np.allclose(choi_dilate(np.zeros((1, 1))), [[0, 1], [1, 0]])


def test_dilates_random_contractions():
    rng = np.random.default_rng(3)
    for k in (1, 2, 4, 8):
        for _ in range(100):
            t = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
            t *= rng.uniform(0, 0.95) / np.linalg.norm(t, 2)
            u = choi_dilate(t)
            assert u.shape == (2 * k, 2 * k)
            assert np.linalg.norm(u.conj().T @ u - np.eye(2 * k)) <= 1e-9
            assert np.abs(u[:k, :k] - t).max() <= 1e-12


def test_raises_exception_for_non_square_dilation():
    with pytest.raises(ValueError):
        choi_dilate(np.zeros((2, 3)))


def test_has_lower_estimate_of_largest_singular_value():
    value, vector = sigma_max_lower(np.diag([3.0, 4.0]))
    assert abs(value - (4 - 1e-8)) <= 1e-12
    assert abs(abs(vector[1]) - 1) <= 1e-12


def test_trivial_representation_gives_l1_norm_of_positive_element(laplacian_f2, f2):
    bound = structured_rep_lower_bound(laplacian_f2, 1, 1)
    assert bound.trial == 0
    assert bound.source == "representation"
    assert abs(bound.value - (4 - 1e-8)) <= 1e-12
    assert trivial_representation(f2, 3).verify(f2)


def test_keeps_best_trial(laplacian_f2):
    bound = structured_rep_lower_bound(laplacian_f2, 2, 4, seed=1)
    assert bound.value >= 4 - 1e-8 - 1e-12
    assert bound.representation.verify(laplacian_f2.presentation)


def test_finds_sign_character_on_z(z):
    bound = structured_rep_lower_bound(parse_element("1 - x", z), 1, 3, seed=2)
    assert bound.trial > 0
    assert bound.value >= 1.99
    assert bound.representation.feasibility == "exact:free-abelian"


def test_has_product_of_frees_representations(f2xf2):
    a = parse_element("a*c - b*d", f2xf2)
    bound = structured_rep_lower_bound(a, 2, 3, seed=4)
    assert bound.representation.verify(f2xf2)
    if bound.trial > 0:
        assert bound.representation.dimension == 4
        assert bound.representation.feasibility == "exact:product-of-frees"


def test_is_deterministic(laplacian_f2):
    a = laplacian_f2 - parse_element("3*x*y", laplacian_f2.presentation)
    first = structured_rep_lower_bound(a, 2, 3, seed=7)
    second = structured_rep_lower_bound(a, 2, 3, seed=7, workers=1)
    assert first.value == second.value
    assert first.trial == second.trial


def test_raises_exception_for_generic_structured_search(klein):
    with pytest.raises(StructureClassError):
        structured_rep_lower_bound(parse_element("x", klein), 2, 2)


def test_raises_exception_for_invalid_search_size(laplacian_f2):
    with pytest.raises(ValueError):
        structured_rep_lower_bound(laplacian_f2, 0, 2)
    with pytest.raises(ValueError):
        structured_rep_lower_bound(laplacian_f2, 2, 0)


def test_has_regular_representation_of_klein_group(klein):
    a = parse_element("1 + x + y + x*y", klein)
    bound = quotient_rep_lower_bound(a, KLEIN_REGULAR)
    assert bound.source == "quotient"
    assert abs(bound.value - (4 - 1e-8)) <= 1e-12
    assert permutation_matrices(KLEIN_REGULAR).verify(klein)


def test_raises_exception_for_quotient_violating_relators(klein):
    q = PermutationQuotient(3, ((1, 0, 2), (0, 2, 1)))
    with pytest.raises(InputError):
        quotient_rep_lower_bound(parse_element("x", klein), q)


def test_dilation_bound_dominates_compression(laplacian_f2):
    for radius in (0, 1, 2):
        dilation = dilation_lower_bound(laplacian_f2, radius)
        compression = compression_lower_bound(laplacian_f2, radius)
        assert dilation.value >= compression.value - 1e-6
        assert dilation.representation.unitarity_defect() <= 1e-9


def test_raises_exception_for_dilation_beyond_free_groups(laplacian_z2):
    with pytest.raises(StructureClassError):
        dilation_lower_bound(laplacian_z2, 1)


def test_has_choi_dimension_bound(laplacian_f2):
    assert choi_dimension_bound(laplacian_f2) == 8

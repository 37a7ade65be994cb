import pytest
from scipy import sparse

from gnorm import config
from gnorm.group_ring import parse_element
from gnorm.sos_program import assemble_sos_program
from gnorm.universal_upper import (NO_BOUND, UpperLevel, carry_minimum,
                                   solve_sdp, to_standard_form,
                                   upper_bound_at_level, upper_bound_sequence)
from gnorm.upper_certificate import l1_certificate


def test_has_lambda_block_first(z):
    program = assemble_sos_program(parse_element("1 + x", z), z, 1)
    problem = to_standard_form(program)
    assert problem.block_sizes == [1, 3]
    assert problem.constraint_count == program.row_count
    assert problem.constraints[0][program.identity_row, 0] == 1


def test_has_sparse_standard_form_for_product_of_frees_at_level_two(f2xf2):
    program = assemble_sos_program(parse_element("a*c", f2xf2), f2xf2, 2)
    problem = to_standard_form(program)
    assert program.row_count <= config.SDP_ROW_CAP
    assert problem.block_sizes == [1] + [65] * 9
    assert all(sparse.issparse(data) for data in problem.constraints)
    for data, n in zip(problem.constraints, problem.block_sizes):
        assert data.shape == (program.row_count, n * n)
    assert problem.constraints[1].nnz <= 2 * 65 * 65


def test_has_sharp_bound_on_z(z):
    a = parse_element("1 + x", z)
    outcome = upper_bound_at_level(a, z, 1)
    assert outcome.certified
    assert 2 <= outcome.certificate.bound <= 2.001
    assert outcome.certificate.verify(a)


def test_has_small_duality_gap(z, laplacian_f2, f2, commutator):
    for a, p in [
        (parse_element("1 + x", z), z),
        (laplacian_f2, f2),
        (parse_element("x + x^-1 + y + y^-1", commutator), commutator),
    ]:
        solution = solve_sdp(assemble_sos_program(a, p, 1))
        assert solution.is_optimal
        assert abs(solution.primal_objective - solution.dual_objective) <= 1e-6


def test_certified_bounds_are_sound(laplacian_z2, z2):
    outcome = upper_bound_at_level(laplacian_z2, z2, 1)
    assert outcome.certified
    assert outcome.certificate.bound >= 4 - 1e-9
    assert outcome.certificate.bound <= 4 + 1e-3


def test_has_nonincreasing_running_minimum(z):
    a = parse_element("1 + x", z)
    outcomes = upper_bound_sequence(a, z, [1, 2])
    assert [outcome.level for outcome in outcomes] == [1, 2]
    squares = [outcome.running_square for outcome in outcomes]
    assert all(square is not None for square in squares)
    assert squares[1] <= squares[0]
    for outcome in outcomes:
        assert outcome.certificate.verify(a)


def test_reports_level_below_radius_as_status(f2):
    outcome = upper_bound_at_level(parse_element("x*y", f2), f2, 1)
    assert not outcome.certified
    assert outcome.status != NO_BOUND


def test_carries_minimum_from_start(laplacian_f2, f2):
    certificate = l1_certificate(laplacian_f2, f2)
    levels = [UpperLevel(1, None, NO_BOUND), UpperLevel(2, certificate, "optimal")]
    carry_minimum(levels, start=20)
    assert levels[0].running_square == 20
    assert levels[1].running_square == 16


def test_raises_exception_for_invalid_levels(z):
    a = parse_element("1 + x", z)
    with pytest.raises(ValueError):
        upper_bound_sequence(a, z, [])
    with pytest.raises(ValueError):
        upper_bound_sequence(a, z, [2, 1])

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence

import numpy as np

from gnorm import config
from gnorm.errors import CertificationError, GnormError
from gnorm.group_ring import RingElement
from gnorm.presentation import Presentation
from gnorm.sdp_solver import SdpProblem, SdpSolution, SolverStatus, solve
from gnorm.sos_program import SosProgram, assemble_sos_program
from gnorm.upper_certificate import UpperCertificate, certify

logger = logging.getLogger(__name__)

NO_BOUND = "no bound at this level"


@dataclass
class NumericSolution:
    """Solver output mapped back to the program: L, one Gram matrix per block and the moment functional."""

    program: SosProgram
    lambda_value: float
    grams: List[np.ndarray]
    functional: np.ndarray
    primal_objective: float
    dual_objective: float
    status: SolverStatus
    iterations: int

    @property
    def is_optimal(self) -> bool:
        return self.status == SolverStatus.OPTIMAL


def to_standard_form(program: SosProgram) -> SdpProblem:
    """L becomes a nonnegative 1x1 block carrying the identity row; the Gram blocks follow."""
    m = program.row_count
    lambda_block = np.zeros((m, 1, 1))
    lambda_block[program.identity_row, 0, 0] = 1.0
    constraints = [lambda_block] + [
        program.constraint_matrices(block) for block in range(len(program.blocks))
    ]
    objective = [np.ones((1, 1))] + [np.zeros((n, n)) for n in program.block_sizes]
    return SdpProblem(constraints, program.rhs(), objective)


def solve_sdp(
    program: SosProgram,
    tolerance: float = config.SOLVER_TOLERANCE,
    max_iterations: int = config.SOLVER_MAX_ITERATIONS,
) -> NumericSolution:
    solution: SdpSolution = solve(to_standard_form(program), tolerance, max_iterations)
    logger.info(
        "Level %d: solver %s after %d iterations, primal %.10g, dual %.10g",
        program.level,
        solution.status.value,
        solution.iterations,
        solution.primal_objective,
        solution.dual_objective,
    )
    return NumericSolution(
        program,
        float(solution.primal[0][0, 0]),
        solution.primal[1:],
        solution.dual,
        solution.primal_objective,
        solution.dual_objective,
        solution.status,
        solution.iterations,
    )


def certify_upper_bound(
    a: RingElement, program: SosProgram, solution: NumericSolution
) -> UpperCertificate:
    """Exact certificate from a numeric solution; see `gnorm.upper_certificate.certify`."""
    return certify(a, program, solution.lambda_value, solution.grams)


@dataclass
class UpperLevel:
    """Outcome of one level: its certificate (if any) and the running minimum of certified squares."""

    level: int
    certificate: Optional[UpperCertificate]
    status: str
    running_square: Optional[Fraction] = None

    @property
    def certified(self) -> bool:
        return self.certificate is not None


def upper_bound_at_level(
    a: RingElement,
    p: Presentation,
    level: int,
    tolerance: float = config.SOLVER_TOLERANCE,
) -> UpperLevel:
    """Assembles, solves and certifies one level; failures become a status, never an exception."""
    try:
        program = assemble_sos_program(a, p, level)
        solution = solve_sdp(program, tolerance)
        if solution.status == SolverStatus.INFEASIBLE:
            return UpperLevel(level, None, NO_BOUND)
        if solution.status == SolverStatus.NUMERICAL_FAILURE:
            return UpperLevel(level, None, solution.status.value)
        certificate = certify_upper_bound(a, program, solution)
        return UpperLevel(level, certificate, solution.status.value)
    except (GnormError, ValueError) as error:
        logger.info("Level %d failed: %s", level, error)
        status = "certification failed" if isinstance(error, CertificationError) else str(error)
        return UpperLevel(level, None, status)


def carry_minimum(levels: Sequence[UpperLevel], start: Optional[Fraction] = None) -> None:
    """Sets the running minimum of certified squared bounds on every level, in order."""
    best = start
    for outcome in levels:
        if outcome.certificate is not None:
            square = outcome.certificate.bound_square
            best = square if best is None else min(best, square)
        outcome.running_square = best


def upper_bound_sequence(
    a: RingElement,
    p: Presentation,
    levels: Sequence[int],
    tolerance: float = config.SOLVER_TOLERANCE,
    workers: Optional[int] = None,
) -> List[UpperLevel]:
    """Certified upper bounds on the universal norm for ascending levels, solved concurrently.

    The reported sequence carries the running minimum; every certificate stays valid on its own.

    Raises:
        ValueError: If levels is empty or not strictly ascending.
    """
    if not levels or any(x >= y for x, y in zip(levels, levels[1:])):
        raise ValueError("Levels must be nonempty and strictly ascending: {}".format(list(levels)))
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="sos-level") as pool:
        outcomes = list(
            pool.map(lambda level: upper_bound_at_level(a, p, level, tolerance), levels)
        )
    carry_minimum(outcomes)
    return outcomes

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy import sparse

from gnorm import config

logger = logging.getLogger(__name__)

STEP_FACTOR = 0.95

KRON_ENTRY_CAP = 2**25

SCHUR_CHUNK_ENTRIES = 2**24


class SolverStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    MAX_ITERATIONS = "max_iterations"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass
class SdpProblem:
    """Block semidefinite program in standard form.

    Primal: minimize sum <C_b, X_b> subject to sum_b <A_kb, X_b> = b_k and every X_b PSD.
    Dual: maximize b^T y subject to C_b - sum_k y_k A_kb = S_b PSD.
    `constraints[b]` holds the symmetric A_kb, either as a dense array (m, n_b, n_b) or as a
    (sparse) matrix (m, n_b * n_b) of row-major flattenings. It is stored as a CSR matrix.
    """

    constraints: List[Any]
    rhs: np.ndarray
    objective: List[np.ndarray]

    def __post_init__(self):
        if len(self.constraints) != len(self.objective):
            raise ValueError("Every block needs a constraint array and an objective matrix")
        m = self.rhs.shape[0]
        flattened = []
        for data, c in zip(self.constraints, self.objective):
            n = c.shape[0]
            if data.shape not in ((m, n, n), (m, n * n)) or c.shape != (n, n):
                raise ValueError(
                    "Inconsistent block shapes {} and {} for {} constraints".format(
                        data.shape, c.shape, m
                    )
                )
            if isinstance(data, np.ndarray):
                data = data.reshape(m, n * n)
            flattened.append(sparse.csr_matrix(data))
        self.constraints = flattened

    @property
    def constraint_count(self) -> int:
        return self.rhs.shape[0]

    @property
    def block_sizes(self) -> List[int]:
        return [c.shape[0] for c in self.objective]


@dataclass
class SdpSolution:
    status: SolverStatus
    primal: List[np.ndarray]
    slack: List[np.ndarray]
    dual: np.ndarray
    primal_objective: float
    dual_objective: float
    iterations: int
    primal_infeasibility: float = math.inf
    dual_infeasibility: float = math.inf
    dropped_rows: List[int] = field(default_factory=list)

    @property
    def gap(self) -> float:
        return abs(self.primal_objective - self.dual_objective)

    @property
    def is_optimal(self) -> bool:
        return self.status == SolverStatus.OPTIMAL


# --------------------------------------------------------------------#
#                          Linear operators                          #
# --------------------------------------------------------------------#


def _apply(constraints: Sequence[sparse.csr_matrix], blocks: Sequence[np.ndarray]) -> np.ndarray:
    return sum(data @ x.ravel() for data, x in zip(constraints, blocks))


def _adjoint(constraints: Sequence[sparse.csr_matrix], y: np.ndarray) -> List[np.ndarray]:
    result = []
    for data in constraints:
        n = math.isqrt(data.shape[1])
        result.append(np.asarray(data.T @ y).reshape(n, n))
    return result


def _inner(left: Sequence[np.ndarray], right: Sequence[np.ndarray]) -> float:
    return float(sum(np.vdot(x, s) for x, s in zip(left, right)))


def _sym(matrix: np.ndarray) -> np.ndarray:
    return (matrix + matrix.T) / 2


def _independent_rows(
    constraints: Sequence[sparse.csr_matrix], rhs: np.ndarray
) -> Tuple[List[int], bool]:
    """Indices of a maximal independent set of constraints and whether the others are consistent.

    Works on the Gram matrix A A^T, which has the same row dependencies as A.
    """
    flat = sparse.hstack(constraints).tocsr()
    gram = (flat @ flat.T).toarray()
    r, pivots = scipy.linalg.qr(gram, mode="r", pivoting=True)
    diagonal = np.abs(np.diag(r))
    if diagonal.size == 0 or diagonal[0] == 0:
        return [], bool(np.all(rhs == 0))
    rank = int(np.sum(diagonal > 1e-10 * diagonal[0]))
    kept = sorted(int(k) for k in pivots[:rank])
    dropped = sorted(int(k) for k in pivots[rank:])
    if not dropped:
        return kept, True
    coefficients, *_ = scipy.linalg.lstsq(gram[np.ix_(kept, kept)], gram[np.ix_(kept, dropped)])
    mismatch = np.abs(coefficients.T @ rhs[kept] - rhs[dropped])
    return kept, bool(np.all(mismatch <= 1e-8 * (1 + np.abs(rhs[dropped]))))


def _max_step(point: Sequence[np.ndarray], direction: Sequence[np.ndarray]) -> float:
    """Largest step keeping every block positive semidefinite, capped at 1."""
    step = 1.0
    for p, d in zip(point, direction):
        lower = scipy.linalg.cholesky(p, lower=True)
        w = scipy.linalg.solve_triangular(lower, d, lower=True)
        w = scipy.linalg.solve_triangular(lower, w.T, lower=True)
        smallest = float(np.linalg.eigvalsh(_sym(w))[0])
        if smallest < 0:
            step = min(step, -1.0 / smallest)
    return step


def _add_block_schur(
    matrix: np.ndarray, data: sparse.csr_matrix, x: np.ndarray, z: np.ndarray
) -> None:
    """Adds <A_i, X A_j Z> over the rows the block touches, in chunks of columns."""
    n = x.shape[0]
    active = np.flatnonzero(np.diff(data.indptr))
    if active.size == 0:
        return
    rows = data[active]
    # vec(X A Z) = kron(X, Z^T) vec(A) for row-major flattening
    kron = np.kron(x, z.T).T if n**4 <= KRON_ENTRY_CAP else None
    step = max(1, SCHUR_CHUNK_ENTRIES // (n * n))
    for start in range(0, active.size, step):
        chunk = rows[start : start + step]
        if kron is not None:
            product = np.asarray(chunk @ kron)
        else:
            product = np.stack(
                [(x @ (chunk[k].reshape(n, n) @ z)).ravel() for k in range(chunk.shape[0])]
            )
        matrix[np.ix_(active, active[start : start + step])] += rows @ product.T


class _SchurSystem:
    """Schur complement M[i, j] = <A_i, X A_j S^-1> of the HKM search direction."""

    def __init__(
        self,
        constraints: Sequence[sparse.csr_matrix],
        x: Sequence[np.ndarray],
        inverse_slack: Sequence[np.ndarray],
    ) -> None:
        m = constraints[0].shape[0]
        matrix = np.zeros((m, m))
        for data, xb, zb in zip(constraints, x, inverse_slack):
            _add_block_schur(matrix, data, xb, zb)
        self.matrix = _sym(matrix)
        self._factor: Optional[Tuple[np.ndarray, bool]] = None
        try:
            self._factor = scipy.linalg.cho_factor(self.matrix)
        except np.linalg.LinAlgError:
            shift = 1e-12 * max(float(np.trace(self.matrix)), 1.0)
            try:
                self._factor = scipy.linalg.cho_factor(self.matrix + shift * np.eye(m))
            except np.linalg.LinAlgError:
                logger.debug("Schur complement is singular, falling back to least squares")

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._factor is not None:
            return scipy.linalg.cho_solve(self._factor, rhs)
        solution, *_ = np.linalg.lstsq(self.matrix, rhs, rcond=None)
        return solution


# --------------------------------------------------------------------#
#                               Solver                               #
# --------------------------------------------------------------------#


def solve(
    problem: SdpProblem,
    tolerance: float = config.SOLVER_TOLERANCE,
    max_iterations: int = config.SOLVER_MAX_ITERATIONS,
) -> SdpSolution:
    """Solves a block semidefinite program with an infeasible-start primal-dual interior point method.

    Search directions are HKM directions with a Mehrotra predictor-corrector step. Linearly
    dependent constraints are removed first; inconsistent ones make the program infeasible.

    Args:
        problem: The program.
        tolerance: Bound on relative primal and dual infeasibility and on the relative gap.
        max_iterations: Iteration limit.

    Returns:
        The last iterate with its status. Never raises for numerical trouble; the status tells.

    Raises:
        ValueError: If the tolerance is not positive.
    """
    if tolerance <= 0:
        raise ValueError("Invalid solver tolerance: {}".format(tolerance))
    sizes = problem.block_sizes
    total = sum(sizes)
    kept, consistent = _independent_rows(problem.constraints, problem.rhs)
    dropped = sorted(set(range(problem.constraint_count)) - set(kept))
    constraints = [data[kept] for data in problem.constraints]
    b = problem.rhs[kept]
    c = [_sym(matrix) for matrix in problem.objective]
    x = [np.eye(n) for n in sizes]
    s = [np.eye(n) for n in sizes]
    y = np.zeros(len(kept))

    def result(status: SolverStatus, iterations: int, rp: float, rd: float) -> SdpSolution:
        full = np.zeros(problem.constraint_count)
        full[kept] = y
        return SdpSolution(
            status,
            x,
            s,
            full,
            _inner(c, x),
            float(b @ y),
            iterations,
            rp,
            rd,
            dropped,
        )

    if not consistent:
        logger.info("Constraints are inconsistent")
        return result(SolverStatus.INFEASIBLE, 0, math.inf, math.inf)
    if not kept:
        return result(SolverStatus.OPTIMAL, 0, 0.0, 0.0)

    norm_b = float(np.linalg.norm(b))
    norm_c = math.sqrt(sum(float(np.sum(matrix**2)) for matrix in c))
    row_norms = np.sqrt(
        sum(np.asarray(data.multiply(data).sum(axis=1)).ravel() for data in constraints)
    )
    xi = max(10.0, math.sqrt(total), float(np.max((1 + np.abs(b)) / (1 + row_norms))) * total)
    eta = max(10.0, math.sqrt(total), float(np.max(row_norms)), norm_c)
    x = [xi * matrix for matrix in x]
    s = [eta * matrix for matrix in s]

    rp_norm, rd_norm = math.inf, math.inf
    for iteration in range(max_iterations):
        rp = b - _apply(constraints, x)
        at_y = _adjoint(constraints, y)
        rd = [cb - sb - ab for cb, sb, ab in zip(c, s, at_y)]
        primal_objective = _inner(c, x)
        dual_objective = float(b @ y)
        rp_norm = float(np.linalg.norm(rp)) / (1 + norm_b)
        rd_norm = math.sqrt(sum(float(np.sum(r**2)) for r in rd)) / (1 + norm_c)
        gap = abs(primal_objective - dual_objective) / (
            1 + abs(primal_objective) + abs(dual_objective)
        )
        logger.debug(
            "Iteration %d: primal %.10g dual %.10g (infeasibility %.2e, %.2e, gap %.2e)",
            iteration,
            primal_objective,
            dual_objective,
            rp_norm,
            rd_norm,
            gap,
        )
        if rp_norm < tolerance and rd_norm < tolerance and gap < tolerance:
            return result(SolverStatus.OPTIMAL, iteration, rp_norm, rd_norm)
        if dual_objective > config.UNBOUNDED_DUAL_THRESHOLD * max(1.0, norm_c):
            logger.info("Dual objective is unbounded, the primal program is infeasible")
            return result(SolverStatus.INFEASIBLE, iteration, rp_norm, rd_norm)
        try:
            z = [scipy.linalg.cho_solve(scipy.linalg.cho_factor(sb), np.eye(sb.shape[0])) for sb in s]
            z = [_sym(zb) for zb in z]
            schur = _SchurSystem(constraints, x, z)
            mu = _inner(x, s) / total
            x_rd_z = _apply(constraints, [xb @ r @ zb for xb, r, zb in zip(x, rd, z)])

            def direction(
                target: List[np.ndarray],
            ) -> Tuple[np.ndarray, List[np.ndarray], List[np.ndarray]]:
                dy = schur.solve(rp - _apply(constraints, target) + x_rd_z)
                at_dy = _adjoint(constraints, dy)
                ds = [r - a for r, a in zip(rd, at_dy)]
                dx = [_sym(t - xb @ d @ zb) for t, xb, d, zb in zip(target, x, ds, z)]
                return dy, dx, ds

            dy, dx, ds = direction([-xb for xb in x])
            alpha_p = _max_step(x, dx)
            alpha_d = _max_step(s, ds)
            mu_affine = (
                _inner(
                    [xb + alpha_p * d for xb, d in zip(x, dx)],
                    [sb + alpha_d * d for sb, d in zip(s, ds)],
                )
                / total
            )
            sigma = min(1.0, max(0.0, mu_affine / mu)) ** 3
            target = [
                sigma * mu * zb - xb - dxb @ dsb @ zb
                for zb, xb, dxb, dsb in zip(z, x, dx, ds)
            ]
            dy, dx, ds = direction(target)
            alpha_p = min(1.0, STEP_FACTOR * _max_step(x, dx))
            alpha_d = min(1.0, STEP_FACTOR * _max_step(s, ds))
        except (np.linalg.LinAlgError, ValueError) as error:
            logger.info("Numerical failure in iteration %d: %s", iteration, error)
            return result(SolverStatus.NUMERICAL_FAILURE, iteration, rp_norm, rd_norm)
        x = [xb + alpha_p * d for xb, d in zip(x, dx)]
        s = [sb + alpha_d * d for sb, d in zip(s, ds)]
        y = y + alpha_d * dy
    return result(SolverStatus.MAX_ITERATIONS, max_iterations, rp_norm, rd_norm)

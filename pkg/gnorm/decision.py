import logging
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from gnorm import config
from gnorm.bounds_report import (INVERTIBLE, NONTRIVIAL, NOT_INVERTIBLE,
                                 REDUCED_VIA_AMENABLE, TRIVIAL, UNIVERSAL,
                                 UNKNOWN, WORD_THRESHOLD, BoundsReport,
                                 InvertibilityVerdict, LowerEntry,
                                 NormWordVerdict, SpectrumEnclosure,
                                 UpperEntry, now)
from gnorm.errors import (AlphabetMismatchError, GnormError, InputError,
                          ResourceLimitError)
from gnorm.group_ring import (RingElement, constant, form_of, format_element,
                              from_word, is_self_adjoint, l1_norm,
                              lift_to_free, multiply, radius, star)
from gnorm.helpers import float_down, float_up
from gnorm.lambda_lower import MomentLadder, compression_lower_bound
from gnorm.presentation import Presentation, StructureKind, Word, format_word
from gnorm.rep_search import (TRIALS, RepresentationBound,
                              choi_dimension_bound, dilation_lower_bound,
                              quotient_rep_lower_bound,
                              structured_rep_lower_bound)
from gnorm.universal_upper import upper_bound_at_level
from gnorm.upper_certificate import l1_certificate
from gnorm.validator import Validator
from gnorm.word_problem import (SearchBudget, StepCounter,
                                enumerate_finite_quotients)

logger = logging.getLogger(__name__)


class BoundsConfig:
    """Settings of one bounds run. Budgets count rounds and enumeration steps, never seconds."""

    _target_gap: float = 1e-3
    _budget_steps: int = 8
    _levels: Optional[List[int]] = None
    _moments: int = 64
    _compression_radius: int = 4
    _rep_dim: int = 2
    _trials: int = 4
    _seed: int = 0
    _amenable: bool = False
    _tolerance: float = config.SOLVER_TOLERANCE
    _invertibility_tolerance: float = config.INVERTIBILITY_TOLERANCE
    _quotient_degree: int = 4
    _word_budget: SearchBudget = SearchBudget()
    _workers: Optional[int] = None

    def __init__(
        self,
        target_gap: float = 1e-3,
        budget_steps: int = 8,
        levels: Optional[Sequence[int]] = None,
        moments: int = 64,
        compression_radius: int = 4,
        rep_dim: int = 2,
        trials: int = 4,
        seed: int = 0,
        amenable: bool = False,
        tolerance: float = config.SOLVER_TOLERANCE,
        invertibility_tolerance: float = config.INVERTIBILITY_TOLERANCE,
        quotient_degree: int = 4,
        word_budget: Optional[SearchBudget] = None,
        workers: Optional[int] = None,
    ) -> None:
        """Creates a run configuration.

        Args:
            target_gap: The run stops once best upper minus best lower is at most this value.
            budget_steps: Maximum number of rounds; every engine runs at most one stage per round.
            levels: Ascending SOS levels after the l1 certificate; None picks deg a and deg a + 1, [] keeps the l1 certificate only.
            moments: Largest moment order n.
            compression_radius: Largest compression radius.
            rep_dim: Largest representation dimension searched.
            trials: Trials per representation dimension, trial 0 being the trivial representation.
            seed: Seed of the representation search.
            amenable: Asserts that the reduced and the universal norm agree; only labels the report.
            tolerance: Solver tolerance.
            invertibility_tolerance: Margin of NotInvertibleWithinTolerance verdicts.
            quotient_degree: Largest permutation degree for generic presentations.
            word_budget: Steps per quotient enumeration stage and for word searches.
            workers: Thread count of a round, None for the executor default.
        """
        self.target_gap = target_gap
        self.budget_steps = budget_steps
        self.levels = levels
        self.moments = moments
        self.compression_radius = compression_radius
        self.rep_dim = rep_dim
        self.trials = trials
        self.seed = seed
        self.amenable = amenable
        self.tolerance = tolerance
        self.invertibility_tolerance = invertibility_tolerance
        self.quotient_degree = quotient_degree
        self.word_budget = SearchBudget() if word_budget is None else word_budget
        self.workers = workers

    # --------------------------------------------------------------------#
    #                             Properties                             #
    # --------------------------------------------------------------------#

    @property
    def target_gap(self) -> float:
        return self._target_gap

    @target_gap.setter
    def target_gap(self, value: float):
        if not value >= 0:
            raise ValueError("Target gap must not be negative: {}".format(value))
        self._target_gap = float(value)

    @property
    def budget_steps(self) -> int:
        return self._budget_steps

    @budget_steps.setter
    def budget_steps(self, value: int):
        if value < 1:
            raise ValueError("Step budget must be positive: {}".format(value))
        self._budget_steps = value

    @property
    def levels(self) -> Optional[List[int]]:
        return self._levels

    @levels.setter
    def levels(self, value: Optional[Sequence[int]]):
        if value is not None:
            value = list(value)
            if any(level < 1 for level in value) or any(
                x >= y for x, y in zip(value, value[1:])
            ):
                raise ValueError(
                    "Levels must be positive and strictly ascending: {}".format(value)
                )
        self._levels = value

    @property
    def moments(self) -> int:
        return self._moments

    @moments.setter
    def moments(self, value: int):
        if value < 0:
            raise ValueError("Invalid moment order: {}".format(value))
        self._moments = value

    @property
    def compression_radius(self) -> int:
        return self._compression_radius

    @compression_radius.setter
    def compression_radius(self, value: int):
        if value < 0:
            raise ValueError("Invalid compression radius: {}".format(value))
        self._compression_radius = value

    @property
    def rep_dim(self) -> int:
        return self._rep_dim

    @rep_dim.setter
    def rep_dim(self, value: int):
        if value < 0:
            raise ValueError("Invalid representation dimension: {}".format(value))
        self._rep_dim = value

    @property
    def trials(self) -> int:
        return self._trials

    @trials.setter
    def trials(self, value: int):
        if value < 1:
            raise ValueError("Trial count must be positive: {}".format(value))
        self._trials = value

    @property
    def seed(self) -> int:
        return self._seed

    @seed.setter
    def seed(self, value: int):
        if value < 0:
            raise ValueError("Seed must not be negative: {}".format(value))
        self._seed = value

    @property
    def amenable(self) -> bool:
        return self._amenable

    @amenable.setter
    def amenable(self, value: bool):
        self._amenable = bool(value)

    @property
    def tolerance(self) -> float:
        return self._tolerance

    @tolerance.setter
    def tolerance(self, value: float):
        if not value > 0:
            raise ValueError("Solver tolerance must be positive: {}".format(value))
        self._tolerance = float(value)

    @property
    def invertibility_tolerance(self) -> float:
        return self._invertibility_tolerance

    @invertibility_tolerance.setter
    def invertibility_tolerance(self, value: float):
        if not value > 0:
            raise ValueError("Invertibility tolerance must be positive: {}".format(value))
        self._invertibility_tolerance = float(value)

    @property
    def quotient_degree(self) -> int:
        return self._quotient_degree

    @quotient_degree.setter
    def quotient_degree(self, value: int):
        if not 0 <= value <= config.QUOTIENT_DEGREE_CAP:
            raise ValueError("Invalid quotient degree: {}".format(value))
        self._quotient_degree = value

    @property
    def word_budget(self) -> SearchBudget:
        return self._word_budget

    @word_budget.setter
    def word_budget(self, value: SearchBudget):
        self._word_budget = value

    @property
    def workers(self) -> Optional[int]:
        return self._workers

    @workers.setter
    def workers(self, value: Optional[int]):
        if value is not None and value < 1:
            raise ValueError("Worker count must be positive: {}".format(value))
        self._workers = value

    # --------------------------------------------------------------------#
    #                           Public methods                           #
    # --------------------------------------------------------------------#

    def levels_for(self, a: RingElement) -> List[int]:
        if self.levels is not None:
            return list(self.levels)
        start = max(1, radius(a))
        return [start, start + 1]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "target_gap": self.target_gap,
            "budget_steps": self.budget_steps,
            "levels": self.levels,
            "moments": self.moments,
            "compression_radius": self.compression_radius,
            "rep_dim": self.rep_dim,
            "trials": self.trials,
            "seed": self.seed,
            "amenable": self.amenable,
            "tolerance": self.tolerance,
            "invertibility_tolerance": self.invertibility_tolerance,
            "quotient_degree": self.quotient_degree,
            "word_budget": {
                "steps": self.word_budget.steps,
                "max_depth": self.word_budget.max_depth,
                "max_degree": self.word_budget.max_degree,
            },
        }


# --------------------------------------------------------------------#
#                               Engines                              #
# --------------------------------------------------------------------#


@dataclass
class StageResult:
    lower: List[LowerEntry] = field(default_factory=list)
    upper: List[Tuple[UpperEntry, Optional[Dict[str, Any]]]] = field(default_factory=list)
    annotations: List[str] = field(default_factory=list)
    done: bool = False


Stage = Callable[[], StageResult]


def _representation_entry(bound: RepresentationBound, detail: str) -> LowerEntry:
    return LowerEntry(
        bound.value,
        Fraction(bound.value) ** 2,
        bound.source,
        "{}; {}".format(detail, bound.note) if bound.source == "representation" else detail,
        timestamp=now(),
    )


def _upper_stages(a: RingElement, settings: BoundsConfig) -> List[Stage]:
    p = a.presentation

    def l1_stage() -> StageResult:
        certificate = l1_certificate(a, p)
        entry = UpperEntry(
            certificate.bound, certificate.bound_square, 0, True, "l1", timestamp=now()
        )
        return StageResult(upper=[(entry, certificate.to_dict())])

    def level_stage(level: int) -> Stage:
        def run() -> StageResult:
            outcome = upper_bound_at_level(a, p, level, settings.tolerance)
            if outcome.certificate is None:
                return StageResult(annotations=["level {}: {}".format(level, outcome.status)])
            certificate = outcome.certificate
            entry = UpperEntry(
                certificate.bound,
                certificate.bound_square,
                level,
                True,
                outcome.status,
                timestamp=now(),
            )
            return StageResult(upper=[(entry, certificate.to_dict())])

        return run

    return [l1_stage] + [level_stage(level) for level in settings.levels_for(a)]


def _moment_orders(n_max: int) -> List[int]:
    orders, n = [], 1
    while n < n_max:
        orders.append(n)
        n *= 2
    return orders + [n_max] if n_max >= 1 else []


def _moment_stages(a: RingElement, settings: BoundsConfig) -> List[Stage]:
    ladder = MomentLadder(a)

    def stage(n: int) -> Stage:
        def run() -> StageResult:
            try:
                sequence = ladder.extend_to(n)
                done = False
            except ResourceLimitError as error:
                warnings.warn("Moment ladder truncated: {}".format(error))
                sequence = ladder.sequence
                done = True
            best = sequence.best
            result = StageResult(done=done)
            if best is not None:
                result.lower.append(
                    LowerEntry(
                        best.value, best.bound**2, "moment", "n={}".format(best.n), timestamp=now()
                    )
                )
            if done:
                result.annotations.append("moments stopped at n={}".format(len(sequence.entries)))
            return result

        return run

    return [stage(n) for n in _moment_orders(settings.moments)]


def _compression_stages(a: RingElement, settings: BoundsConfig) -> List[Stage]:
    def stage(radius_: int) -> Stage:
        def run() -> StageResult:
            bound = compression_lower_bound(a, radius_)
            return StageResult(
                lower=[
                    LowerEntry(
                        bound.value,
                        bound.rayleigh,
                        "compression",
                        "radius={}, dimension={}".format(radius_, bound.dimension),
                        timestamp=now(),
                    )
                ]
            )

        return run

    return [stage(radius_) for radius_ in range(settings.compression_radius + 1)]


def _representation_stages(a: RingElement, settings: BoundsConfig) -> List[Stage]:
    def stage(dimension: int) -> Stage:
        def run() -> StageResult:
            bound = structured_rep_lower_bound(
                a, dimension, settings.trials, settings.seed, workers=settings.workers
            )
            return StageResult(
                lower=[
                    _representation_entry(
                        bound, "dimension={}, trial={}".format(dimension, bound.trial)
                    )
                ]
            )

        return run

    def dilation_stage() -> StageResult:
        bound = dilation_lower_bound(a, 1)
        return StageResult(lower=[_representation_entry(bound, "radius=1")])

    stages = [stage(dimension) for dimension in range(1, settings.rep_dim + 1)]
    if a.presentation.kind == StructureKind.FREE and settings.compression_radius >= 1:
        stages.append(dilation_stage)
    return stages


def _quotient_stages(a: RingElement, settings: BoundsConfig) -> List[Stage]:
    p = a.presentation

    def stage(degree: int) -> Stage:
        def run() -> StageResult:
            counter = StepCounter(settings.word_budget.steps)
            best: Optional[RepresentationBound] = None
            for quotient in enumerate_finite_quotients(p, degree, counter):
                if quotient.degree < degree:
                    continue
                bound = quotient_rep_lower_bound(a, quotient)
                if best is None or bound.value > best.value:
                    best = bound
            result = StageResult()
            if best is not None:
                result.lower.append(_representation_entry(best, "degree={}".format(degree)))
            if counter.steps >= counter.limit:
                result.annotations.append(
                    "quotient enumeration of degree {} ran out of steps".format(degree)
                )
            return result

        return run

    return [stage(degree) for degree in range(1, settings.quotient_degree + 1)]


def _engines(a: RingElement, settings: BoundsConfig, report: BoundsReport) -> Dict[str, List[Stage]]:
    kind = a.presentation.kind
    engines: Dict[str, List[Stage]] = {"upper": _upper_stages(a, settings)}
    if kind == StructureKind.GENERIC:
        report.annotate("moment and compression bounds need a normal form")
        engines["quotient"] = _quotient_stages(a, settings)
    else:
        engines["moment"] = _moment_stages(a, settings)
        engines["compression"] = _compression_stages(a, settings)
    if kind in TRIALS:
        engines["representation"] = _representation_stages(a, settings)
    return engines


def _run_stage(name: str, stage: Stage) -> StageResult:
    try:
        return stage()
    except (GnormError, ValueError, ArithmeticError, np.linalg.LinAlgError) as error:
        logger.info("Engine %s failed: %s", name, error)
        return StageResult(annotations=["{} engine failed: {}".format(name, error)], done=True)


def _gap_reached(report: BoundsReport, target_gap: float) -> bool:
    gap = report.gap
    return gap is not None and gap <= target_gap


def _run(
    a: RingElement,
    settings: BoundsConfig,
    stop: Callable[[BoundsReport], bool],
    text: Optional[str] = None,
) -> BoundsReport:
    p = a.presentation
    report = BoundsReport(
        p.to_text(),
        format_element(a) if text is None else text,
        REDUCED_VIA_AMENABLE if settings.amenable else UNIVERSAL,
        settings.to_dict(),
        settings.seed,
    )
    if p.kind == StructureKind.FREE:
        report.advisory["choi_dimension"] = choi_dimension_bound(a)
    started = time.perf_counter()
    engines = _engines(a, settings, report)
    positions = {name: 0 for name in engines}
    rounds = 0
    while rounds < settings.budget_steps:
        active = [
            (name, engines[name][positions[name]])
            for name in engines
            if positions[name] < len(engines[name])
        ]
        if not active:
            break
        rounds += 1
        with ThreadPoolExecutor(
            max_workers=settings.workers, thread_name_prefix="bounds-engine"
        ) as pool:
            results = list(pool.map(lambda item: _run_stage(*item), active))
        for (name, _), result in zip(active, results):
            for lower in result.lower:
                report.add_lower(lower)
            for upper, certificate in result.upper:
                report.add_upper(upper, certificate)
            for message in result.annotations:
                report.annotate(message)
            positions[name] = len(engines[name]) if result.done else positions[name] + 1
        logger.info("Round %d: gap %s", rounds, report.gap)
        if stop(report):
            break
    report.budget = {"rounds": rounds, **positions}
    report.advisory["wall_clock"] = time.perf_counter() - started
    return report


# --------------------------------------------------------------------#
#                             Operations                             #
# --------------------------------------------------------------------#


def run_norm_bounds(a: RingElement, settings: Optional[BoundsConfig] = None) -> BoundsReport:
    """Paired certified lower and upper bounds on the universal norm of a.

    The l1 certificate and the SOS levels give upper bounds. Moments, compressions,
    representations and (for generic presentations) finite quotients give lower bounds; the
    reduced norm bounds from moments and compressions are lower bounds for the universal norm
    too. Engines run one stage per round, concurrently; results are merged in engine order.
    The run stops at the target gap or after the round budget, and engine failures become
    annotations of the report.
    """
    settings = BoundsConfig() if settings is None else settings
    return _run(a, settings, lambda report: _gap_reached(report, settings.target_gap))


def gap_missed(report: BoundsReport, settings: BoundsConfig) -> bool:
    return not _gap_reached(report, settings.target_gap)


def _rekey(free: RingElement, a: RingElement) -> RingElement:
    """Maps an element of the free group ring to the presented group of a."""
    p = a.presentation
    result: Dict[Any, Fraction] = {}
    for form, value in free.coefficients.items():
        key = form_of(form.value, p)  # type: ignore
        result[key] = result.get(key, Fraction(0)) + value
    return RingElement(p, result)


def shifted_square(a: RingElement, lambda_: Fraction) -> RingElement:
    """L - a*a, computed in the free group ring so that generic presentations work too."""
    free = lift_to_free(a)
    return _rekey(constant(free.presentation, lambda_) - multiply(star(free), free), a)


def decide_invertibility(
    a: RingElement, settings: Optional[BoundsConfig] = None
) -> InvertibilityVerdict:
    """Tests invertibility of a in the universal group C*-algebra.

    With L = ||a||_1^2, a is invertible exactly when ||L - a*a|| < L. A certified upper bound
    whose exact square is below L^2 proves invertibility; a lower bound of at least
    L - tolerance gives NotInvertibleWithinTolerance. Equality itself is never certified.

    Raises:
        InputError: If a is zero.
    """
    settings = BoundsConfig() if settings is None else settings
    if a.is_zero:
        raise InputError("The zero element is not invertible")
    lambda_ = l1_norm(a) ** 2
    b = shifted_square(a, lambda_)
    threshold = float(lambda_) - settings.invertibility_tolerance

    def decided(report: BoundsReport) -> bool:
        upper, lower = report.best_upper, report.best_lower
        return (upper is not None and upper.square < lambda_**2) or (
            lower is not None and lower.value >= threshold
        )

    report = _run(b, settings, decided)
    upper, lower = report.best_upper, report.best_lower
    if upper is not None and upper.square < lambda_**2:
        certificate = None if upper.certificate is None else report.certificates[upper.certificate]
        verdict = InvertibilityVerdict(
            INVERTIBLE, lambda_, settings.invertibility_tolerance, report, certificate
        )
    elif lower is not None and lower.value >= threshold:
        verdict = InvertibilityVerdict(
            NOT_INVERTIBLE, lambda_, settings.invertibility_tolerance, report
        )
    else:
        verdict = InvertibilityVerdict(UNKNOWN, lambda_, settings.invertibility_tolerance, report)
    logger.info("Element '%s' is %s", format_element(a), verdict.kind)
    return verdict


def _interval(report: BoundsReport, shift: Fraction, sign: int) -> Tuple[float, float]:
    """Endpoint of the spectrum from bounds on ||c + sign a||, with c = shift."""
    lower = report.best_lower
    upper = report.best_upper
    low = Fraction(0) if lower is None else Fraction(lower.value)
    high = None if upper is None else Fraction(upper.value)
    if sign > 0:
        return (
            float_down(low - shift),
            float("inf") if high is None else float_up(high - shift),
        )
    return (
        float("-inf") if high is None else float_down(shift - high),
        float_up(shift - low),
    )


def spectrum_interval(
    a: RingElement, settings: Optional[BoundsConfig] = None
) -> SpectrumEnclosure:
    """Enclosures of the smallest and largest spectral values of a self-adjoint element.

    With c = ||a||_1, both c + a and c - a are positive, so the largest spectral value is
    ||c + a|| - c and the smallest is c - ||c - a||.

    Raises:
        InputError: If a is not self-adjoint.
    """
    settings = BoundsConfig() if settings is None else settings
    if not is_self_adjoint(a):
        raise InputError("Spectrum enclosures need a self-adjoint element")
    c = l1_norm(a)
    shift = constant(a.presentation, c)
    plus = run_norm_bounds(shift + a, settings)
    minus = run_norm_bounds(shift - a, settings)
    return SpectrumEnclosure(c, _interval(minus, c, -1), _interval(plus, c, 1), [minus, plus])


def decide_word_by_norm(
    w: Word, p: Presentation, settings: Optional[BoundsConfig] = None
) -> NormWordVerdict:
    """Word problem through ||1 - w||: a lower bound of at least 1/2 shows w is nontrivial,
    a certified upper bound below 1/2 shows it is trivial. Anything else is unknown.

    Raises:
        AlphabetMismatchError: If w is over another alphabet.
    """
    settings = BoundsConfig() if settings is None else settings
    if w.alphabet_size != p.alphabet_size:
        raise AlphabetMismatchError("Word is not over the presentation's alphabet")
    a = constant(p, 1) - from_word(p, w)
    text = "1 - ({})".format(format_word(w, p))

    def decided(report: BoundsReport) -> bool:
        lower, upper = report.best_lower, report.best_upper
        return (lower is not None and lower.square >= WORD_THRESHOLD**2) or (
            upper is not None and upper.square < WORD_THRESHOLD**2
        )

    report = _run(a, settings, decided, text)
    lower, upper = report.best_lower, report.best_upper
    if lower is not None and lower.square >= WORD_THRESHOLD**2:
        kind = NONTRIVIAL
    elif upper is not None and upper.square < WORD_THRESHOLD**2:
        kind = TRIVIAL
    else:
        kind = UNKNOWN
    return NormWordVerdict(kind, format_word(w, p), report)


def emit_report(
    report: BoundsReport,
    json_path: Optional[str | Path] = None,
    csv_path: Optional[str | Path] = None,
    xml_path: Optional[str | Path] = None,
) -> List[Path]:
    """Writes the report as JSON, CSV (index, p_n, q_n) and schema-validated XML.

    Returns:
        The written paths.
    """
    written = []
    if json_path is not None:
        path = Path(json_path)
        path.write_text(report.to_json() + "\n", encoding="utf-8")
        written.append(path)
    if csv_path is not None:
        path = Path(csv_path)
        path.write_text(report.to_csv(), encoding="utf-8")
        written.append(path)
    if xml_path is not None:
        Validator().validate_report(report.to_xml())
        path = Path(xml_path)
        path.write_text(report.to_string(), encoding="utf-8")
        written.append(path)
    return written

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple

from astropy.time import Time
from lxml import etree

from gnorm.assembler import Assembler
from gnorm.config import GN
from gnorm.errors import InputError
from gnorm.helpers import fraction_to_str, str_to_fraction

UNIVERSAL = "universal"

REDUCED_VIA_AMENABLE = "reduced-via-amenable"

LOWER_SOURCES = ("moment", "compression", "representation", "dilation", "quotient")


def now() -> str:
    return Time.now().isot


@dataclass(frozen=True)
class LowerEntry:
    """A certified lower bound: `square` is an exact lower bound on the squared norm."""

    value: float
    square: Fraction
    source: str
    detail: str = ""
    certified: bool = True
    timestamp: Optional[str] = None

    def to_dict(self, timestamps: bool = True) -> Dict[str, Any]:
        result: Dict[str, Any] = {
            "value": self.value,
            "square": fraction_to_str(self.square),
            "source": self.source,
            "detail": self.detail,
            "certified": self.certified,
        }
        if timestamps and self.timestamp is not None:
            result["timestamp"] = self.timestamp
        return result

    @staticmethod
    def from_dict(data: Dict[str, Any]) -> "LowerEntry":
        return LowerEntry(
            float(data["value"]),
            str_to_fraction(data["square"]),
            data["source"],
            data.get("detail", ""),
            bool(data["certified"]),
            data.get("timestamp"),
        )


@dataclass(frozen=True)
class UpperEntry:
    """A certified upper bound from the certificate of one level (0 is the l1 certificate)."""

    value: float
    square: Fraction
    level: int
    certified: bool = True
    status: str = "optimal"
    certificate: Optional[int] = None
    timestamp: Optional[str] = None

    def to_dict(self, timestamps: bool = True) -> Dict[str, Any]:
        result: Dict[str, Any] = {
            "value": self.value,
            "square": fraction_to_str(self.square),
            "level": self.level,
            "certified": self.certified,
            "status": self.status,
            "certificate": self.certificate,
        }
        if timestamps and self.timestamp is not None:
            result["timestamp"] = self.timestamp
        return result

    @staticmethod
    def from_dict(data: Dict[str, Any]) -> "UpperEntry":
        return UpperEntry(
            float(data["value"]),
            str_to_fraction(data["square"]),
            int(data["level"]),
            bool(data["certified"]),
            data.get("status", "optimal"),
            data.get("certificate"),
            data.get("timestamp"),
        )


class BoundsReport(Assembler):
    """Paired sequences of certified lower and upper bounds on the norm of one element.

    Entries keep their individual values; the reported sequences p_n and q_n are the running
    maximum of the lower and the running minimum of the upper values.
    """

    def __init__(
        self,
        presentation: str,
        element: str,
        norm_kind: str = UNIVERSAL,
        config: Optional[Dict[str, Any]] = None,
        seed: int = 0,
    ) -> None:
        if norm_kind not in (UNIVERSAL, REDUCED_VIA_AMENABLE):
            raise ValueError("Unknown norm kind: '{}'".format(norm_kind))
        self.presentation = presentation
        self.element = element
        self.norm_kind = norm_kind
        self.config: Dict[str, Any] = dict(config or {})
        self.seed = seed
        self.lower: List[LowerEntry] = []
        self.upper: List[UpperEntry] = []
        self.certificates: List[Dict[str, Any]] = []
        self.annotations: List[str] = []
        self.budget: Dict[str, int] = {}
        self.advisory: Dict[str, Any] = {}

    # --------------------------------------------------------------------#
    #                             Properties                             #
    # --------------------------------------------------------------------#

    @property
    def running_lower(self) -> List[float]:
        result: List[float] = []
        for entry in self.lower:
            result.append(entry.value if not result else max(result[-1], entry.value))
        return result

    @property
    def running_upper(self) -> List[float]:
        result: List[float] = []
        for entry in self.upper:
            result.append(entry.value if not result else min(result[-1], entry.value))
        return result

    @property
    def best_lower(self) -> Optional[LowerEntry]:
        certified = [entry for entry in self.lower if entry.certified]
        return max(certified, key=lambda entry: entry.square) if certified else None

    @property
    def best_upper(self) -> Optional[UpperEntry]:
        certified = [entry for entry in self.upper if entry.certified]
        return min(certified, key=lambda entry: entry.square) if certified else None

    @property
    def gap(self) -> Optional[float]:
        """Best upper minus best lower value (0 if there is no lower entry); None without an upper entry."""
        upper = self.best_upper
        if upper is None:
            return None
        lower = self.best_lower
        return max(0.0, upper.value - (lower.value if lower is not None else 0.0))

    # --------------------------------------------------------------------#
    #                           Public methods                           #
    # --------------------------------------------------------------------#

    def add_lower(self, entry: LowerEntry) -> None:
        if entry.source not in LOWER_SOURCES:
            raise ValueError("Unknown lower bound source: '{}'".format(entry.source))
        self.lower.append(entry)

    def add_upper(self, entry: UpperEntry, certificate: Optional[Dict[str, Any]] = None) -> None:
        if certificate is not None:
            self.certificates.append(certificate)
            entry = UpperEntry(
                entry.value,
                entry.square,
                entry.level,
                entry.certified,
                entry.status,
                len(self.certificates) - 1,
                entry.timestamp,
            )
        self.upper.append(entry)

    def annotate(self, message: str) -> None:
        self.annotations.append(message)

    def sandwich_holds(self) -> bool:
        """Exact check that every certified lower square is at most every certified upper square."""
        lower, upper = self.best_lower, self.best_upper
        return lower is None or upper is None or lower.square <= upper.square

    def flags(self) -> Dict[str, bool]:
        lower, upper = self.running_lower, self.running_upper
        return {
            "lower_monotone": all(x <= y for x, y in zip(lower, lower[1:])),
            "upper_monotone": all(x >= y for x, y in zip(upper, upper[1:])),
            "sandwich": self.sandwich_holds(),
        }

    def to_dict(self, timestamps: bool = True) -> Dict[str, Any]:
        result = {
            "presentation": self.presentation,
            "element": self.element,
            "norm_kind": self.norm_kind,
            "lower": [entry.to_dict(timestamps) for entry in self.lower],
            "upper": [entry.to_dict(timestamps) for entry in self.upper],
            "running_lower": self.running_lower,
            "running_upper": self.running_upper,
            "gap": self.gap,
            "certificates": self.certificates,
            "config": self.config,
            "seed": self.seed,
            "annotations": self.annotations,
            "budget": self.budget,
            "flags": self.flags(),
        }
        if timestamps:
            result["advisory"] = self.advisory
        else:
            result["advisory"] = {
                key: value for key, value in self.advisory.items() if key != "wall_clock"
            }
        return result

    @staticmethod
    def from_dict(data: Dict[str, Any]) -> "BoundsReport":
        """Reads a report written by to_dict.

        Raises:
            InputError: If a field is missing or the stored flags disagree with the entries.
        """
        try:
            report = BoundsReport(
                data["presentation"],
                data["element"],
                data["norm_kind"],
                data.get("config"),
                int(data.get("seed", 0)),
            )
            report.lower = [LowerEntry.from_dict(entry) for entry in data["lower"]]
            report.upper = [UpperEntry.from_dict(entry) for entry in data["upper"]]
            report.certificates = list(data.get("certificates", []))
            report.annotations = list(data.get("annotations", []))
            report.budget = dict(data.get("budget", {}))
            report.advisory = dict(data.get("advisory", {}))
        except (KeyError, TypeError, ValueError) as error:
            raise InputError("Malformed report: {}".format(error))
        if "flags" in data and data["flags"] != report.flags():
            raise InputError("Stored flags do not match the report entries")
        return report

    def to_csv(self) -> str:
        """Rows (index, p_n, q_n) of the running sequences; missing values are empty."""
        lower, upper = self.running_lower, self.running_upper
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["index", "p_n", "q_n"])
        for n in range(max(len(lower), len(upper))):
            writer.writerow(
                [
                    n,
                    repr(lower[n]) if n < len(lower) else "",
                    repr(upper[n]) if n < len(upper) else "",
                ]
            )
        return buffer.getvalue()

    def to_xml(self) -> etree._Element:
        gap = self.gap
        attributes = {"normKind": self.norm_kind, "seed": str(self.seed)}
        if gap is not None:
            attributes["gap"] = repr(gap)
        return GN.report(
            GN.presentation(self.presentation),
            GN.element(self.element),
            GN.lower(
                *[
                    GN.lowerBound(
                        index=str(n),
                        value=repr(entry.value),
                        square=fraction_to_str(entry.square),
                        source=entry.source,
                        detail=entry.detail,
                        certified=str(entry.certified).lower(),
                        **({"timestamp": entry.timestamp} if entry.timestamp else {}),
                    )
                    for n, entry in enumerate(self.lower)
                ]
            ),
            GN.upper(
                *[
                    GN.upperBound(
                        index=str(n),
                        value=repr(entry.value),
                        square=fraction_to_str(entry.square),
                        level=str(entry.level),
                        certified=str(entry.certified).lower(),
                        status=entry.status,
                        **({"timestamp": entry.timestamp} if entry.timestamp else {}),
                    )
                    for n, entry in enumerate(self.upper)
                ]
            ),
            *[GN.annotation(message) for message in self.annotations],
            **attributes,
        )


# --------------------------------------------------------------------#
#                              Decisions                             #
# --------------------------------------------------------------------#

INVERTIBLE = "invertible"

NOT_INVERTIBLE = "not-invertible-within-tolerance"

UNKNOWN = "unknown"


class InvertibilityVerdict(Assembler):
    """Outcome of the invertibility test on L - a*a with L = ||a||_1^2."""

    def __init__(
        self,
        kind: str,
        lambda_: Fraction,
        tolerance: float,
        report: BoundsReport,
        certificate: Optional[Dict[str, Any]] = None,
    ) -> None:
        if kind not in (INVERTIBLE, NOT_INVERTIBLE, UNKNOWN):
            raise ValueError("Unknown invertibility verdict: '{}'".format(kind))
        self.kind = kind
        self.lambda_ = lambda_
        self.tolerance = tolerance
        self.report = report
        self.certificate = certificate

    @property
    def upper(self) -> Optional[UpperEntry]:
        return self.report.best_upper

    @property
    def lower(self) -> Optional[LowerEntry]:
        return self.report.best_lower

    def to_dict(self, timestamps: bool = True) -> Dict[str, Any]:
        upper, lower = self.upper, self.lower
        return {
            "verdict": self.kind,
            "lambda": fraction_to_str(self.lambda_),
            "tolerance": self.tolerance,
            "upper": None if upper is None else upper.value,
            "lower": None if lower is None else lower.value,
            "certificate": self.certificate,
            "report": self.report.to_dict(timestamps),
        }

    def to_xml(self) -> etree._Element:
        return GN.invertibility(
            self.report.to_xml(),
            verdict=self.kind,
            squareBound=fraction_to_str(self.lambda_),
            tolerance=repr(self.tolerance),
        )


@dataclass
class SpectrumEnclosure(Assembler):
    """Intervals containing the smallest and the largest point of the spectrum of a self-adjoint element."""

    shift: Fraction
    lower_endpoint: Tuple[float, float]
    upper_endpoint: Tuple[float, float]
    reports: List[BoundsReport] = field(default_factory=list)

    @property
    def widths(self) -> Tuple[float, float]:
        return (
            self.lower_endpoint[1] - self.lower_endpoint[0],
            self.upper_endpoint[1] - self.upper_endpoint[0],
        )

    def to_dict(self, timestamps: bool = True) -> Dict[str, Any]:
        return {
            "shift": fraction_to_str(self.shift),
            "minimum": list(self.lower_endpoint),
            "maximum": list(self.upper_endpoint),
            "reports": [report.to_dict(timestamps) for report in self.reports],
        }

    def to_xml(self) -> etree._Element:
        return GN.spectrum(
            GN.minimum(low=repr(self.lower_endpoint[0]), high=repr(self.lower_endpoint[1])),
            GN.maximum(low=repr(self.upper_endpoint[0]), high=repr(self.upper_endpoint[1])),
            *[report.to_xml() for report in self.reports],
            shift=fraction_to_str(self.shift),
        )


TRIVIAL = "trivial"

NONTRIVIAL = "nontrivial"

WORD_THRESHOLD = Fraction(1, 2)


class NormWordVerdict(Assembler):
    """Word problem answered through bounds on ||1 - w||, which is 0 for trivial w and at least 1 otherwise."""

    def __init__(self, kind: str, word: str, report: BoundsReport) -> None:
        if kind not in (TRIVIAL, NONTRIVIAL, UNKNOWN):
            raise ValueError("Unknown word verdict: '{}'".format(kind))
        self.kind = kind
        self.word = word
        self.report = report

    def to_dict(self, timestamps: bool = True) -> Dict[str, Any]:
        return {
            "verdict": self.kind,
            "word": self.word,
            "report": self.report.to_dict(timestamps),
        }

    def to_xml(self) -> etree._Element:
        return GN.verdict(GN.word(self.word), self.report.to_xml(), kind=self.kind)

import json
from fractions import Fraction

import pytest

from gnorm.bounds_report import (REDUCED_VIA_AMENABLE, BoundsReport,
                                 LowerEntry, UpperEntry)
from gnorm.errors import InputError
from gnorm.validator import Validator
from pytest_helpers import xp, xps

PRESENTATION = "generators: x y\nclass: free\n"


@pytest.fixture
def report():
    result = BoundsReport(PRESENTATION, "x + x^-1 + y + y^-1", config={"moments": 4}, seed=3)
    result.add_lower(LowerEntry(2.0, Fraction(4), "moment", "n=1", timestamp="2026-01-01T00:00:00.000"))
    result.add_lower(LowerEntry(1.5, Fraction(9, 4), "compression", "radius=0"))
    result.add_lower(LowerEntry(3.5, Fraction(49, 4), "moment", "n=2"))
    result.add_upper(UpperEntry(4.0, Fraction(16), 0, status="l1"), {"level": 0})
    result.add_upper(UpperEntry(3.75, Fraction(225, 16), 1))
    result.annotate("level 2: no bound at this level")
    return result


def test_has_running_sequences(report):
    assert report.running_lower == [2.0, 2.0, 3.5]
    assert report.running_upper == [4.0, 3.75]
    assert report.gap == 0.25
    assert report.best_lower.source == "moment"
    assert report.best_upper.level == 1
    assert report.flags() == {"lower_monotone": True, "upper_monotone": True, "sandwich": True}


def test_links_certificates(report):
    assert report.upper[0].certificate == 0
    assert report.upper[1].certificate is None
    assert report.certificates == [{"level": 0}]


def test_reads_report_written_to_json(report):
    data = json.loads(report.to_json())
    assert data["seed"] == 3
    assert data["lower"][0]["timestamp"] == "2026-01-01T00:00:00.000"
    restored = BoundsReport.from_dict(data)
    assert restored.to_dict() == report.to_dict()


def test_drops_timestamps_on_request(report):
    report.advisory["wall_clock"] = 1.5
    report.advisory["choi_dimension"] = 8
    data = report.to_dict(timestamps=False)
    assert "timestamp" not in data["lower"][0]
    assert data["advisory"] == {"choi_dimension": 8}


def test_raises_exception_for_mismatching_flags(report):
    data = report.to_dict()
    data["flags"]["sandwich"] = False
    with pytest.raises(InputError):
        BoundsReport.from_dict(data)


def test_raises_exception_for_malformed_report():
    with pytest.raises(InputError):
        BoundsReport.from_dict({"presentation": PRESENTATION})


def test_flags_violated_sandwich():
    report = BoundsReport(PRESENTATION, "x")
    report.add_lower(LowerEntry(2.5, Fraction(25, 4), "representation"))
    report.add_upper(UpperEntry(2.0, Fraction(4), 0))
    assert not report.sandwich_holds()
    assert not report.flags()["sandwich"]


def test_has_csv_of_running_sequences(report):
    assert report.to_csv().splitlines() == [
        "index,p_n,q_n",
        "0,2.0,4.0",
        "1,2.0,3.75",
        "2,3.5,",
    ]


def test_has_valid_xml(report):
    Validator().validate_report(report.to_xml())
    assert len(xp(report, "/gn:report/gn:lower/gn:lowerBound")) == 3
    assert xps(report, "/gn:report/gn:upper/gn:upperBound[@index='1']/@level") == "1"
    assert xps(report, "/gn:report/@gap") == "0.25"
    assert xps(report, "/gn:report/gn:annotation/text()") == "level 2: no bound at this level"


def test_has_valid_xml_without_lower_entries():
    report = BoundsReport(PRESENTATION, "x", REDUCED_VIA_AMENABLE)
    report.add_upper(UpperEntry(1.0, Fraction(1), 0))
    assert report.gap == 1.0
    assert report.best_lower is None
    Validator().validate_report(report.to_xml())
    assert xps(report, "/gn:report/@normKind") == "reduced-via-amenable"
    assert xp(report, "/gn:report/gn:lower/gn:lowerBound") == []


def test_has_no_gap_without_upper_entries():
    report = BoundsReport(PRESENTATION, "x")
    assert report.gap is None
    assert report.to_csv() == "index,p_n,q_n\n"


def test_raises_exception_for_unknown_values():
    with pytest.raises(ValueError):
        BoundsReport(PRESENTATION, "x", "reduced")
    with pytest.raises(ValueError):
        BoundsReport(PRESENTATION, "x").add_lower(LowerEntry(1.0, Fraction(1), "guess"))

import json
import random

import pytest

from gnorm.bounds_report import (INVERTIBLE, NONTRIVIAL, NOT_INVERTIBLE,
                                 REDUCED_VIA_AMENABLE, TRIVIAL, UNIVERSAL)
from gnorm.decision import (BoundsConfig, decide_invertibility,
                            decide_word_by_norm, emit_report, gap_missed,
                            run_norm_bounds, shifted_square,
                            spectrum_interval)
from gnorm.errors import AlphabetMismatchError, InputError
from gnorm.group_ring import (RingElement, format_element, from_word,
                              parse_element)
from gnorm.presentation import ball
from gnorm.validator import Validator
from gnorm.word_problem import Nontrivial, Trivial, decide_word
from pytest_helpers import random_word


def test_pinches_free_laplacian(laplacian_f2):
    settings = BoundsConfig(target_gap=1e-6)
    report = run_norm_bounds(laplacian_f2, settings)
    assert report.gap <= 1e-6
    assert not gap_missed(report, settings)
    assert report.best_upper.value == 4.0
    assert report.best_upper.level == 0
    assert report.best_lower.value >= 4 - 1e-6
    assert report.flags()["sandwich"]
    assert report.norm_kind == UNIVERSAL
    assert report.advisory["choi_dimension"] == 8


def test_pinches_positive_free_element(f2):
    report = run_norm_bounds(parse_element("1 + x + y", f2), BoundsConfig(target_gap=1e-6))
    assert abs(report.best_upper.value - 3) <= 1e-12
    assert report.best_lower.value >= 3 - 1e-6


def test_labels_amenable_runs(z):
    settings = BoundsConfig(target_gap=0.05, amenable=True)
    report = run_norm_bounds(parse_element("1 + x", z), settings)
    assert report.norm_kind == REDUCED_VIA_AMENABLE
    assert report.gap <= 0.05
    assert report.best_lower.value <= 2 <= report.best_upper.value


def test_keeps_bounds_sound_within_budget(f2):
    a = parse_element("x - y", f2)
    settings = BoundsConfig(target_gap=0, budget_steps=3, levels=[])
    report = run_norm_bounds(a, settings)
    assert gap_missed(report, settings)
    assert report.budget["rounds"] == 3
    assert report.best_upper.value == 2.0
    assert report.best_lower.value <= 2.0
    assert report.flags() == {"lower_monotone": True, "upper_monotone": True, "sandwich": True}


def test_is_deterministic(f2):
    a = parse_element("x - y + 2*x*y", f2)
    first = run_norm_bounds(a, BoundsConfig(target_gap=0, budget_steps=3, levels=[], seed=5))
    second = run_norm_bounds(
        a, BoundsConfig(target_gap=0, budget_steps=3, levels=[], seed=5, workers=1)
    )
    assert first.to_dict(timestamps=False) == second.to_dict(timestamps=False)


def test_annotates_generic_runs(klein):
    report = run_norm_bounds(
        parse_element("1 + x + y + x*y", klein), BoundsConfig(target_gap=1e-6, levels=[])
    )
    assert "moment and compression bounds need a normal form" in report.annotations
    assert report.best_lower.source == "quotient"
    assert report.best_lower.value >= 4 - 1e-6
    assert report.best_upper.value == 4.0


def test_has_shifted_square(z):
    b = shifted_square(parse_element("3 + x", z), 16)
    assert b == parse_element("6 - 3*x - 3*x^-1", z)


def test_has_shifted_square_over_generic_presentation(commutator):
    b = shifted_square(parse_element("x + y", commutator), 4)
    assert format_element(b) == "2 - x^-1*y - y^-1*x"


def test_certifies_invertibility_with_l1_certificate(z):
    verdict = decide_invertibility(parse_element("3 + x", z))
    assert verdict.kind == INVERTIBLE
    assert verdict.lambda_ == 16
    assert verdict.upper.level == 0
    assert verdict.upper.square == 144
    assert verdict.certificate is not None
    assert json.loads(verdict.to_json())["verdict"] == INVERTIBLE


def test_detects_element_that_is_not_invertible(z):
    settings = BoundsConfig(invertibility_tolerance=1e-2)
    verdict = decide_invertibility(parse_element("1 - x", z), settings)
    assert verdict.kind == NOT_INVERTIBLE
    assert verdict.lambda_ == 4
    assert verdict.lower.value >= 4 - 1e-2


def test_certifies_invertibility_of_scalars(f2):
    verdict = decide_invertibility(parse_element("3", f2))
    assert verdict.kind == INVERTIBLE
    assert verdict.upper.square == 0


def test_raises_exception_for_zero_invertibility(f2):
    with pytest.raises(InputError):
        decide_invertibility(parse_element("x - x", f2))


def test_encloses_spectrum_of_z_laplacian(z):
    enclosure = spectrum_interval(parse_element("x + x^-1", z))
    assert enclosure.shift == 2
    low, high = enclosure.upper_endpoint
    assert low <= 2 <= high
    assert high - low <= 1e-6
    low, high = enclosure.lower_endpoint
    assert low <= -2 <= high
    assert high - low <= 0.05


def test_encloses_spectrum_of_scalar(z):
    enclosure = spectrum_interval(parse_element("1", z))
    assert enclosure.lower_endpoint[0] <= 1 <= enclosure.lower_endpoint[1]
    assert enclosure.upper_endpoint[0] <= 1 <= enclosure.upper_endpoint[1]
    assert max(enclosure.widths) <= 1e-6


def test_encloses_spectrum_of_positive_element(z):
    enclosure = spectrum_interval(parse_element("2 + x + x^-1", z))
    assert enclosure.lower_endpoint[0] <= 0
    assert enclosure.upper_endpoint[0] <= 4 <= enclosure.upper_endpoint[1]
    assert len(enclosure.reports) == 2


def test_raises_exception_for_spectrum_of_non_self_adjoint_element(z):
    with pytest.raises(InputError):
        spectrum_interval(parse_element("x", z))


def test_decides_nontrivial_word_by_norm(commutator):
    w = commutator.parse_word("x")
    verdict = decide_word_by_norm(w, commutator)
    assert verdict.kind == NONTRIVIAL
    assert verdict.report.best_lower.source == "quotient"
    assert isinstance(decide_word(w, commutator), Nontrivial)


def test_decides_trivial_word_by_norm(z):
    verdict = decide_word_by_norm(z.parse_word("x*x^-1"), z)
    assert verdict.kind == TRIVIAL
    assert verdict.report.best_upper.square == 0


def test_raises_exception_for_word_over_other_alphabet(z, f2):
    with pytest.raises(AlphabetMismatchError):
        decide_word_by_norm(f2.word(2), z)


def test_writes_report_files(laplacian_f2, tmp_path):
    report = run_norm_bounds(laplacian_f2, BoundsConfig(target_gap=1e-6))
    paths = emit_report(
        report, tmp_path / "report.json", tmp_path / "report.csv", tmp_path / "report.xml"
    )
    assert [path.name for path in paths] == ["report.json", "report.csv", "report.xml"]
    assert json.loads(paths[0].read_text())["element"] == report.element
    assert paths[1].read_text().startswith("index,p_n,q_n\n")
    assert "gn:report" in paths[2].read_text()


def test_validates_report_xml(laplacian_z2):
    report = run_norm_bounds(laplacian_z2, BoundsConfig(target_gap=1e-6, levels=[]))
    Validator().validate_report(report.to_xml())


@pytest.mark.parametrize(
    "kwargs",
    [
        {"target_gap": -1},
        {"budget_steps": 0},
        {"levels": [2, 1]},
        {"levels": [0]},
        {"moments": -1},
        {"trials": 0},
        {"seed": -1},
        {"tolerance": 0},
        {"invertibility_tolerance": 0},
        {"quotient_degree": 9},
        {"workers": 0},
    ],
)
def test_raises_exception_for_invalid_config(kwargs):
    with pytest.raises(ValueError):
        BoundsConfig(**kwargs)


def test_has_default_levels(laplacian_f2, f2):
    assert BoundsConfig().levels_for(laplacian_f2) == [1, 2]
    assert BoundsConfig().levels_for(parse_element("x*y", f2)) == [2, 3]
    assert BoundsConfig(levels=[]).levels_for(laplacian_f2) == []


def test_keeps_every_lower_bound_below_every_upper_bound(z, z2, f2, f2xf2):
    elements = [
        parse_element("x + x^-1", z),
        parse_element("x + x^-1 + y + y^-1", z2),
        parse_element("x + x^-1 + y + y^-1", f2),
        parse_element("a + a^-1 + b + b^-1 + c + c^-1 + d + d^-1", f2xf2),
    ]
    rng = random.Random(17)
    words = ball(f2, 2)
    for _ in range(20):
        a = RingElement(f2)
        for u in rng.sample(words, rng.randint(1, 5)):
            a = a + from_word(f2, u, rng.randint(-3, 3))
        elements.append(a)
    for index, a in enumerate(elements):
        levels = [1] if index < 4 else []
        report = run_norm_bounds(a, BoundsConfig(target_gap=0, budget_steps=2, levels=levels))
        assert report.sandwich_holds()
        lower = report.best_lower
        for entry in report.upper:
            assert lower is None or lower.square <= entry.square


def test_agrees_with_word_search_on_random_words(commutator):
    rng = random.Random(41)
    settings = BoundsConfig(budget_steps=4, levels=[1], rep_dim=1, trials=1)
    for _ in range(20):
        w = random_word(rng, commutator, 8)
        verdict = decide_word_by_norm(w, commutator, settings)
        exponents = [sum(1 if c > 0 else -1 for c in w.letters if abs(c) == i) for i in (1, 2)]
        if any(exponents):
            assert verdict.kind == NONTRIVIAL
            assert isinstance(decide_word(w, commutator), Nontrivial)
        elif verdict.kind == TRIVIAL:
            assert isinstance(decide_word(w, commutator), Trivial)
        else:
            assert verdict.kind != NONTRIVIAL

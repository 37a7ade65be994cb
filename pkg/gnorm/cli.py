import functools
import json
import logging
from typing import Any, Callable, Optional, Tuple

import click

from gnorm.bounds_report import INVERTIBLE, NOT_INVERTIBLE, BoundsReport
from gnorm.decision import (BoundsConfig, decide_invertibility, emit_report,
                            gap_missed, run_norm_bounds, spectrum_interval)
from gnorm.errors import InputError, ResourceLimitError
from gnorm.group_ring import RingElement, parse_element, radius
from gnorm.presentation import Presentation, load_presentation, parse_word
from gnorm.upper_certificate import UpperCertificate
from gnorm.word_problem import Exhausted, SearchBudget, decide_word

EXIT_INPUT = 2

EXIT_UNDECIDED = 3


def _input_errors(command: Callable[..., Any]) -> Callable[..., Any]:
    """Reports input errors and inputs beyond the resource limits on stderr, exiting with code 2."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except (InputError, ResourceLimitError) as error:
            click.echo("error: {}".format(error), err=True)
            raise click.exceptions.Exit(EXIT_INPUT)

    return wrapper


def _load(presentation: str, element: str) -> Tuple[Presentation, RingElement]:
    p = load_presentation(presentation)
    return p, parse_element(element, p)


def _settings(a: RingElement, levels: Optional[int], **kwargs) -> BoundsConfig:
    """Run settings; `levels` is the highest SOS level, counted from the degree of the element."""
    if levels is not None:
        kwargs["levels"] = list(range(max(1, radius(a)), levels + 1))
    return BoundsConfig(**kwargs)


def _summary(report: BoundsReport) -> str:
    lower, upper = report.best_lower, report.best_upper
    return "lower {} ({})\nupper {} (level {})\ngap {}".format(
        "-" if lower is None else repr(lower.value),
        "-" if lower is None else lower.source,
        "-" if upper is None else repr(upper.value),
        "-" if upper is None else upper.level,
        report.gap,
    )


bound_options = [
    click.option("--presentation", required=True, help="Presentation file or http(s) URL."),
    click.option("--element", required=True, help="Group ring element, e.g. '1 + 2*x*y^-1'."),
    click.option("--amenable", is_flag=True, help="Assert that the group is amenable."),
    click.option("--target-gap", type=float, default=1e-3, show_default=True),
    click.option("--levels", type=int, default=None, help="Highest SOS level."),
    click.option("--moments", type=int, default=64, show_default=True),
    click.option("--rep-dim", type=int, default=2, show_default=True),
    click.option("--trials", type=int, default=4, show_default=True),
    click.option("--seed", type=int, default=0, show_default=True),
    click.option("--budget-steps", type=int, default=8, show_default=True, help="Rounds."),
]


def with_bound_options(command: Callable[..., Any]) -> Callable[..., Any]:
    for option in reversed(bound_options):
        command = option(command)
    return command


def _bounds_config(a: RingElement, options: dict) -> BoundsConfig:
    try:
        return _settings(
            a,
            options["levels"],
            target_gap=options["target_gap"],
            budget_steps=options["budget_steps"],
            moments=options["moments"],
            rep_dim=options["rep_dim"],
            trials=options["trials"],
            seed=options["seed"],
            amenable=options["amenable"],
            **options.get("extra", {}),
        )
    except ValueError as error:
        raise InputError(str(error))


@click.group()
@click.option("-v", "--verbose", count=True, help="Log progress (twice for debug output).")
def main(verbose: int):
    """Certified bounds on universal group C*-norms."""
    logging.basicConfig(
        level=logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )


@main.command()
@with_bound_options
@click.option("--json", "json_path", type=click.Path(dir_okay=False), default=None)
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None)
@click.option("--xml", "xml_path", type=click.Path(dir_okay=False), default=None)
@_input_errors
def bounds(presentation, element, json_path, csv_path, xml_path, **options):
    """Paired certified lower and upper bounds on the norm of an element."""
    _, a = _load(presentation, element)
    settings = _bounds_config(a, options)
    report = run_norm_bounds(a, settings)
    emit_report(report, json_path, csv_path, xml_path)
    click.echo(_summary(report))
    if gap_missed(report, settings):
        raise click.exceptions.Exit(EXIT_UNDECIDED)


@main.command()
@click.option("--presentation", required=True, help="Presentation file or http(s) URL.")
@click.option("--word", "text", required=True, help="Word, e.g. 'x*y*x^-1*y^-1'.")
@click.option("--budget-steps", type=int, default=SearchBudget().steps, show_default=True)
@click.option("--json", "json_path", type=click.Path(dir_okay=False), default=None)
@_input_errors
def word(presentation, text, budget_steps, json_path):
    """Decides whether a word represents the identity."""
    p = load_presentation(presentation)
    w = parse_word(text, p)
    try:
        budget = SearchBudget(steps=budget_steps)
    except ValueError as error:
        raise InputError(str(error))
    verdict = decide_word(w, p, budget)
    if json_path is not None:
        with open(json_path, "w", encoding="utf-8") as f:
            f.write(verdict.to_json() + "\n")
    click.echo(verdict.kind)
    if isinstance(verdict, Exhausted):
        raise click.exceptions.Exit(EXIT_UNDECIDED)


@main.command()
@with_bound_options
@click.option("--tolerance", type=float, default=None, help="Margin of not-invertible verdicts.")
@click.option("--json", "json_path", type=click.Path(dir_okay=False), default=None)
@_input_errors
def invertible(presentation, element, tolerance, json_path, **options):
    """Tests invertibility in the universal group C*-algebra."""
    _, a = _load(presentation, element)
    if tolerance is not None:
        options["extra"] = {"invertibility_tolerance": tolerance}
    verdict = decide_invertibility(a, _bounds_config(a, options))
    if json_path is not None:
        with open(json_path, "w", encoding="utf-8") as f:
            f.write(verdict.to_json() + "\n")
    click.echo(verdict.kind)
    if verdict.kind not in (INVERTIBLE, NOT_INVERTIBLE):
        raise click.exceptions.Exit(EXIT_UNDECIDED)


@main.command()
@with_bound_options
@click.option("--json", "json_path", type=click.Path(dir_okay=False), default=None)
@_input_errors
def spectrum(presentation, element, json_path, **options):
    """Encloses the smallest and largest spectral values of a self-adjoint element."""
    _, a = _load(presentation, element)
    settings = _bounds_config(a, options)
    enclosure = spectrum_interval(a, settings)
    if json_path is not None:
        with open(json_path, "w", encoding="utf-8") as f:
            f.write(enclosure.to_json() + "\n")
    click.echo("min in [{!r}, {!r}]".format(*enclosure.lower_endpoint))
    click.echo("max in [{!r}, {!r}]".format(*enclosure.upper_endpoint))
    if any(gap_missed(report, settings) for report in enclosure.reports):
        raise click.exceptions.Exit(EXIT_UNDECIDED)


@main.command("check-certificate")
@click.option("--presentation", required=True, help="Presentation file or http(s) URL.")
@click.option("--element", required=True)
@click.option("--certificate", "certificate_path", required=True, type=click.Path(exists=True, dir_okay=False))
@_input_errors
def check_certificate(presentation, element, certificate_path):
    """Re-verifies a JSON upper bound certificate in exact arithmetic."""
    p, a = _load(presentation, element)
    try:
        with open(certificate_path, encoding="utf-8") as f:
            data = json.load(f)
    except ValueError as error:
        raise InputError("Malformed certificate file: {}".format(error))
    certificate = UpperCertificate.from_dict(data, p)
    if not certificate.verify(a):
        raise InputError("Certificate does not verify")
    click.echo("verified: ||a|| <= {!r}".format(certificate.bound))

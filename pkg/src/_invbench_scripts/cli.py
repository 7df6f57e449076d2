"""CLI for running the IRMv1 unit-test benchmark."""

import dataclasses
import logging
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import ParamSpec, TypeVar

import click
import cloup
import pandas as pd
from beartype import beartype

from invbench import (
    DimensionMismatchError,
    InvalidConfigError,
    OutputDirectoryError,
    Setting,
    SweepConfig,
    comparison_table,
    gradient_check,
    load_sweep_config,
    run_sweep,
    trace_trial,
)

_P = ParamSpec("_P")
_R = TypeVar("_R")


class RuntimeFailure(click.ClickException):
    """A solver or I/O failure, as opposed to invalid input."""

    exit_code = 2


@beartype
def _configure_logging(*, verbose: bool) -> None:
    """Send library logs to stderr."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(message)s",
    )


@beartype
def _verbose_option(
    function: Callable[_P, _R],
) -> Callable[_P, _R]:
    """Add ``--verbose`` to a subcommand."""
    return cloup.option(
        "--verbose",
        help="Log solver progress at DEBUG level.",
        is_flag=True,
        default=False,
    )(function)


_CONFIG_PATH = cloup.Path(
    exists=True,
    path_type=Path,
    file_okay=True,
    dir_okay=False,
)
_OUT_DIR = cloup.Path(path_type=Path, file_okay=False, dir_okay=True)


@beartype
def _load_config(*, path: Path | None) -> SweepConfig:
    """Read a sweep configuration, or use the defaults."""
    if path is None:
        return SweepConfig()
    try:
        return load_sweep_config(path=path)
    except InvalidConfigError as exc:
        raise click.ClickException(message=str(object=exc)) from None


@beartype
def _run_and_report(*, cfg: SweepConfig) -> pd.DataFrame:
    """Run a sweep and return the IRMv1-against-ERM table."""
    try:
        outcome = run_sweep(cfg=cfg)
    except InvalidConfigError as exc:
        raise click.ClickException(message=str(object=exc)) from None
    except OutputDirectoryError as exc:
        raise RuntimeFailure(message=str(object=exc)) from None
    click.echo(
        message=(
            f"Wrote {len(outcome.results)} results to "
            f"{cfg.out_dir / 'results.csv'}"
        )
    )
    return comparison_table(summary=outcome.summary)


@cloup.group()
def invbench() -> None:
    """Compare IRMv1 with ERM on linear SEM unit tests."""


@invbench.command()
@cloup.option(
    "--config",
    "config_path",
    help="JSON sweep configuration",
    required=True,
    type=_CONFIG_PATH,
)
@cloup.option(
    "--out",
    help="Output directory, replacing the configured one",
    required=True,
    type=_OUT_DIR,
)
@_verbose_option
@beartype
def sweep(*, config_path: Path, out: Path, verbose: bool) -> None:
    """Run every (setting, weight scale, trial) cell of a sweep."""
    _configure_logging(verbose=verbose)
    cfg = dataclasses.replace(_load_config(path=config_path), out_dir=out)
    _run_and_report(cfg=cfg)


@invbench.command()
@cloup.option(
    "--setting",
    help="Unit-test setting",
    required=True,
    type=click.Choice(choices=[setting.value for setting in Setting]),
)
@cloup.option(
    "--weight-std",
    help="Standard deviation of the ground-truth weights",
    required=True,
    type=click.FloatRange(min=0, min_open=True),
)
@cloup.option(
    "--trial",
    "trial_index",
    help="Trial index within the cell",
    required=True,
    type=click.IntRange(min=0),
)
@cloup.option(
    "--config",
    "config_path",
    help="JSON sweep configuration (defaults when omitted)",
    required=False,
    type=_CONFIG_PATH,
)
@cloup.option(
    "--trace-out",
    help="Write the IRMv1 training trace to this CSV file",
    required=False,
    type=cloup.Path(path_type=Path, dir_okay=False),
)
@_verbose_option
@beartype
def trial(
    *,
    setting: str,
    weight_std: float,
    trial_index: int,
    config_path: Path | None,
    trace_out: Path | None,
    verbose: bool,
) -> None:
    """Run one cell and print a row per method."""
    _configure_logging(verbose=verbose)
    cfg = _load_config(path=config_path)
    try:
        results, trace = trace_trial(
            setting=Setting(value=setting),
            weight_std=weight_std,
            trial=trial_index,
            cfg=cfg,
        )
    except (InvalidConfigError, DimensionMismatchError) as exc:
        raise click.ClickException(message=str(object=exc)) from None

    rows = pd.DataFrame(data=[result.as_row() for result in results])
    click.echo(
        message=rows.to_csv(index=False, lineterminator="\n"),
        nl=False,
    )
    if trace_out is not None:
        trace_frame = pd.DataFrame(
            data=[dataclasses.asdict(record) for record in trace]
        )
        try:
            trace_frame.to_csv(
                path_or_buf=trace_out,
                index=False,
                float_format="%.17g",
                lineterminator="\n",
            )
        except OSError as exc:
            raise RuntimeFailure(message=str(object=exc)) from None
        click.echo(
            message=f"Wrote {len(trace)} trace rows to {trace_out}",
            err=True,
        )


@invbench.command()
@cloup.option(
    "--seed",
    help="Seed of the random test problems",
    required=True,
    type=click.IntRange(min=0),
)
@_verbose_option
@beartype
def gradcheck(*, seed: int, verbose: bool) -> None:
    """Compare analytic IRMv1 gradients with finite differences."""
    _configure_logging(verbose=verbose)
    report = gradient_check(seed=seed)
    if not report.passed:
        msg = (
            f"Gradient check failed in {report.failures} of {report.cases} "
            f"cases (worst relative error {report.worst_error:.3g})."
        )
        raise RuntimeFailure(message=msg)
    click.echo(
        message=(
            f"Gradient check passed: {report.cases} cases, worst relative "
            f"error {report.worst_error:.3g}"
        )
    )


@invbench.command(name="reproduce-fig2")
@cloup.option(
    "--out",
    help="Output directory",
    required=True,
    type=_OUT_DIR,
)
@cloup.option(
    "--config",
    "config_path",
    help="JSON sweep configuration replacing the default sweep",
    required=False,
    type=_CONFIG_PATH,
)
@_verbose_option
@beartype
def reproduce_fig2(
    *,
    out: Path,
    config_path: Path | None,
    verbose: bool,
) -> None:
    """Run the weight-scale sweep and print IRMv1 against ERM."""
    _configure_logging(verbose=verbose)
    cfg = dataclasses.replace(_load_config(path=config_path), out_dir=out)
    table = _run_and_report(cfg=cfg)
    click.echo(message=table.to_string(index=False))


@beartype
def cli_main(*, argv: Sequence[str]) -> int:
    """Run the CLI and return its exit code.

    Usage errors and invalid input exit with 1, solver and I/O failures
    with 2.
    """
    try:
        code = invbench.main(
            args=list(argv),
            prog_name="invbench",
            standalone_mode=False,
        )
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.Abort:
        click.echo(message="Aborted!", err=True)
        return 1
    return code if isinstance(code, int) else 0


def main() -> None:
    """Console-script entry point."""
    sys.exit(cli_main(argv=sys.argv[1:]))

# This file is part of philasso.
#
# Developed for the LSST Data Management System.
# This product includes software developed by the LSST Project
# (https://www.lsst.org).
# See the COPYRIGHT file at the top-level directory of this distribution
# for details of code ownership.
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.

from __future__ import annotations

__all__ = ["main"]

import contextlib
from collections.abc import Iterable, Iterator
from typing import Any

import click

from .. import init_logging, script
from . import common_options

CONTEXT_SETTINGS = {"help_option_names": ["-h", "--help"]}

EXIT_NOT_CONVERGED = 2
"""Exit status for usable results of a solver that did not converge."""


@contextlib.contextmanager
def _user_errors() -> Iterator[None]:
    """Report expected failures as a one-line error with exit status 1."""
    try:
        yield
    except (ValueError, OSError, RuntimeError) as exc:
        message = str(exc)
        for note in getattr(exc, "__notes__", ()):
            message += f"\n{note}"
        raise click.ClickException(message) from exc


def _check_converged(ctx: click.Context, converged: bool) -> None:
    if not converged:
        click.echo("Warning: solver did not converge, results may be inaccurate.", err=True)
        ctx.exit(EXIT_NOT_CONVERGED)


@click.group(context_settings=CONTEXT_SETTINGS)
@common_options.log_level
@common_options.json_logs
@common_options.seed
@common_options.threads
@click.pass_context
def main(
    ctx: click.Context, log_level: Iterable[str], json_logs: bool, seed: int | None, threads: int
) -> None:
    """Taxonomy-structured penalized regression (Phi-LASSO) tools."""
    try:
        init_logging(log_level, json_logs=json_logs)
    except ValueError as exc:
        raise click.BadParameter(str(exc), param_hint="--log-level") from exc
    ctx.obj = {"seed": seed, "threads": threads}


@main.command(short_help="Fit at one tuning parameter.")
@common_options.family
@click.option(
    "--lambda", "lam", help="Tuning parameter.", type=click.FloatRange(0, min_open=True), required=True
)
@common_options.no_intercept
@common_options.no_standardize
@common_options.normalize_rows
@common_options.augment_singleton
@common_options.output
@common_options.manifest
@click.argument("design", type=click.Path(exists=True, dir_okay=False))
@click.argument("response", type=click.Path(exists=True, dir_okay=False))
@click.argument("taxonomy", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def fit(ctx: click.Context, **kwargs: Any) -> None:
    """Fit the Phi-LASSO and write the fit as JSON.

    DESIGN is a tab-separated design matrix with a header row of covariate
    identifiers, RESPONSE has one value per line, TAXONOMY is a
    tab-separated taxonomy table.
    """
    with _user_errors():
        converged = script.philasso_fit(**kwargs)
    _check_converged(ctx, converged)


@main.command(short_help="Fit along a grid of tuning parameters.")
@common_options.family
@click.option(
    "--lambda",
    "lambdas",
    help="Explicit tuning parameter, can be used more than once; replaces the geometric grid.",
    type=click.FloatRange(0, min_open=True),
    multiple=True,
)
@common_options.n_lambdas
@common_options.min_ratio
@common_options.no_intercept
@common_options.no_standardize
@common_options.normalize_rows
@common_options.augment_singleton
@common_options.output_dir
@click.argument("design", type=click.Path(exists=True, dir_okay=False))
@click.argument("response", type=click.Path(exists=True, dir_okay=False))
@click.argument("taxonomy", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def path(ctx: click.Context, **kwargs: Any) -> None:
    """Fit the Phi-LASSO along a descending grid of tuning parameters.

    Writes path.csv with one row per tuning parameter and path.jsonl with
    one fit per line.
    """
    with _user_errors():
        converged = script.philasso_path(**kwargs)
    _check_converged(ctx, converged)


@main.command(short_help="Cross-validate and summarize selection.")
@common_options.family
@click.option(
    "--folds", help="'loo' for leave-one-out or a number of folds.", default="loo", show_default=True
)
@common_options.n_lambdas
@common_options.min_ratio
@common_options.no_intercept
@common_options.no_standardize
@common_options.normalize_rows
@common_options.augment_singleton
@common_options.output_dir
@click.argument("design", type=click.Path(exists=True, dir_okay=False))
@click.argument("response", type=click.Path(exists=True, dir_okay=False))
@click.argument("taxonomy", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def cv(ctx: click.Context, **kwargs: Any) -> None:
    """Cross-validate a binary-response model.

    Writes cv.csv with AUC, Brier score and deviance per tuning parameter
    and selection.tsv with selection frequencies at the parameters chosen
    by AUC and by Brier score.
    """
    with _user_errors():
        script.philasso_cv(seed=ctx.obj["seed"], threads=ctx.obj["threads"], **kwargs)


@main.command(short_help="Run the simulation study.")
@common_options.output_dir
@click.option("--extended", help="Use the full-size study defaults.", is_flag=True)
@click.argument("config", type=click.Path(exists=True, dir_okay=False), required=False)
@click.pass_context
def simulate(ctx: click.Context, **kwargs: Any) -> None:
    """Compare the Phi-LASSO with the oracle least-squares fit on
    simulated data.

    Optional CONFIG is a YAML or JSON file overriding default settings.
    """
    with _user_errors():
        script.philasso_simulate(seed=ctx.obj["seed"], threads=ctx.obj["threads"], **kwargs)


@main.command(short_help="Decompose coefficients over a taxonomy.")
@click.option("--q", help="Penalty exponent.", type=click.FloatRange(0, min_open=True), default=1.0)
@common_options.output
@common_options.manifest
@click.argument("beta", type=click.Path(exists=True, dir_okay=False))
@click.argument("taxonomy", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def decompose(ctx: click.Context, **kwargs: Any) -> None:
    """Compute the penalty-minimizing decomposition of coefficients.

    BETA has one coefficient per line in taxonomy index order.
    """
    with _user_errors():
        converged = script.philasso_decompose(**kwargs)
    if not converged:
        ctx.exit(EXIT_NOT_CONVERGED)


@main.command(short_help="Evaluate predictions or estimates.")
@click.option("--predictions", help="Predicted probabilities, one per line.", type=click.Path(exists=True))
@click.option("--labels", help="Binary labels, one per line.", type=click.Path(exists=True))
@click.option("--estimate", help="Estimated coefficients, one per line.", type=click.Path(exists=True))
@click.option("--truth", help="True coefficients, one per line.", type=click.Path(exists=True))
@common_options.output
@common_options.manifest
def metrics(**kwargs: Any) -> None:
    """Compute AUC and Brier score, or recall, precision and squared
    error.
    """
    with _user_errors():
        script.philasso_metrics(**kwargs)

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

"""Module defines a set of Click options shared by commands."""

import click

from ..glm import Family

THREADS_ENV = "PHILASSO_THREADS"
"""Environment variable with the default number of worker processes."""

log_level = click.option(
    "--log-level",
    help="Global or per-logger logging level, comma-separated and can be specified multiple times.",
    metavar="LEVEL|LOGGER=LEVEL[,...]",
    multiple=True,
)

json_logs = click.option("--json-logs", help="Write log records as JSON, one per line.", is_flag=True)

seed = click.option("--seed", help="Seed for random fold assignment and simulation.", type=int, default=None)

threads = click.option(
    "--threads",
    help=f"Number of worker processes, default is taken from ${THREADS_ENV} or 1.",
    type=click.IntRange(min=1),
    envvar=THREADS_ENV,
    default=1,
    show_default=True,
)

family = click.option(
    "--family",
    help="Response family.",
    type=click.Choice([family.value for family in Family]),
    default=Family.GAUSSIAN.value,
    show_default=True,
)

no_intercept = click.option("--no-intercept", help="Fit without an intercept.", is_flag=True)

no_standardize = click.option(
    "--no-standardize", help="Do not standardize design columns before fitting.", is_flag=True
)

normalize_rows = click.option(
    "--normalize-rows", help="Divide every design row by its sum (relative abundances).", is_flag=True
)

augment_singleton = click.option(
    "--augment-singleton",
    help="Add a grouping level of singleton taxa right above the covariates.",
    is_flag=True,
)

n_lambdas = click.option(
    "--n-lambdas", help="Number of tuning parameters in the grid.", type=click.IntRange(min=1), default=50
)

min_ratio = click.option(
    "--min-ratio",
    help="Ratio of the smallest to the largest tuning parameter.",
    type=click.FloatRange(0, 1, min_open=True, max_open=True),
    default=0.01,
    show_default=True,
)

output = click.option(
    "-o", "--output", help="Output file name, standard output by default.", type=click.Path(dir_okay=False)
)

manifest = click.option(
    "--manifest",
    help="Run manifest file, next to the output file as <stem>.manifest.yaml by default.",
    type=click.Path(dir_okay=False),
)

output_dir = click.option(
    "--output-dir",
    "--out-dir",
    "output_dir",
    help="Folder for output files, created if missing.",
    type=click.Path(file_okay=False, writable=True),
    required=True,
)

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

"""Cross-validate the Phi-LASSO and summarize selected covariates."""

from __future__ import annotations

import logging
import os

from .. import formats
from ..glm import Family
from ..manifest import RunManifest
from ..solver import SolverOptions
from ..tuning import cross_validate, lambda_grid, make_folds, selection_summary
from ._inputs import load_problem

_LOG = logging.getLogger(__name__)


def parse_folds(folds: str) -> int | None:
    """Convert ``--folds`` value to a fold count, `None` for "loo".

    Raises
    ------
    ValueError
        Raised if value is neither "loo" nor an integer of at least 2.
    """
    if folds.lower() == "loo":
        return None
    try:
        k = int(folds)
    except ValueError:
        raise ValueError(f"--folds must be 'loo' or a number of folds, got {folds!r}") from None
    if k < 2:
        raise ValueError(f"Need at least 2 folds, got {k}")
    return k


def philasso_cv(
    design: str,
    response: str,
    taxonomy: str,
    family: str,
    folds: str,
    n_lambdas: int,
    min_ratio: float,
    no_intercept: bool,
    no_standardize: bool,
    normalize_rows: bool,
    augment_singleton: bool,
    output_dir: str,
    seed: int | None = None,
    threads: int = 1,
) -> None:
    """Run cross-validation and write ``cv.csv``, ``selection.tsv`` and
    ``manifest.yaml``.

    Parameters
    ----------
    design, response, taxonomy : `str`
        Input files, see `philasso_fit`.
    family : `str`
        Response family name, must be "logit".
    folds : `str`
        "loo" or a number of folds.
    n_lambdas : `int`
        Number of grid points.
    min_ratio : `float`
        Ratio of the smallest to the largest grid point.
    no_intercept, no_standardize, normalize_rows, augment_singleton : `bool`
        Fitting flags, see `philasso_fit`.
    output_dir : `str`
        Output folder.
    seed : `int`, optional
        Seed for the fold assignment, 0 if `None`.
    threads : `int`, optional
        Number of folds fitted in parallel.

    Raises
    ------
    ValueError
        Raised for the Gaussian family, tuning by AUC requires binary
        responses.
    """
    if Family(family) is not Family.BERNOULLI_LOGIT:
        raise ValueError("AUC requires binary response, use --family logit")
    k = parse_folds(folds)
    manifest = RunManifest.start(
        "cv",
        [design, response, taxonomy],
        dict(
            family=family,
            folds=folds,
            n_lambdas=n_lambdas,
            min_ratio=min_ratio,
            no_intercept=no_intercept,
            no_standardize=no_standardize,
            normalize_rows=normalize_rows,
            augment_singleton=augment_singleton,
        ),
        seed=seed,
    )
    data, tax = load_problem(
        design, response, taxonomy, family, no_intercept, normalize_rows, augment_singleton
    )
    options = SolverOptions(standardize=not no_standardize)
    grid = lambda_grid(data, n_lambdas, min_ratio, options)
    fold_list = make_folds(data.y, data.n if k is None else k, data.family, 0 if seed is None else seed)
    cv = cross_validate(data, tax, grid, fold_list, options, threads)

    summaries = {}
    for criterion, lam in (("auc", cv.best_by_auc), ("brier", cv.best_by_brier)):
        if lam is None:
            _LOG.warning("No tuning parameter eligible for selection by %s", criterion)
            continue
        _LOG.info("Best lambda by %s: %.6g", criterion, lam)
        summaries[criterion] = selection_summary(cv, lam)

    os.makedirs(output_dir, exist_ok=True)
    formats.write_table(formats.cv_table(cv), os.path.join(output_dir, "cv.csv"))
    formats.write_table(formats.selection_table(summaries, tax), os.path.join(output_dir, "selection.tsv"))
    manifest.finish()
    manifest.write(os.path.join(output_dir, "manifest.yaml"))

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

"""Fit the Phi-LASSO along a grid of tuning parameters."""

from __future__ import annotations

import logging
import os
from collections.abc import Sequence

import numpy as np

from .. import formats
from ..manifest import RunManifest
from ..solver import PathFailure, SolverOptions, check_grid, phi_lasso_path
from ..tuning import lambda_grid
from ._inputs import load_problem

_LOG = logging.getLogger(__name__)


def philasso_path(
    design: str,
    response: str,
    taxonomy: str,
    family: str,
    lambdas: Sequence[float],
    n_lambdas: int,
    min_ratio: float,
    no_intercept: bool,
    no_standardize: bool,
    normalize_rows: bool,
    augment_singleton: bool,
    output_dir: str,
) -> bool:
    """Fit a path and write ``path.csv``, ``path.jsonl`` and
    ``manifest.yaml`` to the output folder.

    Explicit ``lambdas`` replace the geometric grid built from
    ``n_lambdas`` and ``min_ratio``. Returns `True` if every fit on the
    path converged.
    """
    manifest = RunManifest.start(
        "path",
        [design, response, taxonomy],
        dict(
            family=family,
            lambdas=[float(lam) for lam in lambdas],
            n_lambdas=n_lambdas,
            min_ratio=min_ratio,
            no_intercept=no_intercept,
            no_standardize=no_standardize,
            normalize_rows=normalize_rows,
            augment_singleton=augment_singleton,
        ),
    )
    data, tax = load_problem(
        design, response, taxonomy, family, no_intercept, normalize_rows, augment_singleton
    )
    options = SolverOptions(standardize=not no_standardize)
    if lambdas:
        grid = check_grid(np.sort(np.asarray(lambdas, dtype=float))[::-1])
    else:
        grid = lambda_grid(data, n_lambdas, min_ratio, options)
    fits = phi_lasso_path(data, tax, grid, options)

    os.makedirs(output_dir, exist_ok=True)
    formats.write_table(formats.path_table(fits), os.path.join(output_dir, "path.csv"))
    formats.write_json_lines(
        (
            {"lambda": fit.lam, "error": fit.message}
            if isinstance(fit, PathFailure)
            else formats.fit_to_dict(fit)
            for fit in fits
        ),
        os.path.join(output_dir, "path.jsonl"),
    )
    manifest.finish()
    manifest.write(os.path.join(output_dir, "manifest.yaml"))
    return all(not isinstance(fit, PathFailure) and fit.converged for fit in fits)

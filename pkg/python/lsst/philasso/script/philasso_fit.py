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

"""Fit the Phi-LASSO at one tuning parameter."""

from __future__ import annotations

import logging

from .. import formats
from ..manifest import RunManifest
from ..solver import SolverOptions, phi_lasso_fit
from ._inputs import emit_json, load_problem, write_manifest

_LOG = logging.getLogger(__name__)


def philasso_fit(
    design: str,
    response: str,
    taxonomy: str,
    lam: float,
    family: str,
    no_intercept: bool,
    no_standardize: bool,
    normalize_rows: bool,
    augment_singleton: bool,
    output: str | None,
    manifest: str | None = None,
) -> bool:
    """Fit the Phi-LASSO and write the fit as JSON.

    Parameters
    ----------
    design : `str`
        Design matrix file, tab-separated with a header row.
    response : `str`
        Response file, one value per line.
    taxonomy : `str`
        Taxonomy file.
    lam : `float`
        Tuning parameter.
    family : `str`
        Response family name.
    no_intercept : `bool`
        Fit without intercept.
    no_standardize : `bool`
        Do not standardize design columns.
    normalize_rows : `bool`
        Convert design rows to relative abundances.
    augment_singleton : `bool`
        Add a singleton grouping level to the taxonomy.
    output : `str` or `None`
        Output file, standard output if `None`.
    manifest : `str` or `None`, optional
        Run manifest file, next to ``output`` by default.

    Returns
    -------
    converged : `bool`
        Whether the fit converged.
    """
    run = RunManifest.start(
        "fit",
        [design, response, taxonomy],
        dict(
            lam=lam,
            family=family,
            no_intercept=no_intercept,
            no_standardize=no_standardize,
            normalize_rows=normalize_rows,
            augment_singleton=augment_singleton,
        ),
    )
    data, tax = load_problem(
        design, response, taxonomy, family, no_intercept, normalize_rows, augment_singleton
    )
    fit = phi_lasso_fit(data, tax, lam, SolverOptions(standardize=not no_standardize))
    _LOG.info("Fit at lambda=%g selected %d covariates", lam, len(fit.support))
    emit_json(formats.fit_to_dict(fit), output)
    write_manifest(run, output, manifest)
    return fit.converged

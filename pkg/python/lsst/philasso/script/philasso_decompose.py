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

"""Compute the partial inverse of a coefficient vector."""

from __future__ import annotations

import logging
import sys

from .. import decompose, formats
from ..manifest import RunManifest
from ._inputs import emit_json, write_manifest

_LOG = logging.getLogger(__name__)


def philasso_decompose(
    beta: str, taxonomy: str, q: float, output: str | None, manifest: str | None = None
) -> bool:
    """Decompose coefficients and write the decomposition as JSON.

    Parameters
    ----------
    beta : `str`
        Coefficient file, one value per line.
    taxonomy : `str`
        Taxonomy file.
    q : `float`
        Penalty exponent.
    output : `str` or `None`
        Output file, standard output if `None`.
    manifest : `str` or `None`, optional
        Run manifest file, next to ``output`` by default.

    Returns
    -------
    converged : `bool`
        `False` if the equilibrium iteration did not converge; the residual
        is reported on standard error and nothing is written.
    """
    run = RunManifest.start("decompose", [beta, taxonomy], dict(q=q))
    values = formats.read_vector(beta)
    tax = formats.read_taxonomy(taxonomy)
    try:
        decomp = decompose.partial_inverse(values, tax, q=q)
    except decompose.DecompositionConvergenceError as exc:
        print(f"Decomposition did not converge, residual {exc.residual:.6g}: {exc}", file=sys.stderr)
        return False
    emit_json(formats.decomposition_to_dict(decomp, tax, beta=values), output)
    write_manifest(run, output, manifest)
    return True

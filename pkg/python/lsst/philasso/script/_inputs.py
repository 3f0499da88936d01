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

"""Input loading shared by command implementations."""

from __future__ import annotations

__all__ = ["emit_json", "load_problem", "write_manifest"]

import json
import logging
import os
from collections.abc import Mapping
from typing import Any

from .. import formats
from ..glm import Dataset, Family
from ..manifest import RunManifest
from ..taxonomy import DimensionMismatchError, Taxonomy, augment_with_singleton_level

_LOG = logging.getLogger(__name__)


def load_problem(
    design: str,
    response: str,
    taxonomy: str,
    family: str,
    no_intercept: bool = False,
    normalize_rows: bool = False,
    augment_singleton: bool = False,
) -> tuple[Dataset, Taxonomy]:
    """Read design, response and taxonomy files into a dataset.

    Raises
    ------
    DimensionMismatchError
        Raised if the taxonomy does not cover exactly the design columns.
    """
    x = formats.read_design(design)
    if normalize_rows:
        x = formats.normalize_rows(x)
    y = formats.read_vector(response)
    tax = formats.read_taxonomy(taxonomy)
    if augment_singleton:
        tax = augment_with_singleton_level(tax)
    if tax.p != x.shape[1]:
        raise DimensionMismatchError(
            f"dimension mismatch: design has {x.shape[1]} covariates, taxonomy has {tax.p}"
        )
    data = Dataset(x, y, Family(family), intercept=not no_intercept)
    _LOG.info("Loaded n=%d samples, p=%d covariates, T=%d grouping levels", data.n, data.p, tax.T)
    return data, tax


def emit_json(document: Mapping[str, Any], output: str | None) -> None:
    """Write JSON to a file or, without a file name, to standard output."""
    if output is None:
        print(json.dumps(document, indent=2))
    else:
        formats.write_json(document, output)


def write_manifest(manifest: RunManifest, output: str | None, path: str | None) -> None:
    """Finish a run manifest and write it.

    Without an explicit ``path`` the manifest goes next to ``output`` as
    ``<stem>.manifest.yaml``; nothing is written when the output went to
    standard output.
    """
    if path is None:
        if output is None:
            return
        path = os.path.splitext(output)[0] + ".manifest.yaml"
    manifest.finish()
    manifest.write(path)
    _LOG.debug("Wrote manifest of run %s to %s", manifest.run_id, path)

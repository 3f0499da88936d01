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

"""Readers and writers of the command-line file formats.

All indices in files are 1-based. Tables are read and written with
`astropy.table`, JSON documents with `json` using a fixed key order so
that repeated runs produce identical bytes.
"""

from __future__ import annotations

__all__ = [
    "TAXON_LABEL_SEPARATOR",
    "cv_table",
    "decomposition_to_dict",
    "experiment_table",
    "fit_to_dict",
    "normalize_rows",
    "path_table",
    "read_design",
    "read_taxonomy",
    "read_vector",
    "selection_table",
    "taxonomy_table",
    "tuning_table",
    "write_json",
    "write_json_lines",
    "write_table",
    "write_taxonomy",
]

import json
import logging
import os
from collections.abc import Iterable, Mapping
from typing import Any

import numpy as np
from astropy.io.ascii import convert_numpy
from astropy.table import Table

from . import decompose
from .sim.experiment import ExperimentResult
from .solver import PathFailure, PhiLassoFit
from .taxonomy import Taxonomy, TaxonomyFormatError, TaxonomyRow, TaxonomyTable, parse_taxonomy
from .tuning import CvResult, SelectionSummary

_LOG = logging.getLogger(__name__)

TAXON_LABEL_SEPARATOR = "~"
"""Separator of the suffix that makes repeated taxon labels unique."""

MISSING_LABEL = "-"
"""Placeholder for a label of a level the taxonomy does not have."""

_FORMATS = {".csv": "ascii.csv", ".tsv": "ascii.tab"}


def _table_format(path: str | os.PathLike) -> str:
    extension = os.path.splitext(os.fspath(path))[1].lower()
    return _FORMATS.get(extension, "ascii.tab")


def _cell(value: Any) -> str:
    return "" if value is np.ma.masked else str(value)


def read_taxonomy(path: str | os.PathLike) -> Taxonomy:
    """Read taxonomy from a tab-separated file.

    The header row is ``index``, one column per grouping level and a last
    column with the terminal unit labels; there is one row per covariate.

    Parameters
    ----------
    path : `str` or `os.PathLike`
        File name.

    Returns
    -------
    taxonomy : `~lsst.philasso.taxonomy.Taxonomy`
        Valid taxonomy.

    Raises
    ------
    TaxonomyFormatError
        Raised if the file cannot be parsed as a taxonomy.
    """
    try:
        table = Table.read(os.fspath(path), format="ascii.tab", converters={"*": [convert_numpy(str)]})
    except (ValueError, IndexError) as exc:
        raise TaxonomyFormatError(f"Cannot read taxonomy file {path}: {exc}") from exc
    columns = list(table.colnames)
    if len(columns) < 3 or columns[0].lower() != "index":
        raise TaxonomyFormatError(
            f"Taxonomy file {path} must have columns index, at least one level and a unit column"
        )
    rows = []
    for record in table:
        try:
            index = int(record[0])
        except ValueError:
            raise TaxonomyFormatError(f"Invalid covariate index {record[0]!r} in {path}") from None
        rows.append(
            TaxonomyRow(
                index=index,
                labels=tuple(_cell(record[name]) for name in columns[1:-1]),
                unit=_cell(record[columns[-1]]),
            )
        )
    return parse_taxonomy(TaxonomyTable(tuple(columns[1:-1]), columns[-1], tuple(rows)))


def _unique_labels(level: Iterable[Any]) -> dict[int, str]:
    labels = {taxon.order: taxon.label for taxon in level}
    counts: dict[str, int] = {}
    for label in labels.values():
        counts[label] = counts.get(label, 0) + 1
    return {
        order: label if counts[label] == 1 else f"{label}{TAXON_LABEL_SEPARATOR}{order + 1}"
        for order, label in labels.items()
    }


def taxonomy_table(taxonomy: Taxonomy) -> Table:
    """Return tabular form of a taxonomy.

    Labels repeated within a level get a numeric suffix so that the table
    reads back into the same taxa.
    """
    table = Table()
    table["index"] = np.arange(1, taxonomy.p + 1)
    for t, level in enumerate(taxonomy.levels):
        labels = _unique_labels(level)
        membership = taxonomy.membership(t)
        table[taxonomy.level_names[t]] = [labels[int(order)] for order in membership]
    return table


def write_taxonomy(taxonomy: Taxonomy, path: str | os.PathLike) -> None:
    """Write taxonomy in the format read by `read_taxonomy`."""
    taxonomy_table(taxonomy).write(os.fspath(path), format="ascii.tab", overwrite=True)


def read_design(path: str | os.PathLike) -> np.ndarray:
    """Read design matrix from a tab-separated file with a header row of
    covariate identifiers.

    Raises
    ------
    ValueError
        Raised if the file is not a numeric table matching its header.
    """
    with open(path) as file:
        header = file.readline().rstrip("\n").split("\t")
    x = np.loadtxt(path, delimiter="\t", skiprows=1, ndmin=2)
    if x.shape[0] == 0:
        raise ValueError(f"Design file {path} has no samples")
    if x.shape[1] != len(header):
        raise ValueError(f"Design file {path} has {len(header)} identifiers but {x.shape[1]} columns")
    _LOG.debug("Read design %s with shape %s", path, x.shape)
    return x


def read_vector(path: str | os.PathLike) -> np.ndarray:
    """Read a vector stored one value per line."""
    return np.loadtxt(path, ndmin=1)


def normalize_rows(x: np.ndarray) -> np.ndarray:
    """Convert counts to relative abundances, each row divided by its
    sum.
    """
    totals = x.sum(axis=1)
    if np.any(totals <= 0):
        raise ValueError("Cannot normalize rows: some rows do not have a positive sum")
    return x / totals[:, None]


def _sparse(beta: np.ndarray) -> dict[str, float]:
    return {str(j + 1): float(beta[j]) for j in np.flatnonzero(beta)}


def fit_to_dict(fit: PhiLassoFit) -> dict[str, Any]:
    """Return fit as a JSON-compatible mapping with a sparse ``beta``."""
    return {
        "lambda": fit.lam,
        "intercept": float(fit.intercept),
        "beta": _sparse(fit.beta),
        "p": int(len(fit.beta)),
        "converged": bool(fit.converged),
        "outerIterations": int(fit.outer_iterations),
        "kktResidual": float(fit.kkt_residual),
        "objective": float(fit.objective),
    }


def decomposition_to_dict(
    decomp: decompose.Decomposition,
    taxonomy: Taxonomy,
    residual: float | None = None,
    beta: np.ndarray | None = None,
) -> dict[str, Any]:
    """Return decomposition as a JSON-compatible mapping.

    Parameters
    ----------
    decomp : `~lsst.philasso.decompose.Decomposition`
        Decomposition to convert.
    taxonomy : `~lsst.philasso.taxonomy.Taxonomy`
        Taxonomy of the decomposition.
    residual : `float`, optional
        Mass-equilibrium residual, computed if missing.
    beta : `numpy.ndarray`, optional
        Decomposed coefficients; when given, the largest deviation of the
        composed decomposition from them is reported.

    Returns
    -------
    document : `dict`
        Mapping with keys ``q``, ``d`` (one entry per grouping-level taxon
        with 1-based ``level`` and ``taxon``), ``alpha``, ``residual`` and,
        if ``beta`` is given, ``composeResidual``.
    """
    if residual is None:
        residual = decompose.equilibrium_residual(decomp, taxonomy)
    d = [
        {
            "level": taxon.level + 1,
            "taxon": taxon.order + 1,
            "name": taxon.label,
            "value": decomp.value(taxon),
        }
        for level in taxonomy.grouping_levels
        for taxon in level
    ]
    document: dict[str, Any] = {
        "q": float(decomp.q),
        "d": d,
        "alpha": [float(value) for value in decomp.alpha],
        "residual": float(residual),
    }
    if beta is not None:
        deviation = np.abs(decompose.compose(decomp, taxonomy) - beta)
        document["composeResidual"] = float(np.max(deviation, initial=0.0))
    return document


def write_json(document: Mapping[str, Any], path: str | os.PathLike) -> None:
    """Write one JSON document followed by a newline."""
    with open(path, "w") as file:
        json.dump(document, file, indent=2)
        file.write("\n")


def write_json_lines(documents: Iterable[Mapping[str, Any]], path: str | os.PathLike) -> None:
    """Write JSON documents, one per line."""
    with open(path, "w") as file:
        for document in documents:
            file.write(json.dumps(document) + "\n")


def write_table(table: Table, path: str | os.PathLike) -> None:
    """Write table as CSV or TSV depending on the file extension."""
    table.write(os.fspath(path), format=_table_format(path), overwrite=True)


def path_table(fits: Iterable[PhiLassoFit | PathFailure]) -> Table:
    """Return one row per tuning parameter of a path, failed fits have
    ``converged`` false and NaN values.
    """
    rows = []
    for fit in fits:
        if isinstance(fit, PathFailure):
            rows.append((fit.lam, False, 0, 0, np.nan, np.nan))
        else:
            rows.append(
                (
                    fit.lam,
                    fit.converged,
                    fit.outer_iterations,
                    len(fit.support),
                    fit.objective,
                    fit.kkt_residual,
                )
            )
    return Table(
        rows=rows or None,
        names=("lambda", "converged", "outerIterations", "supportSize", "objective", "kktResidual"),
        dtype=(float, bool, int, int, float, float),
    )


def cv_table(cv: CvResult) -> Table:
    """Return the cross-validation curves, one row per tuning parameter."""
    return Table(
        [cv.grid, cv.auc, cv.brier, cv.deviance, cv.mean_support_size],
        names=("lambda", "auc", "brier", "deviance", "meanSupportSize"),
    )


def _level_labels(taxonomy: Taxonomy, name: str) -> list[str]:
    t = taxonomy.level_index(name)
    if t is None:
        return [MISSING_LABEL] * taxonomy.p
    labels = {taxon.order: taxon.label for taxon in taxonomy.levels[t]}
    return [labels[int(order)] for order in taxonomy.membership(t)]


def selection_table(summaries: Mapping[str, SelectionSummary], taxonomy: Taxonomy) -> Table:
    """Return covariates selected in at least one fold.

    Parameters
    ----------
    summaries : `~collections.abc.Mapping` [ `str`, `SelectionSummary` ]
        Selection summaries keyed by the criterion that chose their tuning
        parameter.
    taxonomy : `~lsst.philasso.taxonomy.Taxonomy`
        Taxonomy providing the unit, family and genus labels.

    Returns
    -------
    table : `astropy.table.Table`
        One row per criterion and selected covariate, covariates 1-based.
    """
    units = [taxon.label for taxon in taxonomy.levels[-1]]
    family = _level_labels(taxonomy, "family")
    genus = _level_labels(taxonomy, "genus")
    rows = []
    for criterion, summary in summaries.items():
        for j in summary.selected:
            rows.append(
                (
                    criterion,
                    summary.lam,
                    int(j) + 1,
                    units[j],
                    family[j],
                    genus[j],
                    float(summary.frequency[j]),
                    float(summary.mean[j]),
                    float(summary.se[j]),
                )
            )
    return Table(
        rows=rows or None,
        names=(
            "criterion",
            "lambda",
            "covariate",
            "unit-label",
            "family-label",
            "genus-label",
            "frequency",
            "meanEstimate",
            "se",
        ),
        dtype=(str, float, int, str, str, str, float, float, float),
    )


def experiment_table(result: ExperimentResult) -> Table:
    """Return mean and standard error per method, sample size and metric;
    header only when nothing was evaluated.
    """
    rows = [(row.method, row.n, row.metric, row.mean, row.se) for row in result.summary_rows()]
    return Table(
        rows=rows or None,
        names=("method", "n", "metric", "mean", "se"),
        dtype=(str, int, str, float, float),
    )


def tuning_table(result: ExperimentResult) -> Table:
    """Return the per-parameter tuning medians of an experiment."""
    rows = [
        (row.n, row.lam, row.mspe, row.recall, row.precision, row.support_size, row.selected)
        for row in result.tuning
    ]
    return Table(
        rows=rows or None,
        names=("n", "lambda", "mspe", "recall", "precision", "supportSize", "selected"),
        dtype=(int, float, float, float, float, float, bool),
    )

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

"""Evaluate predictions or estimates."""

from __future__ import annotations

from typing import Any

from .. import formats, metrics
from ..manifest import RunManifest
from ._inputs import emit_json, write_manifest


def philasso_metrics(
    predictions: str | None,
    labels: str | None,
    estimate: str | None,
    truth: str | None,
    output: str | None,
    manifest: str | None = None,
) -> None:
    """Compute AUC and Brier score of predicted probabilities and/or
    support recovery and squared error of estimated coefficients.

    Raises
    ------
    ValueError
        Raised unless at least one complete pair of files is given.
    """
    if (predictions is None) != (labels is None) or (estimate is None) != (truth is None):
        raise ValueError("--predictions needs --labels and --estimate needs --truth")
    if predictions is None and estimate is None:
        raise ValueError("Nothing to evaluate, give --predictions/--labels or --estimate/--truth")
    inputs = [path for path in (predictions, labels, estimate, truth) if path is not None]
    run = RunManifest.start("metrics", inputs, {})
    document: dict[str, Any] = {}
    if predictions is not None and labels is not None:
        scores = formats.read_vector(predictions)
        y = formats.read_vector(labels)
        document["auc"] = metrics.auc(scores, y)
        document["brier"] = metrics.brier(scores, y)
    if estimate is not None and truth is not None:
        beta = formats.read_vector(estimate)
        true_beta = formats.read_vector(truth)
        recall, precision = metrics.support_metrics(beta, true_beta)
        document["recall"] = recall
        document["precision"] = precision
        document["sse"] = float(((beta - true_beta) ** 2).sum())
    emit_json(document, output)
    write_manifest(run, output, manifest)

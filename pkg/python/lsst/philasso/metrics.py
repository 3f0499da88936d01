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

"""Evaluation metrics for fitted models."""

from __future__ import annotations

__all__ = ["PerformanceRecord", "auc", "brier", "deviance", "estimation_errors", "support_metrics"]

import dataclasses
from typing import Protocol

import numpy as np
from scipy.stats import rankdata

from .glm import MU_EPS, Dataset, Family, predict
from .taxonomy import DimensionMismatchError


class _Fit(Protocol):
    @property
    def beta(self) -> np.ndarray: ...

    @property
    def intercept(self) -> float: ...


@dataclasses.dataclass(frozen=True)
class PerformanceRecord:
    """Estimation, prediction and support-recovery errors of one fit."""

    sse: float
    """Squared estimation error ``||beta_hat - beta_true||**2``."""

    mspe: float
    """Mean squared prediction error on a validation set."""

    recall: float
    precision: float


def _binary_labels(labels: np.ndarray, size: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.shape != (size,):
        raise DimensionMismatchError(
            f"dimension mismatch: {size} values but labels have shape {labels.shape}"
        )
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError("Labels must be 0 or 1")
    return labels.astype(bool)


def auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Compute the area under the ROC curve.

    The Mann-Whitney statistic with midranks, i.e. the probability that a
    positive scores above a negative plus half the probability of a tie.

    Raises
    ------
    ValueError
        Raised if only one class is present.
    """
    scores = np.asarray(scores, dtype=float)
    positive = _binary_labels(labels, len(scores))
    n_pos = int(positive.sum())
    n_neg = len(scores) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC requires binary response with both classes present")
    rank_sum = float(rankdata(scores)[positive].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg)


def brier(probabilities: np.ndarray, labels: np.ndarray) -> float:
    """Return the mean squared difference between probabilities and
    labels.
    """
    probabilities = np.asarray(probabilities, dtype=float)
    positive = _binary_labels(labels, len(probabilities))
    if np.any(probabilities < 0) or np.any(probabilities > 1):
        raise ValueError("Probabilities must lie in [0, 1]")
    return float(np.mean((probabilities - positive) ** 2))


def deviance(y: np.ndarray, mu: np.ndarray, family: Family) -> float:
    """Return the total deviance of predictions.

    Residual sum of squares for the Gaussian family, ``-2`` times the
    Bernoulli log-likelihood for the logit family.
    """
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if family is Family.GAUSSIAN:
        return float(np.sum((y - mu) ** 2))
    mu = np.clip(mu, MU_EPS, 1.0 - MU_EPS)
    return float(-2.0 * np.sum(y * np.log(mu) + (1.0 - y) * np.log1p(-mu)))


def support_metrics(estimated: np.ndarray, truth: np.ndarray) -> tuple[float, float]:
    """Compare nonzero patterns of two coefficient vectors.

    Returns
    -------
    recall : `float`
        ``tp / (tp + fn)``, 1 when the true support is empty.
    precision : `float`
        ``tp / (tp + fp)``, 1 when nothing is selected.
    """
    estimated = np.asarray(estimated) != 0
    truth = np.asarray(truth) != 0
    if estimated.shape != truth.shape:
        raise DimensionMismatchError(f"dimension mismatch: {estimated.shape} vs {truth.shape}")
    tp = int(np.sum(estimated & truth))
    fp = int(np.sum(estimated & ~truth))
    fn = int(np.sum(~estimated & truth))
    recall = tp / (tp + fn) if tp + fn else 1.0
    precision = tp / (tp + fp) if tp + fp else 1.0
    return recall, precision


def estimation_errors(fit: _Fit, true_beta: np.ndarray, validation: Dataset) -> PerformanceRecord:
    """Evaluate a fit against the true coefficients and a validation set.

    Parameters
    ----------
    fit
        Any object with ``beta`` and ``intercept`` attributes.
    true_beta : `numpy.ndarray`
        True coefficients.
    validation : `~lsst.philasso.glm.Dataset`
        Held-out data for the prediction error.

    Returns
    -------
    record : `PerformanceRecord`
        Errors of the fit.
    """
    beta = validation.check_beta(fit.beta)
    true_beta = validation.check_beta(true_beta)
    residual = validation.y - predict(validation, beta, fit.intercept)
    recall, precision = support_metrics(beta, true_beta)
    return PerformanceRecord(
        sse=float(np.sum((beta - true_beta) ** 2)),
        mspe=float(np.mean(residual**2)),
        recall=recall,
        precision=precision,
    )

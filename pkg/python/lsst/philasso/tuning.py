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

"""Tuning-parameter selection by cross-validation or a validation set."""

from __future__ import annotations

__all__ = [
    "MAX_FAILED_FRACTION",
    "CvResult",
    "SelectionSummary",
    "ValidationTuning",
    "cross_validate",
    "kfold_cv",
    "lambda_grid",
    "loo_cv",
    "make_folds",
    "selection_summary",
    "validation_tune",
]

import dataclasses
import logging
from collections.abc import Sequence

import numpy as np
from joblib import Parallel, delayed
from lsst.utils.timer import time_this

from . import metrics
from .glm import Dataset, Family, predict
from .solver import PathFailure, PhiLassoFit, SolverOptions, check_grid, null_lambda, phi_lasso_path
from .taxonomy import DimensionMismatchError, Taxonomy

_LOG = logging.getLogger(__name__)

MAX_FAILED_FRACTION = 0.10
"""Tuning parameters with a larger fraction of failed folds are not
eligible for selection.
"""


def lambda_grid(
    data: Dataset, n_points: int, min_ratio: float, options: SolverOptions = SolverOptions()
) -> np.ndarray:
    """Make a descending geometric grid of tuning parameters.

    Parameters
    ----------
    data : `~lsst.philasso.glm.Dataset`
        Data used to compute the null threshold.
    n_points : `int`
        Number of grid points, at least 1.
    min_ratio : `float`
        Ratio of the last to the first grid point, in ``(0, 1)``.
    options : `~lsst.philasso.solver.SolverOptions`, optional
        Solver options, they define the internal scale.

    Returns
    -------
    grid : `numpy.ndarray`
        Grid starting at the null threshold of the plain LASSO.
    """
    if n_points < 1:
        raise ValueError(f"Grid needs at least one point, got {n_points}")
    if not 0 < min_ratio < 1:
        raise ValueError(f"min_ratio must be in (0, 1), got {min_ratio}")
    lam_max = null_lambda(data, options)
    if n_points == 1:
        return np.array([lam_max])
    return np.geomspace(lam_max, lam_max * min_ratio, n_points)


@dataclasses.dataclass(frozen=True)
class CvResult:
    """Cross-validation results over a grid of tuning parameters."""

    grid: np.ndarray
    """Tuning parameters, descending."""

    folds: tuple[np.ndarray, ...]
    """Held-out sample indices of every fold."""

    predictions: np.ndarray
    """Out-of-fold mean predictions, shape ``(n_lambda, n)``; NaN where the
    fold fit failed.
    """

    fold_betas: np.ndarray
    """Fold coefficients, shape ``(n_folds, n_lambda, p)``."""

    fold_failed: np.ndarray
    """Failed fits, shape ``(n_folds, n_lambda)``."""

    auc: np.ndarray
    brier: np.ndarray
    deviance: np.ndarray
    """Mean out-of-fold deviance per sample."""

    mean_support_size: np.ndarray
    eligible: np.ndarray
    """Tuning parameters with at most `MAX_FAILED_FRACTION` failed folds."""

    best_by_auc: float | None
    """Largest AUC among eligible models with a non-empty support."""

    best_by_brier: float | None
    best_by_deviance: float | None


@dataclasses.dataclass(frozen=True)
class SelectionSummary:
    """Per-covariate selection statistics at one tuning parameter."""

    lam: float
    frequency: np.ndarray
    """Fraction of folds selecting each covariate."""

    mean: np.ndarray
    """Mean of fold estimates, including zeros."""

    se: np.ndarray
    """Jackknife standard error of fold estimates."""

    n_folds: int

    @property
    def selected(self) -> np.ndarray:
        """Indices of covariates selected in at least one fold."""
        return np.flatnonzero(self.frequency > 0)


@dataclasses.dataclass(frozen=True)
class ValidationTuning:
    """Result of tuning on a validation set."""

    best_lambda: float
    mspe: np.ndarray
    """Validation mean squared prediction error per tuning parameter."""

    fits: list[PhiLassoFit | PathFailure]


@dataclasses.dataclass(frozen=True)
class _FoldResult:
    betas: np.ndarray
    predictions: np.ndarray
    failed: np.ndarray


def _fit_fold(
    data: Dataset,
    taxonomy: Taxonomy,
    grid: np.ndarray,
    options: SolverOptions,
    test: np.ndarray,
) -> _FoldResult:
    train = np.setdiff1d(np.arange(data.n), test)
    train_data = data.subset(train)
    test_data = data.subset(test)
    betas = np.zeros((len(grid), data.p))
    predictions = np.full((len(grid), len(test)), np.nan)
    failed = np.zeros(len(grid), dtype=bool)
    for k, fit in enumerate(phi_lasso_path(train_data, taxonomy, grid, options)):
        if isinstance(fit, PathFailure):
            failed[k] = True
            continue
        betas[k] = fit.beta
        predictions[k] = predict(test_data, fit.beta, fit.intercept)
    return _FoldResult(betas=betas, predictions=predictions, failed=failed)


def _best(values: np.ndarray, mask: np.ndarray, grid: np.ndarray, maximize: bool) -> float | None:
    """Return the optimal grid value among masked entries, the largest one
    on ties.
    """
    candidates = np.flatnonzero(mask & np.isfinite(values))
    if len(candidates) == 0:
        return None
    scores = values[candidates]
    position = int(np.argmax(scores) if maximize else np.argmin(scores))
    return float(grid[candidates[position]])


def make_folds(y: np.ndarray, k: int, family: Family = Family.GAUSSIAN, seed: int = 0) -> list[np.ndarray]:
    """Split samples into cross-validation folds.

    Parameters
    ----------
    y : `numpy.ndarray`
        Responses, used for stratification of the logit family.
    k : `int`
        Number of folds, at least 2. With ``k >= n`` every sample is its own
        fold, in sample order.
    family : `~lsst.philasso.glm.Family`, optional
        Family of the responses.
    seed : `int`, optional
        Seed of the shuffling.

    Returns
    -------
    folds : `list` [ `numpy.ndarray` ]
        Sorted held-out indices of every fold.
    """
    n = len(y)
    if k < 2:
        raise ValueError(f"Need at least two folds, got {k}")
    if k >= n:
        return [np.array([i]) for i in range(n)]
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    if family is Family.BERNOULLI_LOGIT:
        positive = np.asarray(y)[order] == 1
        order = np.concatenate([order[positive], order[~positive]])
    return [np.sort(order[start::k]) for start in range(k)]


def cross_validate(
    data: Dataset,
    taxonomy: Taxonomy,
    grid: Sequence[float] | np.ndarray,
    folds: Sequence[np.ndarray],
    options: SolverOptions = SolverOptions(),
    threads: int = 1,
) -> CvResult:
    """Cross-validate Phi-LASSO fits over a grid of tuning parameters.

    Parameters
    ----------
    data : `~lsst.philasso.glm.Dataset`
        Data to fit, at least three samples.
    taxonomy : `~lsst.philasso.taxonomy.Taxonomy`
        Valid taxonomy over the covariates.
    grid : `~collections.abc.Sequence` [ `float` ]
        Descending tuning parameters.
    folds : `~collections.abc.Sequence` [ `numpy.ndarray` ]
        Held-out indices of every fold, together covering every sample
        once.
    options : `~lsst.philasso.solver.SolverOptions`, optional
        Solver options.
    threads : `int`, optional
        Number of folds fitted in parallel.

    Returns
    -------
    result : `CvResult`
        Out-of-fold predictions and per-parameter scores. AUC and Brier
        score are NaN for the Gaussian family.
    """
    values = check_grid(grid)
    if data.n < 3:
        raise ValueError(f"Cross-validation needs at least 3 samples, got {data.n}")
    if taxonomy.p != data.p:
        raise DimensionMismatchError(
            f"dimension mismatch: design has {data.p} covariates, taxonomy has {taxonomy.p}"
        )
    folds = tuple(np.asarray(fold, dtype=np.intp) for fold in folds)
    covered = np.sort(np.concatenate(folds)) if folds else np.array([], dtype=np.intp)
    if not np.array_equal(covered, np.arange(data.n)):
        raise ValueError("Folds must cover every sample exactly once")

    with time_this(log=_LOG, msg="Cross-validation over %d folds", args=(len(folds),)):
        results = Parallel(n_jobs=threads)(
            delayed(_fit_fold)(data, taxonomy, values, options, fold) for fold in folds
        )

    n_lambda = len(values)
    predictions = np.full((n_lambda, data.n), np.nan)
    fold_betas = np.zeros((len(folds), n_lambda, data.p))
    fold_failed = np.zeros((len(folds), n_lambda), dtype=bool)
    for f, (fold, result) in enumerate(zip(folds, results, strict=True)):
        predictions[:, fold] = result.predictions
        fold_betas[f] = result.betas
        fold_failed[f] = result.failed

    logit = data.family is Family.BERNOULLI_LOGIT
    auc = np.full(n_lambda, np.nan)
    brier = np.full(n_lambda, np.nan)
    deviance = np.full(n_lambda, np.nan)
    for k in range(n_lambda):
        ok = np.isfinite(predictions[k])
        if not ok.any():
            continue
        y, mu = data.y[ok], predictions[k, ok]
        deviance[k] = metrics.deviance(y, mu, data.family) / ok.sum()
        if logit:
            brier[k] = metrics.brier(mu, y)
            if 0 < y.sum() < len(y):
                auc[k] = metrics.auc(mu, y)

    support = np.count_nonzero(fold_betas, axis=2)
    succeeded = ~fold_failed
    n_succeeded = succeeded.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean_support = np.where(n_succeeded > 0, (support * succeeded).sum(axis=0) / n_succeeded, np.nan)
    null_model = ~np.any((support > 0) & succeeded, axis=0)
    eligible = fold_failed.mean(axis=0) <= MAX_FAILED_FRACTION
    excluded = np.count_nonzero(~eligible)
    if excluded:
        _LOG.warning("%d tuning parameters excluded from selection because of failed folds", excluded)

    return CvResult(
        grid=values,
        folds=folds,
        predictions=predictions,
        fold_betas=fold_betas,
        fold_failed=fold_failed,
        auc=auc,
        brier=brier,
        deviance=deviance,
        mean_support_size=mean_support,
        eligible=eligible,
        best_by_auc=_best(auc, eligible & ~null_model, values, maximize=True),
        best_by_brier=_best(brier, eligible, values, maximize=False),
        best_by_deviance=_best(deviance, eligible, values, maximize=False),
    )


def loo_cv(
    data: Dataset,
    taxonomy: Taxonomy,
    grid: Sequence[float] | np.ndarray,
    options: SolverOptions = SolverOptions(),
    threads: int = 1,
) -> CvResult:
    """Leave-one-out cross-validation, see `cross_validate`."""
    return cross_validate(data, taxonomy, grid, make_folds(data.y, data.n), options, threads)


def kfold_cv(
    data: Dataset,
    taxonomy: Taxonomy,
    grid: Sequence[float] | np.ndarray,
    k: int,
    seed: int = 0,
    options: SolverOptions = SolverOptions(),
    threads: int = 1,
) -> CvResult:
    """K-fold cross-validation, stratified for the logit family, see
    `cross_validate`.
    """
    folds = make_folds(data.y, k, data.family, seed)
    return cross_validate(data, taxonomy, grid, folds, options, threads)


def selection_summary(cv: CvResult, lam: float) -> SelectionSummary:
    """Summarize fold estimates at one tuning parameter.

    Parameters
    ----------
    cv : `CvResult`
        Cross-validation result.
    lam : `float`
        Tuning parameter, must be a grid value.

    Returns
    -------
    summary : `SelectionSummary`
        Statistics over the folds whose fit succeeded.

    Raises
    ------
    ValueError
        Raised if ``lam`` is not in the grid or all folds failed there.
    """
    matches = np.flatnonzero(np.isclose(cv.grid, lam, rtol=1e-12, atol=0.0))
    if len(matches) == 0:
        raise ValueError(f"Tuning parameter {lam} is not in the cross-validation grid")
    index = int(matches[0])
    betas = cv.fold_betas[~cv.fold_failed[:, index], index, :]
    k = len(betas)
    if k == 0:
        raise ValueError(f"All folds failed at tuning parameter {lam}")
    mean = betas.mean(axis=0)
    se = np.sqrt((k - 1) / k * np.sum((betas - mean) ** 2, axis=0))
    return SelectionSummary(
        lam=float(cv.grid[index]),
        frequency=np.count_nonzero(betas, axis=0) / k,
        mean=mean,
        se=se,
        n_folds=k,
    )


def validation_tune(
    train: Dataset,
    valid: Dataset,
    taxonomy: Taxonomy,
    grid: Sequence[float] | np.ndarray,
    options: SolverOptions = SolverOptions(),
) -> ValidationTuning:
    """Select the tuning parameter minimizing validation prediction error.

    Parameters
    ----------
    train : `~lsst.philasso.glm.Dataset`
        Training data.
    valid : `~lsst.philasso.glm.Dataset`
        Validation data with the same covariates.
    taxonomy : `~lsst.philasso.taxonomy.Taxonomy`
        Valid taxonomy over the covariates.
    grid : `~collections.abc.Sequence` [ `float` ]
        Descending tuning parameters.
    options : `~lsst.philasso.solver.SolverOptions`, optional
        Solver options.

    Returns
    -------
    tuning : `ValidationTuning`
        Selected parameter, the largest one on ties, with per-parameter
        errors (infinite where the fit failed) and the path fits.
    """
    if train.p != valid.p:
        raise DimensionMismatchError(
            f"dimension mismatch: training data has {train.p} covariates, validation data {valid.p}"
        )
    fits = phi_lasso_path(train, taxonomy, grid, options)
    mspe = np.array(
        [
            np.inf
            if isinstance(fit, PathFailure)
            else float(np.mean((valid.y - predict(valid, fit.beta, fit.intercept)) ** 2))
            for fit in fits
        ]
    )
    if len(mspe) == 0 or not np.any(np.isfinite(mspe)):
        raise ValueError("No successful fit on the tuning-parameter grid")
    return ValidationTuning(best_lambda=float(fits[int(np.argmin(mspe))].lam), mspe=mspe, fits=fits)

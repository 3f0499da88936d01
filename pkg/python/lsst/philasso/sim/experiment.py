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

from __future__ import annotations

__all__ = ["ExperimentResult", "SummaryRow", "TuningRow", "run_experiment"]

import dataclasses
import functools
import logging
from collections.abc import Iterator

import numpy as np
from joblib import Parallel, delayed
from lsst.utils.timer import time_this

from .. import decompose
from ..glm import Dataset
from ..metrics import PerformanceRecord, estimation_errors, support_metrics
from ..solver import SolverError, SolverOptions, null_lambda, phi_lasso_fit
from ..tuning import validation_tune
from .config import ExperimentConfig, SimConfig
from .generator import (
    SimReplicate,
    SingularDesignError,
    Stream,
    fitting_taxonomy,
    gen_dataset,
    oracle_ols,
    replicate_rng,
    true_beta,
)

_LOG = logging.getLogger(__name__)

METHODS = ("philasso", "oracle")
"""Names of the compared estimators, in output order."""

METRICS = ("sse", "mspe", "recall", "precision")
"""Names of the reported errors, in output order."""

_FIT_ERRORS = (
    decompose.DecompositionConvergenceError,
    SolverError,
    SingularDesignError,
    np.linalg.LinAlgError,
)


@dataclasses.dataclass(frozen=True)
class TuningRow:
    """Medians over tuning replicates at one tuning parameter."""

    n: int
    lam: float
    mspe: float
    recall: float
    precision: float
    support_size: float
    selected: bool


@dataclasses.dataclass(frozen=True)
class SummaryRow:
    """Mean and standard error of one metric for one method and sample
    size.
    """

    method: str
    n: int
    metric: str
    mean: float
    se: float


@dataclasses.dataclass
class ExperimentResult:
    """Per-replicate records and tuning traces of an experiment."""

    config: ExperimentConfig
    records: dict[tuple[str, int], list[PerformanceRecord]] = dataclasses.field(default_factory=dict)
    """Records of successful fits keyed by method and sample size."""

    failures: dict[tuple[str, int], int] = dataclasses.field(default_factory=dict)
    """Number of replicates excluded because the fit raised."""

    selected_lambda: dict[int, float] = dataclasses.field(default_factory=dict)
    tuning: list[TuningRow] = dataclasses.field(default_factory=list)

    def summary_rows(self) -> Iterator[SummaryRow]:
        """Generate mean and standard error of every metric.

        Cells without successful replicates are skipped. The standard
        error is ``std(ddof=1) / sqrt(k)``, NaN for a single replicate.
        """
        for n in self.config.n_list:
            for method in METHODS:
                records = self.records.get((method, n), [])
                if not records:
                    continue
                for metric in METRICS:
                    values = np.array([getattr(record, metric) for record in records])
                    se = float(np.std(values, ddof=1) / np.sqrt(len(values))) if len(values) > 1 else np.nan
                    yield SummaryRow(method=method, n=n, metric=metric, mean=float(values.mean()), se=se)

    def medians(self, method: str, n: int) -> dict[str, float]:
        """Return median of every metric over successful replicates."""
        records = self.records.get((method, n), [])
        return {
            metric: float(np.median([getattr(record, metric) for record in records])) for metric in METRICS
        }


@functools.lru_cache(maxsize=2)
def _validation_set(sim: SimConfig, stream: Stream, n: int) -> Dataset:
    """Return the validation set shared by all replicates of one sample
    size, regenerated identically in every worker.
    """
    return gen_dataset(sim, sim.n_valid, replicate_rng(sim.seed, stream, n))


def _tune_replicate(
    sim: SimConfig, train: Dataset, grid: np.ndarray, options: SolverOptions
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    valid = _validation_set(sim, Stream.TUNE_VALID, train.n)
    beta = true_beta(sim)
    tuning = validation_tune(train, valid, fitting_taxonomy(sim), grid, options)
    size = len(grid)
    recall, precision, support = np.full(size, np.nan), np.full(size, np.nan), np.full(size, np.nan)
    for k, fit in enumerate(tuning.fits):
        if np.isfinite(tuning.mspe[k]):
            recall[k], precision[k] = support_metrics(fit.beta, beta)
            support[k] = np.count_nonzero(fit.beta)
    return tuning.mspe, recall, precision, support


def _evaluate_replicate(
    sim: SimConfig, n: int, index: int, lam: float, options: SolverOptions
) -> dict[str, PerformanceRecord | str]:
    beta = true_beta(sim)
    train = gen_dataset(sim, n, replicate_rng(sim.seed, Stream.EVAL, n, index), beta)
    valid = _validation_set(sim, Stream.EVAL_VALID, n)
    replicate = SimReplicate(train=train, valid=valid, true_beta=beta, taxonomy=fitting_taxonomy(sim))
    outcome: dict[str, PerformanceRecord | str] = {}
    try:
        fit = phi_lasso_fit(train, replicate.taxonomy, lam, options)
        outcome["philasso"] = estimation_errors(fit, beta, valid)
    except _FIT_ERRORS as exc:
        outcome["philasso"] = str(exc)
    try:
        outcome["oracle"] = estimation_errors(oracle_ols(replicate), beta, valid)
    except _FIT_ERRORS as exc:
        outcome["oracle"] = str(exc)
    return outcome


def _nanmedian(values: np.ndarray) -> np.ndarray:
    finite = np.isfinite(values)
    return np.array(
        [np.median(column[ok]) if ok.any() else np.nan for column, ok in zip(values.T, finite.T, strict=True)]
    )


def _select(
    config: ExperimentConfig, n: int, options: SolverOptions, parallel: Parallel
) -> tuple[float, list[TuningRow]]:
    """Select the tuning parameter minimizing mean validation error over
    the tuning replicates.
    """
    sim = config.sim
    trains = [
        gen_dataset(sim, n, replicate_rng(sim.seed, Stream.TUNE, n, index))
        for index in range(config.tuning_replicates)
    ]
    lam_max = max(null_lambda(train, options) for train in trains)
    grid = (
        np.array([lam_max])
        if config.n_lambdas == 1
        else np.geomspace(lam_max, lam_max * config.min_ratio, config.n_lambdas)
    )
    results = parallel(delayed(_tune_replicate)(sim, train, grid, options) for train in trains)
    mspe, recall, precision, support = (np.array(values) for values in zip(*results, strict=True))

    finite = np.isfinite(mspe)
    counts = finite.sum(axis=0)
    totals = np.where(finite, mspe, 0.0).sum(axis=0)
    mean_mspe = np.full(len(grid), np.inf)
    np.divide(totals, counts, out=mean_mspe, where=counts > 0)
    if not np.any(np.isfinite(mean_mspe)):
        raise RuntimeError(f"No successful tuning fit for n={n}")
    best = int(np.argmin(mean_mspe))
    medians = [_nanmedian(np.where(finite, mspe, np.nan)), _nanmedian(recall), _nanmedian(precision)]
    support_median = _nanmedian(support)
    rows = [
        TuningRow(
            n=n,
            lam=float(grid[k]),
            mspe=float(medians[0][k]),
            recall=float(medians[1][k]),
            precision=float(medians[2][k]),
            support_size=float(support_median[k]),
            selected=k == best,
        )
        for k in range(len(grid))
    ]
    return float(grid[best]), rows


def run_experiment(
    config: ExperimentConfig, threads: int = 1, options: SolverOptions = SolverOptions()
) -> ExperimentResult:
    """Compare the Phi-LASSO with the oracle least-squares fit on
    simulated data.

    For every sample size the tuning parameter is chosen once on
    ``tuning_replicates`` training sets scored against a shared tuning
    validation set, then both estimators are evaluated on ``replicates``
    fresh training sets against a second, independent validation set.
    Every dataset comes from its own counter-based random stream, so the
    result does not depend on ``threads``.

    Parameters
    ----------
    config : `~lsst.philasso.sim.ExperimentConfig`
        Experiment configuration.
    threads : `int`, optional
        Number of replicates processed in parallel.
    options : `~lsst.philasso.solver.SolverOptions`, optional
        Solver options.

    Returns
    -------
    result : `ExperimentResult`
        Records per method and sample size; empty if ``replicates`` is 0.
    """
    result = ExperimentResult(config=config)
    if config.replicates == 0:
        _LOG.info("No replicates requested, nothing to run")
        return result

    with Parallel(n_jobs=threads) as parallel:
        for n in config.n_list:
            with time_this(log=_LOG, msg="Experiment cell n=%d", args=(n,)):
                lam, rows = _select(config, n, options, parallel)
                result.selected_lambda[n] = lam
                result.tuning.extend(rows)
                _LOG.info("n=%d: selected lambda=%.6g", n, lam)

                outcomes = parallel(
                    delayed(_evaluate_replicate)(config.sim, n, index, lam, options)
                    for index in range(config.replicates)
                )
            for method in METHODS:
                records = [outcome[method] for outcome in outcomes]
                good = [record for record in records if isinstance(record, PerformanceRecord)]
                result.records[(method, n)] = good
                result.failures[(method, n)] = len(records) - len(good)
                for index, record in enumerate(records):
                    if isinstance(record, str):
                        _LOG.warning("n=%d replicate %d: %s fit failed: %s", n, index, method, record)
    return result

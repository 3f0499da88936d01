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

"""Weighted-LASSO coordinate descent and the Phi-LASSO reweighting loop.

The weighted LASSO maximizes
``loglik(beta) - n * lam * sum(factors * |beta|)``; the Phi-LASSO repeats it
with factors ``1 / w`` where ``w`` are the adaptive weights of the previous
estimate, starting from the plain LASSO at the same ``lam``.
"""

from __future__ import annotations

__all__ = [
    "LassoResult",
    "PathFailure",
    "PhiLassoFit",
    "SolverError",
    "SolverOptions",
    "WeightedLassoProblem",
    "check_grid",
    "fit_objective",
    "kkt_residual",
    "null_lambda",
    "phi_lasso_fit",
    "phi_lasso_path",
    "soft_threshold",
    "weighted_lasso",
]

import dataclasses
import logging
from collections.abc import Sequence
from typing import Protocol

import numpy as np
from lsst.utils.timer import time_this
from scipy.special import logit

from . import decompose
from .glm import Dataset, Family, gradient, inverse_link, irls_working, linear_predictor, log_likelihood
from .taxonomy import DimensionMismatchError, Taxonomy

_LOG = logging.getLogger(__name__)

_NULL_LAMBDA_MARGIN = 1e-9
"""Relative margin added to the null threshold to absorb rounding."""


class SolverError(RuntimeError):
    """Exception raised when the objective becomes non-finite."""


class _Coefficients(Protocol):
    @property
    def beta(self) -> np.ndarray: ...

    @property
    def intercept(self) -> float: ...


WarmStart = _Coefficients | np.ndarray | None


@dataclasses.dataclass(frozen=True)
class SolverOptions:
    """Tolerances and iteration caps."""

    inner_tol: float = 1e-8
    """Largest coefficient change in a coordinate-descent sweep or IRLS
    step for convergence.
    """

    outer_tol: float = 1e-6
    """Largest coefficient change between reweighting steps for
    convergence.
    """

    max_inner_sweeps: int = 10_000
    max_irls: int = 100
    max_outer: int = 50

    kkt_tol: float = 1e-6
    """Tolerance of the subgradient conditions."""

    standardize: bool = True
    """Center and scale columns internally when the model has an
    intercept.
    """

    def __post_init__(self) -> None:
        for field in dataclasses.fields(self):
            value = getattr(self, field.name)
            if field.type != "bool" and not value > 0:
                raise ValueError(f"Solver option {field.name} must be positive, got {value}")


@dataclasses.dataclass(frozen=True)
class WeightedLassoProblem:
    """Weighted-LASSO problem definition."""

    data: Dataset
    lam: float
    penalty_factors: np.ndarray
    options: SolverOptions = SolverOptions()

    def __post_init__(self) -> None:
        factors = np.asarray(self.penalty_factors, dtype=float)
        if factors.shape != (self.data.p,):
            raise DimensionMismatchError(
                f"dimension mismatch: {self.data.p} covariates but {factors.shape} penalty factors"
            )
        if not (np.all(np.isfinite(factors)) and np.all(factors > 0)):
            raise ValueError("Penalty factors must be finite and positive")
        if not self.lam > 0:
            raise ValueError(f"Tuning parameter must be positive, got {self.lam}")
        object.__setattr__(self, "penalty_factors", factors)


@dataclasses.dataclass(frozen=True)
class LassoResult:
    """Solution of a weighted-LASSO problem."""

    beta: np.ndarray
    intercept: float
    converged: bool
    iterations: int
    kkt_residual: float
    objective: float


@dataclasses.dataclass(frozen=True)
class PhiLassoFit:
    """Result of the Phi-LASSO reweighting loop at one tuning parameter."""

    beta: np.ndarray
    intercept: float
    lam: float
    decomposition: decompose.Decomposition
    """Partial inverse of ``beta``."""

    outer_iterations: int
    converged: bool
    objective: float
    """Log-likelihood minus ``n * lam`` times the decomposed penalty, at the
    returned coefficients on the original scale.
    """

    kkt_residual: float
    """Subgradient residual of the weighted-LASSO problem that produced the
    returned coefficients, on the internal (standardized) scale.
    """

    objective_trace: tuple[float, ...] = ()
    """Objective after the initial LASSO and after every reweighting step,
    on the internal scale.
    """

    cycled: bool = False
    """Whether reweighting stopped on an iterate repeating the one two
    steps before.
    """

    @property
    def support(self) -> np.ndarray:
        """Indices of nonzero coefficients."""
        return np.flatnonzero(self.beta)


@dataclasses.dataclass(frozen=True)
class PathFailure:
    """Tuning parameter for which a path fit raised an exception."""

    lam: float
    message: str


def soft_threshold(z: float, gamma: float) -> float:
    """Return ``sign(z) * max(|z| - gamma, 0)``."""
    if gamma < 0:
        raise ValueError(f"Threshold must be nonnegative, got {gamma}")
    if z > gamma:
        return z - gamma
    if z < -gamma:
        return z + gamma
    return 0.0


@dataclasses.dataclass(frozen=True)
class _Scaling:
    """Column centering and scaling of a standardized problem."""

    center: np.ndarray
    scale: np.ndarray

    def to_internal(self, beta: np.ndarray, intercept: float) -> tuple[np.ndarray, float]:
        return beta * self.scale, intercept + float(self.center @ beta)

    def to_original(self, beta: np.ndarray, intercept: float) -> tuple[np.ndarray, float]:
        beta = beta / self.scale
        return beta, intercept - float(self.center @ beta)


def _prepare(data: Dataset, options: SolverOptions) -> tuple[Dataset, _Scaling | None]:
    """Return the internal problem data and its scaling, if any."""
    if not (data.intercept and options.standardize):
        return data, None
    center = data.x.mean(axis=0)
    scale = data.x.std(axis=0)
    scale[scale == 0] = 1.0
    internal = dataclasses.replace(data, x=(data.x - center) / scale)
    return internal, _Scaling(center=center, scale=scale)


def _warm_values(warm_start: WarmStart, p: int) -> tuple[np.ndarray, float | None]:
    if warm_start is None:
        return np.zeros(p), None
    if isinstance(warm_start, np.ndarray):
        beta, intercept = warm_start, None
    else:
        beta, intercept = warm_start.beta, warm_start.intercept
    beta = np.array(beta, dtype=float)
    if beta.shape != (p,):
        raise DimensionMismatchError(
            f"dimension mismatch: warm start has shape {beta.shape}, expected ({p},)"
        )
    return beta, intercept


def _null_intercept(data: Dataset) -> float:
    if not data.intercept:
        return 0.0
    mean = float(data.y.mean())
    if data.family is Family.GAUSSIAN:
        return mean
    return float(logit(np.clip(mean, 1e-5, 1.0 - 1e-5)))


def _cd_least_squares(
    x: np.ndarray,
    z: np.ndarray,
    v: np.ndarray,
    lam: float,
    factors: np.ndarray,
    beta: np.ndarray,
    fit_intercept: bool,
    tol: float,
    max_sweeps: int,
) -> tuple[np.ndarray, float, int, bool]:
    """Minimize ``sum(v * (z - b0 - x @ beta)**2) / (2 n) + lam *
    sum(factors * |beta|)`` by cyclic coordinate descent.

    Sweeps alternate between all coordinates and the active set; the
    intercept is eliminated by weighted centering.
    """
    n, p = x.shape
    if fit_intercept:
        v_sum = float(v.sum())
        x_bar = v @ x / v_sum
        z_bar = float(v @ z) / v_sum
        xc = np.asfortranarray(x - x_bar)
        zc = z - z_bar
    else:
        x_bar = np.zeros(p)
        z_bar = 0.0
        xc = np.asfortranarray(x)
        zc = z
    xv = np.asfortranarray(xc * v[:, None])
    curvature = np.einsum("ij,ij->j", xv, xc) / n
    thresholds = lam * factors

    beta = beta.copy()
    beta[curvature <= 0] = 0.0
    residual = zc - xc @ beta
    active = np.flatnonzero(beta)
    full_sweep = True
    converged = False
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        coordinates = range(p) if full_sweep else active
        max_change = 0.0
        for j in coordinates:
            c = curvature[j]
            if c <= 0:
                continue
            old = beta[j]
            new = soft_threshold(float(xv[:, j] @ residual) / n + c * old, thresholds[j]) / c
            if new != old:
                residual -= (new - old) * xc[:, j]
                beta[j] = new
                max_change = max(max_change, abs(new - old))
        if full_sweep:
            if max_change < tol:
                converged = True
                break
            active = np.flatnonzero(beta)
            full_sweep = False
        elif max_change < tol:
            full_sweep = True

    intercept = z_bar - float(x_bar @ beta) if fit_intercept else 0.0
    return beta, intercept, sweeps, converged


def _penalized_loss(
    data: Dataset, beta: np.ndarray, intercept: float, lam: float, factors: np.ndarray
) -> float:
    """Negative penalized log-likelihood divided by ``n``."""
    return -log_likelihood(data, beta, intercept) / data.n + lam * float(factors @ np.abs(beta))


def kkt_residual(
    data: Dataset, beta: np.ndarray, intercept: float, lam: float, penalty_factors: np.ndarray
) -> float:
    """Return the largest violation of the weighted-LASSO subgradient
    conditions.

    With ``g = gradient / n`` the conditions are ``|g_j| <= lam * f_j`` for
    zero coefficients, ``g_j == lam * f_j * sign(beta_j)`` for nonzero ones
    and ``g == 0`` for the intercept.
    """
    beta = data.check_beta(beta)
    grad = gradient(data, beta, intercept) / data.n
    g = grad[: data.p]
    bound = lam * np.asarray(penalty_factors, dtype=float)
    violation = np.where(beta == 0, np.maximum(np.abs(g) - bound, 0.0), np.abs(g - bound * np.sign(beta)))
    residual = float(violation.max())
    if data.intercept:
        residual = max(residual, abs(float(grad[-1])))
    return residual


def _solve(
    data: Dataset,
    lam: float,
    factors: np.ndarray,
    options: SolverOptions,
    beta: np.ndarray,
    intercept: float | None,
) -> LassoResult:
    """Solve a weighted-LASSO problem on internal data."""
    if intercept is None or not data.intercept:
        intercept = _null_intercept(data)
    tol = options.inner_tol

    if data.family is Family.GAUSSIAN:
        ones = np.ones(data.n)
        beta, intercept, iterations, converged = _cd_least_squares(
            data.x, data.y, ones, lam, factors, beta, data.intercept, tol, options.max_inner_sweeps
        )
        residual = kkt_residual(data, beta, intercept, lam, factors)
        # Tighten the sweep tolerance when the subgradient check is not met.
        for _ in range(3):
            if residual <= options.kkt_tol:
                break
            tol /= 100.0
            beta, intercept, sweeps, converged = _cd_least_squares(
                data.x, data.y, ones, lam, factors, beta, data.intercept, tol, options.max_inner_sweeps
            )
            iterations += sweeps
            residual = kkt_residual(data, beta, intercept, lam, factors)
    else:
        loss = _penalized_loss(data, beta, intercept, lam, factors)
        converged = False
        iterations = 0
        while iterations < options.max_irls:
            iterations += 1
            eta = linear_predictor(data, beta, intercept)
            weights, response = irls_working(data, eta)
            candidate, candidate_intercept, _, _ = _cd_least_squares(
                data.x, response, weights, lam, factors, beta, data.intercept, tol, options.max_inner_sweeps
            )
            step = 1.0
            while True:
                new_beta = beta + step * (candidate - beta)
                new_intercept = intercept + step * (candidate_intercept - intercept)
                new_loss = _penalized_loss(data, new_beta, new_intercept, lam, factors)
                if new_loss <= loss + 1e-12 * max(1.0, abs(loss)) or step < 1e-6:
                    break
                step *= 0.5
            change = max(float(np.max(np.abs(new_beta - beta))), abs(new_intercept - intercept))
            beta, intercept, loss = new_beta, new_intercept, new_loss
            if change < tol:
                converged = True
                break
        residual = kkt_residual(data, beta, intercept, lam, factors)

    objective = log_likelihood(data, beta, intercept) - data.n * lam * float(factors @ np.abs(beta))
    if not np.isfinite(objective):
        raise SolverError(f"Non-finite objective at lambda={lam}")
    return LassoResult(
        beta=beta,
        intercept=float(intercept),
        converged=converged and residual <= options.kkt_tol,
        iterations=iterations,
        kkt_residual=residual,
        objective=objective,
    )


def weighted_lasso(problem: WeightedLassoProblem, warm_start: WarmStart = None) -> LassoResult:
    """Solve a weighted-LASSO problem.

    Parameters
    ----------
    problem : `WeightedLassoProblem`
        Problem definition.
    warm_start : `numpy.ndarray` or fit result, optional
        Starting coefficients on the original scale.

    Returns
    -------
    result : `LassoResult`
        Solution on the original scale. The KKT residual and objective are
        those of the internal, possibly standardized, problem. The result
        is flagged non-converged when an iteration cap is hit or the KKT
        residual is above ``options.kkt_tol``.

    Raises
    ------
    SolverError
        Raised if the objective is not finite.
    """
    data, options = problem.data, problem.options
    internal, scaling = _prepare(data, options)
    beta, intercept = _warm_values(warm_start, data.p)
    if scaling is not None:
        beta, start = scaling.to_internal(beta, 0.0 if intercept is None else intercept)
        intercept = None if intercept is None else start
    result = _solve(internal, problem.lam, problem.penalty_factors, options, beta, intercept)
    if not result.converged:
        _LOG.warning(
            "Weighted LASSO at lambda=%g did not converge (KKT residual %.3g)",
            problem.lam,
            result.kkt_residual,
        )
    if scaling is None:
        return result
    beta, intercept = scaling.to_original(result.beta, result.intercept)
    return dataclasses.replace(result, beta=beta, intercept=intercept)


def null_lambda(
    data: Dataset, options: SolverOptions = SolverOptions(), penalty_factors: np.ndarray | None = None
) -> float:
    """Return the smallest tuning parameter giving all-zero coefficients.

    The value is ``max_j |grad_j(0)| / (n * factor_j)`` on the internal
    (possibly standardized) scale, with the intercept at its null-model
    value, rounded up by a relative ``1e-9``.

    Raises
    ------
    ValueError
        Raised if the gradient vanishes, e.g. for an all-zero design.
    """
    internal, _ = _prepare(data, options)
    intercept = _null_intercept(internal)
    mu = inverse_link(np.full(internal.n, intercept), internal.family)
    grad = np.abs(internal.x.T @ (internal.y - mu)) / internal.n
    if penalty_factors is not None:
        grad = grad / np.asarray(penalty_factors, dtype=float)
    lam_max = float(grad.max())
    if not lam_max > 0:
        raise ValueError("Cannot build a tuning-parameter grid: gradient at zero vanishes (all-zero design?)")
    return lam_max * (1.0 + _NULL_LAMBDA_MARGIN)


def check_grid(grid: Sequence[float] | np.ndarray) -> np.ndarray:
    """Check that a tuning-parameter grid is positive and strictly
    descending.
    """
    values = np.asarray(grid, dtype=float).reshape(-1)
    if not np.all(np.isfinite(values)) or np.any(values <= 0):
        raise ValueError("Tuning parameters must be finite and positive")
    if np.any(np.diff(values) >= 0):
        raise ValueError("Tuning-parameter grid must be strictly descending")
    return values


def _objective(
    data: Dataset, beta: np.ndarray, intercept: float, lam: float, decomp: decompose.Decomposition
) -> float:
    return log_likelihood(data, beta, intercept) - data.n * lam * decompose.penalty_decomposed(decomp, 1.0)


def fit_objective(data: Dataset, taxonomy: Taxonomy, beta: np.ndarray, intercept: float, lam: float) -> float:
    """Evaluate the Phi-LASSO objective.

    Returns
    -------
    objective : `float`
        ``loglik(beta) - n * lam * P(beta)`` with ``P`` the decomposed
        penalty at the partial inverse of ``beta`` with unit parameter.
    """
    decomp = decompose.partial_inverse(beta, taxonomy)
    return _objective(data, data.check_beta(beta), intercept, lam, decomp)


@dataclasses.dataclass(frozen=True)
class _Iterate:
    """Reweighting iterate on the internal scale."""

    result: LassoResult
    decomposition: decompose.Decomposition
    objective: float


def _is_two_cycle(first: LassoResult, middle: LassoResult, last: LassoResult, tol: float) -> bool:
    """Return whether ``last`` repeats ``first`` to within ``tol`` while
    ``middle`` has a different support.
    """
    support = last.beta != 0
    return (
        np.array_equal(support, first.beta != 0)
        and not np.array_equal(support, middle.beta != 0)
        and float(np.max(np.abs(last.beta - first.beta))) < tol
    )


def phi_lasso_fit(
    data: Dataset,
    taxonomy: Taxonomy,
    lam: float,
    options: SolverOptions = SolverOptions(),
    warm_start: WarmStart = None,
) -> PhiLassoFit:
    """Fit the Phi-LASSO at one tuning parameter.

    The initial estimate is the plain LASSO at ``lam``; each following step
    solves a weighted LASSO with penalty factors ``1 / w`` where ``w`` are
    the adaptive weights of the previous estimate. Iteration stops when
    the largest coefficient change is below ``options.outer_tol``, when
    an iterate repeats the one two steps before with a different support
    in between, or after ``options.max_outer`` steps. Covariates with a
    zero weight product are revived under a unit factor, which produces
    such two-step cycles. Unless the iteration converged, the iterate
    with the largest objective is returned.

    Parameters
    ----------
    data : `~lsst.philasso.glm.Dataset`
        Data to fit.
    taxonomy : `~lsst.philasso.taxonomy.Taxonomy`
        Valid taxonomy over the covariates.
    lam : `float`
        Tuning parameter, positive.
    options : `SolverOptions`, optional
        Solver options.
    warm_start : `numpy.ndarray` or fit result, optional
        Starting point for the initial LASSO only, the result does not
        depend on it.

    Returns
    -------
    fit : `PhiLassoFit`
        Fit with the partial inverse of the coefficients attached.

    Raises
    ------
    DimensionMismatchError
        Raised if the taxonomy and data disagree on the number of
        covariates.
    """
    if taxonomy.p != data.p:
        raise DimensionMismatchError(
            f"dimension mismatch: design has {data.p} covariates, taxonomy has {taxonomy.p}"
        )
    if not lam > 0:
        raise ValueError(f"Tuning parameter must be positive, got {lam}")
    taxonomy.require_valid()

    internal, scaling = _prepare(data, options)
    beta, intercept = _warm_values(warm_start, data.p)
    if scaling is not None:
        beta, start = scaling.to_internal(beta, 0.0 if intercept is None else intercept)
        intercept = None if intercept is None else start

    current = _solve(internal, lam, np.ones(data.p), options, beta, intercept)
    decomp = decompose.partial_inverse(current.beta, taxonomy)
    trace = [_objective(internal, current.beta, current.intercept, lam, decomp)]
    best = _Iterate(current, decomp, trace[0])
    two_back: LassoResult | None = None
    converged = False
    cycled = False
    outer = 0
    while outer < options.max_outer:
        outer += 1
        factors = decompose.weights_from_decomposition(decomp, taxonomy).penalty_factors
        result = _solve(internal, lam, factors, options, current.beta, current.intercept)
        change = float(np.max(np.abs(result.beta - current.beta)))
        previous, current = current, result
        decomp = decompose.partial_inverse(current.beta, taxonomy)
        trace.append(_objective(internal, current.beta, current.intercept, lam, decomp))
        if trace[-1] > best.objective:
            best = _Iterate(current, decomp, trace[-1])
        if trace[-1] < trace[-2] - 1e-8 * max(1.0, abs(trace[-2])):
            # Zero-weight covariates re-enter under a unit factor.
            revived = bool(np.any((current.beta != 0) & (previous.beta == 0)))
            _LOG.log(
                logging.DEBUG if revived else logging.WARNING,
                "Objective decreased at lambda=%g outer step %d: %.10g -> %.10g",
                lam,
                outer,
                trace[-2],
                trace[-1],
            )
        _LOG.debug(
            "lambda=%g outer step %d: change %.3g, support %d, objective %.10g",
            lam,
            outer,
            change,
            np.count_nonzero(current.beta),
            trace[-1],
        )
        if change < options.outer_tol:
            converged = current.converged
            break
        if two_back is not None and _is_two_cycle(two_back, previous, current, options.outer_tol):
            cycled = True
            break
        two_back = previous
    if converged:
        chosen = _Iterate(current, decomp, trace[-1])
    else:
        chosen = best
        if cycled:
            _LOG.info(
                "Phi-LASSO at lambda=%g alternates between two supports after %d outer steps, "
                "keeping the iterate with objective %.10g",
                lam,
                outer,
                chosen.objective,
            )
        else:
            _LOG.warning("Phi-LASSO at lambda=%g did not converge after %d outer steps", lam, outer)

    beta, intercept_value = chosen.result.beta, chosen.result.intercept
    decomp, objective = chosen.decomposition, chosen.objective
    if scaling is not None:
        beta, intercept_value = scaling.to_original(beta, intercept_value)
        decomp = decompose.partial_inverse(beta, taxonomy)
        objective = _objective(data, beta, intercept_value, lam, decomp)
    return PhiLassoFit(
        beta=beta,
        intercept=intercept_value,
        lam=float(lam),
        decomposition=decomp,
        outer_iterations=outer,
        converged=converged,
        objective=objective,
        kkt_residual=chosen.result.kkt_residual,
        objective_trace=tuple(trace),
        cycled=cycled,
    )


def phi_lasso_path(
    data: Dataset,
    taxonomy: Taxonomy,
    grid: Sequence[float] | np.ndarray,
    options: SolverOptions = SolverOptions(),
    warm_starts: bool = True,
) -> list[PhiLassoFit | PathFailure]:
    """Fit the Phi-LASSO along a descending grid of tuning parameters.

    Parameters
    ----------
    data : `~lsst.philasso.glm.Dataset`
        Data to fit.
    taxonomy : `~lsst.philasso.taxonomy.Taxonomy`
        Valid taxonomy over the covariates.
    grid : `~collections.abc.Sequence` [ `float` ]
        Positive, strictly descending tuning parameters.
    options : `SolverOptions`, optional
        Solver options.
    warm_starts : `bool`, optional
        Start every fit from the previous successful one.

    Returns
    -------
    fits : `list`
        One entry per grid value, either a `PhiLassoFit` or a
        `PathFailure` describing why the fit raised.
    """
    values = check_grid(grid)
    fits: list[PhiLassoFit | PathFailure] = []
    previous: PhiLassoFit | None = None
    with time_this(log=_LOG, msg="Phi-LASSO path over %d values", args=(len(values),)):
        for lam in values:
            try:
                fit = phi_lasso_fit(data, taxonomy, float(lam), options, previous if warm_starts else None)
            except (decompose.DecompositionConvergenceError, SolverError, np.linalg.LinAlgError) as exc:
                _LOG.warning("Path fit failed at lambda=%g: %s", lam, exc)
                fits.append(PathFailure(lam=float(lam), message=str(exc)))
                continue
            fits.append(fit)
            previous = fit
    return fits

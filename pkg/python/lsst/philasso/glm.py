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

"""Likelihood layer for the Gaussian and Bernoulli-logit families."""

from __future__ import annotations

__all__ = [
    "Dataset",
    "Family",
    "LinearPredictorState",
    "gradient",
    "inverse_link",
    "irls_working",
    "linear_predictor",
    "linear_predictor_state",
    "log_likelihood",
    "predict",
]

import dataclasses
import enum

import numpy as np
from scipy.special import expit

from .taxonomy import DimensionMismatchError

ETA_CLAMP = 40.0
"""Linear predictor values are clipped to this magnitude before the inverse
link.
"""

MU_EPS = 1e-15
"""Fitted probabilities are kept this far from 0 and 1."""

WEIGHT_FLOOR = 1e-5
"""Smallest IRLS working weight."""


class Family(enum.Enum):
    """GLM family with its canonical link."""

    GAUSSIAN = "gaussian"
    BERNOULLI_LOGIT = "logit"


@dataclasses.dataclass(frozen=True)
class Dataset:
    """Design matrix, response, family and intercept flag.

    Arrays are copied and made read-only on construction.
    """

    x: np.ndarray
    """Design matrix, shape ``(n, p)``."""

    y: np.ndarray
    """Response vector, length ``n``."""

    family: Family = Family.GAUSSIAN
    """GLM family."""

    intercept: bool = True
    """Whether the model has an unpenalized intercept."""

    def __post_init__(self) -> None:
        x = np.array(self.x, dtype=float)
        y = np.array(self.y, dtype=float)
        if x.ndim != 2:
            raise ValueError(f"Design matrix must be two-dimensional, got shape {x.shape}")
        if y.ndim != 1:
            raise ValueError(f"Response must be a vector, got shape {y.shape}")
        if x.shape[0] != y.shape[0]:
            raise DimensionMismatchError(
                f"dimension mismatch: design has {x.shape[0]} rows, response has {y.shape[0]} values"
            )
        if x.shape[0] < 1 or x.shape[1] < 1:
            raise ValueError(f"Need at least one sample and one covariate, got shape {x.shape}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("Design and response must be finite")
        family = Family(self.family)
        if family is Family.BERNOULLI_LOGIT and not np.all((y == 0) | (y == 1)):
            raise ValueError("Logit responses must be 0 or 1")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "family", family)

    @property
    def n(self) -> int:
        """Number of samples (`int`)."""
        return self.x.shape[0]

    @property
    def p(self) -> int:
        """Number of covariates (`int`)."""
        return self.x.shape[1]

    def subset(self, rows: np.ndarray) -> Dataset:
        """Return dataset restricted to given rows."""
        return dataclasses.replace(self, x=self.x[rows], y=self.y[rows])

    def check_beta(self, beta: np.ndarray) -> np.ndarray:
        """Convert coefficients to an array and check their length.

        Raises
        ------
        DimensionMismatchError
            Raised if the length differs from ``p``.
        """
        beta = np.asarray(beta, dtype=float)
        if beta.shape != (self.p,):
            raise DimensionMismatchError(
                f"dimension mismatch: {self.p} covariates but coefficients have shape {beta.shape}"
            )
        return beta


@dataclasses.dataclass(frozen=True)
class LinearPredictorState:
    """Linear predictor with the derived IRLS quantities."""

    eta: np.ndarray
    mu: np.ndarray
    working_weights: np.ndarray
    working_response: np.ndarray


def linear_predictor(data: Dataset, beta: np.ndarray, intercept: float = 0.0) -> np.ndarray:
    """Return ``X beta + intercept``."""
    beta = data.check_beta(beta)
    return data.x @ beta + intercept


def inverse_link(eta: np.ndarray, family: Family) -> np.ndarray:
    """Apply the inverse link to a linear predictor.

    Parameters
    ----------
    eta : `numpy.ndarray`
        Linear predictor.
    family : `Family`
        GLM family.

    Returns
    -------
    mu : `numpy.ndarray`
        Mean response; for the logit family it is clipped to
        ``(MU_EPS, 1 - MU_EPS)``.
    """
    if family is Family.GAUSSIAN:
        return np.asarray(eta, dtype=float)
    mu = expit(np.clip(eta, -ETA_CLAMP, ETA_CLAMP))
    return np.clip(mu, MU_EPS, 1.0 - MU_EPS)


def log_likelihood(data: Dataset, beta: np.ndarray, intercept: float = 0.0) -> float:
    """Compute the log-likelihood.

    The Gaussian family uses the unit-variance convention
    ``-sum((y - eta)**2) / 2``; the logit family evaluates
    ``sum(y * eta - log(1 + exp(eta)))`` without overflow.

    Raises
    ------
    DimensionMismatchError
        Raised if ``beta`` does not match the design.
    """
    eta = linear_predictor(data, beta, intercept)
    if data.family is Family.GAUSSIAN:
        return -0.5 * float(np.sum((data.y - eta) ** 2))
    return float(np.sum(data.y * eta - np.logaddexp(0.0, eta)))


def gradient(data: Dataset, beta: np.ndarray, intercept: float = 0.0) -> np.ndarray:
    """Compute the log-likelihood gradient.

    Returns
    -------
    gradient : `numpy.ndarray`
        ``X'(y - mu)`` of length ``p``, followed by ``sum(y - mu)`` when
        the dataset has an intercept.
    """
    eta = linear_predictor(data, beta, intercept)
    residual = data.y - inverse_link(eta, data.family)
    grad = data.x.T @ residual
    if data.intercept:
        grad = np.append(grad, residual.sum())
    return grad


def irls_working(data: Dataset, eta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Compute IRLS working weights and working response.

    Parameters
    ----------
    data : `Dataset`
        Dataset providing the response and family.
    eta : `numpy.ndarray`
        Current linear predictor.

    Returns
    -------
    weights : `numpy.ndarray`
        ``mu * (1 - mu)`` floored at `WEIGHT_FLOOR`, all ones for the
        Gaussian family.
    response : `numpy.ndarray`
        ``eta + (y - mu) / weights``, equal to ``y`` for the Gaussian
        family.
    """
    eta = np.asarray(eta, dtype=float)
    if eta.shape != data.y.shape:
        raise DimensionMismatchError(
            f"dimension mismatch: linear predictor has shape {eta.shape}, response {data.y.shape}"
        )
    if data.family is Family.GAUSSIAN:
        return np.ones_like(eta), data.y.copy()
    mu = inverse_link(eta, data.family)
    weights = np.maximum(mu * (1.0 - mu), WEIGHT_FLOOR)
    return weights, eta + (data.y - mu) / weights


def linear_predictor_state(data: Dataset, beta: np.ndarray, intercept: float = 0.0) -> LinearPredictorState:
    """Evaluate the linear predictor and IRLS quantities at ``beta``."""
    eta = linear_predictor(data, beta, intercept)
    weights, response = irls_working(data, eta)
    return LinearPredictorState(
        eta=eta,
        mu=inverse_link(eta, data.family),
        working_weights=weights,
        working_response=response,
    )


def predict(data: Dataset, beta: np.ndarray, intercept: float = 0.0) -> np.ndarray:
    """Predict the mean response, ``eta`` or ``logistic(eta)``."""
    return inverse_link(linear_predictor(data, beta, intercept), data.family)

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

"""Decomposition of coefficients along taxon lineages.

A coefficient vector is written as ``beta_j = alpha_j * prod_t d[t][k_t(j)]``
where ``k_t(j)`` is the taxon containing covariate ``j`` at grouping level
``t``. The partial inverse picks, among all decompositions of a given
``beta``, the one at mass equilibrium: for every taxon ``tau``,
``d_tau**q == sum(|alpha_j|**q for j in tau)``.

Substituting ``u = d**q`` and ``b_j = |beta_j|**q`` turns the equilibrium
into the stationarity condition of the strictly convex function
``F(x) = sum(exp(x_tau)) + sum_j b_j * exp(-sum_t x_{k_t(j)})`` with
``x = log(u)``. Exact block minimization of ``F`` over one level gives the
update ``u_tau = sqrt(sum_{j in tau} b_j / prod_{s != t} u_s)``; a damped
Newton iteration on ``F`` finishes the solve.
"""

from __future__ import annotations

__all__ = [
    "Decomposition",
    "DecompositionConvergenceError",
    "WeightVector",
    "bridge_penalty",
    "compose",
    "equilibrium_residual",
    "lineage_products",
    "partial_inverse",
    "penalty_decomposed",
    "penalty_multi",
    "penalty_weighted",
    "rescale_multi",
    "weights",
    "weights_from_decomposition",
]

import dataclasses
import logging
from collections.abc import Sequence

import numpy as np
import scipy.linalg

from .taxonomy import DimensionMismatchError, Taxon, Taxonomy

_LOG = logging.getLogger(__name__)

_GAUSS_SEIDEL_SWEEPS = 25
"""Block-coordinate sweeps before switching to Newton steps."""


class DecompositionConvergenceError(RuntimeError):
    """Exception raised when the mass-equilibrium iteration does not
    converge.
    """

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclasses.dataclass(frozen=True)
class Decomposition:
    """Per-taxon scale factors and per-covariate coefficients."""

    d: tuple[np.ndarray, ...]
    """One array per grouping level, indexed by taxon order."""

    alpha: np.ndarray
    """Per-covariate coefficients."""

    q: float = 1.0
    """Penalty exponent."""

    @property
    def T(self) -> int:
        """Number of grouping levels."""
        return len(self.d)

    def value(self, taxon: Taxon) -> float:
        """Return the scale factor of a grouping-level taxon."""
        return float(self.d[taxon.level][taxon.order])

    @classmethod
    def zero(cls, taxonomy: Taxonomy, q: float = 1.0) -> Decomposition:
        """Return the decomposition of the zero vector."""
        return cls(
            d=tuple(np.zeros(size) for size in taxonomy.level_sizes()),
            alpha=np.zeros(taxonomy.p),
            q=q,
        )


@dataclasses.dataclass(frozen=True)
class WeightVector:
    """Adaptive weights, one positive number per covariate."""

    w: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 1 or not np.all(np.isfinite(w)) or not np.all(w > 0):
            raise ValueError("Weights must be a vector of finite positive numbers")
        object.__setattr__(self, "w", w)

    @property
    def penalty_factors(self) -> np.ndarray:
        """Per-coefficient penalty multipliers ``1 / w``."""
        return 1.0 / self.w


def _check_decomposition(decomp: Decomposition, taxonomy: Taxonomy) -> None:
    sizes = taxonomy.level_sizes()
    if decomp.T != len(sizes) or any(
        np.shape(d) != (size,) for d, size in zip(decomp.d, sizes, strict=True)
    ):
        raise DimensionMismatchError(
            f"dimension mismatch: taxonomy level sizes {sizes}, decomposition has "
            f"{[np.shape(d) for d in decomp.d]}"
        )
    if np.shape(decomp.alpha) != (taxonomy.p,):
        raise DimensionMismatchError(
            f"dimension mismatch: taxonomy has {taxonomy.p} covariates, alpha has shape "
            f"{np.shape(decomp.alpha)}"
        )


def _check_beta(beta: np.ndarray, taxonomy: Taxonomy) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (taxonomy.p,):
        raise DimensionMismatchError(
            f"dimension mismatch: taxonomy has {taxonomy.p} covariates, coefficients have shape {beta.shape}"
        )
    if not np.all(np.isfinite(beta)):
        raise ValueError("Coefficients must be finite")
    return beta


def lineage_products(d: Sequence[np.ndarray], taxonomy: Taxonomy) -> np.ndarray:
    """Return ``prod_t d[t][k_t(j)]`` for every covariate ``j``."""
    product = np.ones(taxonomy.p)
    for t, level_d in enumerate(d):
        product *= np.asarray(level_d)[taxonomy.membership(t)]
    return product


def compose(decomp: Decomposition, taxonomy: Taxonomy) -> np.ndarray:
    """Map a decomposition back to coefficients.

    Parameters
    ----------
    decomp : `Decomposition`
        Decomposition to compose.
    taxonomy : `~lsst.philasso.taxonomy.Taxonomy`
        Taxonomy defining the lineages.

    Returns
    -------
    beta : `numpy.ndarray`
        ``alpha_j`` times the product of ``d`` along the lineage of ``j``.

    Raises
    ------
    DimensionMismatchError
        Raised if the decomposition does not match the taxonomy.
    """
    _check_decomposition(decomp, taxonomy)
    return np.asarray(decomp.alpha, dtype=float) * lineage_products(decomp.d, taxonomy)


class _MassEquilibrium:
    """Solver state for the partial inverse, restricted to nonzero
    coefficients and the taxa that cover them.
    """

    def __init__(self, beta: np.ndarray, taxonomy: Taxonomy, q: float):
        self.T = taxonomy.T
        self.sizes = taxonomy.level_sizes()
        mass = np.abs(beta) ** q
        self.nonzero = np.flatnonzero(mass)
        self.b = mass[self.nonzero]
        self.members = [taxonomy.membership(t)[self.nonzero] for t in range(self.T)]
        self.active = [
            np.bincount(members, weights=self.b, minlength=size) > 0
            for members, size in zip(self.members, self.sizes, strict=True)
        ]
        self.u = [active.astype(float) for active in self.active]

        # Newton variables are the active taxa of all levels.
        offsets = np.cumsum([0] + [int(active.sum()) for active in self.active])
        self.n_vars = int(offsets[-1])
        self.columns = np.empty((len(self.nonzero), self.T), dtype=np.intp)
        for t, active in enumerate(self.active):
            var_of = np.full(self.sizes[t], -1, dtype=np.intp)
            var_of[active] = np.arange(offsets[t], offsets[t + 1])
            self.columns[:, t] = var_of[self.members[t]]

    def alpha_mass(self) -> np.ndarray:
        """Return ``|alpha_j|**q`` for the nonzero coefficients."""
        product = np.ones(len(self.b))
        for t in range(self.T):
            product *= self.u[t][self.members[t]]
        return self.b / product

    def residual(self) -> float:
        alpha_mass = self.alpha_mass()
        residual = 0.0
        for t in range(self.T):
            level_mass = np.bincount(self.members[t], weights=alpha_mass, minlength=self.sizes[t])
            residual = max(residual, float(np.max(np.abs(self.u[t] - level_mass))))
        return residual

    def threshold(self, tol: float) -> float:
        scale = max(float(np.max(u)) for u in self.u)
        return tol * max(1.0, scale)

    def sweep(self) -> None:
        """Exact block minimization over each level in turn."""
        for t in range(self.T):
            other = self.b.copy()
            for s in range(self.T):
                if s != t:
                    other /= self.u[s][self.members[s]]
            self.u[t] = np.sqrt(np.bincount(self.members[t], weights=other, minlength=self.sizes[t]))

    def _objective(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        e = self.b * np.exp(-x[self.columns].sum(axis=1))
        return float(np.exp(x).sum() + e.sum()), e

    def newton_step(self) -> None:
        """Damped Newton step on the log-space objective."""
        x = np.concatenate([np.log(u[active]) for u, active in zip(self.u, self.active, strict=True)])
        value, e = self._objective(x)
        ex = np.exp(x)
        grad = ex - np.bincount(self.columns.ravel(), weights=np.repeat(e, self.T), minlength=self.n_vars)
        hessian = np.diag(ex)
        for t1 in range(self.T):
            for t2 in range(self.T):
                np.add.at(hessian, (self.columns[:, t1], self.columns[:, t2]), e)
        step = scipy.linalg.solve(hessian, grad, assume_a="pos")
        decrease = float(grad @ step)
        scale = 1.0
        while scale > 1e-12:
            candidate = x - scale * step
            new_value, _ = self._objective(candidate)
            if new_value <= value - 1e-4 * scale * decrease:
                x = candidate
                break
            scale *= 0.5
        start = 0
        for t, active in enumerate(self.active):
            count = int(active.sum())
            u = np.zeros(self.sizes[t])
            u[active] = np.exp(x[start : start + count])
            self.u[t] = u
            start += count


def partial_inverse(
    beta: np.ndarray,
    taxonomy: Taxonomy,
    q: float = 1.0,
    tol: float = 1e-10,
    max_sweeps: int = 10_000,
) -> Decomposition:
    """Compute the mass-equilibrium decomposition of coefficients.

    Parameters
    ----------
    beta : `numpy.ndarray`
        Finite coefficients, one per covariate.
    taxonomy : `~lsst.philasso.taxonomy.Taxonomy`
        Valid taxonomy.
    q : `float`, optional
        Penalty exponent.
    tol : `float`, optional
        Tolerance on the equilibrium residual, relative to the largest
        ``d**q`` when that exceeds 1.
    max_sweeps : `int`, optional
        Maximum number of iterations.

    Returns
    -------
    decomp : `Decomposition`
        Decomposition with ``compose(decomp) == beta``, ``sign(alpha) ==
        sign(beta)``, nonnegative ``d`` and ``d == 0`` on taxa whose
        coefficients are all zero.

    Raises
    ------
    DecompositionConvergenceError
        Raised if the residual is above tolerance after ``max_sweeps``
        iterations.
    """
    beta = _check_beta(beta, taxonomy)
    if tol <= 0 or q <= 0:
        raise ValueError(f"Tolerance and exponent must be positive, got tol={tol}, q={q}")
    taxonomy.require_valid()
    state = _MassEquilibrium(beta, taxonomy, q)
    if len(state.nonzero) == 0:
        return Decomposition.zero(taxonomy, q)

    iterations = 0
    residual = np.inf
    while iterations < max_sweeps:
        if iterations < _GAUSS_SEIDEL_SWEEPS:
            state.sweep()
        else:
            state.newton_step()
        iterations += 1
        residual = state.residual()
        if residual <= state.threshold(tol):
            break
    else:
        raise DecompositionConvergenceError(
            f"Mass-equilibrium iteration did not converge after {iterations} sweeps, residual {residual:.3g}",
            residual,
        )
    _LOG.debug("Partial inverse converged in %d sweeps, residual %.3g", iterations, residual)

    d = tuple(u ** (1.0 / q) for u in state.u)
    alpha = np.zeros(taxonomy.p)
    product = np.ones(len(state.nonzero))
    for t in range(state.T):
        product *= d[t][state.members[t]]
    alpha[state.nonzero] = beta[state.nonzero] / product
    return Decomposition(d=d, alpha=alpha, q=q)


def equilibrium_residual(decomp: Decomposition, taxonomy: Taxonomy) -> float:
    """Return ``max |d_tau**q - sum(|alpha_j|**q for j in tau)|`` over all
    taxa.
    """
    _check_decomposition(decomp, taxonomy)
    alpha_mass = np.abs(decomp.alpha) ** decomp.q
    residual = 0.0
    for t, d in enumerate(decomp.d):
        level_mass = np.bincount(taxonomy.membership(t), weights=alpha_mass, minlength=len(d))
        residual = max(residual, float(np.max(np.abs(np.asarray(d) ** decomp.q - level_mass))))
    return residual


def weights_from_decomposition(decomp: Decomposition, taxonomy: Taxonomy) -> WeightVector:
    """Return lineage products of ``d``, replacing zero products by 1."""
    _check_decomposition(decomp, taxonomy)
    product = lineage_products(decomp.d, taxonomy)
    return WeightVector(np.where(product > 0, product, 1.0))


def weights(beta: np.ndarray, taxonomy: Taxonomy, q: float = 1.0) -> WeightVector:
    """Compute adaptive weights of coefficients.

    Parameters
    ----------
    beta : `numpy.ndarray`
        Finite coefficients.
    taxonomy : `~lsst.philasso.taxonomy.Taxonomy`
        Valid taxonomy.
    q : `float`, optional
        Penalty exponent used for the decomposition.

    Returns
    -------
    weights : `WeightVector`
        ``w_j = prod_t d[t][k_t(j)]`` of the partial inverse, or 1 where
        that product is zero.
    """
    return weights_from_decomposition(partial_inverse(beta, taxonomy, q), taxonomy)


def penalty_decomposed(decomp: Decomposition, lam: float, alpha_exponent: float | None = None) -> float:
    """Evaluate the single-parameter penalty of a decomposition.

    Parameters
    ----------
    decomp : `Decomposition`
        Decomposition.
    lam : `float`
        Tuning parameter, positive.
    alpha_exponent : `float`, optional
        Exponent applied to ``|alpha|``, defaults to ``decomp.q``. A value
        of 0.5 gives the Bridge-on-alpha variant.

    Returns
    -------
    penalty : `float`
        ``sum(d**q) + lam * sum(|alpha|**alpha_exponent)``.
    """
    if lam <= 0:
        raise ValueError(f"Tuning parameter must be positive, got {lam}")
    exponent = decomp.q if alpha_exponent is None else alpha_exponent
    level_sum = sum(float(np.sum(np.asarray(d) ** decomp.q)) for d in decomp.d)
    return level_sum + lam * bridge_penalty(decomp.alpha, exponent)


def penalty_multi(decomp: Decomposition, lambdas: Sequence[float]) -> float:
    """Evaluate the penalty with one tuning parameter per level.

    Parameters
    ----------
    decomp : `Decomposition`
        Decomposition.
    lambdas : `~collections.abc.Sequence` [ `float` ]
        ``T + 1`` positive values, one per grouping level followed by the
        one for ``alpha``.

    Returns
    -------
    penalty : `float`
        ``sum_t lambdas[t] * sum(d[t]**q) + lambdas[T] * sum(|alpha|**q)``.
    """
    lambdas = _check_lambdas(decomp, lambdas)
    total = sum(lam * float(np.sum(np.asarray(d) ** decomp.q)) for lam, d in zip(lambdas, decomp.d))
    return total + lambdas[-1] * bridge_penalty(decomp.alpha, decomp.q)


def rescale_multi(decomp: Decomposition, lambdas: Sequence[float]) -> tuple[Decomposition, float]:
    """Map a multi-parameter penalty onto the single-parameter one.

    Scaling ``d[t]`` by ``lambdas[t]**(1/q)`` and ``alpha`` by the inverse
    product leaves the composed coefficients unchanged and turns
    `penalty_multi` into `penalty_decomposed` with a single parameter.

    Returns
    -------
    decomp : `Decomposition`
        Rescaled decomposition.
    lam : `float`
        Single tuning parameter ``lambdas[T] * prod(lambdas[:T])``.
    """
    lambdas = _check_lambdas(decomp, lambdas)
    factors = [lam ** (1.0 / decomp.q) for lam in lambdas[:-1]]
    rescaled = Decomposition(
        d=tuple(np.asarray(d) * factor for d, factor in zip(decomp.d, factors, strict=True)),
        alpha=np.asarray(decomp.alpha) / float(np.prod(factors)),
        q=decomp.q,
    )
    return rescaled, lambdas[-1] * float(np.prod(lambdas[:-1]))


def _check_lambdas(decomp: Decomposition, lambdas: Sequence[float]) -> list[float]:
    values = [float(lam) for lam in lambdas]
    if len(values) != decomp.T + 1:
        raise DimensionMismatchError(
            f"dimension mismatch: need {decomp.T + 1} tuning parameters, got {len(values)}"
        )
    if any(lam <= 0 for lam in values):
        raise ValueError("Tuning parameters must be positive")
    return values


def penalty_weighted(
    beta: np.ndarray, weights: WeightVector, taxonomy: Taxonomy, n: int, lam: float
) -> float:
    """Evaluate the weighted lineage penalty.

    Returns
    -------
    penalty : `float`
        ``n * lam * sum_L ||beta_L||_1 / w_L``.

    Raises
    ------
    ValueError
        Raised if the weights differ within a lineage.
    """
    beta = _check_beta(beta, taxonomy)
    if lam <= 0:
        raise ValueError(f"Tuning parameter must be positive, got {lam}")
    w = weights.w
    if w.shape != (taxonomy.p,):
        raise DimensionMismatchError(
            f"dimension mismatch: taxonomy has {taxonomy.p} covariates, weights have shape {w.shape}"
        )
    codes = taxonomy.lineage_index
    lineage_w = np.zeros(taxonomy.n_lineages)
    lineage_w[codes] = w
    if not np.allclose(w, lineage_w[codes], rtol=1e-9, atol=0.0):
        raise ValueError("Weights are inconsistent across a lineage")
    lineage_l1 = np.bincount(codes, weights=np.abs(beta), minlength=taxonomy.n_lineages)
    return n * lam * float(np.sum(lineage_l1 / lineage_w))


def bridge_penalty(beta: np.ndarray, gamma: float) -> float:
    """Return ``sum(|beta|**gamma)`` with ``0**gamma == 0``."""
    magnitude = np.abs(np.asarray(beta, dtype=float))
    return float(np.sum(magnitude[magnitude > 0] ** gamma))

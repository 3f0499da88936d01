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

import unittest

import numpy as np

from lsst.philasso import decompose
from lsst.philasso.glm import Dataset, Family, log_likelihood
from lsst.philasso.solver import (
    PathFailure,
    PhiLassoFit,
    SolverOptions,
    WeightedLassoProblem,
    fit_objective,
    kkt_residual,
    null_lambda,
    phi_lasso_fit,
    phi_lasso_path,
    soft_threshold,
    weighted_lasso,
)
from lsst.philasso.taxonomy import DimensionMismatchError, Taxonomy, singleton_taxonomy


def orthonormal_design(rng: np.random.Generator, n: int, p: int) -> np.ndarray:
    """Return design with ``x.T @ x == n * I``."""
    q, _ = np.linalg.qr(rng.normal(size=(n, p)))
    return q * np.sqrt(n)


def two_groups() -> Taxonomy:
    return Taxonomy.from_levels(4, [[[0, 1], [2, 3]], [[0], [1], [2], [3]]])


def alternating_data() -> Dataset:
    """Return data whose first coefficient alternates between 0.1 and zero
    under reweighting at ``lam = 0.5``.

    With an orthonormal design and a singleton taxonomy the weighted LASSO
    gives ``soft_threshold(z_j, lam / sqrt(|beta_j|))`` with ``z = (0.6, 3)``.
    """
    x = orthonormal_design(np.random.default_rng(15), 30, 2)
    return Dataset(x, x @ np.array([0.6, 3.0]), intercept=False)


def grid_maximize(objective, lo: float = -5.0, hi: float = 5.0, fine: float = 1e-3) -> np.ndarray:
    """Maximize a function of two variables on a coarse grid, then on a
    fine grid around the coarse optimum.
    """
    coarse = np.linspace(lo, hi, 1001)
    b1, b2 = np.meshgrid(coarse, coarse, indexing="ij")
    values = objective(b1, b2)
    i, j = np.unravel_index(np.argmax(values), values.shape)
    step = coarse[1] - coarse[0]
    f1 = np.arange(coarse[i] - 2 * step, coarse[i] + 2 * step + fine / 2, fine)
    f2 = np.arange(coarse[j] - 2 * step, coarse[j] + 2 * step + fine / 2, fine)
    b1, b2 = np.meshgrid(f1, f2, indexing="ij")
    values = objective(b1, b2)
    i, j = np.unravel_index(np.argmax(values), values.shape)
    return np.array([f1[i], f2[j]])


class SolverTestCase(unittest.TestCase):
    """Tests for solver module."""

    def test_soft_threshold(self) -> None:
        """Test soft thresholding."""
        self.assertEqual(soft_threshold(3.0, 1.0), 2.0)
        self.assertEqual(soft_threshold(-0.5, 1.0), 0.0)
        self.assertEqual(soft_threshold(-2.5, 0.0), -2.5)
        with self.assertRaises(ValueError):
            soft_threshold(1.0, -1.0)

    def test_options(self) -> None:
        """Test option validation."""
        with self.assertRaisesRegex(ValueError, "inner_tol"):
            SolverOptions(inner_tol=0.0)
        self.assertFalse(SolverOptions(standardize=False).standardize)
        data = Dataset(np.ones((3, 2)), np.zeros(3))
        with self.assertRaisesRegex(DimensionMismatchError, "dimension mismatch"):
            WeightedLassoProblem(data, 1.0, np.ones(3))
        with self.assertRaises(ValueError):
            WeightedLassoProblem(data, 1.0, np.array([1.0, 0.0]))
        with self.assertRaises(ValueError):
            WeightedLassoProblem(data, 0.0, np.ones(2))

    def test_orthonormal_closed_form(self) -> None:
        """Test weighted LASSO on an orthonormal design."""
        rng = np.random.default_rng(1)
        n, p = 40, 6
        x = orthonormal_design(rng, n, p)
        y = x @ np.array([2.0, -1.0, 0.5, 0.0, 0.0, 0.1]) + rng.normal(scale=0.3, size=n)
        factors = rng.uniform(0.5, 2.0, size=p)
        lam = 0.2
        data = Dataset(x, y, intercept=False)
        result = weighted_lasso(WeightedLassoProblem(data, lam, factors))
        expected = [soft_threshold(z, lam * f) for z, f in zip(x.T @ y / n, factors, strict=True)]
        np.testing.assert_allclose(result.beta, expected, atol=1e-8)
        self.assertTrue(result.converged)

    def test_null_lambda(self) -> None:
        """Test that the null threshold gives an all-zero fit."""
        rng = np.random.default_rng(2)
        for family in Family:
            for intercept in (False, True):
                x = rng.normal(size=(30, 5))
                y = x[:, 0] + rng.normal(size=30)
                if family is Family.BERNOULLI_LOGIT:
                    y = (y > 0).astype(float)
                data = Dataset(x, y, family, intercept=intercept)
                lam_max = null_lambda(data)
                result = weighted_lasso(WeightedLassoProblem(data, lam_max, np.ones(5)))
                np.testing.assert_array_equal(result.beta, 0.0)
                result = weighted_lasso(WeightedLassoProblem(data, 0.9 * lam_max, np.ones(5)))
                self.assertGreater(np.count_nonzero(result.beta), 0)
        with self.assertRaises(ValueError):
            null_lambda(Dataset(np.zeros((3, 2)), np.ones(3), intercept=False))

    def test_grid_oracle(self) -> None:
        """Test two-covariate weighted LASSO against a grid search."""
        rng = np.random.default_rng(3)
        for _ in range(3):
            n = 20
            x = rng.normal(size=(n, 2))
            y = x @ rng.uniform(-3, 3, size=2) + rng.normal(size=n)
            factors = rng.uniform(0.5, 2.0, size=2)
            lam = float(rng.uniform(0.05, 0.5))
            data = Dataset(x, y, intercept=False)
            xtx, xty, yty = x.T @ x, x.T @ y, float(y @ y)

            def objective(b1: np.ndarray, b2: np.ndarray) -> np.ndarray:
                quad = xtx[0, 0] * b1**2 + 2 * xtx[0, 1] * b1 * b2 + xtx[1, 1] * b2**2
                loglik = -0.5 * (yty - 2 * (xty[0] * b1 + xty[1] * b2) + quad)
                return loglik - n * lam * (factors[0] * np.abs(b1) + factors[1] * np.abs(b2))

            best = grid_maximize(objective)
            result = weighted_lasso(WeightedLassoProblem(data, lam, factors))
            np.testing.assert_allclose(result.beta, best, atol=2e-3)
            self.assertGreaterEqual(
                float(objective(result.beta[0], result.beta[1])), float(objective(best[0], best[1])) - 1e-9
            )

    def test_kkt(self) -> None:
        """Test subgradient conditions of converged fits."""
        rng = np.random.default_rng(4)
        options = SolverOptions(standardize=False)
        checked = 0
        for family in Family:
            for _ in range(20):
                n, p = 40, 8
                x = rng.normal(size=(n, p))
                eta = x[:, :3] @ np.array([1.5, -1.0, 0.5])
                if family is Family.GAUSSIAN:
                    y = eta + rng.normal(size=n)
                else:
                    y = (rng.random(n) < 1 / (1 + np.exp(-eta))).astype(float)
                data = Dataset(x, y, family, intercept=bool(rng.random() < 0.5))
                factors = rng.uniform(0.2, 3.0, size=p)
                lam = float(rng.uniform(0.05, 0.8)) * null_lambda(data, options)
                result = weighted_lasso(WeightedLassoProblem(data, lam, factors, options))
                if result.converged:
                    checked += 1
                    residual = kkt_residual(data, result.beta, result.intercept, lam, factors)
                    self.assertLessEqual(residual, 1e-6)
        self.assertGreater(checked, 30)

    def test_warm_start(self) -> None:
        """Test that warm starts do not change the solution."""
        rng = np.random.default_rng(5)
        x = rng.normal(size=(50, 6))
        y = x[:, 0] - x[:, 1] + rng.normal(size=50)
        data = Dataset(x, y)
        problem = WeightedLassoProblem(data, 0.05, np.ones(6))
        cold = weighted_lasso(problem)
        warm = weighted_lasso(problem, warm_start=np.full(6, 3.0))
        np.testing.assert_allclose(warm.beta, cold.beta, atol=1e-6)
        self.assertAlmostEqual(warm.intercept, cold.intercept, places=6)
        with self.assertRaisesRegex(DimensionMismatchError, "dimension mismatch"):
            weighted_lasso(problem, warm_start=np.ones(2))

    def test_above_null(self) -> None:
        """Test Phi-LASSO above the null threshold."""
        rng = np.random.default_rng(6)
        x = rng.normal(size=(30, 4))
        data = Dataset(x, x[:, 0] + rng.normal(size=30))
        fit = phi_lasso_fit(data, two_groups(), 2 * null_lambda(data))
        np.testing.assert_array_equal(fit.beta, 0.0)
        self.assertTrue(fit.converged)
        self.assertEqual(fit.outer_iterations, 1)
        self.assertAlmostEqual(fit.intercept, float(data.y.mean()))
        self.assertEqual(len(fit.support), 0)

    def test_group_recovery(self) -> None:
        """Test that a group without signal is dropped entirely."""
        rng = np.random.default_rng(7)
        x = rng.normal(size=(50, 4))
        y = 2.0 * x[:, 0] + 1.5 * x[:, 1] + rng.normal(scale=0.5, size=50)
        data = Dataset(x, y)
        taxonomy = two_groups()
        fit = phi_lasso_fit(data, taxonomy, 0.3 * null_lambda(data))
        self.assertTrue(fit.converged)
        np.testing.assert_array_equal(fit.support, [0, 1])
        self.assertEqual(fit.decomposition.d[0][1], 0.0)
        np.testing.assert_allclose(decompose.compose(fit.decomposition, taxonomy), fit.beta, atol=1e-8)

    def test_zero_group(self) -> None:
        """Test that covariates orthogonal to a noise-free response stay
        at zero.
        """
        rng = np.random.default_rng(8)
        x = orthonormal_design(rng, 30, 4)
        y = x[:, :2] @ np.array([1.0, 2.0])
        data = Dataset(x, y, intercept=False)
        for lam in (1e-3, 0.1, 1.0):
            fit = phi_lasso_fit(data, two_groups(), lam)
            np.testing.assert_array_equal(fit.beta[2:], 0.0)

    def test_bridge_equivalence(self) -> None:
        """Test singleton taxonomy against the square-root Bridge
        penalty.
        """
        rng = np.random.default_rng(9)
        taxonomy = singleton_taxonomy(2, 1)
        options = SolverOptions(outer_tol=1e-9, max_outer=200)
        for _ in range(20):
            n = 20
            x = orthonormal_design(rng, n, 2)
            coef = rng.uniform(1.0, 3.0, size=2) * rng.choice([-1.0, 1.0], size=2)
            y = x @ coef + rng.normal(scale=0.1, size=n)
            lam = float(rng.uniform(0.02, 0.2))
            data = Dataset(x, y, intercept=False)
            bridge_lam = (taxonomy.T + 1) * n * lam
            xtx, xty, yty = x.T @ x, x.T @ y, float(y @ y)

            def objective(b1: np.ndarray, b2: np.ndarray) -> np.ndarray:
                quad = xtx[0, 0] * b1**2 + 2 * xtx[0, 1] * b1 * b2 + xtx[1, 1] * b2**2
                loglik = -0.5 * (yty - 2 * (xty[0] * b1 + xty[1] * b2) + quad)
                return loglik - bridge_lam * (np.sqrt(np.abs(b1)) + np.sqrt(np.abs(b2)))

            best = grid_maximize(objective)
            fit = phi_lasso_fit(data, taxonomy, lam, options)
            self.assertTrue(fit.converged)
            np.testing.assert_allclose(fit.beta, best, atol=2e-3)
            expected = float(objective(fit.beta[0], fit.beta[1]))
            self.assertAlmostEqual(fit.objective, expected, delta=1e-6 * max(1.0, abs(expected)))

    def test_objective_monotone(self) -> None:
        """Test that reweighting steps do not decrease the objective when
        no coefficient is zero.
        """
        rng = np.random.default_rng(10)
        taxonomy = Taxonomy.from_levels(
            6, [[[0, 1, 2], [3, 4, 5]], [[0, 1], [2], [3, 4, 5]], [[j] for j in range(6)]]
        )
        for _ in range(10):
            x = rng.normal(size=(60, 6))
            y = x @ rng.uniform(1.0, 3.0, size=6) + rng.normal(size=60)
            data = Dataset(x, y)
            fit = phi_lasso_fit(data, taxonomy, 1e-3 * null_lambda(data))
            self.assertEqual(len(fit.support), 6)
            trace = np.array(fit.objective_trace)
            self.assertGreater(len(trace), 1)
            slack = 1e-8 * np.maximum(1.0, np.abs(trace[:-1]))
            self.assertTrue(np.all(np.diff(trace) >= -slack))

    def test_two_cycle(self) -> None:
        """Test that reweighting stops on a two-step cycle and keeps the
        better iterate.
        """
        data = alternating_data()
        taxonomy = singleton_taxonomy(2, 1)
        fit = phi_lasso_fit(data, taxonomy, 0.5)
        self.assertTrue(fit.cycled)
        self.assertFalse(fit.converged)
        self.assertLess(fit.outer_iterations, SolverOptions().max_outer)

        trace = np.array(fit.objective_trace)
        self.assertTrue(np.any(np.diff(trace) < 0))
        self.assertEqual(fit.objective, trace.max())
        self.assertEqual(fit.beta[0], 0.0)
        fixed = 3.0
        for _ in range(100):
            fixed = 3.0 - 0.5 / np.sqrt(fixed)
        self.assertAlmostEqual(fit.beta[1], fixed, delta=1e-5)
        self.assertAlmostEqual(fit_objective(data, taxonomy, fit.beta, 0.0, 0.5), fit.objective, places=8)

    def test_best_iterate(self) -> None:
        """Test that a fit stopped by the iteration cap returns the iterate
        with the largest objective rather than the last one.
        """
        data = alternating_data()
        fit = phi_lasso_fit(data, singleton_taxonomy(2, 1), 0.5, SolverOptions(max_outer=2))
        self.assertFalse(fit.converged)
        self.assertFalse(fit.cycled)
        self.assertEqual(fit.outer_iterations, 2)
        self.assertEqual(len(fit.objective_trace), 3)
        # Iterates are (0.1, 2.5), (0, 2.68...) and (0.1, 2.69...).
        self.assertEqual(fit.objective, fit.objective_trace[1])
        self.assertLess(fit.objective_trace[2], fit.objective)
        self.assertEqual(fit.beta[0], 0.0)
        self.assertAlmostEqual(fit.beta[1], 3.0 - 0.5 / np.sqrt(2.5), places=8)

    def test_standardized_objective(self) -> None:
        """Test that the reported objective is evaluated at the reported
        coefficients when columns are standardized internally.
        """
        rng = np.random.default_rng(16)
        x = rng.normal(size=(60, 4)) * np.array([1.0, 10.0, 0.1, 3.0]) + np.array([5.0, -2.0, 0.0, 1.0])
        y = 0.5 * x[:, 0] + 0.1 * x[:, 1] + 4.0 * x[:, 2] + 3.0 + rng.normal(size=60)
        data = Dataset(x, y)
        taxonomy = two_groups()
        for scale in (0.3, 0.05):
            fit = phi_lasso_fit(data, taxonomy, scale * null_lambda(data))
            expected = fit_objective(data, taxonomy, fit.beta, fit.intercept, fit.lam)
            self.assertAlmostEqual(fit.objective, expected, delta=1e-8 * max(1.0, abs(expected)))
            np.testing.assert_allclose(
                decompose.compose(fit.decomposition, taxonomy), fit.beta, rtol=1e-8, atol=1e-12
            )

    def test_fixed_point(self) -> None:
        """Test that refitting with the final weights reproduces the fit."""
        rng = np.random.default_rng(11)
        x = rng.normal(size=(50, 4))
        y = x @ np.array([2.0, -1.0, 1.5, 1.0]) + rng.normal(size=50)
        data = Dataset(x, y, intercept=False)
        taxonomy = two_groups()
        fit = phi_lasso_fit(data, taxonomy, 0.01 * null_lambda(data))
        self.assertTrue(fit.converged)
        self.assertFalse(fit.cycled)
        factors = decompose.weights(fit.beta, taxonomy).penalty_factors
        refit = weighted_lasso(WeightedLassoProblem(data, fit.lam, factors), warm_start=fit)
        np.testing.assert_allclose(refit.beta, fit.beta, atol=1e-5)
        self.assertAlmostEqual(fit_objective(data, taxonomy, fit.beta, 0.0, fit.lam), fit.objective, places=8)

    def test_sign_flip(self) -> None:
        """Test that flipping a column flips its coefficient."""
        rng = np.random.default_rng(12)
        x = rng.normal(size=(40, 4))
        y = x[:, 0] - 2 * x[:, 3] + rng.normal(size=40)
        data = Dataset(x, y, intercept=False)
        flipped = x.copy()
        flipped[:, 3] *= -1
        lam = 0.1 * null_lambda(data)
        fit = phi_lasso_fit(data, two_groups(), lam)
        fit_flipped = phi_lasso_fit(Dataset(flipped, y, intercept=False), two_groups(), lam)
        expected = fit.beta.copy()
        expected[3] *= -1
        np.testing.assert_allclose(fit_flipped.beta, expected, atol=1e-10)

    def test_logit_fit(self) -> None:
        """Test Phi-LASSO with a binary response."""
        rng = np.random.default_rng(13)
        x = rng.normal(size=(80, 4))
        eta = 2.0 * x[:, 0] - 1.5 * x[:, 1]
        y = (rng.random(80) < 1 / (1 + np.exp(-eta))).astype(float)
        data = Dataset(x, y, Family.BERNOULLI_LOGIT)
        fit = phi_lasso_fit(data, two_groups(), 0.2 * null_lambda(data))
        self.assertTrue(fit.converged)
        self.assertGreater(abs(fit.beta[0]), 0)
        self.assertTrue(np.isfinite(fit.objective))
        self.assertAlmostEqual(
            fit_objective(data, two_groups(), fit.beta, fit.intercept, fit.lam),
            log_likelihood(data, fit.beta, fit.intercept)
            - data.n * fit.lam * decompose.penalty_decomposed(fit.decomposition, 1.0),
            places=8,
        )
        self.assertAlmostEqual(
            fit.objective,
            fit_objective(data, two_groups(), fit.beta, fit.intercept, fit.lam),
            delta=1e-8 * max(1.0, abs(fit.objective)),
        )

    def test_dimension_mismatch(self) -> None:
        """Test taxonomy and data disagreeing on covariates."""
        data = Dataset(np.ones((3, 3)), np.arange(3.0))
        with self.assertRaisesRegex(DimensionMismatchError, "dimension mismatch"):
            phi_lasso_fit(data, two_groups(), 0.1)
        with self.assertRaises(ValueError):
            phi_lasso_fit(Dataset(np.eye(4), np.arange(4.0)), two_groups(), -1.0)

    def test_path(self) -> None:
        """Test paths with and without warm starts."""
        rng = np.random.default_rng(14)
        x = rng.normal(size=(40, 4))
        y = x[:, 0] + 0.8 * x[:, 1] - 0.5 * x[:, 2] + rng.normal(size=40)
        data = Dataset(x, y)
        taxonomy = two_groups()
        lam_max = null_lambda(data)
        grid = np.geomspace(lam_max, 0.01 * lam_max, 50)
        warm = phi_lasso_path(data, taxonomy, grid)
        cold = phi_lasso_path(data, taxonomy, grid, warm_starts=False)
        self.assertEqual(len(warm), 50)
        for fit_warm, fit_cold in zip(warm, cold, strict=True):
            assert isinstance(fit_warm, PhiLassoFit) and isinstance(fit_cold, PhiLassoFit)
            delta = 1e-6 * max(1.0, abs(fit_cold.objective))
            self.assertAlmostEqual(fit_warm.objective, fit_cold.objective, delta=delta)
        first = warm[0]
        assert not isinstance(first, PathFailure)
        np.testing.assert_array_equal(first.beta, 0.0)

        single = phi_lasso_path(data, taxonomy, [lam_max])
        self.assertEqual(len(single), 1)
        self.assertEqual(phi_lasso_path(data, taxonomy, []), [])
        with self.assertRaisesRegex(ValueError, "descending"):
            phi_lasso_path(data, taxonomy, [0.1, 0.2])


if __name__ == "__main__":
    unittest.main()

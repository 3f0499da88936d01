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

from lsst.philasso import glm
from lsst.philasso.glm import Dataset, Family
from lsst.philasso.taxonomy import DimensionMismatchError


def random_dataset(rng: np.random.Generator, family: Family, n: int = 30, p: int = 5) -> Dataset:
    x = rng.normal(size=(n, p))
    if family is Family.GAUSSIAN:
        y = rng.normal(size=n)
    else:
        y = (rng.random(n) < 0.5).astype(float)
    return Dataset(x, y, family, intercept=True)


class GlmTestCase(unittest.TestCase):
    """Tests for glm module."""

    def test_dataset(self) -> None:
        """Test dataset validation."""
        data = Dataset(np.ones((3, 2)), np.zeros(3))
        self.assertEqual((data.n, data.p), (3, 2))
        self.assertIs(data.family, Family.GAUSSIAN)
        self.assertFalse(data.x.flags.writeable)
        with self.assertRaisesRegex(DimensionMismatchError, "dimension mismatch"):
            Dataset(np.ones((3, 2)), np.zeros(4))
        with self.assertRaises(ValueError):
            Dataset(np.array([[np.inf]]), np.zeros(1))
        with self.assertRaisesRegex(ValueError, "0 or 1"):
            Dataset(np.ones((2, 1)), np.array([0.0, 2.0]), Family.BERNOULLI_LOGIT)
        with self.assertRaises(ValueError):
            Dataset(np.ones((0, 2)), np.zeros(0))
        sub = data.subset(np.array([0, 2]))
        self.assertEqual(sub.n, 2)
        with self.assertRaisesRegex(DimensionMismatchError, "dimension mismatch"):
            data.check_beta(np.ones(3))

    def test_log_likelihood(self) -> None:
        """Test log-likelihood values."""
        data = Dataset(np.ones((2, 1)), np.array([1.0, -1.0]), intercept=False)
        self.assertEqual(glm.log_likelihood(data, np.zeros(1)), -1.0)

        logit = Dataset(np.ones((4, 1)), np.array([0.0, 1.0, 1.0, 0.0]), Family.BERNOULLI_LOGIT)
        self.assertAlmostEqual(glm.log_likelihood(logit, np.zeros(1)), -4.0 * np.log(2.0), places=14)

        rng = np.random.default_rng(1)
        data = random_dataset(rng, Family.BERNOULLI_LOGIT, n=15, p=3)
        beta = rng.normal(size=3)
        eta = data.x @ beta + 0.3
        naive = sum(yi * ei - np.log(1.0 + np.exp(ei)) for yi, ei in zip(data.y, eta, strict=True))
        self.assertAlmostEqual(glm.log_likelihood(data, beta, 0.3), naive, delta=1e-12 * max(1.0, abs(naive)))

        # No overflow for extreme predictors.
        extreme = Dataset(np.array([[1.0], [1.0]]), np.array([1.0, 0.0]), Family.BERNOULLI_LOGIT)
        self.assertTrue(np.isfinite(glm.log_likelihood(extreme, np.array([1000.0]))))

    def test_gradient(self) -> None:
        """Test gradient against central differences."""
        rng = np.random.default_rng(2)
        h = 1e-5
        for family in Family:
            for _ in range(100):
                data = random_dataset(rng, family)
                beta = rng.normal(scale=0.5, size=data.p)
                intercept = float(rng.normal())
                grad = glm.gradient(data, beta, intercept)
                self.assertEqual(grad.shape, (data.p + 1,))
                numeric = np.zeros(data.p + 1)
                for j in range(data.p + 1):
                    step = np.zeros(data.p + 1)
                    step[j] = h
                    plus = glm.log_likelihood(data, beta + step[:-1], intercept + step[-1])
                    minus = glm.log_likelihood(data, beta - step[:-1], intercept - step[-1])
                    numeric[j] = (plus - minus) / (2 * h)
                error = np.linalg.norm(numeric - grad) / max(1.0, np.linalg.norm(grad))
                self.assertLess(error, 1e-6)

    def test_gradient_special(self) -> None:
        """Test gradient at simple points."""
        x, _ = np.linalg.qr(np.random.default_rng(3).normal(size=(6, 3)))
        y = np.arange(6.0)
        data = Dataset(x, y, intercept=False)
        np.testing.assert_allclose(glm.gradient(data, np.zeros(3)), x.T @ y)

        logit = Dataset(np.zeros((2, 2)), np.array([0.0, 1.0]), Family.BERNOULLI_LOGIT, intercept=False)
        np.testing.assert_allclose(glm.gradient(logit, np.zeros(2)), 0.0)

    def test_irls(self) -> None:
        """Test IRLS working quantities."""
        data = Dataset(np.ones((1, 1)), np.ones(1), Family.BERNOULLI_LOGIT)
        weights, response = glm.irls_working(data, np.zeros(1))
        self.assertAlmostEqual(weights[0], 0.25)
        self.assertAlmostEqual(response[0], 2.0)
        weights, _ = glm.irls_working(data, np.array([30.0]))
        self.assertEqual(weights[0], glm.WEIGHT_FLOOR)

        gaussian = Dataset(np.ones((2, 1)), np.array([3.0, 4.0]))
        weights, response = glm.irls_working(gaussian, np.zeros(2))
        np.testing.assert_array_equal(weights, 1.0)
        np.testing.assert_array_equal(response, [3.0, 4.0])

        # One weighted least-squares step from zero is a Newton step.
        rng = np.random.default_rng(4)
        data = random_dataset(rng, Family.BERNOULLI_LOGIT, n=40, p=3)
        state = glm.linear_predictor_state(data, np.zeros(3), 0.0)
        design = np.column_stack([data.x, np.ones(data.n)])
        wx = design * state.working_weights[:, None]
        irls = np.linalg.solve(design.T @ wx, wx.T @ state.working_response)
        hessian = design.T @ (design * (state.mu * (1 - state.mu))[:, None])
        newton = np.linalg.solve(hessian, glm.gradient(data, np.zeros(3), 0.0))
        np.testing.assert_allclose(irls, newton, atol=1e-10)

    def test_predict(self) -> None:
        """Test predictions and clamping."""
        x = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(glm.predict(Dataset(x, np.zeros(2)), np.array([1.0, 0.0])), [1.0, 3.0])
        logit = Dataset(x, np.zeros(2), Family.BERNOULLI_LOGIT)
        np.testing.assert_array_equal(glm.predict(logit, np.zeros(2)), [0.5, 0.5])
        mu = glm.inverse_link(np.array([-40.0, 40.0, 1000.0]), Family.BERNOULLI_LOGIT)
        self.assertTrue(np.all(mu >= glm.MU_EPS))
        self.assertTrue(np.all(mu <= 1 - glm.MU_EPS))

    def test_concavity(self) -> None:
        """Test concavity along random segments and row permutations."""
        rng = np.random.default_rng(5)
        for family in Family:
            data = random_dataset(rng, family)
            for _ in range(50):
                b1, b2 = rng.normal(size=(2, data.p))
                t = rng.random()
                mixed = glm.log_likelihood(data, t * b1 + (1 - t) * b2)
                bound = t * glm.log_likelihood(data, b1) + (1 - t) * glm.log_likelihood(data, b2)
                self.assertGreaterEqual(mixed, bound - 1e-9)
            order = rng.permutation(data.n)
            beta = rng.normal(size=data.p)
            self.assertAlmostEqual(
                glm.log_likelihood(data.subset(order), beta), glm.log_likelihood(data, beta), places=10
            )


if __name__ == "__main__":
    unittest.main()

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

"""Simulated designs with taxon-wise correlation and sparse truths."""

from __future__ import annotations

__all__ = [
    "OlsFit",
    "SimReplicate",
    "SingularDesignError",
    "Stream",
    "design_covariance",
    "fitting_taxonomy",
    "gen_dataset",
    "gen_design",
    "gen_replicate",
    "generator_taxonomy",
    "oracle_ols",
    "replicate_rng",
    "true_beta",
]

import dataclasses
import enum
import functools
import logging

import numpy as np
import scipy.linalg

from ..glm import Dataset, Family
from ..taxonomy import Taxonomy, balanced_taxonomy
from .config import SimConfig, SimConfigError

_LOG = logging.getLogger(__name__)

_BLOCKS_PER_GROUP = 2
"""Number of true blocks placed under one spreading taxon."""

_SPREAD_LEVEL = 3
"""Grouping level across which true blocks are spread ("family")."""


class SingularDesignError(ValueError):
    """Exception raised when the design restricted to the true support is
    singular.
    """


class Stream(enum.IntEnum):
    """Independent random streams of an experiment."""

    TRAIN = 0
    TUNE = 1
    TUNE_VALID = 2
    EVAL = 3
    EVAL_VALID = 4


def replicate_rng(seed: int, stream: Stream, n: int, index: int = 0) -> np.random.Generator:
    """Return a counter-based generator keyed by experiment coordinates.

    The stream depends only on its key, so replicates can be produced in
    any order or in parallel.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, int(stream), n, index])))


@functools.lru_cache(maxsize=4)
def generator_taxonomy(config: SimConfig) -> Taxonomy:
    """Return the balanced taxonomy driving the design generator."""
    return balanced_taxonomy(config.branching, config.depth)


def fitting_taxonomy(config: SimConfig) -> Taxonomy:
    """Return the taxonomy handed to the fitter, without the deepest
    grouping level when the configuration hides it.
    """
    taxonomy = generator_taxonomy(config)
    if config.drop_deepest_level and taxonomy.T > 1:
        return taxonomy.truncate(taxonomy.T - 1)
    return taxonomy


def _check_levels(config: SimConfig, taxonomy: Taxonomy) -> None:
    if len(config.level_std_devs) != taxonomy.T - 1:
        raise SimConfigError(
            f"{len(config.level_std_devs)} level standard deviations for a taxonomy with "
            f"{taxonomy.T - 1} sub-root levels"
        )


def gen_design(config: SimConfig, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw a design matrix with taxon-wise shared effects.

    Every sample is an independent ``N(0, base_std_dev**2)`` vector plus,
    for every grouping level below the root, one ``N(0, sd**2)`` draw per
    taxon shared by all its covariates, divided by the normalizer.

    Parameters
    ----------
    config : `~lsst.philasso.sim.SimConfig`
        Simulation configuration.
    n : `int`
        Number of samples.
    rng : `numpy.random.Generator`
        Random generator.

    Returns
    -------
    x : `numpy.ndarray`
        Design matrix of shape ``(n, p)`` with unit column variance.
    """
    taxonomy = generator_taxonomy(config)
    _check_levels(config, taxonomy)
    x = rng.normal(0.0, config.base_std_dev, size=(n, taxonomy.p))
    for level, sd in enumerate(config.level_std_devs, start=1):
        shared = rng.normal(0.0, sd, size=(n, len(taxonomy.levels[level])))
        x += shared[:, taxonomy.membership(level)]
    return x / config.normalizer


def design_covariance(config: SimConfig) -> np.ndarray:
    """Return the population covariance of `gen_design` rows."""
    taxonomy = generator_taxonomy(config)
    _check_levels(config, taxonomy)
    covariance = config.base_std_dev**2 * np.eye(taxonomy.p)
    for level, sd in enumerate(config.level_std_devs, start=1):
        membership = taxonomy.membership(level)
        covariance += sd**2 * (membership[:, None] == membership[None, :])
    return covariance / config.normalizer**2


def true_beta(config: SimConfig, taxonomy: Taxonomy | None = None) -> np.ndarray:
    """Place the true coefficients.

    Coefficients fill complete blocks of the deepest grouping level. Three
    quarters of the blocks (rounded up) go under the first class, the rest
    under the second class; within a class, blocks are taken two at a time
    from consecutive taxa of the spreading level (family, or the deepest
    grouping level for shallow taxonomies).

    Parameters
    ----------
    config : `~lsst.philasso.sim.SimConfig`
        Simulation configuration.
    taxonomy : `~lsst.philasso.taxonomy.Taxonomy`, optional
        Generator taxonomy, computed from ``config`` if missing.

    Returns
    -------
    beta : `numpy.ndarray`
        True coefficients.

    Raises
    ------
    SimConfigError
        Raised if the layout does not fit the taxonomy.
    """
    taxonomy = taxonomy if taxonomy is not None else generator_taxonomy(config)
    beta = np.zeros(taxonomy.p)
    count = config.true_coef_count
    if count == 0:
        return beta
    if count % config.branching:
        raise SimConfigError(
            f"true_coef_count={count} is not a multiple of branching={config.branching}"
        )
    if taxonomy.T < 2:
        raise SimConfigError("Truth layout needs at least two grouping levels")
    n_blocks = count // config.branching
    n_minor = n_blocks // 4
    leaf_level = taxonomy.T - 1
    spread_level = min(_SPREAD_LEVEL, leaf_level)
    class_of = taxonomy.membership(1)
    spread_of = taxonomy.membership(spread_level)

    for class_order, wanted in ((0, n_blocks - n_minor), (1, n_minor)):
        if wanted == 0:
            continue
        groups: dict[int, list[frozenset[int]]] = {}
        for block in taxonomy.levels[leaf_level]:
            first = min(block.indices)
            if class_of[first] == class_order:
                groups.setdefault(int(spread_of[first]), []).append(block.indices)
        chosen: list[frozenset[int]] = []
        for blocks in groups.values():
            chosen.extend(blocks[:_BLOCKS_PER_GROUP][: wanted - len(chosen)])
            if len(chosen) == wanted:
                break
        if len(chosen) < wanted:
            raise SimConfigError(
                f"Truth layout infeasible: class {class_order + 1} holds {len(chosen)} of {wanted} blocks"
            )
        for block in chosen:
            beta[sorted(block)] = config.true_coef_value
    return beta


@dataclasses.dataclass(frozen=True)
class SimReplicate:
    """One simulated training set with its validation set."""

    train: Dataset
    valid: Dataset
    true_beta: np.ndarray
    taxonomy: Taxonomy
    """Taxonomy handed to the fitter."""


def gen_dataset(
    config: SimConfig, n: int, rng: np.random.Generator, beta: np.ndarray | None = None
) -> Dataset:
    """Draw a design and Gaussian responses ``y = x @ beta + noise``.

    The true coefficients default to `true_beta` of the configuration.
    """
    beta = true_beta(config) if beta is None else beta
    x = gen_design(config, n, rng)
    y = x @ beta + config.noise_sigma * rng.standard_normal(n)
    return Dataset(x, y, Family.GAUSSIAN, intercept=False)


def gen_replicate(
    config: SimConfig,
    rng: np.random.Generator,
    *,
    n: int | None = None,
    valid: Dataset | None = None,
) -> SimReplicate:
    """Draw a training set and, unless given, a validation set.

    Parameters
    ----------
    config : `~lsst.philasso.sim.SimConfig`
        Simulation configuration.
    rng : `numpy.random.Generator`
        Random generator, see `replicate_rng`.
    n : `int`, optional
        Training sample size, ``config.n`` by default.
    valid : `~lsst.philasso.glm.Dataset`, optional
        Shared validation set; drawn from ``rng`` with ``config.n_valid``
        samples when missing.

    Returns
    -------
    replicate : `SimReplicate`
        Datasets without intercept, Gaussian family.
    """
    n = config.n if n is None else n
    beta = true_beta(config)
    train = gen_dataset(config, n, rng, beta)
    if valid is None:
        valid = gen_dataset(config, config.n_valid, rng, beta)
    return SimReplicate(train=train, valid=valid, true_beta=beta, taxonomy=fitting_taxonomy(config))


@dataclasses.dataclass(frozen=True)
class OlsFit:
    """Least-squares fit restricted to a known support."""

    beta: np.ndarray
    intercept: float = 0.0


def oracle_ols(replicate: SimReplicate) -> OlsFit:
    """Fit least squares on the true support.

    Raises
    ------
    SingularDesignError
        Raised if the restricted design does not have full column rank.
    """
    support = np.flatnonzero(replicate.true_beta)
    beta = np.zeros(replicate.train.p)
    if len(support) == 0:
        return OlsFit(beta=beta)
    x = replicate.train.x[:, support]
    if len(support) >= replicate.train.n or np.linalg.matrix_rank(x) < len(support):
        raise SingularDesignError(
            f"Design restricted to {len(support)} true covariates is singular for n={replicate.train.n}"
        )
    coef, _, _, _ = scipy.linalg.lstsq(x, replicate.train.y)
    beta[support] = coef
    return OlsFit(beta=beta)

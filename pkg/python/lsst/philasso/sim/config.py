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

"""Simulation and experiment configuration."""

from __future__ import annotations

__all__ = ["ExperimentConfig", "SimConfig", "SimConfigError"]

import dataclasses
import logging
import math
import os
from collections.abc import Mapping
from typing import Any

import yaml

_LOG = logging.getLogger(__name__)

TRUTH_LAYOUT = "clustered-3:1"
"""Name of the only supported placement rule for the true coefficients."""

_AUTO = "auto"


class SimConfigError(ValueError):
    """Exception raised for invalid simulation configuration."""


@dataclasses.dataclass(frozen=True)
class SimConfig:
    """Parameters of the simulated design, truth and noise.

    Defaults reproduce the full-size study (``branching**depth = 4096``
    covariates); `SimConfig.desk` gives the smaller default used by the
    command line. The configuration is validated on construction.
    """

    branching: int = 4
    depth: int = 6
    level_std_devs: tuple[float, ...] = (0.5, 1.0, 2.0, 3.0, 4.0)
    """Standard deviations of shared effects, one per grouping level below
    the root, from shallow to deep.
    """

    base_std_dev: float = 5.0
    """Standard deviation of the independent per-covariate component."""

    normalizer: float = math.sqrt(55.25)
    """Divisor of the summed components; its square must equal
    ``base_std_dev**2 + sum(level_std_devs**2)``.
    """

    true_coef_count: int = 32
    true_coef_value: float = 2.0
    noise_sigma: float = 1.0
    n: int = 100
    """Training sample size."""

    n_valid: int = 10_000
    """Validation sample size."""

    seed: int = 0
    truth_layout: str = TRUTH_LAYOUT

    drop_deepest_level: bool = True
    """Hide the deepest grouping level from the fitter."""

    def __post_init__(self) -> None:
        object.__setattr__(self, "level_std_devs", tuple(float(sd) for sd in self.level_std_devs))
        self.validate()

    @classmethod
    def desk(cls, **overrides: Any) -> SimConfig:
        """Return the small configuration over ``4**4 = 256`` covariates.

        The three sub-root levels keep the three deepest default standard
        deviations.
        """
        level_std_devs = (2.0, 3.0, 4.0)
        values: dict[str, Any] = dict(
            depth=4,
            level_std_devs=level_std_devs,
            normalizer=math.sqrt(25.0 + sum(sd**2 for sd in level_std_devs)),
            true_coef_count=8,
        )
        values.update(overrides)
        return cls(**values)

    @property
    def p(self) -> int:
        """Number of covariates (`int`)."""
        return self.branching**self.depth

    def problems(self) -> list[str]:
        """Return descriptions of all invalid settings."""
        problems = []
        if self.branching < 2:
            problems.append(f"branching must be at least 2, got {self.branching}")
        if self.depth < 1:
            problems.append(f"depth must be at least 1, got {self.depth}")
        if self.base_std_dev <= 0 or self.normalizer <= 0:
            problems.append("base_std_dev and normalizer must be positive")
        if any(sd < 0 for sd in self.level_std_devs):
            problems.append("level_std_devs must be nonnegative")
        expected = self.base_std_dev**2 + sum(sd**2 for sd in self.level_std_devs)
        if not math.isclose(self.normalizer**2, expected, rel_tol=1e-9):
            problems.append(
                f"normalizer identity violated: normalizer**2 = {self.normalizer**2:.6g} but "
                f"base_std_dev**2 + sum(level_std_devs**2) = {expected:.6g}"
            )
        if len(self.level_std_devs) != self.depth - 1:
            problems.append(
                f"level_std_devs has {len(self.level_std_devs)} entries, "
                f"expected one per sub-root level ({self.depth - 1})"
            )
        if self.branching >= 2 and self.depth >= 1 and self.depth * math.log2(self.branching) > 24:
            problems.append(f"taxonomy with branching={self.branching}, depth={self.depth} is too large")
        elif not 0 <= self.true_coef_count <= self.p:
            problems.append(f"true_coef_count must be between 0 and p={self.p}, got {self.true_coef_count}")
        if self.noise_sigma < 0:
            problems.append(f"noise_sigma must be nonnegative, got {self.noise_sigma}")
        if self.n < 1 or self.n_valid < 1:
            problems.append("sample sizes must be positive")
        if self.truth_layout != TRUTH_LAYOUT:
            problems.append(f"unknown truth_layout {self.truth_layout!r}, supported: {TRUTH_LAYOUT!r}")
        return problems

    def validate(self) -> None:
        """Check the configuration.

        Raises
        ------
        SimConfigError
            Raised with all problems found.
        """
        problems = self.problems()
        if problems:
            raise SimConfigError("Invalid simulation configuration: " + "; ".join(problems))

    def to_dict(self) -> dict[str, Any]:
        """Return configuration as a plain dictionary."""
        values = dataclasses.asdict(self)
        values["level_std_devs"] = list(self.level_std_devs)
        return values

    @classmethod
    def from_dict(cls, values: Mapping[str, Any], base: SimConfig | None = None) -> SimConfig:
        """Make configuration from a mapping, missing keys come from
        ``base``.

        A normalizer given as "auto" is computed from the identity.
        """
        base = base if base is not None else cls()
        known = {field.name for field in dataclasses.fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise SimConfigError(f"Unknown simulation settings: {', '.join(unknown)}")
        merged = base.to_dict()
        merged.update(values)
        if merged["normalizer"] == _AUTO:
            merged["normalizer"] = math.sqrt(
                float(merged["base_std_dev"]) ** 2 + sum(float(sd) ** 2 for sd in merged["level_std_devs"])
            )
        try:
            return cls(**merged)
        except TypeError as exc:
            raise SimConfigError(f"Invalid simulation settings: {exc}") from exc


def _default_sim() -> SimConfig:
    return SimConfig.desk()


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    """Simulation settings together with the experiment design."""

    sim: SimConfig = dataclasses.field(default_factory=_default_sim)
    n_list: tuple[int, ...] = (50, 100, 200)
    replicates: int = 20
    """Evaluation datasets per sample size."""

    tuning_replicates: int = 5
    """Training datasets per sample size used to select the tuning
    parameter.
    """

    n_lambdas: int = 30
    min_ratio: float = 0.01

    def __post_init__(self) -> None:
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        problems = []
        if not self.n_list or any(n < 2 for n in self.n_list):
            problems.append("n_list must contain sample sizes of at least 2")
        if self.replicates < 0:
            problems.append(f"replicates must be nonnegative, got {self.replicates}")
        if self.tuning_replicates < 1:
            problems.append(f"tuning_replicates must be positive, got {self.tuning_replicates}")
        if self.n_lambdas < 1 or not 0 < self.min_ratio < 1:
            problems.append("n_lambdas must be positive and min_ratio in (0, 1)")
        if problems:
            raise SimConfigError("Invalid experiment configuration: " + "; ".join(problems))

    @classmethod
    def defaults(cls, extended: bool = False) -> ExperimentConfig:
        """Return desk-size defaults, or the full-size study if
        ``extended``.
        """
        if extended:
            return cls(sim=SimConfig(), n_list=(50, 100, 150, 200, 250), replicates=100)
        return cls()

    @classmethod
    def from_file(cls, path: str | os.PathLike, extended: bool = False) -> ExperimentConfig:
        """Read configuration from a YAML or JSON file.

        Parameters
        ----------
        path : `str` or `os.PathLike`
            File name. Top-level keys are the experiment settings, the
            optional ``sim`` mapping holds `SimConfig` settings.
        extended : `bool`, optional
            Use full-size defaults for missing settings.

        Returns
        -------
        config : `ExperimentConfig`
            Validated configuration.

        Raises
        ------
        SimConfigError
            Raised if the file content is not a valid configuration.
        """
        with open(path) as file:
            try:
                values = yaml.safe_load(file)
            except yaml.YAMLError as exc:
                raise SimConfigError(f"Cannot parse configuration file {path}: {exc}") from exc
        if values is None:
            values = {}
        if not isinstance(values, Mapping):
            raise SimConfigError(f"Configuration file {path} must contain a mapping")
        _LOG.debug("Read experiment configuration from %s", path)
        return cls.from_dict(values, extended=extended)

    @classmethod
    def from_dict(cls, values: Mapping[str, Any], extended: bool = False) -> ExperimentConfig:
        """Make configuration from a mapping, see `from_file`."""
        base = cls.defaults(extended)
        values = dict(values)
        sim_values = values.pop("sim", None) or {}
        if not isinstance(sim_values, Mapping):
            raise SimConfigError("The 'sim' setting must be a mapping")
        known = {field.name for field in dataclasses.fields(cls)} - {"sim"}
        unknown = sorted(set(values) - known)
        if unknown:
            raise SimConfigError(f"Unknown experiment settings: {', '.join(unknown)}")
        sim = SimConfig.from_dict(sim_values, base=base.sim)
        try:
            return dataclasses.replace(base, sim=sim, **values)
        except TypeError as exc:
            raise SimConfigError(f"Invalid experiment settings: {exc}") from exc

    def to_dict(self) -> dict[str, Any]:
        """Return configuration as nested plain dictionaries."""
        values = dataclasses.asdict(self)
        values["sim"] = self.sim.to_dict()
        values["n_list"] = list(self.n_list)
        return values

    def to_yaml(self) -> str:
        """Return configuration as YAML text readable by `from_file`."""
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

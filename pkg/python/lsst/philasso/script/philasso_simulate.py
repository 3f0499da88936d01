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

"""Run the simulation study."""

from __future__ import annotations

import dataclasses
import logging
import os

from .. import formats
from ..manifest import RunManifest
from ..sim import ExperimentConfig, run_experiment

_LOG = logging.getLogger(__name__)


def philasso_simulate(
    config: str | None, output_dir: str, extended: bool, seed: int | None = None, threads: int = 1
) -> None:
    """Run the experiment and write ``experiment.csv``, ``tuning.csv``,
    ``config.yaml`` and ``manifest.yaml``.

    Parameters
    ----------
    config : `str` or `None`
        Configuration file, defaults are used if `None`.
    output_dir : `str`
        Output folder.
    extended : `bool`
        Use the full-size study defaults.
    seed : `int`, optional
        Overrides the seed of the configuration.
    threads : `int`, optional
        Number of replicates processed in parallel.
    """
    if config is None:
        experiment = ExperimentConfig.defaults(extended)
    else:
        experiment = ExperimentConfig.from_file(config, extended)
    if seed is not None:
        experiment = dataclasses.replace(experiment, sim=dataclasses.replace(experiment.sim, seed=seed))
    manifest = RunManifest.start(
        "simulate", [] if config is None else [config], experiment.to_dict(), seed=experiment.sim.seed
    )
    _LOG.info(
        "Simulating p=%d covariates, n in %s, %d replicates",
        experiment.sim.p,
        list(experiment.n_list),
        experiment.replicates,
    )
    result = run_experiment(experiment, threads)
    for (method, n), count in sorted(result.failures.items()):
        if count:
            _LOG.warning("%s at n=%d: %d replicates excluded", method, n, count)

    os.makedirs(output_dir, exist_ok=True)
    formats.write_table(formats.experiment_table(result), os.path.join(output_dir, "experiment.csv"))
    formats.write_table(formats.tuning_table(result), os.path.join(output_dir, "tuning.csv"))
    with open(os.path.join(output_dir, "config.yaml"), "w") as file:
        file.write(experiment.to_yaml())
    manifest.finish()
    manifest.write(os.path.join(output_dir, "manifest.yaml"))

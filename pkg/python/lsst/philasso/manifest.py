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

__all__ = ["RunManifest", "file_digest", "run_id"]

import dataclasses
import hashlib
import json
import os
import uuid
from collections.abc import Mapping, Sequence
from typing import Any

import yaml
from astropy.time import Time

from .version import __version__

NS_UUID = uuid.UUID("3c1b4d2e-9f0a-5b7c-8d6e-1f2a3b4c5d6e")
"""Namespace UUID used for run identifiers. Do not change."""

_CHUNK = 1 << 20


def file_digest(path: str | os.PathLike) -> str:
    """Return SHA-256 hex digest of file contents."""
    digest = hashlib.sha256()
    with open(path, "rb") as file:
        while chunk := file.read(_CHUNK):
            digest.update(chunk)
    return digest.hexdigest()


def run_id(digest: str) -> str:
    """Make short run identifier from a configuration digest.

    Parameters
    ----------
    digest : `str`
        Hex digest of command inputs and options.

    Returns
    -------
    run_id : `str`
        Last 12 characters of the UUID5 of the digest.
    """
    return uuid.uuid5(NS_UUID, digest).hex[-12:]


@dataclasses.dataclass
class RunManifest:
    """Record of one command invocation.

    The digest covers the command name, the bytes of every input file and
    the options, so it changes whenever any of them changes; timestamps
    are not part of it.
    """

    command: str
    inputs: dict[str, str]
    """Input file names mapped to their SHA-256 digests."""

    options: dict[str, Any]
    seed: int | None
    version: str = __version__
    started: str = dataclasses.field(default_factory=lambda: Time.now().isot)
    finished: str | None = None

    @classmethod
    def start(
        cls,
        command: str,
        inputs: Sequence[str | os.PathLike],
        options: Mapping[str, Any],
        seed: int | None = None,
    ) -> RunManifest:
        """Make a manifest, hashing the input files now."""
        return cls(
            command=command,
            inputs={os.fspath(path): file_digest(path) for path in inputs},
            options=dict(options),
            seed=seed,
        )

    @property
    def digest(self) -> str:
        """SHA-256 hex digest of command, inputs, options and seed."""
        payload = json.dumps(
            {
                "command": self.command,
                "inputs": sorted(self.inputs.values()),
                "options": self.options,
                "seed": self.seed,
            },
            sort_keys=True,
            default=str,
        )
        return hashlib.sha256(payload.encode()).hexdigest()

    @property
    def run_id(self) -> str:
        """Short identifier derived from `digest`."""
        return run_id(self.digest)

    def finish(self) -> None:
        """Record completion time."""
        self.finished = Time.now().isot

    def to_dict(self) -> dict[str, Any]:
        return {
            "command": self.command,
            "run_id": self.run_id,
            "digest": self.digest,
            "inputs": dict(self.inputs),
            "options": dict(self.options),
            "seed": self.seed,
            "version": self.version,
            "started": self.started,
            "finished": self.finished,
        }

    def write(self, path: str | os.PathLike) -> None:
        """Write manifest as YAML."""
        with open(path, "w") as file:
            yaml.safe_dump(self.to_dict(), file, sort_keys=False)

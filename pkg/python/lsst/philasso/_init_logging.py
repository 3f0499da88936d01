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

__all__ = ["init_logging", "parse_log_levels"]

import json
import logging
from collections.abc import Iterable

_log_format = "%(asctime)s %(levelname)s %(name)s - %(message)s"


class _JsonFormatter(logging.Formatter):
    """Formatter emitting each record as a single-line JSON object."""

    def format(self, record: logging.LogRecord) -> str:
        payload = {
            "time": self.formatTime(record),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }
        if record.exc_info:
            payload["exception"] = self.formatException(record.exc_info)
        return json.dumps(payload)


def parse_log_levels(args: Iterable[str]) -> tuple[int, dict[str, int]]:
    """Parse ``--log-level`` option values.

    Parameters
    ----------
    args : `~collections.abc.Iterable` [ `str` ]
        Option values, each a comma-separated list of ``LEVEL`` or
        ``LOGGER=LEVEL`` items.

    Returns
    -------
    global_level : `int`
        Level for the root logger.
    logger_levels : `dict` [ `str`, `int` ]
        Levels for individual loggers.

    Raises
    ------
    ValueError
        Raised if a level name is not known to `logging`.
    """
    global_level = logging.INFO
    # Parallel workers and table I/O are chatty at INFO.
    logger_levels: dict[str, int] = {"joblib": logging.WARNING, "astropy": logging.WARNING}
    for level_str in args:
        for spec in level_str.split(","):
            logger_name, sep, level_name = spec.rpartition("=")
            level = logging.getLevelNamesMapping().get(level_name.upper())
            if level is None:
                raise ValueError(f"Unknown logging level {level_name!r} in {level_str!r}")
            if logger_name:
                logger_levels[logger_name] = level
            else:
                global_level = level
    return global_level, logger_levels


def init_logging(args: Iterable[str], json_logs: bool = False) -> None:
    """Configure Python logging based on command line options.

    Parameters
    ----------
    args : `~collections.abc.Iterable` [ `str` ]
        Values of the ``--log-level`` option.
    json_logs : `bool`, optional
        If `True` then every record is written as one JSON object per line.
    """
    global_level, logger_levels = parse_log_levels(args)

    handler = logging.StreamHandler()
    if json_logs:
        handler.setFormatter(_JsonFormatter())
    else:
        handler.setFormatter(logging.Formatter(_log_format))
    logging.basicConfig(level=global_level, handlers=[handler], force=True)
    for logger_name, level in logger_levels.items():
        logging.getLogger(logger_name).setLevel(level)

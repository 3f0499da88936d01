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

"""Taxonomies: level-wise partitions of covariate indices and their
lineages.

Covariate indices are 0-based everywhere in this package; the text formats
handled by `lsst.philasso.formats` use 1-based indices.
"""

from __future__ import annotations

__all__ = [
    "DimensionMismatchError",
    "Lineage",
    "Taxon",
    "Taxonomy",
    "TaxonomyFormatError",
    "TaxonomyRow",
    "TaxonomyTable",
    "Violation",
    "augment_with_singleton_level",
    "balanced_taxonomy",
    "lineages",
    "parse_taxonomy",
    "singleton_taxonomy",
    "validate",
]

import dataclasses
import logging
from collections.abc import Hashable, Iterable, Sequence
from functools import cached_property

import numpy as np

_LOG = logging.getLogger(__name__)

UNCLASSIFIED_LABELS = frozenset({"unclassified"})
"""Labels (compared case-insensitively) that are scoped to their parent
column value when grouping taxa.
"""

MAX_COVARIATES = 1 << 24
"""Largest number of covariates a generated taxonomy may have."""

DEFAULT_LEVEL_NAMES = ("phylum", "class", "order", "family", "genus", "species")


class TaxonomyFormatError(ValueError):
    """Exception raised for malformed taxonomy tables or invalid
    taxonomies.
    """


class DimensionMismatchError(ValueError):
    """Exception raised when array sizes disagree with each other or with a
    taxonomy.
    """


@dataclasses.dataclass(frozen=True)
class Taxon:
    """A set of covariate indices at one taxon level."""

    level: int
    """Index of the taxon level, 0-based (`int`)."""

    order: int
    """Position of the taxon within its level, by first appearance
    (`int`).
    """

    indices: frozenset[int]
    """Covariate indices covered by this taxon (`frozenset` [ `int` ])."""

    name: str | None = None
    """Optional display name (`str` or `None`)."""

    @property
    def id(self) -> tuple[int, int]:
        """Stable taxon identifier, ``(level, order)``."""
        return (self.level, self.order)

    @property
    def label(self) -> str:
        """Display name, generated from the identifier when missing."""
        if self.name is not None:
            return self.name
        return f"L{self.level + 1}_{self.order + 1}"

    def __len__(self) -> int:
        return len(self.indices)


@dataclasses.dataclass(frozen=True)
class Lineage:
    """Nonempty intersection of one taxon per grouping level."""

    taxa: tuple[tuple[int, int], ...]
    """Identifiers of the intersected taxa, one per grouping level."""

    indices: tuple[int, ...]
    """Sorted covariate indices of the intersection."""


@dataclasses.dataclass(frozen=True)
class Violation:
    """Single broken taxonomy invariant."""

    kind: str
    """Kind of the violation, e.g. "overlap" or "incomplete partition"."""

    level: int
    """Level index where the violation was found."""

    taxon: tuple[int, int] | None
    """Identifier of the offending taxon, if a single taxon is at fault."""

    indices: tuple[int, ...] = ()
    """Offending covariate indices."""

    def __str__(self) -> str:
        where = f"level {self.level + 1}"
        if self.taxon is not None:
            where += f", taxon {self.taxon[1] + 1}"
        text = f"{self.kind} at {where}"
        if self.indices:
            text += f": indices {', '.join(str(i + 1) for i in self.indices)}"
        return text


@dataclasses.dataclass(frozen=True)
class Taxonomy:
    """Ordered list of taxon levels over ``p`` covariates.

    The last level is the singleton level, all levels before it are
    grouping levels. Instances are immutable; use `Taxonomy.from_levels` to
    build one from plain index sets.
    """

    p: int
    """Number of covariates (`int`)."""

    levels: tuple[tuple[Taxon, ...], ...]
    """Taxon levels, the last one being the singleton level."""

    level_names: tuple[str, ...]
    """Names of the levels, same length as ``levels``."""

    @classmethod
    def from_levels(
        cls,
        p: int,
        levels: Sequence[Sequence[Iterable[int]]],
        *,
        names: Sequence[Sequence[str | None]] | None = None,
        level_names: Sequence[str] | None = None,
    ) -> Taxonomy:
        """Construct taxonomy from per-level collections of index sets.

        Parameters
        ----------
        p : `int`
            Number of covariates.
        levels : `~collections.abc.Sequence`
            For each level, a sequence of 0-based index collections.
        names : `~collections.abc.Sequence`, optional
            Display names parallel to ``levels``.
        level_names : `~collections.abc.Sequence` [ `str` ], optional
            Names of the levels; the last defaults to "unit".

        Returns
        -------
        taxonomy : `Taxonomy`
            New taxonomy. Taxa in every level are ordered by their smallest
            index, which makes the identifiers canonical. The result is not
            validated, `validate` reports any broken invariants.
        """
        if names is not None and len(names) != len(levels):
            raise ValueError("names must have one entry per level")
        if level_names is None:
            level_names = [f"level{t + 1}" for t in range(len(levels) - 1)] + ["unit"]
        if len(level_names) != len(levels):
            raise ValueError("level_names must have one entry per level")

        built: list[tuple[Taxon, ...]] = []
        for t, level in enumerate(levels):
            level_sets = [frozenset(int(i) for i in indices) for indices in level]
            level_labels: Sequence[str | None] = names[t] if names is not None else [None] * len(level_sets)
            if len(level_labels) != len(level_sets):
                raise ValueError(f"names for level {t + 1} do not match its taxa")
            pairs = sorted(
                zip(level_sets, level_labels, strict=True),
                key=lambda pair: min(pair[0]) if pair[0] else p + 1,
            )
            built.append(
                tuple(
                    Taxon(level=t, order=k, indices=indices, name=name)
                    for k, (indices, name) in enumerate(pairs)
                )
            )
        return cls(p=p, levels=tuple(built), level_names=tuple(level_names))

    @property
    def T(self) -> int:
        """Number of grouping levels (`int`)."""
        return len(self.levels) - 1

    @property
    def grouping_levels(self) -> tuple[tuple[Taxon, ...], ...]:
        """Levels above the singleton level."""
        return self.levels[:-1]

    def level_index(self, name: str) -> int | None:
        """Return index of the level with a given name, case-insensitive,
        or `None`.
        """
        for t, level_name in enumerate(self.level_names):
            if level_name.lower() == name.lower():
                return t
        return None

    def truncate(self, n_levels: int) -> Taxonomy:
        """Keep the first ``n_levels`` grouping levels and the singleton
        level.

        Parameters
        ----------
        n_levels : `int`
            Number of grouping levels to keep, between 1 and ``T``.

        Returns
        -------
        taxonomy : `Taxonomy`
            Truncated taxonomy.
        """
        if not 1 <= n_levels <= self.T:
            raise ValueError(f"Cannot keep {n_levels} grouping levels of a taxonomy with T={self.T}")
        kept = list(self.levels[:n_levels]) + [self.levels[-1]]
        return Taxonomy.from_levels(
            self.p,
            [[taxon.indices for taxon in level] for level in kept],
            names=[[taxon.name for taxon in level] for level in kept],
            level_names=list(self.level_names[:n_levels]) + [self.level_names[-1]],
        )

    @cached_property
    def violations(self) -> tuple[Violation, ...]:
        """Broken invariants of this taxonomy, empty for a valid one."""
        return tuple(_find_violations(self))

    def require_valid(self) -> None:
        """Raise if the taxonomy breaks any invariant.

        Raises
        ------
        TaxonomyFormatError
            Raised with a description of all violations.
        """
        if self.violations:
            raise TaxonomyFormatError(
                "Invalid taxonomy: " + "; ".join(str(violation) for violation in self.violations)
            )

    @cached_property
    def _memberships(self) -> tuple[np.ndarray, ...]:
        self.require_valid()
        arrays = []
        for level in self.levels:
            membership = np.empty(self.p, dtype=np.intp)
            for taxon in level:
                membership[sorted(taxon.indices)] = taxon.order
            membership.setflags(write=False)
            arrays.append(membership)
        return tuple(arrays)

    def membership(self, level: int) -> np.ndarray:
        """Return taxon order of every covariate at a given level.

        Parameters
        ----------
        level : `int`
            Level index.

        Returns
        -------
        membership : `numpy.ndarray`
            Read-only integer array of length ``p``.
        """
        return self._memberships[level]

    def level_sizes(self) -> tuple[int, ...]:
        """Number of taxa in each grouping level."""
        return tuple(len(level) for level in self.grouping_levels)

    @cached_property
    def _lineage_codes(self) -> tuple[np.ndarray, np.ndarray]:
        keys = np.stack([self.membership(t) for t in range(self.T)], axis=1)
        codes, inverse = np.unique(keys, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        inverse.setflags(write=False)
        return codes, inverse

    @property
    def lineage_index(self) -> np.ndarray:
        """Position of every covariate's lineage in `lineages` order."""
        return self._lineage_codes[1]

    @property
    def n_lineages(self) -> int:
        """Number of lineages (`int`)."""
        return len(self._lineage_codes[0])


def _find_violations(taxonomy: Taxonomy) -> list[Violation]:
    """Check all invariants, see `validate`."""
    violations: list[Violation] = []
    p = taxonomy.p
    if p < 1:
        violations.append(Violation("no covariates", 0, None))
    if taxonomy.T < 1:
        violations.append(Violation("too few levels", 0, None))
    if len(taxonomy.level_names) != len(taxonomy.levels):
        violations.append(Violation("level names mismatch", 0, None))

    for t, level in enumerate(taxonomy.levels):
        seen: set[int] = set()
        for taxon in level:
            if not taxon.indices:
                violations.append(Violation("empty taxon", t, taxon.id))
                continue
            out_of_range = sorted(i for i in taxon.indices if not 0 <= i < p)
            if out_of_range:
                violations.append(Violation("out of range", t, taxon.id, tuple(out_of_range)))
            shared = sorted(taxon.indices & seen)
            if shared:
                violations.append(Violation("overlap", t, taxon.id, tuple(shared)))
            seen |= taxon.indices
        missing = sorted(set(range(p)) - seen)
        if missing:
            violations.append(Violation("incomplete partition", t, None, tuple(missing)))

    if taxonomy.levels:
        last = len(taxonomy.levels) - 1
        for taxon in taxonomy.levels[-1]:
            if len(taxon.indices) > 1:
                violations.append(
                    Violation("non-singleton taxon", last, taxon.id, tuple(sorted(taxon.indices)))
                )
    return violations


def validate(taxonomy: Taxonomy) -> list[Violation]:
    """Check taxonomy invariants.

    Parameters
    ----------
    taxonomy : `Taxonomy`
        Taxonomy to check.

    Returns
    -------
    violations : `list` [ `Violation` ]
        Empty list if every level partitions the covariates, the final
        level consists of singletons and there is at least one grouping
        level.
    """
    return list(taxonomy.violations)


def lineages(taxonomy: Taxonomy) -> list[Lineage]:
    """Enumerate lineages of a valid taxonomy.

    No nesting between levels is assumed, lineages are the nonempty
    intersections of one taxon per grouping level, ordered
    lexicographically by taxon identifiers.

    Parameters
    ----------
    taxonomy : `Taxonomy`
        Valid taxonomy.

    Returns
    -------
    lineages : `list` [ `Lineage` ]
        Lineages, their index sets partition the covariates.
    """
    codes, inverse = taxonomy._lineage_codes
    members: list[list[int]] = [[] for _ in range(len(codes))]
    for j, code in enumerate(inverse.tolist()):
        members[code].append(j)
    return [
        Lineage(taxa=tuple((t, int(order)) for t, order in enumerate(code)), indices=tuple(indices))
        for code, indices in zip(codes, members, strict=True)
    ]


@dataclasses.dataclass(frozen=True)
class TaxonomyRow:
    """One row of a taxonomy table."""

    index: int
    """Covariate index, 1-based."""

    labels: tuple[str, ...]
    """Taxon label for every named level."""

    unit: str
    """Terminal unit label, e.g. OTU identifier."""


@dataclasses.dataclass(frozen=True)
class TaxonomyTable:
    """Tabular form of a taxonomy, one row per covariate."""

    level_names: tuple[str, ...]
    """Names of the label columns."""

    unit_name: str
    """Name of the terminal unit column."""

    rows: tuple[TaxonomyRow, ...]
    """Table rows in any order."""


def parse_taxonomy(table: TaxonomyTable) -> Taxonomy:
    """Build a taxonomy from its table form.

    Each label column becomes a grouping level whose taxa are the distinct
    labels of that column; the terminal unit column becomes the singleton
    level. An "unclassified" label is scoped to its parent column value, so
    two "unclassified" entries under different parents are distinct taxa.

    Parameters
    ----------
    table : `TaxonomyTable`
        Parsed table.

    Returns
    -------
    taxonomy : `Taxonomy`
        Valid taxonomy.

    Raises
    ------
    TaxonomyFormatError
        Raised for an empty table, a row with a wrong number of labels, a
        missing label, duplicate covariate indices or indices that are not
        exactly ``1..p``.
    """
    if not table.rows:
        raise TaxonomyFormatError("Taxonomy table is empty")
    n_columns = len(table.level_names)
    if n_columns < 1:
        raise TaxonomyFormatError("Taxonomy table needs at least one level column")

    seen: set[int] = set()
    for row in table.rows:
        if len(row.labels) != n_columns:
            raise TaxonomyFormatError(
                f"Column count mismatch for covariate {row.index}: "
                f"expected {n_columns} labels, found {len(row.labels)}"
            )
        if row.index in seen:
            raise TaxonomyFormatError(f"Duplicate covariate index {row.index}")
        seen.add(row.index)
        if any(not label.strip() for label in row.labels) or not row.unit.strip():
            raise TaxonomyFormatError(f"Missing label for covariate {row.index}")
    p = len(table.rows)
    if seen != set(range(1, p + 1)):
        raise TaxonomyFormatError(f"Covariate indices must be exactly 1..{p}")

    rows = sorted(table.rows, key=lambda row: row.index)
    levels: list[list[list[int]]] = []
    names: list[list[str | None]] = []
    parent_keys: list[Hashable] = [None] * p
    for c in range(n_columns):
        groups: dict[Hashable, int] = {}
        level: list[list[int]] = []
        level_labels: list[str | None] = []
        keys: list[Hashable] = []
        for j, row in enumerate(rows):
            label = row.labels[c].strip()
            key: Hashable = label
            if label.lower() in UNCLASSIFIED_LABELS:
                key = (parent_keys[j], label)
            keys.append(key)
            k = groups.get(key)
            if k is None:
                groups[key] = k = len(level)
                level.append([])
                level_labels.append(label)
            level[k].append(j)
        levels.append(level)
        names.append(level_labels)
        parent_keys = keys
    levels.append([[j] for j in range(p)])
    names.append([row.unit.strip() for row in rows])

    taxonomy = Taxonomy.from_levels(
        p, levels, names=names, level_names=[*table.level_names, table.unit_name]
    )
    taxonomy.require_valid()
    _LOG.debug("Parsed taxonomy with p=%d and %d grouping levels", p, taxonomy.T)
    return taxonomy


def singleton_taxonomy(p: int, T: int) -> Taxonomy:
    """Make a taxonomy in which every taxon is a singleton.

    Parameters
    ----------
    p : `int`
        Number of covariates, at least 1.
    T : `int`
        Number of grouping levels, at least 1.

    Returns
    -------
    taxonomy : `Taxonomy`
        Taxonomy with ``T + 1`` identical singleton levels.
    """
    if p < 1 or T < 1:
        raise ValueError(f"Need p >= 1 and T >= 1, got p={p}, T={T}")
    level = [[j] for j in range(p)]
    return Taxonomy.from_levels(p, [level] * (T + 1))


def augment_with_singleton_level(taxonomy: Taxonomy) -> Taxonomy:
    """Add a grouping level identical to the singleton level.

    Parameters
    ----------
    taxonomy : `Taxonomy`
        Valid taxonomy.

    Returns
    -------
    taxonomy : `Taxonomy`
        Taxonomy with ``T + 1`` grouping levels, the new one placed right
        above the singleton level.
    """
    taxonomy.require_valid()
    levels = list(taxonomy.levels) + [taxonomy.levels[-1]]
    level_names = list(taxonomy.level_names)
    level_names.insert(-1, f"{level_names[-1]}-group")
    return Taxonomy.from_levels(
        taxonomy.p,
        [[taxon.indices for taxon in level] for level in levels],
        names=[[taxon.name for taxon in level] for level in levels],
        level_names=level_names,
    )


def balanced_taxonomy(branching: int, depth: int) -> Taxonomy:
    """Make a nested taxonomy where every taxon splits into the same number
    of children.

    Parameters
    ----------
    branching : `int`
        Number of children per taxon, at least 2.
    depth : `int`
        Number of grouping levels, at least 1.

    Returns
    -------
    taxonomy : `Taxonomy`
        Taxonomy over ``branching**depth`` covariates; grouping level ``k``
        has ``branching**k`` taxa of ``branching**(depth - k)`` covariates.

    Raises
    ------
    OverflowError
        Raised if the number of covariates exceeds `MAX_COVARIATES`.
    """
    if branching < 2 or depth < 1:
        raise ValueError(f"Need branching >= 2 and depth >= 1, got {branching} and {depth}")
    if depth * np.log2(branching) > np.log2(MAX_COVARIATES):
        raise OverflowError(f"Taxonomy with branching={branching} and depth={depth} is too large")
    p = branching**depth
    if depth <= len(DEFAULT_LEVEL_NAMES):
        level_names = list(DEFAULT_LEVEL_NAMES[:depth])
    else:
        level_names = [f"level{k + 1}" for k in range(depth)]

    levels: list[list[range]] = []
    names: list[list[str | None]] = []
    for k in range(depth):
        size = branching ** (depth - k)
        levels.append([range(i * size, (i + 1) * size) for i in range(branching**k)])
        names.append([f"{level_names[k]}_{i + 1}" for i in range(branching**k)])
    levels.append([range(j, j + 1) for j in range(p)])
    names.append([f"otu_{j + 1}" for j in range(p)])
    return Taxonomy.from_levels(p, levels, names=names, level_names=level_names + ["otu"])

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

from lsst.philasso.taxonomy import (
    Taxonomy,
    TaxonomyFormatError,
    TaxonomyRow,
    TaxonomyTable,
    augment_with_singleton_level,
    balanced_taxonomy,
    lineages,
    parse_taxonomy,
    singleton_taxonomy,
    validate,
)

_FAMILIES = (
    ["Bifidobacteriaceae"] * 2
    + ["Enterococcaceae"] * 3
    + ["Lactobacillaceae"] * 3
    + ["Clostridiaceae 1"] * 2
    + ["Lachnospiraceae"] * 3
)


def example_table() -> TaxonomyTable:
    """Return thirteen-OTU example table with four label columns."""
    rows = []
    for index in range(1, 14):
        if index <= 2:
            labels = ("Actinobacteria", "Actinobacteria", "Bifidobacteriales")
        elif index <= 8:
            labels = ("Firmicutes", "Bacilli", "Lactobacillales")
        else:
            labels = ("Firmicutes", "Clostridia", "Clostridiales")
        rows.append(TaxonomyRow(index, labels + (_FAMILIES[index - 1],), f"OTU_{index}"))
    return TaxonomyTable(("Phylum", "Class", "Order", "Family"), "OTU", tuple(rows))


class TaxonomyTestCase(unittest.TestCase):
    """Tests for taxonomy module."""

    def setUp(self) -> None:
        self.taxonomy = parse_taxonomy(example_table())

    def test_parse(self) -> None:
        """Test parsing of the example table."""
        taxonomy = self.taxonomy
        self.assertEqual(taxonomy.p, 13)
        self.assertEqual(taxonomy.T, 4)
        self.assertEqual(taxonomy.level_sizes(), (2, 3, 3, 5))
        family = taxonomy.level_index("family")
        self.assertEqual(family, 3)
        by_name = {taxon.label: taxon for taxon in taxonomy.levels[family]}
        # 0-based indices of covariates 3, 4, 5.
        self.assertEqual(by_name["Enterococcaceae"].indices, frozenset({2, 3, 4}))
        bacilli = [taxon for taxon in taxonomy.levels[1] if taxon.label == "Bacilli"][0]
        self.assertEqual(bacilli.indices, frozenset(range(2, 8)))
        self.assertEqual(validate(taxonomy), [])
        self.assertEqual(taxonomy.levels[-1][0].label, "OTU_1")
        self.assertEqual(taxonomy.level_names, ("Phylum", "Class", "Order", "Family", "OTU"))

    def test_parse_order_independent(self) -> None:
        """Test that row order does not change taxon identifiers."""
        table = example_table()
        shuffled = TaxonomyTable(table.level_names, table.unit_name, tuple(reversed(table.rows)))
        other = parse_taxonomy(shuffled)
        for level, other_level in zip(self.taxonomy.levels, other.levels, strict=True):
            self.assertEqual(
                [(taxon.id, taxon.indices, taxon.name) for taxon in level],
                [(taxon.id, taxon.indices, taxon.name) for taxon in other_level],
            )

    def test_parse_single(self) -> None:
        """Test degenerate one-covariate table."""
        taxonomy = parse_taxonomy(TaxonomyTable(("level",), "unit", (TaxonomyRow(1, ("A",), "u1"),)))
        self.assertEqual(taxonomy.T, 1)
        self.assertEqual(taxonomy.levels[0][0].indices, frozenset({0}))
        self.assertEqual(taxonomy.levels[1][0].indices, frozenset({0}))

    def test_parse_errors(self) -> None:
        """Test malformed tables."""
        with self.assertRaisesRegex(TaxonomyFormatError, "empty"):
            parse_taxonomy(TaxonomyTable(("a",), "unit", ()))
        rows = (TaxonomyRow(1, ("A",), "u1"), TaxonomyRow(1, ("A",), "u2"))
        with self.assertRaisesRegex(TaxonomyFormatError, "Duplicate covariate index 1"):
            parse_taxonomy(TaxonomyTable(("a",), "unit", rows))
        rows = (TaxonomyRow(1, ("A",), "u1"), TaxonomyRow(2, ("A", "B"), "u2"))
        with self.assertRaisesRegex(TaxonomyFormatError, "Column count mismatch"):
            parse_taxonomy(TaxonomyTable(("a",), "unit", rows))
        rows = (TaxonomyRow(1, ("A",), "u1"), TaxonomyRow(2, ("",), "u2"))
        with self.assertRaisesRegex(TaxonomyFormatError, "Missing label"):
            parse_taxonomy(TaxonomyTable(("a",), "unit", rows))
        rows = (TaxonomyRow(1, ("A",), "u1"), TaxonomyRow(3, ("A",), "u2"))
        with self.assertRaisesRegex(TaxonomyFormatError, "exactly 1..2"):
            parse_taxonomy(TaxonomyTable(("a",), "unit", rows))

    def test_unclassified(self) -> None:
        """Test that "unclassified" labels are scoped to their parent."""
        rows = (
            TaxonomyRow(1, ("F1", "unclassified"), "u1"),
            TaxonomyRow(2, ("F1", "unclassified"), "u2"),
            TaxonomyRow(3, ("F2", "unclassified"), "u3"),
            TaxonomyRow(4, ("F2", "G"), "u4"),
        )
        taxonomy = parse_taxonomy(TaxonomyTable(("family", "genus"), "otu", rows))
        self.assertEqual(
            [taxon.indices for taxon in taxonomy.levels[1]],
            [frozenset({0, 1}), frozenset({2}), frozenset({3})],
        )

    def test_lineages(self) -> None:
        """Test lineage enumeration."""
        found = lineages(self.taxonomy)
        self.assertEqual(len(found), 5)
        self.assertEqual(self.taxonomy.n_lineages, 5)
        self.assertIn((2, 3, 4), [lineage.indices for lineage in found])
        covered = sorted(j for lineage in found for j in lineage.indices)
        self.assertEqual(covered, list(range(13)))

        # Family column alone gives the same five lineages.
        table = example_table()
        family_only = TaxonomyTable(
            ("Family",),
            "OTU",
            tuple(TaxonomyRow(row.index, row.labels[-1:], row.unit) for row in table.rows),
        )
        self.assertEqual(len(lineages(parse_taxonomy(family_only))), 5)

        self.assertEqual(len(lineages(singleton_taxonomy(3, 1))), 3)

        crossed = Taxonomy.from_levels(4, [[[0, 1], [2, 3]], [[0, 2], [1, 3]], [[0], [1], [2], [3]]])
        self.assertEqual(validate(crossed), [])
        found = lineages(crossed)
        self.assertEqual([lineage.indices for lineage in found], [(0,), (1,), (2,), (3,)])
        self.assertEqual(found[1].taxa, ((1, 0), (2, 1)))

    def test_validate(self) -> None:
        """Test violations of constructed invalid taxonomies."""
        singletons = [[j] for j in range(8)]
        missing = Taxonomy.from_levels(8, [[[0, 1, 2, 3], [4, 5, 7]], singletons])
        violations = validate(missing)
        self.assertEqual(len(violations), 1)
        self.assertEqual(violations[0].kind, "incomplete partition")
        self.assertEqual(violations[0].indices, (6,))
        self.assertIn("indices 7", str(violations[0]))

        overlap = Taxonomy.from_levels(8, [[[0, 1, 2], [2, 3, 4, 5, 6, 7]], singletons])
        violations = validate(overlap)
        self.assertEqual([violation.kind for violation in violations], ["overlap"])
        self.assertEqual(violations[0].indices, (2,))

        not_singletons = Taxonomy.from_levels(2, [[[0, 1]], [[0, 1]]])
        kinds = [violation.kind for violation in validate(not_singletons)]
        self.assertEqual(kinds, ["non-singleton taxon"])
        with self.assertRaisesRegex(TaxonomyFormatError, "non-singleton taxon"):
            not_singletons.require_valid()

        flat = Taxonomy.from_levels(2, [singletons[:2]])
        self.assertEqual([violation.kind for violation in validate(flat)], ["too few levels"])

    def test_validate_mutations(self) -> None:
        """Test that removing or duplicating any index is reported."""
        base = [[sorted(taxon.indices) for taxon in level] for level in self.taxonomy.levels]
        for t in range(len(base)):
            for k in range(len(base[t])):
                removed = [[list(taxon) for taxon in level] for level in base]
                removed[t][k] = removed[t][k][1:]
                if not removed[t][k]:
                    del removed[t][k]
                self.assertTrue(validate(Taxonomy.from_levels(13, removed)))
                duplicated = [[list(taxon) for taxon in level] for level in base]
                other = (k + 1) % len(base[t])
                if other != k:
                    duplicated[t][other] = duplicated[t][other] + [base[t][k][0]]
                    self.assertTrue(validate(Taxonomy.from_levels(13, duplicated)))

    def test_singleton(self) -> None:
        """Test singleton taxonomies."""
        taxonomy = singleton_taxonomy(2, 1)
        self.assertEqual(len(taxonomy.levels), 2)
        for level in taxonomy.levels:
            self.assertEqual([taxon.indices for taxon in level], [frozenset({0}), frozenset({1})])
        self.assertEqual(singleton_taxonomy(4, 3).T, 3)
        self.assertEqual(len(singleton_taxonomy(1, 2).levels), 3)
        with self.assertRaises(ValueError):
            singleton_taxonomy(0, 1)

    def test_augment(self) -> None:
        """Test adding a singleton grouping level."""
        augmented = augment_with_singleton_level(self.taxonomy)
        self.assertEqual(augmented.T, 5)
        self.assertEqual(
            [taxon.indices for taxon in augmented.levels[4]],
            [taxon.indices for taxon in augmented.levels[5]],
        )
        self.assertEqual(augmented.levels[:4], self.taxonomy.levels[:4])
        self.assertEqual(augmented.level_names[4], "OTU-group")
        self.assertEqual(augment_with_singleton_level(augmented).T, 6)

        singles = augment_with_singleton_level(singleton_taxonomy(3, 1))
        self.assertEqual(
            [[taxon.indices for taxon in level] for level in singles.levels],
            [[taxon.indices for taxon in level] for level in singleton_taxonomy(3, 2).levels],
        )

    def test_balanced(self) -> None:
        """Test balanced taxonomies."""
        taxonomy = balanced_taxonomy(4, 6)
        self.assertEqual(taxonomy.p, 4096)
        self.assertEqual(taxonomy.level_sizes(), (1, 4, 16, 64, 256, 1024))
        self.assertEqual(len(taxonomy.levels[-1]), 4096)
        self.assertEqual(taxonomy.n_lineages, 4**5)

        small = balanced_taxonomy(2, 1)
        self.assertEqual(small.p, 2)
        self.assertEqual(small.level_sizes(), (1,))
        self.assertEqual(balanced_taxonomy(4, 4).p, 256)
        with self.assertRaises(OverflowError):
            balanced_taxonomy(4, 13)

    def test_truncate(self) -> None:
        """Test dropping grouping levels."""
        taxonomy = balanced_taxonomy(4, 4)
        truncated = taxonomy.truncate(3)
        self.assertEqual(truncated.T, 3)
        self.assertEqual(truncated.level_sizes(), (1, 4, 16))
        self.assertEqual(truncated.level_names, ("phylum", "class", "order", "otu"))
        np.testing.assert_array_equal(truncated.membership(2), taxonomy.membership(2))
        with self.assertRaises(ValueError):
            taxonomy.truncate(0)


if __name__ == "__main__":
    unittest.main()

"""Branch-and-bound search for maximum line-free sets, with certificates."""

import pytest

import oracles as O
from dhjlab.cube_core import CubeSet, lines_in_set
from dhjlab.extremal import (
    ExtremalReport,
    double_up,
    line_triples,
    max_line_free,
    verify_certificate,
)


class TestLineTriples:
    def test_counts_match_line_formula(self):
        for n in (1, 2, 3):
            assert line_triples(n).shape == (sum(1 for _ in O.line_words(n)), 3)

    def test_triples_are_lines_of_the_cube(self):
        triples = line_triples(2)
        pts = O.all_points(2)
        idx = {p: i for i, p in enumerate(pts)}
        expected = set()
        for word in O.line_words(2):
            expected.add(tuple(sorted(idx[p] for p in O.line_points(word))))
        assert {tuple(r) for r in triples} == expected


class TestMaxLineFree:
    def test_known_optima(self):
        assert max_line_free(1).size == 2
        assert max_line_free(2).size == 6
        assert max_line_free(3).size == 18

    def test_matches_exhaustive_oracle(self):
        for n in (1, 2):
            assert max_line_free(n).size == O.max_line_free_exhaustive(n)

    def test_witness_is_line_free_and_proven(self):
        rep = max_line_free(3)
        assert rep.proven
        assert rep.witness.count() == rep.size
        assert lines_in_set(rep.witness, witness_limit=1)[0] == 0

    def test_seed_relabeling_stability(self):
        sizes = {max_line_free(2, seed=s).size for s in (0, 1, 2, 3)}
        assert sizes == {6}

    def test_budget_exhaustion_flagged(self):
        rep = max_line_free(3, node_budget=5)
        assert not rep.proven
        assert rep.nodes <= rep.node_budget + 1
        # even unproven output must be a genuine line-free set
        assert verify_certificate(rep.witness, rep.size)

    def test_validation(self):
        with pytest.raises(ValueError):
            max_line_free(0)

    def test_report_json(self):
        rep = max_line_free(2)
        obj = rep.to_json()
        assert obj["size"] == 6 and obj["proven"] is True
        assert obj["n"] == 2


class TestVerifyCertificate:
    def test_accepts_true_certificate(self):
        rep = max_line_free(2)
        assert verify_certificate(rep.witness, 6)

    def test_rejects_wrong_size(self):
        rep = max_line_free(2)
        assert not verify_certificate(rep.witness, 7)

    def test_rejects_set_with_line(self):
        assert not verify_certificate(CubeSet.full(2), 9)

    def test_empty_set(self):
        assert verify_certificate(CubeSet.empty(2), 0)
        assert not verify_certificate(CubeSet.empty(2), 1)


class TestDoubleUp:
    def test_doubles_size_and_stays_line_free(self):
        s = max_line_free(2).witness
        up = double_up(s)
        assert up.n == 3 and up.count() == 2 * s.count()
        assert lines_in_set(up, witness_limit=1)[0] == 0

    def test_lower_bounds_next_dimension(self):
        for n in (1, 2):
            doubled = double_up(max_line_free(n).witness)
            assert max_line_free(n + 1).size >= doubled.count()

    def test_side_validation(self):
        with pytest.raises(ValueError):
            double_up(CubeSet.full(2, "zero-one"))

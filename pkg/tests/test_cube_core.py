"""Points, sets, projections, lines, and disjoint products."""

import json
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles as O
from dhjlab._rng import make_rng
from dhjlab.cube_core import (SIDE_ALPHABET, SIDE_FULL, SIDE_ZERO_ONE,
                              SIDE_ZERO_TWO, CubeSet, LineTemplate,
                              disjoint_product, enumerate_lines,
                              first_line_in_set, line_count, lines_in_set,
                              measure, pi1, pi2, point_from_index, point_index,
                              project_set, uniform_weights)


def _random_set(n, density, seed, side=SIDE_FULL):
    rng = make_rng(seed, "test-set")
    card = len(SIDE_ALPHABET[side])
    return CubeSet.from_bits(n, side,
                             (rng.random(card ** n) < density).astype(np.uint8))


class TestPointIndex:
    def test_zero_word(self):
        assert point_index([0, 0]) == 0

    def test_positional(self):
        assert point_index([0, 1, 2]) == 5

    def test_rejects_bad_digit(self):
        with pytest.raises(ValueError):
            point_index([0, 3, 1])

    def test_roundtrip_n4(self):
        for idx in range(3 ** 4):
            digits = point_from_index(idx, 4)
            assert point_index(digits) == idx

    @given(st.lists(st.integers(0, 2), min_size=1, max_size=6))
    def test_roundtrip_random(self, digits):
        assert point_from_index(point_index(digits), len(digits)) == tuple(digits)


class TestProjections:
    def test_pi1(self):
        assert pi1((0, 1, 2)) == (0, 1, 0)

    def test_pi2(self):
        assert pi2((0, 1, 2)) == (0, 0, 2)

    def test_fixed_point(self):
        assert pi1((0, 0, 0)) == (0, 0, 0)

    @given(st.lists(st.integers(0, 2), min_size=1, max_size=8))
    def test_matches_symbol_maps(self, digits):
        assert pi1(digits) == tuple(O.P1[d] for d in digits)
        assert pi2(digits) == tuple(O.P2[d] for d in digits)


class TestLines:
    def test_single_coordinate(self):
        templates = list(enumerate_lines(1))
        assert len(templates) == 1
        assert templates[0].points() == ((0,), (1,), (2,))

    def test_counts(self):
        assert len(list(enumerate_lines(2))) == 7
        assert len(list(enumerate_lines(4))) == 175

    def test_count_formula(self):
        for n in range(1, 9):
            assert line_count(n) == 4 ** n - 3 ** n
        for n in range(1, 7):
            assert len(list(enumerate_lines(n))) == line_count(n)

    def test_templates_unique_and_consistent(self):
        for n in (1, 2, 3):
            seen = set()
            for t in enumerate_lines(n):
                assert t.word not in seen
                seen.add(t.word)
                pts = t.points()
                assert len(set(pts)) == 3
                for i, d in enumerate(t.word):
                    if d != 3:
                        assert pts[0][i] == pts[1][i] == pts[2][i] == d
                    else:
                        assert tuple(p[i] for p in pts) == (0, 1, 2)
            assert seen == set(O.line_words(n))

    def test_lines_in_full_cubes(self):
        assert lines_in_set(CubeSet.full(1))[0] == 1
        assert lines_in_set(CubeSet.full(2))[0] == 7

    def test_line_needs_all_three(self):
        s = CubeSet.from_points(1, [(0,), (1,)])
        count, wits = lines_in_set(s)
        assert count == 0 and wits == []
        assert first_line_in_set(s) is None

    def test_against_brute_oracle(self):
        for seed in range(20):
            s = _random_set(3, 0.7, seed)
            expected = O.count_lines(lambda p: s.bits[s.index_of(p)] == 1, 3)
            assert lines_in_set(s, witness_limit=0)[0] == expected

    def test_template_strings(self):
        t = LineTemplate.from_string("0*2")
        assert str(t) == "0*2"
        assert t.points() == ((0, 0, 2), (0, 1, 2), (0, 2, 2))


class TestDisjointProduct:
    def test_excludes_only_two(self):
        e1 = CubeSet.from_points(1, [(0,), (1,)], side=SIDE_ZERO_ONE)
        e2 = CubeSet.from_points(1, [(0,)], side=SIDE_ZERO_TWO)
        box = disjoint_product(e1, e2)
        assert sorted(box.iter_points()) == [(0,), (1,)]

    def test_full_sides_give_full_cube(self):
        for n in (1, 2, 3):
            box = disjoint_product(CubeSet.full(n, SIDE_ZERO_ONE),
                                   CubeSet.full(n, SIDE_ZERO_TWO))
            assert box.count() == 3 ** n

    def test_dictator_pair_singleton(self):
        e1 = CubeSet.from_points(2, [(1, 0), (1, 1)], side=SIDE_ZERO_ONE)
        e2 = CubeSet.from_points(2, [(0, 2), (2, 2)], side=SIDE_ZERO_TWO)
        box = disjoint_product(e1, e2)
        assert list(box.iter_points()) == [(1, 2)]
        assert measure(box, uniform_weights(SIDE_FULL)) == F(1, 9)

    def test_mismatched_n_rejected(self):
        with pytest.raises(ValueError):
            disjoint_product(CubeSet.full(2, SIDE_ZERO_ONE),
                             CubeSet.full(3, SIDE_ZERO_TWO))

    def test_membership_equivalence(self):
        for seed in range(15):
            e1 = _random_set(3, 0.5, seed, SIDE_ZERO_ONE)
            e2 = _random_set(3, 0.5, seed + 100, SIDE_ZERO_TWO)
            box = disjoint_product(e1, e2)
            expected = O.disjoint_product_points(
                3, set(e1.iter_points()), set(e2.iter_points()))
            assert sorted(box.iter_points()) == sorted(expected)

    def test_projection_pullback_consistency(self):
        s = _random_set(3, 0.6, 7)
        p1 = project_set(s, 1)
        assert p1.side == SIDE_ZERO_ONE
        assert set(p1.iter_points()) == {pi1(p) for p in s.iter_points()}
        p2 = project_set(s, 2)
        assert p2.side == SIDE_ZERO_TWO
        assert set(p2.iter_points()) == {pi2(p) for p in s.iter_points()}


class TestMeasure:
    def test_normalization(self):
        for n in (1, 3):
            assert measure(CubeSet.full(n), uniform_weights(SIDE_FULL)) == 1

    def test_two_of_three(self):
        s = CubeSet.from_points(1, [(0,), (1,)])
        assert measure(s, uniform_weights(SIDE_FULL)) == F(2, 3)

    def test_matches_oracle(self):
        w = {0: F(1, 2), 1: F(1, 3), 2: F(1, 6)}
        for seed in range(10):
            s = _random_set(3, 0.5, seed)
            assert measure(s, w) == O.measure_of(s.iter_points(), w)

    def test_additive_over_disjoint(self):
        for seed in range(10):
            a = _random_set(4, 0.4, seed)
            b = _random_set(4, 0.4, seed + 50).difference(a)
            w = uniform_weights(SIDE_FULL)
            assert measure(a.union(b), w) == measure(a, w) + measure(b, w)

    def test_multiplicative_on_cylinders(self):
        allowed = [(0, 1), (2,), (0, 1, 2), (1, 2)]
        pts = [p for p in O.all_points(4)
               if all(p[i] in allowed[i] for i in range(4))]
        s = CubeSet.from_points(4, pts)
        expected = 1
        for a in allowed:
            expected *= F(len(a), 3)
        assert measure(s, uniform_weights(SIDE_FULL)) == expected

    def test_per_coordinate_weight_lists(self):
        dists = [{0: F(1, 2), 1: F(1, 2), 2: F(0)},
                 {0: F(1, 4), 1: F(1, 4), 2: F(1, 2)}]
        s = CubeSet.from_points(2, [(0, 2), (1, 0)])
        assert measure(s, dists) == F(1, 2) * F(1, 2) + F(1, 2) * F(1, 4)


class TestSerialization:
    @pytest.mark.parametrize("side", [SIDE_FULL, SIDE_ZERO_ONE, SIDE_ZERO_TWO])
    def test_json_roundtrip_bit_exact(self, side):
        s = _random_set(4, 0.5, 11, side)
        blob = json.dumps(s.to_json())
        t = CubeSet.from_json(json.loads(blob))
        assert t.n == s.n and t.side == s.side
        assert np.array_equal(t.bits, s.bits)
        assert t.content_key() == s.content_key()

    def test_points_are_strings_msb_first(self):
        s = CubeSet.from_points(2, [(0, 1), (2, 0)])
        assert sorted(s.to_json()["points"]) == ["01", "20"]

    def test_set_algebra(self):
        a = _random_set(3, 0.5, 1)
        b = _random_set(3, 0.5, 2)
        assert a.union(b).count() + a.intersection(b).count() \
            == a.count() + b.count()
        assert a.difference(b).intersection(b).count() == 0
        assert a.complement().count() == 27 - a.count()
        assert a.intersection(b).is_subset_of(a)

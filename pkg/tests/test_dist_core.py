"""Exact joint distributions, the duplication tower, and the decay chain."""

import json
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles as O
from dhjlab.dist_core import (CANONICAL_DHJ_WEIGHTS, ChainParams, JointDist,
                              chain_marginal, chain_pair, dhj_distribution,
                              enumerate_Q, lift_pair_to_line,
                              line_fourth_power_law, line_square_law,
                              recorded_pair_square_law, recorded_square_law)
from dhjlab.errors import EmptyConditionError

BASE = dhj_distribution(*CANONICAL_DHJ_WEIGHTS)
UNIFORM_BASE = dhj_distribution(F(1, 4), F(1, 4), F(1, 4), F(1, 4))


def _weights4():
    return st.tuples(st.integers(1, 8), st.integers(1, 8),
                     st.integers(1, 8), st.integers(1, 8)).map(
        lambda t: tuple(F(x, sum(t)) for x in t))


class TestConstruction:
    def test_canonical_weights(self):
        assert BASE.as_dict() == {(0, 0, 0): F(1, 6), (1, 1, 1): F(1, 3),
                                  (2, 2, 2): F(1, 3), (0, 1, 2): F(1, 6)}

    def test_uniform_weights(self):
        assert all(q == F(1, 4) for _, q in UNIFORM_BASE.rows)

    def test_zero_weight_rejected(self):
        with pytest.raises(ValueError):
            dhj_distribution(F(1, 3), F(1, 3), F(1, 3), F(0))

    def test_unnormalized_rejected(self):
        with pytest.raises(ValueError):
            dhj_distribution(F(1, 2), F(1, 2), F(1, 2), F(1, 2))

    def test_duplicate_rows_rejected(self):
        with pytest.raises(ValueError):
            JointDist.from_rows([(0, 1)], [((0,), F(1, 2)), ((0,), F(1, 2))])

    def test_alphabet_violation_rejected(self):
        with pytest.raises(ValueError):
            JointDist.from_rows([(0, 1)], {(2,): F(1)})

    def test_sum_must_be_exactly_one(self):
        with pytest.raises(ValueError):
            JointDist.from_rows([(0, 1)], {(0,): F(1, 3), (1,): F(1, 3)})


class TestMarginalCondition:
    def test_first_coordinate_uniform(self):
        m = BASE.marginal(["x"]).as_dict()
        assert m == {(0,): F(1, 3), (1,): F(1, 3), (2,): F(1, 3)}

    def test_marginal_all_coords_identity(self):
        assert BASE.marginal([0, 1, 2]).as_dict() == BASE.as_dict()

    def test_fourth_power_end_marginals_agree(self):
        m2 = line_fourth_power_law()
        assert m2.marginal(["x"]).as_dict() == m2.marginal(["x'''"]).as_dict()

    def test_condition_on_last(self):
        c = BASE.condition(["z"], [2]).as_dict()
        assert c == {(2, 2): F(2, 3), (0, 1): F(1, 3)}

    def test_condition_point_mass(self):
        c = BASE.condition(["z"], [0]).as_dict()
        assert c == {(0, 0): F(1)}

    def test_empty_condition(self):
        with pytest.raises(EmptyConditionError):
            BASE.condition(["x", "y"], [1, 0])


class TestDuplicationTower:
    def test_square_support_and_masses(self):
        assert line_square_law().as_dict() == O.square_law(O.CANONICAL_BASE)

    def test_fourth_power_support_and_masses(self):
        assert line_fourth_power_law().as_dict() \
            == O.fourth_power_law(O.CANONICAL_BASE)

    def test_recorded_support_and_masses(self):
        assert recorded_square_law().as_dict() == O.recorded_law(O.CANONICAL_BASE)

    def test_row_counts(self):
        assert len(line_square_law().rows) == 6
        assert len(line_fourth_power_law().rows) == 8
        assert len(recorded_square_law().rows) == 10
        assert len(recorded_pair_square_law().rows) == 6

    def test_point_mass_duplicates_to_point_mass(self):
        pm = JointDist.from_rows([(0, 1), (0, 2)], {(1, 2): F(1)}, ["a", "b"])
        dup = pm.cs_duplicate(keep=["b"])
        assert dup.as_dict() == {(1, 1, 2): F(1)}

    @given(_weights4())
    @settings(max_examples=40, deadline=None)
    def test_duplicate_invariants(self, w):
        base = dhj_distribution(*w)
        m1 = base.cs_duplicate(keep=["z"])
        # kept-coordinate marginal unchanged
        assert m1.marginal(["z"]).as_dict() == base.marginal(["z"]).as_dict()
        # the two copies have identical joint laws with the kept block
        first = m1.marginal(["x", "y", "z"]).as_dict()
        second = {(t[0], t[1], t[2]): q
                  for t, q in m1.marginal(["x'", "y'", "z"]).rows}
        assert first == second == base.as_dict()

    def test_project_symbols_recording(self):
        mx = BASE.marginal(["x"]).as_dict()
        pair = JointDist.from_rows([(0, 1, 2), (0, 1, 2)],
                                   {(t[0], t[0]): q for t, q in mx.items()},
                                   ["x", "xc"])
        proj = pair.project_symbols([("x", "pi1"), ("xc", "pi2")])
        assert set(proj.support) == {(0, 0), (1, 0), (0, 2)}

    def test_project_symbols_identity(self):
        proj = BASE.project_symbols([(0, "id"), (1, "id"), (2, "id")])
        assert proj.as_dict() == BASE.as_dict()


class TestDecompose:
    def test_self_gives_beta_one(self):
        beta, residual = BASE.decompose(BASE)
        assert beta == 1 and residual is None

    def test_worked_example(self):
        comp = JointDist.from_rows(BASE.alphabets,
                                   {(0, 0, 0): F(1, 2), (0, 1, 2): F(1, 2)},
                                   BASE.names)
        beta, residual = BASE.decompose(comp)
        assert beta == F(1, 3)
        assert residual.as_dict() == {(1, 1, 1): F(1, 2), (2, 2, 2): F(1, 2)}

    def test_xblock_component_beta(self):
        m2 = line_fourth_power_law()
        xblock = m2.marginal(["x", "x'", "x''", "x'''"])
        comp = JointDist.from_rows(
            xblock.alphabets,
            {(0, 0, 0, 0): F(1, 3), (0, 2, 0, 2): F(1, 3),
             (0, 0, 1, 1): F(1, 3)},
            xblock.names)
        beta, residual = xblock.decompose(comp)
        assert beta == F(1, 7)
        assert residual.as_dict() == {
            (0, 0, 0, 0): F(4, 27), (0, 2, 0, 2): F(2, 27),
            (1, 1, 0, 0): F(1, 18), (1, 1, 1, 1): F(1, 3),
            (2, 0, 2, 0): F(7, 54), (2, 2, 2, 2): F(7, 27)}

    @given(_weights4())
    @settings(max_examples=40, deadline=None)
    def test_roundtrip_exact(self, w):
        d = dhj_distribution(*w)
        comp = JointDist.from_rows(d.alphabets,
                                   {(0, 0, 0): F(1, 2), (1, 1, 1): F(1, 2)},
                                   d.names)
        beta, residual = d.decompose(comp)
        assert 0 < beta <= 1
        recombined = {}
        for t, q in comp.rows:
            recombined[t] = recombined.get(t, F(0)) + beta * q
        if residual is not None:
            for t, q in residual.rows:
                recombined[t] = recombined.get(t, F(0)) + (1 - beta) * q
        assert recombined == d.as_dict()


class TestTvDistance:
    def test_identity(self):
        assert BASE.tv_distance(BASE) == 0

    def test_disjoint_point_masses(self):
        a = JointDist.from_rows([(0, 1)], {(0,): F(1)})
        b = JointDist.from_rows([(0, 1)], {(1,): F(1)})
        assert a.tv_distance(b) == 1

    def test_worked_example(self):
        u = JointDist.from_rows([(0, 1, 2)],
                                {(s,): F(1, 3) for s in (0, 1, 2)})
        v = JointDist.from_rows([(0, 1, 2)],
                                {(0,): F(1, 2), (1,): F(1, 4), (2,): F(1, 4)})
        assert u.tv_distance(v) == F(1, 6)

    @given(_weights4(), _weights4())
    @settings(max_examples=30, deadline=None)
    def test_metric_properties(self, w1, w2):
        a, b = dhj_distribution(*w1), dhj_distribution(*w2)
        assert a.tv_distance(b) == b.tv_distance(a)
        assert a.tv_distance(b) == O.tv(a.as_dict(), b.as_dict())
        assert 0 <= a.tv_distance(b) <= 1


class TestChain:
    CP = ChainParams.create(50, F(1, 10 ** 6), F(1, 100), 10 ** 4)

    def test_step_zero_uniform(self):
        m = {t[0]: q for t, q in chain_marginal(self.CP, 0).rows}
        assert m == {0: F(1, 3), 1: F(1, 3), 2: F(1, 3)}

    def test_one_step_mixed_mass(self):
        xi = chain_pair(self.CP, 0, 1).as_dict()
        assert xi[(1, 2)] == self.CP.p / 3

    def test_matches_markov_oracle(self):
        for i, j in [(0, 1), (2, 9), (0, 50), (17, 23)]:
            assert chain_pair(self.CP, i, j).as_dict() \
                == O.chain_pair_oracle(self.CP.p, i, j)
        for i in (0, 1, 13, 50):
            got = {t[0]: q for t, q in chain_marginal(self.CP, i).rows}
            assert got == O.chain_marginal_oracle(self.CP.p, i)

    def test_pair_marginals_are_step_laws(self):
        for i, j in [(0, 3), (5, 50)]:
            xi = chain_pair(self.CP, i, j)
            assert xi.marginal([0]).as_dict() \
                == chain_marginal(self.CP, i).as_dict()
            assert xi.marginal([1]).as_dict() \
                == chain_marginal(self.CP, j).as_dict()

    def test_bad_pair_rejected(self):
        with pytest.raises(ValueError):
            chain_pair(self.CP, 3, 3)

    def test_parameter_guard(self):
        with pytest.raises(ValueError):
            ChainParams.create(200, F(1, 10 ** 6) * 100, F(1, 100), 10 ** 4)


class TestLiftPairToLine:
    def test_uniform_relabel(self):
        xi = JointDist.from_rows([(0, 1, 2), (0, 1, 2)],
                                 {(0, 0): F(1, 4), (1, 1): F(1, 4),
                                  (2, 2): F(1, 4), (1, 2): F(1, 4)})
        lifted = lift_pair_to_line(xi)
        assert lifted.as_dict() == {(0, 0, 0): F(1, 4), (1, 1, 1): F(1, 4),
                                    (2, 2, 2): F(1, 4), (0, 1, 2): F(1, 4)}

    def test_chain_composition(self):
        cp = TestChain.CP
        lifted = lift_pair_to_line(chain_pair(cp, 0, 1))
        assert lifted.as_dict()[(0, 1, 2)] == cp.p / 3

    def test_section_property(self):
        cp = TestChain.CP
        xi = chain_pair(cp, 1, 4)
        lifted = lift_pair_to_line(xi)
        yz = {(t[1], t[2]): q for t, q in lifted.rows}
        assert yz == xi.as_dict()

    def test_off_support_rejected(self):
        bad = JointDist.from_rows([(0, 1, 2), (0, 1, 2)],
                                  {(2, 1): F(1)})
        with pytest.raises(ValueError):
            lift_pair_to_line(bad)


class TestEnumerateQ:
    def test_cap_two(self):
        dists = list(enumerate_Q((0, 1), 2))
        assert len(dists) == 1
        assert dists[0].as_dict() == {(0,): F(1, 2), (1,): F(1, 2)}

    def test_cap_three(self):
        dists = list(enumerate_Q((0, 1), 3))
        laws = {tuple(sorted(d.as_dict().items())) for d in dists}
        assert len(dists) == 3
        assert (((0,), F(1, 3)), ((1,), F(2, 3))) in laws

    def test_huge_cap_rejected(self):
        with pytest.raises(ValueError):
            list(enumerate_Q((0, 1), 2 ** 1000))


class TestSerialization:
    def test_json_roundtrip(self):
        blob = json.dumps(BASE.to_json())
        back = JointDist.from_json(json.loads(blob), names=BASE.names)
        assert back.as_dict() == BASE.as_dict()
        assert back.alphabets == BASE.alphabets

    def test_rational_serialization_exact(self):
        m2 = line_fourth_power_law()
        back = JointDist.from_json(m2.to_json(), names=m2.names)
        assert back.as_dict() == m2.as_dict()

    def test_save_load(self, tmp_path):
        path = tmp_path / "d.json"
        BASE.save(path)
        assert JointDist.load(path, names=BASE.names).as_dict() == BASE.as_dict()

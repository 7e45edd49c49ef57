"""Density triples, partition bookkeeping, bucketing, and the driver loop."""

from dataclasses import replace
from fractions import Fraction as F

import numpy as np
import pytest

import oracles as O
from dhjlab.cube_core import CubeSet, LineTemplate, disjoint_product, lines_in_set
from dhjlab.errors import BucketShortfallError, NoKError
from dhjlab.increment import (
    CollapseStep,
    DensityTriple,
    Diagnostic,
    LineFound,
    NewTriple,
    ParamSet,
    PartitionState,
    RestrictStep,
    check_structure,
    dirichlet_k,
    increment_step,
    main_driver,
    omega_concentration,
    one_round_partition,
    partition_index,
    pigeonhole_buckets,
    uniformize,
)
from dhjlab.restrict import CollapseSpec, Restriction


def _dictator_triple(n):
    digs = (np.arange(2**n) >> (n - 1)) & 1
    e1 = CubeSet.from_bits(n, "zero-one", digs == 1)
    e2 = CubeSet.full(n, "zero-two")
    box = disjoint_product(e1, e2)
    return DensityTriple.from_sets(box, e1, e2)


def _root_triple(s):
    return DensityTriple.from_sets(s, CubeSet.full(s.n, "zero-one"),
                                   CubeSet.full(s.n, "zero-two"))


def _extremal_set_n2():
    pts = [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]
    return CubeSet.from_points(2, pts)


class TestParamSet:
    def test_defaults_and_roundtrip(self, tmp_path):
        p = ParamSet.desk_defaults()
        assert p.alpha == F(1, 2) and p.K == 4
        back = ParamSet.from_json(p.to_json())
        assert back == p
        path = tmp_path / "params.json"
        p.save(path)
        assert ParamSet.load(path) == p

    def test_validation(self):
        with pytest.raises(ValueError):
            ParamSet(gamma=1.5)
        with pytest.raises(ValueError):
            ParamSet(alpha=F(3, 2))
        with pytest.raises(ValueError):
            ParamSet(K=100, eta=F(1, 100), eta_prime=F(1, 100))
        with pytest.raises(ValueError):
            ParamSet.from_json({"no_such_knob": 1})

    def test_desk_bucket_layout(self):
        p = ParamSet.desk_defaults()
        assert p.bucket_layout(1000) == (4, 4, 0.125, 0.0625, 8)

    def test_asymptotic_bucket_layout(self):
        p = replace(ParamSet.desk_defaults(), use_desk_layout=False)
        count, size, radius, eps, k_max = p.bucket_layout(4096)
        assert count == 2          # ceil(4096**(1/72))
        assert size == 32          # ceil(sqrt(4096)/2)
        assert radius == pytest.approx(4096 ** (-1 / 6))
        assert eps == pytest.approx(4096 ** (-1 / 36))
        assert k_max == 2          # ceil(4096**(1/12))

    def test_tester_dimension(self):
        p = ParamSet.desk_defaults()
        assert p.tester_dimension(16) == 2
        assert p.tester_dimension(81) == 3
        assert p.tester_dimension(1) == 1


class TestDensityTriple:
    def test_root_full_instance(self):
        t = _root_triple(CubeSet.full(2))
        assert t.alpha == 1 and t.delta1 == 1 and t.delta2 == 1
        assert t.mu_box == 1 and t.index_term() == 2

    def test_from_sets_validation(self):
        with pytest.raises(ValueError):
            DensityTriple.from_sets(CubeSet.full(2, "zero-one"),
                                    CubeSet.full(2, "zero-one"),
                                    CubeSet.full(2, "zero-two"))
        with pytest.raises(ValueError):
            DensityTriple.from_sets(CubeSet.full(2), CubeSet.full(3, "zero-one"),
                                    CubeSet.full(3, "zero-two"))
        # S escaping the disjoint product is rejected
        digs = (np.arange(4) >> 1) & 1
        e1 = CubeSet.from_bits(2, "zero-one", digs == 1)
        with pytest.raises(ValueError):
            DensityTriple.from_sets(CubeSet.full(2), e1,
                                    CubeSet.full(2, "zero-two"))

    def test_extend_replay_and_lift(self):
        t = _root_triple(CubeSet.full(3))
        r = Restriction(3, (2,), (1,))
        t1 = t.extend(RestrictStep(r))
        assert t1.n == 2 and len(t1.provenance) == 1
        t2 = t1.extend(CollapseStep(CollapseSpec(2, ((1, 2),))))
        assert t2.n == 1 and len(t2.provenance) == 2
        assert t2.verify_provenance(t.s, t.e1, t.e2)
        # a local template lifts through collapse then restriction
        local = LineTemplate((3,))
        lifted = t2.lift_template(local)
        assert lifted.word == (3, 1, 3)
        for pt in lifted.points():
            assert pt in t.s

    def test_replay_detects_tampering(self):
        t = _root_triple(CubeSet.full(2))
        r = Restriction(2, (1,), (0,))
        t1 = t.extend(RestrictStep(r))
        other = CubeSet.from_points(2, [(0, 0)])
        assert not t1.verify_provenance(other, t.e1, t.e2)

    def test_json_fields(self):
        t = _dictator_triple(3)
        obj = t.to_json()
        assert obj["alpha"] == "1/1" and obj["delta1"] == "1/2"
        assert obj["counts"]["e2"] == 8


class _IndexStub:
    def __init__(self, d1, d2):
        self.term = F(d1) ** 2 + F(d2) ** 2

    def index_term(self):
        return self.term

    def content_key(self):
        return str(self.term).encode()


class TestPartitionIndex:
    def test_maximum(self):
        ps = PartitionState(((F(1), _IndexStub(1, 1)),))
        assert partition_index(ps) == 2

    def test_direct_formula(self):
        ps = PartitionState(((F(1), _IndexStub(F(1, 2), F(1, 3))),))
        assert partition_index(ps) == F(13, 36)

    def test_two_entry_hand_computation(self):
        ps = PartitionState(((F(1, 2), _IndexStub(F(1, 2), F(1, 2))),
                             (F(1, 2), _IndexStub(F(1, 4), F(3, 4)))))
        assert partition_index(ps) == F(9, 16)

    def test_two_entry_with_real_triples(self):
        e1a = CubeSet.from_points(2, [(0, 0), (1, 1)], side="zero-one")
        e2a = CubeSet.from_points(2, [(0, 0), (2, 2)], side="zero-two")
        ta = DensityTriple.from_sets(CubeSet.empty(2), e1a, e2a)
        e1b = CubeSet.from_points(2, [(0, 0)], side="zero-one")
        e2b = CubeSet.from_points(2, [(0, 0), (0, 2), (2, 0)], side="zero-two")
        tb = DensityTriple.from_sets(CubeSet.empty(2), e1b, e2b)
        ps = PartitionState(((F(1, 2), ta), (F(1, 2), tb)))
        assert partition_index(ps) == F(9, 16)

    def test_weight_validation(self):
        with pytest.raises(ValueError):
            PartitionState(())
        with pytest.raises(ValueError):
            PartitionState(((F(1, 2), _IndexStub(1, 1)),))
        with pytest.raises(ValueError):
            PartitionState(((F(0), _IndexStub(1, 1)), (F(1), _IndexStub(1, 1))))

    def test_merged_combines_identical_content(self):
        a, b = _IndexStub(F(1, 2), F(1, 2)), _IndexStub(F(1, 2), F(1, 2))
        ps = PartitionState.merged([(F(1, 4), a), (F(1, 4), b),
                                    (F(1, 2), _IndexStub(1, 1))])
        assert len(ps.entries) == 2
        assert ps.entries[0][0] == F(1, 2)


class TestCheckStructure:
    def test_full_root_is_member(self):
        t = _root_triple(CubeSet.full(3))
        rep = check_structure(t, ParamSet.desk_defaults(), trials=2, seed=0)
        assert rep.contains and rep.density_ok
        assert rep.side1.verdict == "PSEUDORANDOM"
        assert rep.side2.verdict == "PSEUDORANDOM"
        assert rep.is_member and rep.witness is None

    def test_dictator_side_not_pseudorandom(self):
        t = _dictator_triple(6)
        rep = check_structure(t, ParamSet(alpha=F(7, 8)), trials=6, seed=0)
        assert rep.side1.verdict == "NOT"
        assert rep.witness is not None and rep.witness.side == 1
        assert not rep.is_member

    def test_containment_failure_reported(self):
        digs = (np.arange(2**2) >> 1) & 1
        e1 = CubeSet.from_bits(2, "zero-one", digs == 1)
        e2 = CubeSet.full(2, "zero-two")
        t = DensityTriple(CubeSet.full(2), e1, e2, F(1), F(1, 2), F(1), F(1, 2))
        rep = check_structure(t, ParamSet.desk_defaults(), trials=2, seed=0)
        assert not rep.contains and not rep.is_member

    def test_report_json(self):
        t = _root_triple(CubeSet.full(2))
        rep = check_structure(t, ParamSet.desk_defaults(), trials=2, seed=0)
        obj = rep.to_json()
        assert obj["is_member"] is True and obj["witness"] is None


class TestPigeonholeBuckets:
    def test_identical_phases_fill_groups(self):
        phases = [0.25] * 16
        groups = pigeonhole_buckets(phases, 4, 4, F(1, 8))
        assert len(groups) == 4
        assert sorted(i for g in groups for i in g) == list(range(16))
        assert all(len(g) == 4 for g in groups)

    def test_grid_separated_phases_group_by_cell(self):
        phases = [0.05, 0.06, 0.45, 0.46, 0.85, 0.86]
        groups = pigeonhole_buckets(phases, 3, 2, F(1, 8))
        cells = {frozenset(g) for g in groups}
        assert cells == {frozenset({0, 1}), frozenset({2, 3}), frozenset({4, 5})}

    def test_shortfall_reports_achievable_layout(self):
        with pytest.raises(BucketShortfallError) as ei:
            pigeonhole_buckets([0.1] * 10, 4, 4, F(1, 8))
        err = ei.value
        assert err.achievable_count == 2   # 10 // 4
        assert err.achievable_size == 2    # 10 // 2 = 5 >= 4 groups

    def test_vector_phases(self):
        phases = np.array([[0.1, 0.1], [0.12, 0.11], [0.6, 0.6], [0.61, 0.62]])
        groups = pigeonhole_buckets(phases, 2, 2, F(1, 4))
        assert sorted(map(sorted, groups)) == [[0, 1], [2, 3]]

    def test_validation(self):
        with pytest.raises(ValueError):
            pigeonhole_buckets([0.1], 0, 1, F(1, 8))
        with pytest.raises(ValueError):
            pigeonhole_buckets([0.1], 1, 1, F(3, 4))


class TestDirichletK:
    def test_zero_vector(self):
        res = dirichlet_k([0.0, 0.0], 5, 0.01)
        assert res.k == 1 and res.norm == 0.0

    def test_rational_thirds(self):
        res = dirichlet_k([1 / 3, 2 / 3], 3, 0.01)
        assert res.k == 3
        assert res.norm <= 0.01
        assert [k for k, _ in res.scan] == [1, 2, 3]

    def test_no_k_reports_scan(self):
        phi = (5 ** 0.5 - 1) / 2
        with pytest.raises(NoKError) as ei:
            dirichlet_k([phi], 2, 1e-6)
        assert len(ei.value.scan) == 2

    def test_validation(self):
        with pytest.raises(ValueError):
            dirichlet_k([0.1], 0, 0.1)


class TestOneRoundPartition:
    def test_dictator_gains_index(self):
        t = _dictator_triple(6)
        p = ParamSet(alpha=F(7, 8))
        rep = check_structure(t, p, trials=6, seed=0)
        assert rep.witness is not None
        state = one_round_partition(t, rep.witness, p, seed=0)
        assert sum(w for w, _ in state.entries) == 1
        assert partition_index(state) > t.index_term()
        assert partition_index(state) == F(4, 3)
        for _, entry in state.entries:
            assert entry.s.is_subset_of(entry.box())

    def test_requires_witness(self):
        t = _dictator_triple(4)
        with pytest.raises(ValueError):
            one_round_partition(t, None, ParamSet.desk_defaults(), seed=0)


class TestUniformize:
    def test_already_good_stops_immediately(self):
        t = _root_triple(CubeSet.full(3))
        res = uniformize(t, ParamSet.desk_defaults(), seed=0)
        assert res.rounds == 0 and res.terminated and not res.nonterminated
        assert res.triple.content_key() == t.content_key()
        assert res.trajectory == [t.index_term()]
        assert res.not_good_mass == 0

    def test_density_precondition(self):
        s = CubeSet.from_points(2, [(0, 0)])
        t = _root_triple(s)
        with pytest.raises(ValueError):
            uniformize(t, ParamSet.desk_defaults(), seed=0)

    def test_dictator_n12_frozen_run(self):
        t = _dictator_triple(12)
        res = uniformize(t, ParamSet(alpha=F(7, 8)), seed=3)
        assert res.rounds == 1 and res.terminated
        assert res.trajectory == [F(5, 4), F(4, 3)]
        assert len(res.state.entries) == 3
        assert sum(w for w, _ in res.state.entries) == 1
        assert res.selected_good
        # strict index increase each round
        for a, b in zip(res.trajectory, res.trajectory[1:]):
            assert b > a

    def test_small_n_flagged_not_crashed(self):
        t = _dictator_triple(3)
        res = uniformize(t, ParamSet(alpha=F(7, 8)), round_cap=2, seed=0)
        assert res.terminated or res.nonterminated
        assert sum(w for w, _ in res.state.entries) == 1


class TestIncrementStep:
    def test_full_product_yields_line(self):
        t = _root_triple(CubeSet.full(2))
        out = increment_step(t, ParamSet.desk_defaults(), seed=0)
        assert isinstance(out, LineFound)
        assert out.stage == "direct-scan"
        for pt in out.template_root.points():
            assert pt in t.s

    def test_line_free_extremal_never_line_found(self):
        s = _extremal_set_n2()
        assert lines_in_set(s)[0] == 0
        t = _root_triple(s)
        for seed in range(3):
            out = increment_step(t, ParamSet(alpha=F(1, 4)), seed=seed)
            assert not isinstance(out, LineFound)

    def test_empty_s_is_diagnostic(self):
        t = _root_triple(CubeSet.empty(2))
        out = increment_step(t, ParamSet.desk_defaults(), seed=0)
        assert isinstance(out, Diagnostic)
        assert out.report["reason"] == "empty S"

    def test_new_triple_carries_provenance(self):
        s = _extremal_set_n2()
        t = _root_triple(s)
        out = increment_step(t, ParamSet(alpha=F(1, 4)), seed=1)
        if isinstance(out, NewTriple):
            assert out.triple.verify_provenance(t.s, t.e1, t.e2)
            assert out.gain > 0


class TestMainDriver:
    def test_full_cube_line_at_step_one(self):
        trace = main_driver(CubeSet.full(3), ParamSet.desk_defaults(),
                            step_cap=3, seed=0)
        assert trace.line is not None
        assert trace.records[0].outcome == "LINE_FOUND"
        assert trace.line.diagnostics.get("lift_verified") is True

    def test_extremal_n3_no_false_line(self):
        from dhjlab.extremal import max_line_free
        res = max_line_free(3, seed=0)
        s = res.witness
        assert lines_in_set(s)[0] == 0
        trace = main_driver(s, ParamSet(alpha=F(1, 4)), step_cap=2, seed=0)
        assert trace.line is None
        assert len(trace.records) >= 1

    def test_root_side_validation(self):
        with pytest.raises(ValueError):
            main_driver(CubeSet.full(2, "zero-one"), ParamSet.desk_defaults())

    def test_trace_jsonl(self):
        trace = main_driver(CubeSet.full(2), ParamSet.desk_defaults(),
                            step_cap=1, seed=0)
        lines = trace.to_jsonl().splitlines()
        assert len(lines) == len(trace.records)
        obj = trace.to_json()
        assert obj["line"]["outcome"] == "LINE_FOUND"


class TestOmegaConcentration:
    def test_full_sides_concentrate_exactly(self):
        rep = omega_concentration(CubeSet.full(2, "zero-one"),
                                  CubeSet.full(2, "zero-two"))
        assert rep["reference"] == 1.0
        assert rep["expected_abs_deviation"] == pytest.approx(0.0, abs=1e-12)
        assert rep["mean_omega"] == pytest.approx(1.0, abs=1e-12)

    def test_empty_side(self):
        rep = omega_concentration(CubeSet.empty(1, "zero-one"),
                                  CubeSet.full(1, "zero-two"))
        assert rep["reference"] == 0.0
        assert rep["expected_abs_deviation"] == pytest.approx(0.0, abs=1e-12)

    def test_dimension_guard(self):
        with pytest.raises(ValueError):
            omega_concentration(CubeSet.full(7, "zero-one"),
                                CubeSet.full(7, "zero-two"))
        with pytest.raises(ValueError):
            omega_concentration(CubeSet.full(2, "zero-one"),
                                CubeSet.full(2, "zero-one"))

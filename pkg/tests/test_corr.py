"""Tensor-power correlations, line densities, product maximization, tester."""

from fractions import Fraction as F
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles as O
from dhjlab.cube_core import CubeSet
from dhjlab.dist_core import JointDist
from dhjlab.errors import FallbackToSamplingError
from dhjlab.corr import (
    FunctionTable,
    ProductFunction,
    centered_indicator,
    delta_grid,
    kwise_correlation,
    line_density,
    max_product_correlation,
    product_pseudorandom_test,
    wilson_interval,
)
from dhjlab.restrict import Restriction

LINE_ROWS = [(0, 1, 2)] * 3
LINE_ATOMS = [(0, 0, 0), (1, 1, 1), (2, 2, 2), (0, 1, 2)]
UNIFORM_LINE = JointDist.from_rows(LINE_ROWS, {t: F(1, 4) for t in LINE_ATOMS})
CANONICAL_LINE = JointDist.from_rows(LINE_ROWS, dict(O.CANONICAL_BASE))


def _pm1_table(n, seed, card=3):
    rng = np.random.default_rng(seed)
    vals = np.where(rng.random(card**n) < 0.5, -1.0, 1.0).astype(np.complex128)
    return FunctionTable(n, tuple(range(card)), vals)


def _complex_table(n, seed, card=3):
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal(card**n) + 1j * rng.standard_normal(card**n)
    vals /= np.abs(vals).max() * 1.25
    return FunctionTable(n, tuple(range(card)), vals)


class TestFunctionTable:
    def test_from_cubeset(self):
        s = CubeSet.from_points(1, [(1,)])
        t = FunctionTable.from_cubeset(s)
        assert t.values.tolist() == [0, 1, 0]
        shifted = FunctionTable.from_cubeset(s, shift=0.5)
        assert shifted.values.tolist() == [-0.5, 0.5, -0.5]

    def test_restrict_matches_lift(self):
        t = _complex_table(3, 5)
        r = Restriction(3, (2,), (1,))
        rt = t.restrict(r)
        assert rt.n == 2
        for y in product((0, 1, 2), repeat=2):
            x = r.lift_point(y)
            ix = sum(d * 3 ** (2 - i) for i, d in enumerate(x))
            iy = sum(d * 3 ** (1 - i) for i, d in enumerate(y))
            assert rt.values[iy] == t.values[ix]

    def test_json_roundtrip(self, tmp_path):
        t = _complex_table(2, 9)
        back = FunctionTable.from_json(t.to_json())
        assert back.n == t.n and back.alphabet == t.alphabet
        assert np.allclose(back.values, t.values)
        path = tmp_path / "table.json"
        t.save(path)
        loaded = FunctionTable.load(path)
        assert np.allclose(loaded.values, t.values)

    def test_bad_length_rejected(self):
        with pytest.raises(ValueError):
            FunctionTable(2, (0, 1, 2), np.ones(8, dtype=np.complex128))

    def test_centered_indicator_mean_zero(self):
        s = CubeSet.from_points(2, [(0, 0), (1, 2), (2, 1)])
        w = {0: F(1, 2), 1: F(1, 4), 2: F(1, 4)}
        t = centered_indicator(s, w)
        mean = 0.0
        for x in product((0, 1, 2), repeat=2):
            ix = x[0] * 3 + x[1]
            mean += float(w[x[0]] * w[x[1]]) * t.values[ix].real
        assert abs(mean) < 1e-12


class TestKwiseCorrelation:
    def test_all_ones_is_one(self):
        ones = FunctionTable(2, (0, 1, 2), np.ones(9, dtype=np.complex128))
        rep = kwise_correlation([ones] * 3, UNIFORM_LINE, 2)
        assert rep.exact_value == 1

    def test_indicator_triple_frozen_values(self):
        s01 = CubeSet.from_points(1, [(0,), (1,)])
        s12 = CubeSet.from_points(1, [(1,), (2,)])
        assert kwise_correlation([s01] * 3, UNIFORM_LINE, 1).exact_value == F(1, 2)
        assert kwise_correlation([s12] * 3, UNIFORM_LINE, 1).exact_value == F(1, 2)
        assert kwise_correlation([s12] * 3, CANONICAL_LINE, 1).exact_value == F(2, 3)
        assert kwise_correlation([s01] * 3, CANONICAL_LINE, 1).exact_value == F(1, 2)

    def test_mean_zero_factor_kills_independent_product(self):
        pairs = [(a, b) for a in (0, 1, 2) for b in (0, 1, 2)]
        indep = JointDist.from_rows([(0, 1, 2)] * 2, {t: F(1, 9) for t in pairs})
        s = CubeSet.from_points(1, [(0,)])
        f = centered_indicator(s, {0: F(1, 3), 1: F(1, 3), 2: F(1, 3)})
        g = _complex_table(1, 3)
        rep = kwise_correlation([f, g], indep, 1)
        assert abs(rep.value) < 1e-12

    def test_matches_brute_oracle(self):
        for seed in range(4):
            fs = [_complex_table(2, 100 + seed * 3 + j) for j in range(3)]
            rep = kwise_correlation(fs, CANONICAL_LINE, 2)
            brute = O.kwise_brute([f.values for f in fs], dict(O.CANONICAL_BASE), 2)
            assert abs(rep.value - brute) < 1e-10

    def test_indicator_exact_matches_brute(self):
        rng = np.random.default_rng(7)
        sets = [CubeSet.from_bits(2, "full", rng.random(9) < 0.5)
                for _ in range(3)]
        rep = kwise_correlation(sets, UNIFORM_LINE, 2)
        tables = [FunctionTable.from_cubeset(s).values for s in sets]
        brute = O.kwise_brute(tables, {t: F(1, 4) for t in LINE_ATOMS}, 2)
        assert abs(float(rep.exact_value) - brute.real) < 1e-12

    def test_budget_refusal(self):
        ones = FunctionTable(4, (0, 1, 2), np.ones(81, dtype=np.complex128))
        with pytest.raises(FallbackToSamplingError):
            kwise_correlation([ones] * 3, UNIFORM_LINE, 4, budget=10)

    def test_monte_carlo_near_exact(self):
        s = CubeSet.from_points(2, [(0, 0), (1, 1), (0, 1), (2, 2), (2, 0)])
        exact = kwise_correlation([s] * 3, UNIFORM_LINE, 2)
        mc = kwise_correlation([s] * 3, UNIFORM_LINE, 2, mode="monte-carlo",
                               budget=20_000, seed=4)
        assert mc.samples == 20_000 and mc.stderr is not None
        assert abs(mc.value - float(exact.exact_value)) < 4 * mc.stderr + 0.01

    def test_monte_carlo_deterministic(self):
        s = CubeSet.full(2)
        a = kwise_correlation([s] * 3, UNIFORM_LINE, 2, mode="mc", budget=50, seed=3)
        b = kwise_correlation([s] * 3, UNIFORM_LINE, 2, mode="mc", budget=50, seed=3)
        assert a.value == b.value

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            kwise_correlation([CubeSet.full(1)] * 3, UNIFORM_LINE, 1, mode="nope")


class TestLineDensity:
    def test_full_cube_density_one(self):
        assert line_density(CubeSet.full(2), UNIFORM_LINE) == 1

    def test_line_free_set_counts_only_diagonal_templates(self):
        # with no line fully inside S, only the wildcard-free templates
        # survive, each worth |S| point terms of mass 4^-n
        pts = [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]
        s = CubeSet.from_points(2, pts)
        assert line_density(s, UNIFORM_LINE) == F(6, 16)

    def test_agrees_with_kwise(self):
        rng = np.random.default_rng(11)
        for seed in range(4):
            s = CubeSet.from_bits(3, "full", rng.random(27) < 0.6)
            a = line_density(s, CANONICAL_LINE)
            b = kwise_correlation([s] * 3, CANONICAL_LINE, 3).exact_value
            assert a == b

    def test_validation(self):
        with pytest.raises(ValueError):
            line_density(CubeSet.full(2, "zero-one"), UNIFORM_LINE)
        bad = JointDist.from_rows(LINE_ROWS, {(0, 0, 1): F(1)})
        with pytest.raises(ValueError):
            line_density(CubeSet.full(2), bad)
        pair = JointDist.from_rows([(0, 1, 2)] * 2, {(0, 0): F(1)})
        with pytest.raises(ValueError):
            line_density(CubeSet.full(2), pair)


UNIFORM3 = {0: F(1, 3), 1: F(1, 3), 2: F(1, 3)}


class TestMaxProductCorrelation:
    def test_product_function_reaches_one(self):
        rng = np.random.default_rng(0)
        for seed in range(5):
            phases = np.exp(2j * np.pi * rng.random((3, 3)))
            g = ProductFunction((0, 1, 2), phases)
            f = FunctionTable(3, (0, 1, 2), g.point_values())
            rep = max_product_correlation(f, UNIFORM3, restarts=4, seed=seed)
            assert abs(rep.magnitude - 1.0) <= 1e-9

    def test_character_reaches_one(self):
        w = np.exp(2j * np.pi / 3)
        vals = np.array([w ** (x + 2 * y) for x in range(3) for y in range(3)])
        f = FunctionTable(2, (0, 1, 2), vals)
        rep = max_product_correlation(f, UNIFORM3)
        assert abs(rep.magnitude - 1.0) <= 1e-9

    def test_chsh_value(self):
        vals = np.array([1.0, 1.0, 1.0, -1.0], dtype=np.complex128)
        f = FunctionTable(2, (0, 1), vals)
        w = {0: F(1, 2), 1: F(1, 2)}
        rep = max_product_correlation(f, w)
        assert rep.magnitude == pytest.approx(0.7071067811865476, abs=1e-9)
        grid = max_product_correlation(f, w, method="grid", grid_points=64)
        assert abs(grid.magnitude - rep.magnitude) <= 1e-3

    def test_matches_independent_grid_oracle(self):
        for seed in range(6):
            f = _pm1_table(2, 200 + seed)
            rep = max_product_correlation(f, UNIFORM3, restarts=8, seed=seed)
            oracle = O.phase_grid_max(f.values, grid=96)
            assert abs(rep.magnitude - oracle) <= 1e-3

    def test_monotone_objective(self):
        for seed in range(5):
            f = _complex_table(2, 300 + seed)
            rep = max_product_correlation(f, UNIFORM3, seed=seed)
            assert rep.monotone_min_delta >= -1e-9

    def test_scaling_covariance(self):
        f = _complex_table(2, 41)
        base = max_product_correlation(f, UNIFORM3)
        scaled = FunctionTable(2, (0, 1, 2), 0.4 * f.values)
        rep = max_product_correlation(scaled, UNIFORM3)
        assert rep.magnitude == pytest.approx(0.4 * base.magnitude, rel=1e-9)

    def test_witness_reproduces_value(self):
        f = _complex_table(2, 55)
        rep = max_product_correlation(f, UNIFORM3)
        g = rep.witness.point_values()
        val = sum(float(F(1, 9)) * f.values[i] * g[i] for i in range(9))
        assert abs(val - rep.value) < 1e-9

    def test_real_pass_reports_sign_witness(self):
        f = _pm1_table(2, 77)
        rep = max_product_correlation(f, UNIFORM3)
        assert rep.real_witness is not None
        signs = rep.real_witness.tables
        assert np.all(np.abs(np.abs(signs.real) - 1.0) < 1e-12)
        assert rep.real_value <= rep.magnitude + 1e-9

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            max_product_correlation(_pm1_table(1, 0), UNIFORM3, method="anneal")


class TestWilsonInterval:
    def test_bounds_and_ordering(self):
        lo, hi = wilson_interval(7, 10)
        assert 0 <= lo <= 0.7 <= hi <= 1

    def test_extremes(self):
        lo0, _ = wilson_interval(0, 20)
        _, hi1 = wilson_interval(20, 20)
        assert lo0 == 0.0 and hi1 == 1.0

    def test_formula(self):
        s, t, z = 13, 40, 2.0
        phat = s / t
        denom = 1 + z * z / t
        center = (phat + z * z / (2 * t)) / denom
        half = (z / denom) * (phat * (1 - phat) / t + z * z / (4 * t * t)) ** 0.5
        lo, hi = wilson_interval(s, t, z)
        assert lo == pytest.approx(center - half)
        assert hi == pytest.approx(center + half)

    def test_validation(self):
        with pytest.raises(ValueError):
            wilson_interval(0, 0)


class TestDeltaGrid:
    def test_geometric_from_ratio_to_one(self):
        grid = delta_grid(12, 3)
        assert grid == [F(1, 4), F(1, 2), F(1)]
        assert delta_grid(8, 8) == [F(1)]

    def test_validation(self):
        with pytest.raises(ValueError):
            delta_grid(4, 5)


class TestPseudorandomTester:
    def test_zero_function_is_pseudorandom(self):
        f = FunctionTable(6, (0, 1, 2), np.zeros(729, dtype=np.complex128))
        rep = product_pseudorandom_test(f, 3, 0.5, UNIFORM3, trials=6,
                                        restarts=1, max_sweeps=20, tol=1e-6)
        assert rep.verdict == "PSEUDORANDOM"
        assert rep.witness is None

    def test_dictator_is_not_pseudorandom(self):
        n = 6
        vals = np.ones(3**n, dtype=np.complex128)
        for i in range(3**n):
            if (i // 3 ** (n - 1)) % 3 == 1:
                vals[i] = -1.0
        f = FunctionTable(n, (0, 1, 2), vals)
        rep = product_pseudorandom_test(f, 3, 0.5, UNIFORM3, trials=6,
                                        restarts=1, max_sweeps=20, tol=1e-6)
        assert rep.verdict == "NOT"
        assert rep.witness is not None
        assert abs(rep.witness.value) >= 0.5

    def test_deterministic(self):
        f = _pm1_table(5, 31)
        a = product_pseudorandom_test(f, 3, 0.4, UNIFORM3, trials=4,
                                      restarts=1, max_sweeps=15, tol=1e-5, seed=2)
        b = product_pseudorandom_test(f, 3, 0.4, UNIFORM3, trials=4,
                                      restarts=1, max_sweeps=15, tol=1e-5, seed=2)
        assert a.verdict == b.verdict
        assert [s.exceed for s in a.stats] == [s.exceed for s in b.stats]

    def test_stats_cover_grid(self):
        f = _pm1_table(4, 8)
        rep = product_pseudorandom_test(f, 2, 0.9, UNIFORM3, trials=3,
                                        restarts=1, max_sweeps=10, tol=1e-4)
        assert [s.delta for s in rep.stats] == delta_grid(4, 2)
        full = rep.stats[-1]
        assert full.delta == 1 and full.trials == 1

    def test_report_json(self):
        f = _pm1_table(4, 9)
        rep = product_pseudorandom_test(f, 2, 0.2, UNIFORM3, trials=3,
                                        restarts=1, max_sweeps=10, tol=1e-4)
        obj = rep.to_json()
        assert obj["verdict"] == rep.verdict
        assert len(obj["deltas"]) == len(rep.stats)

    def test_validation(self):
        f = _pm1_table(3, 1)
        with pytest.raises(ValueError):
            product_pseudorandom_test(f, 2, 1.5, UNIFORM3)
        with pytest.raises(ValueError):
            product_pseudorandom_test(f, 2, 0.5, UNIFORM3, trials=0)

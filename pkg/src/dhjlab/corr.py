"""k-wise correlations, the product-correlation maximizer, and the tester.

The three public computations:

- ``kwise_correlation``: E[f_1(x_1)...f_k(x_k)] over a tensor power D^(x)n of
  a joint law D, exactly (full template enumeration; exact rationals when all
  functions are indicators) or by seeded Monte Carlo;
- ``max_product_correlation``: heuristically maximize |E[f(x) prod P_i(x_i)]|
  over 1-bounded product functions by alternating unit-phase updates (the
  objective is non-decreasing at every coordinate update), or by an
  exhaustive discretized phase grid (n <= 3) that yields a certified lower
  bound with an explicit discretization gap;
- ``product_pseudorandom_test``: for a geometric grid of survival rates
  delta, sample random restrictions, maximize product correlation of each
  restricted function, and certify NOT (with witness) or PSEUDORANDOM via
  Wilson intervals. The NOT verdict is certified by its witness; the
  PSEUDORANDOM verdict is statistical, since the maximizer is a heuristic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import pi
from typing import Mapping, Sequence, Union

import numpy as np

from . import kernels
from ._rng import make_rng
from .cube_core import SIDE_ALPHABET, CubeSet, measure
from .dist_core import JointDist, Symbol
from .errors import FallbackToSamplingError
from .restrict import Restriction, sample_restriction, subcube_index_map

MODULUS_TOL = 1e-12


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, str)):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(value).limit_denominator(10**12)
    raise TypeError(f"cannot interpret {value!r} as a rational")


# ---------------------------------------------------------------------------
# function tables and product functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FunctionTable:
    """A 1-bounded function on alphabet^n, tabulated in index order.

    The index order matches the cube convention: coordinate 1 is the most
    significant digit, digit order follows the alphabet.
    """

    n: int
    alphabet: tuple[Symbol, ...]
    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.complex128)
        card = len(self.alphabet)
        if vals.shape != (card**self.n,):
            raise ValueError(f"expected {card**self.n} values, got shape {vals.shape}")
        if np.abs(vals).max(initial=0.0) > 1 + MODULUS_TOL:
            raise ValueError("function values must have modulus at most 1")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "alphabet", tuple(self.alphabet))

    @property
    def card(self) -> int:
        return len(self.alphabet)

    @property
    def is_real(self) -> bool:
        return bool(np.abs(self.values.imag).max(initial=0.0) <= MODULUS_TOL)

    @classmethod
    def from_cubeset(cls, s: CubeSet, shift: float = 0.0) -> "FunctionTable":
        return cls(s.n, SIDE_ALPHABET[s.side], s.bits.astype(np.float64) - shift)

    def restrict(self, r: Restriction) -> "FunctionTable":
        """The table of f with the coordinates in r.I fixed to r.z."""
        if r.n != self.n:
            raise ValueError("restriction dimension mismatch")
        if not r.I:
            return self
        assignment = {}
        for c, sym in zip(r.I, r.z):
            if sym not in self.alphabet:
                raise ValueError(f"symbol {sym} not in the table alphabet")
            assignment[c] = self.alphabet.index(sym)
        idx = subcube_index_map(self.n, self.card, assignment)
        return FunctionTable(self.n - len(r.I), self.alphabet, self.values[idx])

    def to_json(self) -> dict:
        return {"n": self.n, "alphabet": list(self.alphabet),
                "values": [[float(v.real), float(v.imag)] for v in self.values]}

    @classmethod
    def from_json(cls, obj: dict) -> "FunctionTable":
        vals = np.array([complex(re, im) for re, im in obj["values"]])
        return cls(int(obj["n"]), tuple(obj["alphabet"]), vals)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "FunctionTable":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def centered_indicator(s: CubeSet, weights) -> FunctionTable:
    """1_S minus its exact measure under the given per-coordinate weights."""
    m = measure(s, weights)
    return FunctionTable(s.n, SIDE_ALPHABET[s.side],
                         s.bits.astype(np.float64) - float(m))


@dataclass(frozen=True, eq=False)
class ProductFunction:
    """A coordinatewise product of 1-bounded factor tables."""

    alphabet: tuple[Symbol, ...]
    tables: np.ndarray  # shape (n, card), complex

    def __post_init__(self):
        tabs = np.ascontiguousarray(self.tables, dtype=np.complex128)
        if tabs.ndim != 2 or tabs.shape[1] != len(self.alphabet):
            raise ValueError("tables must have shape (n, |alphabet|)")
        if np.abs(tabs).max(initial=0.0) > 1 + MODULUS_TOL:
            raise ValueError("factor entries must have modulus at most 1")
        tabs.flags.writeable = False
        object.__setattr__(self, "tables", tabs)
        object.__setattr__(self, "alphabet", tuple(self.alphabet))

    @property
    def n(self) -> int:
        return self.tables.shape[0]

    @property
    def card(self) -> int:
        return len(self.alphabet)

    def value(self, digits: Sequence[int]) -> complex:
        """Value at a point given by digit indices (positions in the alphabet)."""
        out = complex(1.0)
        for i, d in enumerate(digits):
            out *= self.tables[i, d]
        return out

    def point_values(self) -> np.ndarray:
        """Values on all card**n points, in table index order."""
        out = np.ones(1, dtype=np.complex128)
        for i in range(self.n):
            out = (out[:, None] * self.tables[i][None, :]).ravel()
        return out

    def phases(self) -> np.ndarray:
        """Phase form v with tables = exp(2 pi i v); requires unit modulus."""
        mags = np.abs(self.tables)
        if np.abs(mags - 1).max(initial=0.0) > 1e-9:
            raise ValueError("phase form requires unit-modulus entries")
        return np.mod(np.angle(self.tables) / (2 * pi), 1.0)

    def to_json(self) -> dict:
        return {"alphabet": list(self.alphabet),
                "tables": [[[float(v.real), float(v.imag)] for v in row]
                           for row in self.tables]}

    @classmethod
    def from_json(cls, obj: dict) -> "ProductFunction":
        tabs = np.array([[complex(re, im) for re, im in row] for row in obj["tables"]])
        return cls(tuple(obj["alphabet"]), tabs)


# ---------------------------------------------------------------------------
# correlation report
# ---------------------------------------------------------------------------

@dataclass
class CorrelationReport:
    """Result of a correlation computation or maximization."""

    value: complex
    method: str
    exact_value: Fraction | None = None
    samples: int = 0
    stderr: float = 0.0
    witness: ProductFunction | None = None
    real_witness: ProductFunction | None = None
    real_value: float | None = None
    converged: bool = True
    monotone_min_delta: float = 0.0
    gap_bound: float | None = None

    @property
    def magnitude(self) -> float:
        return abs(self.value)

    def to_json(self) -> dict:
        obj: dict = {"value": [self.value.real, self.value.imag],
                     "magnitude": self.magnitude, "method": self.method}
        if self.exact_value is not None:
            obj["exact"] = {"num": str(self.exact_value.numerator),
                            "den": str(self.exact_value.denominator)}
        if self.method == "monte-carlo":
            obj["samples"] = self.samples
            obj["stderr"] = self.stderr
        if self.witness is not None:
            obj["witness"] = self.witness.to_json()
        if self.real_value is not None:
            obj["real_value"] = self.real_value
        if self.gap_bound is not None:
            obj["gap_bound"] = self.gap_bound
        if self.method in ("alternating", "grid"):
            obj["converged"] = self.converged
        return obj


# ---------------------------------------------------------------------------
# k-wise correlation over a tensor power
# ---------------------------------------------------------------------------

def _normalize_functions(fs: Sequence[Union[CubeSet, FunctionTable]], dist: JointDist,
                         n: int) -> list[FunctionTable]:
    if len(fs) != dist.arity:
        raise ValueError(f"need {dist.arity} functions, got {len(fs)}")
    out = []
    for i, f in enumerate(fs):
        if isinstance(f, CubeSet):
            f = FunctionTable.from_cubeset(f)
        if not isinstance(f, FunctionTable):
            raise TypeError("functions must be CubeSet or FunctionTable")
        if f.n != n:
            raise ValueError(f"function {i} has n={f.n}, expected {n}")
        if f.alphabet != dist.alphabets[i]:
            raise ValueError(f"function {i} alphabet {f.alphabet} does not match "
                             f"coordinate alphabet {dist.alphabets[i]}")
        out.append(f)
    return out


def _row_digit_table(dist: JointDist) -> np.ndarray:
    """digit_vals[t, i] = position of row t's i-th symbol in alphabet i."""
    rows = dist.support
    out = np.zeros((len(rows), dist.arity), dtype=np.int64)
    for t, row in enumerate(rows):
        for i, sym in enumerate(row):
            out[t, i] = dist.alphabets[i].index(sym)
    return out


def _exact_from_class_counts(counts: np.ndarray, weights: Sequence[Fraction],
                             n: int) -> Fraction:
    """Sum count(class) * prod(weight^multiplicity) over atom-count classes."""
    r = len(weights)
    total = Fraction(0)
    for cls in np.flatnonzero(counts):
        cnt = int(counts[cls])
        rem, used, w = int(cls), 0, Fraction(1)
        for a in range(r - 1):
            rem, c = divmod(rem, n + 1)
            w *= weights[a] ** c
            used += c
        w *= weights[r - 1] ** (n - used)
        total += cnt * w
    return total


_EXACT_CHUNK = 1 << 16


def kwise_correlation(fs: Sequence[Union[CubeSet, FunctionTable]], dist: JointDist,
                      n: int, mode: str = "exact", budget: int = 10**8,
                      seed: int = 0) -> CorrelationReport:
    """E[f_1(x_1) ... f_k(x_k)] under the n-fold tensor power of dist.

    Exact mode enumerates all |support|^n templates (refused beyond the
    budget via FallbackToSamplingError); when every function is a 0/1
    indicator the result is an exact rational computed from atom-count
    classes. Monte Carlo mode draws `budget` tensor samples.
    """
    tables = _normalize_functions(fs, dist, n)
    rows = dist.support
    probs = [p for _, p in dist.rows]
    r = len(rows)
    digit_vals = _row_digit_table(dist)
    bases = np.array([len(a) for a in dist.alphabets], dtype=np.int64)

    if mode == "exact":
        templates = r**n
        if templates > budget:
            raise FallbackToSamplingError(
                f"exact mode needs {templates} templates (> budget {budget})",
                templates)
        all_indicator = all(
            f.is_real and np.all((np.abs(f.values.real) < 1e-15) | (np.abs(f.values.real - 1) < 1e-15))
            for f in tables)
        if all_indicator and (n + 1) ** (r - 1) <= 60_000_000:
            sets = [np.ascontiguousarray(f.values.real >= 0.5) for f in tables]
            counts = kernels.class_counts(sets, digit_vals, bases, n)
            exact = _exact_from_class_counts(counts, probs, n)
            return CorrelationReport(complex(float(exact)), "exact", exact_value=exact)
        # general exact enumeration with float weights
        probs_f = np.array([float(p) for p in probs])
        pow_slot = np.stack([np.array([int(bases[j]) ** (n - 1 - i) for i in range(n)],
                                      dtype=np.int64) for j in range(dist.arity)])
        powr = np.array([r ** (n - 1 - i) for i in range(n)], dtype=np.int64)
        total = complex(0.0)
        for start in range(0, templates, _EXACT_CHUNK):
            codes = np.arange(start, min(start + _EXACT_CHUNK, templates), dtype=np.int64)
            weight = np.ones(codes.shape[0])
            idx = np.zeros((dist.arity, codes.shape[0]), dtype=np.int64)
            for pos in range(n):
                dig = (codes // powr[pos]) % r
                weight *= probs_f[dig]
                for j in range(dist.arity):
                    idx[j] += digit_vals[dig, j] * pow_slot[j, pos]
            vals = np.ones(codes.shape[0], dtype=np.complex128)
            for j, f in enumerate(tables):
                vals *= f.values[idx[j]]
            total += complex(np.sum(weight * vals))
        return CorrelationReport(total, "exact")

    if mode in ("monte-carlo", "mc"):
        if budget < 1:
            raise ValueError("monte-carlo mode needs a positive sample budget")
        rng = make_rng(seed, "kwise")
        probs_f = np.array([float(p) for p in probs])
        probs_f /= probs_f.sum()
        picks = rng.choice(r, size=(budget, n), p=probs_f)
        vals = np.ones(budget, dtype=np.complex128)
        for j, f in enumerate(tables):
            powj = np.array([int(bases[j]) ** (n - 1 - i) for i in range(n)],
                            dtype=np.int64)
            idx = (digit_vals[picks, j] * powj[None, :]).sum(axis=1)
            vals *= f.values[idx]
        mean = complex(vals.mean())
        stderr = float(np.std(vals) / np.sqrt(budget))
        return CorrelationReport(mean, "monte-carlo", samples=budget, stderr=stderr)

    raise ValueError(f"unknown mode {mode!r}")


def line_density(s: CubeSet, xi_line: JointDist) -> Fraction:
    """E[1_S(x) 1_S(y) 1_S(z)] under the n-fold power of a line-atom law.

    ``xi_line`` must be supported inside {(0,0,0), (1,1,1), (2,2,2), (0,1,2)};
    the sum runs over all support-atom templates, counted exactly by
    atom-count classes. Exact for n <= 12.
    """
    if s.side != "full":
        raise ValueError("line_density needs a full-side set")
    if s.n > 12:
        raise ValueError("exact line density supports n <= 12")
    atoms = {(0, 0, 0), (1, 1, 1), (2, 2, 2), (0, 1, 2)}
    if not set(xi_line.support) <= atoms:
        raise ValueError("xi_line must be supported on the four line atoms")
    if xi_line.arity != 3:
        raise ValueError("xi_line must be a law on triples")
    digit_vals = np.array([list(t) for t in xi_line.support], dtype=np.int64)
    bases = np.array([3, 3, 3], dtype=np.int64)
    sets = [np.ascontiguousarray(s.bits)] * 3
    counts = kernels.class_counts(sets, digit_vals, bases, s.n)
    return _exact_from_class_counts(counts, [p for _, p in xi_line.rows], s.n)


# ---------------------------------------------------------------------------
# product-correlation maximization
# ---------------------------------------------------------------------------

def _coordinate_weights(weights, n: int, alphabet: tuple[Symbol, ...]) -> np.ndarray:
    """Per-coordinate measure as an (n, card) float array, validated exactly."""
    if isinstance(weights, Mapping):
        weights = [weights] * n
    if len(weights) != n:
        raise ValueError(f"need {n} per-coordinate weight mappings")
    out = np.zeros((n, len(alphabet)))
    for i, w in enumerate(weights):
        w = {s: _as_fraction(v) for s, v in w.items()}
        if set(w) - set(alphabet):
            raise ValueError(f"weights mention symbols outside {alphabet}")
        if sum(w.values(), Fraction(0)) != 1:
            raise ValueError("per-coordinate weights must sum to 1 exactly")
        if any(v < 0 for v in w.values()):
            raise ValueError("weights must be nonnegative")
        for a, sym in enumerate(alphabet):
            out[i, a] = float(w.get(sym, 0))
    return out


def _digit_arrays(n: int, card: int) -> list[np.ndarray]:
    codes = np.arange(card**n, dtype=np.int64)
    return [((codes // card ** (n - 1 - i)) % card).astype(np.intp) for i in range(n)]


def _point_weights(w: np.ndarray) -> np.ndarray:
    out = np.ones(1)
    for i in range(w.shape[0]):
        out = (out[:, None] * w[i][None, :]).ravel()
    return out


def _alternating_pass(a_weighted: np.ndarray, digs: list[np.ndarray], card: int,
                      p0: np.ndarray, tol: float, max_sweeps: int,
                      real_sign: bool) -> tuple[np.ndarray, float, bool, float]:
    """One alternating maximization run from a starting factor table.

    Returns (tables, objective, converged, most_negative_update_delta).
    Every coordinate update replaces a factor by the best unit-modulus (or
    +-1 when real_sign) response to the others, so the objective cannot
    decrease; the worst observed float delta is reported for the monotonicity
    check. Zero responses keep the previous entry.
    """
    n = len(digs)
    p = p0.copy()
    pp = np.ones(a_weighted.shape[0], dtype=np.complex128)
    for i in range(n):
        pp *= p[i][digs[i]]
    obj = float(np.abs(np.sum(a_weighted * pp)))
    min_delta = 0.0
    converged = False
    for _ in range(max_sweeps):
        sweep_start = obj
        for i in range(n):
            ppi = pp / p[i][digs[i]]
            contrib = a_weighted * ppi
            resp = (np.bincount(digs[i], weights=contrib.real, minlength=card)
                    + 1j * np.bincount(digs[i], weights=contrib.imag, minlength=card))
            new_pi = p[i].copy()
            if real_sign:
                nz = np.abs(resp.real) > 0
                new_pi[nz] = np.sign(resp.real[nz])
            else:
                mag = np.abs(resp)
                nz = mag > 0
                new_pi[nz] = np.conj(resp[nz]) / mag[nz]
            new_obj = float(np.abs(np.sum(resp * new_pi)))
            delta = new_obj - obj
            min_delta = min(min_delta, delta)
            if delta < -1e-9:
                raise AssertionError(
                    f"alternating objective decreased by {-delta} at coordinate {i}")
            p[i] = new_pi
            pp = ppi * new_pi[digs[i]]
            obj = new_obj
        if obj - sweep_start < tol:
            converged = True
            break
    return p, obj, converged, min_delta


def _grid_objective_batch(q: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Objective for a batch of prefix products q: sum_a |q . m[:, a]|."""
    v = q @ m
    return np.abs(v).sum(axis=1)


def _grid_phase_tables(phase_rows: np.ndarray, n_pre: int, card: int) -> np.ndarray:
    return np.exp(2j * pi * phase_rows).reshape(phase_rows.shape[0], n_pre, card)


def _grid_prefix_products(tabs: np.ndarray, pre_digs: list[np.ndarray]) -> np.ndarray:
    q = np.ones((tabs.shape[0], len(pre_digs[0]) if pre_digs else 1),
                dtype=np.complex128)
    for j, dig in enumerate(pre_digs):
        q *= tabs[:, j, :][:, dig]
    return q


def _max_product_grid(a_weighted: np.ndarray, n: int, card: int, alphabet,
                      grid_points: int) -> CorrelationReport:
    """Exhaustive discretized-phase maximization (n <= 3), then local refinement.

    Phases of coordinates 1..n-1 are enumerated on a grid; the last factor is
    chosen in closed form (making the objective sum of response magnitudes).
    The coarse stage certifies value >= optimum - (n-1)*pi/grid_points; the
    refinement only raises the reported value.
    """
    if n > 3:
        raise ValueError("grid maximization supports n <= 3")
    if n == 1:
        resp = a_weighted
        mag = np.abs(resp)
        tabs = np.ones((1, card), dtype=np.complex128)
        nz = mag > 0
        tabs[0, nz] = np.conj(resp[nz]) / mag[nz]
        value = complex(np.sum(resp * tabs[0]))
        return CorrelationReport(value, "grid", witness=ProductFunction(alphabet, tabs),
                                 gap_bound=0.0)

    n_pre = n - 1
    m = a_weighted.reshape(card**n_pre, card)
    pre_codes = np.arange(card**n_pre, dtype=np.int64)
    pre_digs = [((pre_codes // card ** (n_pre - 1 - j)) % card).astype(np.intp)
                for j in range(n_pre)]
    entries = n_pre * card
    L = grid_points

    best_val = -1.0
    best_phases = np.zeros(entries)
    total = L**entries
    chunk = 1 << 14
    powl = np.array([L ** (entries - 1 - e) for e in range(entries)], dtype=np.int64)
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.int64)
        phase_rows = ((codes[:, None] // powl[None, :]) % L) / L
        tabs = _grid_phase_tables(phase_rows, n_pre, card)
        vals = _grid_objective_batch(_grid_prefix_products(tabs, pre_digs), m)
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val = float(vals[k])
            best_phases = phase_rows[k].copy()
    gap = n_pre * pi / L

    # local refinement: shrink a per-entry offset grid around the incumbent
    width = 1.0 / (2 * L)
    offsets_per_entry = 5
    off_codes = np.arange(offsets_per_entry**entries, dtype=np.int64)
    powo = np.array([offsets_per_entry ** (entries - 1 - e) for e in range(entries)],
                    dtype=np.int64)
    off_digits = (off_codes[:, None] // powo[None, :]) % offsets_per_entry
    while width > 1e-8:
        offs = (off_digits - offsets_per_entry // 2) * (width / (offsets_per_entry // 2))
        phase_rows = best_phases[None, :] + offs
        tabs = _grid_phase_tables(phase_rows, n_pre, card)
        vals = _grid_objective_batch(_grid_prefix_products(tabs, pre_digs), m)
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val = float(vals[k])
            best_phases = phase_rows[k].copy()
        width /= 2

    tabs = _grid_phase_tables(best_phases[None, :], n_pre, card)[0]
    q = np.ones(card**n_pre, dtype=np.complex128)
    for j, dig in enumerate(pre_digs):
        q *= tabs[j][dig]
    resp = q @ m
    last = np.ones(card, dtype=np.complex128)
    mag = np.abs(resp)
    nz = mag > 0
    last[nz] = np.conj(resp[nz]) / mag[nz]
    full = np.vstack([tabs, last[None, :]])
    value = complex(np.sum(resp * last))
    return CorrelationReport(value, "grid", witness=ProductFunction(alphabet, full),
                             gap_bound=gap)


def max_product_correlation(f: FunctionTable, weights, method: str = "alternating",
                            restarts: int = 8, tol: float = 1e-10, seed: int = 0,
                            max_sweeps: int = 200, grid_points: int = 16,
                            real_pass: bool = True) -> CorrelationReport:
    """Maximize |E[f(x) prod_i P_i(x_i)]| over 1-bounded product functions.

    ``weights`` gives the per-coordinate measure (one mapping, or one per
    coordinate). The alternating method returns the best of `restarts` runs
    (an all-ones start plus seeded random unit-phase starts); its objective is
    monotone in every coordinate update and the report records the most
    negative float delta observed. The grid method (n <= 3) is an exhaustive
    discretized-phase oracle with a certified gap bound. For real-valued f a
    best +-1-sign witness is reported alongside.
    """
    n, card = f.n, f.card
    w = _coordinate_weights(weights, n, f.alphabet)
    a_weighted = f.values * _point_weights(w)

    if method == "grid":
        return _max_product_grid(a_weighted, n, card, f.alphabet, grid_points)
    if method != "alternating":
        raise ValueError(f"unknown method {method!r}")

    digs = _digit_arrays(n, card)
    starts: list[np.ndarray] = [np.ones((n, card), dtype=np.complex128)]
    for t in range(max(0, restarts - 1)):
        rng = make_rng(seed, "maxcorr", t)
        starts.append(np.exp(2j * pi * rng.random((n, card))))

    best = None
    min_delta = 0.0
    for p0 in starts:
        p, obj, conv, md = _alternating_pass(a_weighted, digs, card, p0, tol,
                                             max_sweeps, real_sign=False)
        min_delta = min(min_delta, md)
        if best is None or obj > best[1]:
            best = (p, obj, conv)
    p, obj, conv = best
    pp = np.ones(card**n, dtype=np.complex128)
    for i in range(n):
        pp *= p[i][digs[i]]
    value = complex(np.sum(a_weighted * pp))
    report = CorrelationReport(value, "alternating",
                               witness=ProductFunction(f.alphabet, p),
                               converged=conv, monotone_min_delta=min_delta)

    if real_pass and f.is_real:
        rbest = None
        for p0 in (np.ones((n, card), dtype=np.complex128),
                   *(np.where(make_rng(seed, "sign", t).random((n, card)) < 0.5,
                              -1.0, 1.0).astype(np.complex128)
                     for t in range(max(0, restarts - 1)))):
            p_r, obj_r, _, md = _alternating_pass(a_weighted, digs, card, p0, tol,
                                                  max_sweeps, real_sign=True)
            min_delta = min(min_delta, md)
            if rbest is None or obj_r > rbest[1]:
                rbest = (p_r, obj_r)
        report.real_witness = ProductFunction(f.alphabet, rbest[0].real.astype(np.complex128))
        report.real_value = rbest[1]
        report.monotone_min_delta = min_delta
    return report


# ---------------------------------------------------------------------------
# product-pseudorandomness tester
# ---------------------------------------------------------------------------

def wilson_interval(successes: int, trials: int, z: float = 2.0) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("trials must be positive")
    phat = successes / trials
    denom = 1 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = (z / denom) * np.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials))
    return float(max(0.0, center - half)), float(min(1.0, center + half))


@dataclass
class DeltaStat:
    delta: Fraction
    trials: int
    exceed: int
    lower: float
    upper: float

    def to_json(self) -> dict:
        return {"delta": {"num": str(self.delta.numerator),
                          "den": str(self.delta.denominator)},
                "trials": self.trials, "exceed": self.exceed,
                "fraction": self.exceed / self.trials,
                "wilson_lower": self.lower, "wilson_upper": self.upper}


@dataclass
class TesterWitness:
    delta: Fraction
    restriction: Restriction
    value: complex
    product: ProductFunction | None

    def to_json(self) -> dict:
        return {"delta": {"num": str(self.delta.numerator),
                          "den": str(self.delta.denominator)},
                "restriction": self.restriction.to_json(),
                "value": [self.value.real, self.value.imag],
                "magnitude": abs(self.value),
                "product": self.product.to_json() if self.product else None}


@dataclass
class TesterReport:
    verdict: str  # "NOT" | "PSEUDORANDOM" | "INCONCLUSIVE"
    gamma: float
    n_prime: int
    stats: list[DeltaStat]
    witness: TesterWitness | None

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "gamma": self.gamma,
                "n_prime": self.n_prime,
                "deltas": [s.to_json() for s in self.stats],
                "witness": self.witness.to_json() if self.witness else None}


def delta_grid(n: int, n_prime: int) -> list[Fraction]:
    """Geometric (ratio 2) survival-rate grid from n_prime/n up to and incl. 1."""
    if not 1 <= n_prime <= n:
        raise ValueError("need 1 <= n_prime <= n")
    d = Fraction(n_prime, n)
    grid = [d]
    while d < 1:
        d = min(d * 2, Fraction(1))
        grid.append(d)
    return grid


def product_pseudorandom_test(f: FunctionTable, n_prime: int, gamma: float,
                              mu: Mapping[Symbol, object], trials: int = 20,
                              seed: int = 0, restarts: int = 4,
                              max_sweeps: int = 60, tol: float = 1e-9,
                              z: float = 2.0) -> TesterReport:
    """Test whether restrictions of f correlate with product functions.

    For each delta on the geometric grid, sample `trials` restrictions (each
    coordinate survives independently with probability delta, fixed symbols
    drawn from mu), maximize the product correlation of every restricted
    table, and count the fraction reaching gamma. Verdicts: NOT when some
    delta's Wilson lower bound reaches gamma (a maximizing witness is
    attached); PSEUDORANDOM when every upper bound is below gamma;
    INCONCLUSIVE otherwise. delta = 1 is deterministic (the empty restriction),
    so its exceedance is reported exactly rather than as an interval.
    """
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n = f.n
    stats: list[DeltaStat] = []
    witness: TesterWitness | None = None
    cache: dict[tuple, CorrelationReport | complex] = {}

    for di, delta in enumerate(delta_grid(n, n_prime)):
        eff_trials = 1 if delta == 1 else trials
        exceed = 0
        for t in range(eff_trials):
            rng = make_rng(seed, "tester", di, t)
            r = sample_restriction(n, delta, mu, rng)
            key = (r.I, r.z)
            if key not in cache:
                if len(r.I) == n:
                    idx = 0
                    for c, sym in zip(r.I, r.z):
                        idx += f.alphabet.index(sym) * f.card ** (n - c)
                    cache[key] = complex(f.values[idx])
                else:
                    fr = f.restrict(r)
                    cache[key] = max_product_correlation(
                        fr, mu, "alternating", restarts=restarts, tol=tol,
                        seed=seed * 1000003 + di * 1009 + t, max_sweeps=max_sweeps,
                        real_pass=False)
            res = cache[key]
            if isinstance(res, complex):
                mag, val, prod = abs(res), res, None
            else:
                mag, val, prod = res.magnitude, res.value, res.witness
            if mag >= gamma:
                exceed += 1
                if witness is None or mag > abs(witness.value):
                    witness = TesterWitness(delta, r, val, prod)
        if delta == 1:
            frac = float(exceed)
            stats.append(DeltaStat(delta, 1, exceed, frac, frac))
        else:
            lo, hi = wilson_interval(exceed, eff_trials, z)
            stats.append(DeltaStat(delta, eff_trials, exceed, lo, hi))

    if any(s.lower >= gamma for s in stats) and witness is not None:
        verdict = "NOT"
    elif all(s.upper < gamma for s in stats):
        verdict = "PSEUDORANDOM"
        witness = None
    else:
        verdict = "INCONCLUSIVE"
    return TesterReport(verdict, gamma, n_prime, stats, witness)

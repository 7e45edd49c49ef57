"""Exact-rational joint distributions on finite product alphabets.

Every probability is a :class:`fractions.Fraction`; all operations (marginal,
conditioning, duplication, decomposition, total-variation distance) are exact.
Coordinates carry names so that duplication can mint fresh primed copies and
results can be reordered by name for comparison against reference tables.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from math import comb, isqrt
from typing import Callable, Iterable, Iterator, Mapping, Sequence, Union

import numpy as np

from .errors import EmptyConditionError

Symbol = int
Row = tuple[Symbol, ...]
Coord = Union[int, str]

_ALLOWED_SYMBOLS = (0, 1, 2)


def pi1(sym: Symbol) -> Symbol:
    """Record only the symbol 1: maps 1 to 1, everything else to 0."""
    return 1 if sym == 1 else 0


def pi2(sym: Symbol) -> Symbol:
    """Record only the symbol 2: maps 2 to 2, everything else to 0."""
    return 2 if sym == 2 else 0


_SYMBOL_MAPS: dict[str, Callable[[Symbol], Symbol]] = {
    "pi1": pi1,
    "pi2": pi2,
    "id": lambda s: s,
}


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"expected an exact rational, got {type(value).__name__}")


def _default_names(k: int) -> tuple[str, ...]:
    return tuple(f"c{i + 1}" for i in range(k))


def _prime(name: str, taken: set[str]) -> str:
    fresh = name + "'"
    while fresh in taken:
        fresh += "'"
    return fresh


@dataclass(frozen=True)
class JointDist:
    """A joint distribution over a product of finite alphabets.

    ``alphabets[i]`` is the declared symbol set of coordinate i (a subset of
    {0, 1, 2}); ``rows`` maps each support tuple to its exact positive
    probability, with probabilities summing to exactly 1. ``names`` are
    in-memory labels only; they never affect equality or serialization.
    """

    alphabets: tuple[tuple[Symbol, ...], ...]
    rows: tuple[tuple[Row, Fraction], ...]
    names: tuple[str, ...] = field(compare=False, default=())

    def __post_init__(self):
        k = len(self.alphabets)
        names = self.names if self.names else _default_names(k)
        object.__setattr__(self, "names", tuple(names))
        if len(self.names) != k:
            raise ValueError("names/alphabets arity mismatch")
        if len(set(self.names)) != k:
            raise ValueError("coordinate names must be distinct")
        for alpha in self.alphabets:
            if not alpha or len(set(alpha)) != len(alpha):
                raise ValueError("alphabets must be nonempty with distinct symbols")
            for s in alpha:
                if s not in _ALLOWED_SYMBOLS:
                    raise ValueError(f"symbol {s!r} outside {{0,1,2}}")
        seen: set[Row] = set()
        total = Fraction(0)
        for t, p in self.rows:
            if len(t) != k:
                raise ValueError(f"row {t} has wrong arity")
            if t in seen:
                raise ValueError(f"duplicate row {t}")
            seen.add(t)
            if not isinstance(p, Fraction) or p <= 0:
                raise ValueError(f"row {t} probability must be a positive Fraction")
            for i, s in enumerate(t):
                if s not in self.alphabets[i]:
                    raise ValueError(f"row {t}: symbol {s} not in alphabet of coordinate {i}")
            total += p
        if total != 1:
            raise ValueError(f"probabilities sum to {total}, not 1")

    # ---------------------------------------------------------------- basics

    @classmethod
    def from_rows(cls, alphabets: Sequence[Sequence[Symbol]],
                  rows: Mapping[Sequence[Symbol], object] | Iterable[tuple[Sequence[Symbol], object]],
                  names: Sequence[str] | None = None) -> "JointDist":
        items = rows.items() if isinstance(rows, Mapping) else rows
        normalized = sorted((tuple(t), _as_fraction(p)) for t, p in items)
        return cls(tuple(tuple(a) for a in alphabets), tuple(normalized),
                   tuple(names) if names is not None else ())

    @property
    def arity(self) -> int:
        return len(self.alphabets)

    @property
    def support(self) -> tuple[Row, ...]:
        return tuple(t for t, _ in self.rows)

    def as_dict(self) -> dict[Row, Fraction]:
        return dict(self.rows)

    def prob(self, t: Sequence[Symbol]) -> Fraction:
        return self.as_dict().get(tuple(t), Fraction(0))

    def _resolve(self, coords: Iterable[Coord]) -> tuple[int, ...]:
        out = []
        for c in coords:
            if isinstance(c, str):
                try:
                    out.append(self.names.index(c))
                except ValueError:
                    raise KeyError(f"unknown coordinate name {c!r}") from None
            else:
                if not 0 <= c < self.arity:
                    raise IndexError(f"coordinate index {c} out of range")
                out.append(int(c))
        if len(set(out)) != len(out):
            raise ValueError("duplicate coordinates")
        return tuple(out)

    # ------------------------------------------------------------ operations

    def marginal(self, coords: Iterable[Coord]) -> "JointDist":
        """Exact projection onto the given coordinates, in the given order."""
        idx = self._resolve(coords)
        if not idx:
            raise ValueError("marginal requires at least one coordinate")
        acc: dict[Row, Fraction] = {}
        for t, p in self.rows:
            key = tuple(t[i] for i in idx)
            acc[key] = acc.get(key, Fraction(0)) + p
        return JointDist.from_rows([self.alphabets[i] for i in idx], acc,
                                   [self.names[i] for i in idx])

    def condition(self, coords: Iterable[Coord], values: Sequence[Symbol]) -> "JointDist":
        """Condition on an exact assignment to some coordinates.

        The result lives on the remaining coordinates (in original order);
        a zero-mass event raises :class:`EmptyConditionError`.
        """
        idx = self._resolve(coords)
        values = tuple(values)
        if len(idx) != len(values):
            raise ValueError("coords/values length mismatch")
        if len(idx) >= self.arity:
            raise ValueError("conditioning must leave at least one coordinate")
        assign = dict(zip(idx, values))
        keep = [i for i in range(self.arity) if i not in assign]
        acc: dict[Row, Fraction] = {}
        mass = Fraction(0)
        for t, p in self.rows:
            if all(t[i] == v for i, v in assign.items()):
                key = tuple(t[i] for i in keep)
                acc[key] = acc.get(key, Fraction(0)) + p
                mass += p
        if mass == 0:
            raise EmptyConditionError(f"conditioning event {dict(zip(idx, values))} has zero mass")
        scaled = {t: p / mass for t, p in acc.items()}
        return JointDist.from_rows([self.alphabets[i] for i in keep], scaled,
                                   [self.names[i] for i in keep])

    def cs_duplicate(self, keep: Iterable[Coord]) -> "JointDist":
        """Duplicate the non-kept block conditionally on the kept block.

        Draw w from the marginal on the kept coordinates W, then draw the
        complementary block twice independently conditioned on w. The result's
        coordinates are: the first copy of V∖W (original order), then a fresh
        primed copy of V∖W, then W. All probabilities are exact.
        """
        w_idx = self._resolve(keep)
        if not w_idx or len(w_idx) >= self.arity:
            raise ValueError("keep must be a proper nonempty coordinate subset")
        w_set = set(w_idx)
        u_idx = [i for i in range(self.arity) if i not in w_set]
        w_order = [i for i in range(self.arity) if i in w_set]

        blocks: dict[Row, dict[Row, Fraction]] = {}
        for t, p in self.rows:
            w = tuple(t[i] for i in w_order)
            u = tuple(t[i] for i in u_idx)
            blocks.setdefault(w, {})[u] = blocks.get(w, {}).get(u, Fraction(0)) + p

        acc: dict[Row, Fraction] = {}
        for w, cond in blocks.items():
            mass = sum(cond.values(), Fraction(0))
            for u1, p1 in cond.items():
                for u2, p2 in cond.items():
                    key = u1 + u2 + w
                    acc[key] = acc.get(key, Fraction(0)) + p1 * p2 / mass

        taken = set(self.names)
        copy_names = []
        for i in u_idx:
            fresh = _prime(self.names[i], taken)
            taken.add(fresh)
            copy_names.append(fresh)
        names = [self.names[i] for i in u_idx] + copy_names + [self.names[i] for i in w_order]
        alphabets = ([self.alphabets[i] for i in u_idx] * 2
                     + [self.alphabets[i] for i in w_order])
        return JointDist.from_rows(alphabets, acc, names)

    def project_symbols(self, maps: Iterable[tuple[Coord, str]]) -> "JointDist":
        """Pushforward under coordinatewise symbol maps.

        ``maps`` lists (coordinate, map-name) pairs with map-name one of
        "pi1", "pi2", "id"; unmentioned coordinates keep the identity.
        """
        funcs: list[Callable[[Symbol], Symbol]] = [_SYMBOL_MAPS["id"]] * self.arity
        for c, mname in maps:
            (i,) = self._resolve([c])
            if mname not in _SYMBOL_MAPS:
                raise ValueError(f"unknown symbol map {mname!r}")
            funcs[i] = _SYMBOL_MAPS[mname]
        acc: dict[Row, Fraction] = {}
        for t, p in self.rows:
            key = tuple(funcs[i](s) for i, s in enumerate(t))
            acc[key] = acc.get(key, Fraction(0)) + p
        alphabets = [tuple(sorted({funcs[i](s) for s in alpha}))
                     for i, alpha in enumerate(self.alphabets)]
        return JointDist.from_rows(alphabets, acc, self.names)

    def reorder(self, coords: Iterable[Coord]) -> "JointDist":
        """Permute coordinates into the given order (all must be listed)."""
        idx = self._resolve(coords)
        if len(idx) != self.arity:
            raise ValueError("reorder must list every coordinate exactly once")
        rows = {tuple(t[i] for i in idx): p for t, p in self.rows}
        return JointDist.from_rows([self.alphabets[i] for i in idx], rows,
                                   [self.names[i] for i in idx])

    def rename(self, names: Sequence[str]) -> "JointDist":
        return JointDist(self.alphabets, self.rows, tuple(names))

    def decompose(self, component: "JointDist") -> tuple[Fraction, "JointDist | None"]:
        """Write self = beta*component + (1-beta)*residual with beta maximal.

        Requires the component's support to lie inside self's support (and the
        alphabets to match). beta = min over component rows of
        self(t)/component(t); when beta = 1 the residual is None.
        """
        if component.alphabets != self.alphabets:
            raise ValueError("decompose requires identical alphabets")
        mine = self.as_dict()
        beta = None
        for t, q in component.rows:
            if t not in mine:
                raise ValueError(f"component row {t} outside the support")
            ratio = mine[t] / q
            beta = ratio if beta is None or ratio < beta else beta
        assert beta is not None and 0 < beta <= 1
        if beta == 1:
            return Fraction(1), None
        comp = component.as_dict()
        residual = {}
        for t, p in self.rows:
            r = (p - beta * comp.get(t, Fraction(0))) / (1 - beta)
            if r > 0:
                residual[t] = r
        return beta, JointDist.from_rows(self.alphabets, residual, self.names)

    def tv_distance(self, other: "JointDist") -> Fraction:
        """Total-variation distance, computed exactly over the union support."""
        if other.alphabets != self.alphabets:
            raise ValueError("tv_distance requires identical alphabets")
        mine, theirs = self.as_dict(), other.as_dict()
        total = Fraction(0)
        for t in set(mine) | set(theirs):
            total += abs(mine.get(t, Fraction(0)) - theirs.get(t, Fraction(0)))
        return total / 2

    def sample(self, rng: np.random.Generator, size: int) -> list[Row]:
        """Draw i.i.d. support tuples (Monte Carlo; probabilities as floats)."""
        probs = np.array([float(p) for _, p in self.rows])
        probs /= probs.sum()
        picks = rng.choice(len(self.rows), size=size, p=probs)
        sup = self.support
        return [sup[i] for i in picks]

    # --------------------------------------------------------- serialization

    def to_json(self) -> dict:
        return {
            "alphabets": [list(a) for a in self.alphabets],
            "rows": [{"t": list(t), "p": {"num": str(p.numerator), "den": str(p.denominator)}}
                     for t, p in self.rows],
        }

    @classmethod
    def from_json(cls, obj: dict, names: Sequence[str] | None = None) -> "JointDist":
        rows = {tuple(r["t"]): Fraction(int(r["p"]["num"]), int(r["p"]["den"]))
                for r in obj["rows"]}
        return cls.from_rows(obj["alphabets"], rows, names)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path, names: Sequence[str] | None = None) -> "JointDist":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh), names)


# ---------------------------------------------------------------------------
# named constructions
# ---------------------------------------------------------------------------

def dhj_distribution(w000, w111, w222, w012) -> JointDist:
    """The four-atom base distribution on triples (x, y, z).

    Mass w000 on (0,0,0), w111 on (1,1,1), w222 on (2,2,2), w012 on (0,1,2);
    all weights must be positive and sum exactly to 1. The canonical choice is
    (1/6, 1/3, 1/3, 1/6).
    """
    weights = [_as_fraction(w) for w in (w000, w111, w222, w012)]
    if any(w <= 0 for w in weights):
        raise ValueError("all four atom weights must be positive")
    if sum(weights) != 1:
        raise ValueError(f"weights sum to {sum(weights)}, not 1")
    atoms = [(0, 0, 0), (1, 1, 1), (2, 2, 2), (0, 1, 2)]
    return JointDist.from_rows([(0, 1, 2)] * 3, dict(zip(atoms, weights)),
                               ["x", "y", "z"])


CANONICAL_DHJ_WEIGHTS = (Fraction(1, 6), Fraction(1, 3), Fraction(1, 3), Fraction(1, 6))


def lift_pair_to_line(xi: JointDist) -> JointDist:
    """Lift a pair law on {(0,0),(1,1),(2,2),(1,2)} to the line-supported triple law.

    (0,0) -> (0,0,0), (1,1) -> (1,1,1), (2,2) -> (2,2,2), (1,2) -> (0,1,2),
    keeping the same masses; the (y, z)-marginal of the result equals the input.
    """
    if xi.arity != 2:
        raise ValueError("lift_pair_to_line expects a distribution on pairs")
    mapping = {(0, 0): (0, 0, 0), (1, 1): (1, 1, 1), (2, 2): (2, 2, 2), (1, 2): (0, 1, 2)}
    rows = {}
    for t, p in xi.rows:
        if t not in mapping:
            raise ValueError(f"pair {t} outside the liftable support")
        rows[mapping[t]] = p
    return JointDist.from_rows([(0, 1, 2)] * 3, rows, ["x", "y", "z"])


# ---------------------------------------------------------------------------
# the duplication tower over the line law
# ---------------------------------------------------------------------------

def line_square_law(base: JointDist | None = None) -> JointDist:
    """Duplicate the line law's (x, y) block over a shared z.

    Coordinates (x, y, x', y', z): draw z from the base law's z-marginal,
    then two independent copies of (x, y) conditioned on it. All masses are
    exact; with the canonical base the support has six rows.
    """
    base = dhj_distribution(*CANONICAL_DHJ_WEIGHTS) if base is None else base
    return base.cs_duplicate(keep=["z"])


def line_fourth_power_law(base: JointDist | None = None) -> JointDist:
    """Duplicate the square law's (x, x', z) block over the kept pair (y, y').

    Coordinates (x, x', x'', x''', y, y', z, z'); with the canonical base the
    support has eight rows and every single-coordinate marginal is uniform.
    """
    dup = line_square_law(base).cs_duplicate(keep=["y", "y'"])
    return dup.reorder(["x", "x'", "x''", "x'''", "y", "y'", "z", "z'"])


def recorded_square_law(base: JointDist | None = None) -> JointDist:
    """Duplicate the fourth-power law's (y, y', z, z') block over its x block,
    then push the y's through the 1-recording map and the z's through the
    2-recording map.

    Coordinates (y, y', y'', y''', z, z', z'', z''') over {0,1}^4 x {0,2}^4;
    with the canonical base the support has ten rows.
    """
    dup = line_fourth_power_law(base).cs_duplicate(keep=["x", "x'", "x''", "x'''"])
    marg = dup.marginal(["y", "y'", "y''", "y'''", "z", "z'", "z''", "z'''"])
    return marg.project_symbols([("y", "pi1"), ("y'", "pi1"),
                                 ("y''", "pi1"), ("y'''", "pi1"),
                                 ("z", "pi2"), ("z'", "pi2"),
                                 ("z''", "pi2"), ("z'''", "pi2")])


def recorded_pair_square_law(base: JointDist | None = None) -> JointDist:
    """Duplicate the recorded law's (y, y'') pair over all other coordinates.

    Returns the 4-ary law of (y, y'', copy-of-y, copy-of-y'') over {0,1};
    with the canonical base its support is exactly the six patterns
    0000, 1111, 0101, 1010, 0011, 1100.
    """
    m3 = recorded_square_law(base)
    keep = [nm for i, nm in enumerate(m3.names) if i not in (0, 2)]
    dup = m3.cs_duplicate(keep=keep)
    return dup.marginal([0, 1, 2, 3])


# ---------------------------------------------------------------------------
# the equal-slices-style chain laws
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChainParams:
    """Parameters of the 1-to-2 decay chain.

    Per coordinate: start uniform on {0,1,2}; at each of K steps, a 1 flips to
    2 with probability p, independently; 0s and 2s never move. The flip
    probability p plays the role of eta_prime/sqrt(n); it is stored as an
    exact rational, chosen by :meth:`create` (exact when n is a perfect
    square, otherwise a continued-fraction convergent of the real value).
    """

    K: int
    eta_prime: Fraction
    eta: Fraction
    n: int
    p: Fraction

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.eta_prime <= 0 or self.eta <= 0:
            raise ValueError("eta and eta_prime must be positive")
        if self.K * self.eta_prime > self.eta / 100:
            raise ValueError("requires K * eta_prime <= eta / 100")
        if not (0 < self.p < 1):
            raise ValueError("flip probability p must lie in (0, 1)")

    @classmethod
    def create(cls, K: int, eta_prime, eta, n: int, p=None) -> "ChainParams":
        eta_prime = _as_fraction(eta_prime)
        eta = _as_fraction(eta)
        if p is None:
            r = isqrt(n)
            if r * r == n:
                p = eta_prime / r
            else:
                p = Fraction(float(eta_prime) / float(n) ** 0.5).limit_denominator(10**12)
        return cls(K, eta_prime, eta, n, _as_fraction(p))


def chain_marginal(params: ChainParams, i: int) -> JointDist:
    """Exact law of a single coordinate after i chain steps."""
    if not 0 <= i <= params.K:
        raise ValueError("step index out of range")
    q = (1 - params.p) ** i
    rows = {(0,): Fraction(1, 3), (1,): Fraction(1, 3) * q,
            (2,): Fraction(1, 3) + Fraction(1, 3) * (1 - q)}
    rows = {t: p for t, p in rows.items() if p > 0}
    return JointDist.from_rows([(0, 1, 2)], rows, [f"y{i}"])


def chain_pair(params: ChainParams, i: int, j: int) -> JointDist:
    """Exact joint law of one coordinate at chain steps i < j.

    Supported inside {(0,0), (1,1), (2,2), (1,2)} with
    p((1,2)) = (1/3) (1-p)^i (1 - (1-p)^(j-i)).
    """
    if not 0 <= i < j <= params.K:
        raise ValueError("requires 0 <= i < j <= K")
    qi = (1 - params.p) ** i
    qj = (1 - params.p) ** j
    rows = {
        (0, 0): Fraction(1, 3),
        (1, 1): Fraction(1, 3) * qj,
        (1, 2): Fraction(1, 3) * qi * (1 - (1 - params.p) ** (j - i)),
        (2, 2): Fraction(1, 3) + Fraction(1, 3) * (1 - qi),
    }
    rows = {t: p for t, p in rows.items() if p > 0}
    return JointDist.from_rows([(0, 1, 2)] * 2, rows, [f"y{i}", f"y{j}"])


# ---------------------------------------------------------------------------
# enumeration of small rational laws
# ---------------------------------------------------------------------------

def enumerate_Q(alphabet: Sequence[Symbol], max_denominator: int, *,
                denominator_cap: int = 64) -> Iterator[JointDist]:
    """All full-support laws on the alphabet with common denominator <= max.

    Yields each distribution once, ordered by least common denominator then
    lexicographic numerators. Denominators beyond ``denominator_cap`` are
    refused with a size estimate, since the count grows like a binomial
    coefficient per denominator.
    """
    alphabet = tuple(alphabet)
    s = len(alphabet)
    if s < 1:
        raise ValueError("alphabet must be nonempty")
    if max_denominator > denominator_cap:
        estimate = sum(comb(q - 1, s - 1) for q in range(1, min(max_denominator, 4096) + 1))
        raise ValueError(
            f"denominator cap exceeded: {max_denominator} > {denominator_cap} "
            f"(would enumerate on the order of {estimate}"
            f"{'+' if max_denominator > 4096 else ''} laws)")
    seen: set[tuple[Fraction, ...]] = set()
    for q in range(1, max_denominator + 1):
        for parts in _compositions(q, s):
            law = tuple(Fraction(a, q) for a in parts)
            if law in seen:
                continue
            seen.add(law)
            yield JointDist.from_rows([alphabet],
                                      {(sym,): pr for sym, pr in zip(alphabet, law)})


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """Ordered compositions of `total` into `parts` positive integers."""
    if parts == 1:
        if total >= 1:
            yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def product_dist(factors: Sequence[JointDist]) -> JointDist:
    """Independent product of single-coordinate or joint laws."""
    alphabets: list[tuple[Symbol, ...]] = []
    names: list[str] = []
    taken: set[str] = set()
    for f in factors:
        alphabets.extend(f.alphabets)
        for nm in f.names:
            fresh = nm if nm not in taken else _prime(nm, taken)
            taken.add(fresh)
            names.append(fresh)
    rows: dict[Row, Fraction] = {(): Fraction(1)}
    for f in factors:
        rows = {t + u: p * q for t, p in rows.items() for u, q in f.rows}
    return JointDist.from_rows(alphabets, rows, names)

"""Random restrictions and the fuse-a-block coordinate collapse.

A restriction fixes the coordinates in I to the symbols z and leaves the rest
alive; a collapse forces each listed block of coordinates to carry a common
symbol, replacing the block by one fused coordinate. Both operations map
dense cube sets to dense cube sets over fewer coordinates, both come with
lift helpers that send points and line templates of the small cube back to
the original one (so any line found downstream can be re-checked upstream),
and the samplers are reproducible bit-for-bit from their seeds.

Coordinates are numbered from 1 (coordinate 1 is the most significant digit
of a point index), matching the cube conventions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Mapping, Sequence

import numpy as np

from ._rng import make_rng
from .cube_core import SIDE_ALPHABET, CubeSet, LineTemplate, WILDCARD
from .dist_core import JointDist, Symbol


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, str)):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(value).limit_denominator(10**12)
    raise TypeError(f"cannot interpret {value!r} as a rational")


@dataclass(frozen=True)
class Restriction:
    """Fix coordinates I (1-based) to symbols z; the rest survive.

    ``delta`` and ``seed`` record how the restriction was sampled (each
    coordinate independently entered I with probability 1 - delta); ``source``
    is an in-memory label of the symbol law and is not serialized.
    """

    n: int
    I: tuple[int, ...]
    z: tuple[Symbol, ...]
    delta: Fraction | None = None
    seed: int | None = None
    source: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if not 0 <= len(self.I) <= self.n:
            raise ValueError("bad restriction size")
        if len(self.I) != len(self.z):
            raise ValueError("I and z must have equal length")
        if list(self.I) != sorted(set(self.I)):
            raise ValueError("I must be sorted and duplicate-free")
        if self.I and not (1 <= self.I[0] and self.I[-1] <= self.n):
            raise ValueError("I must lie within 1..n")

    @property
    def survivors(self) -> tuple[int, ...]:
        fixed = set(self.I)
        return tuple(c for c in range(1, self.n + 1) if c not in fixed)

    def assignment(self) -> dict[int, Symbol]:
        return dict(zip(self.I, self.z))

    def to_json(self) -> dict:
        obj: dict = {"n": self.n, "I": list(self.I), "z": list(self.z)}
        if self.delta is not None:
            obj["delta"] = {"num": str(self.delta.numerator),
                            "den": str(self.delta.denominator)}
        if self.seed is not None:
            obj["seed"] = int(self.seed)
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "Restriction":
        delta = obj.get("delta")
        if delta is not None:
            delta = Fraction(int(delta["num"]), int(delta["den"]))
        return cls(int(obj["n"]), tuple(obj["I"]), tuple(obj["z"]),
                   delta, obj.get("seed"))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Restriction":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))

    # ------------------------------------------------------------- lifting

    def lift_point(self, digits: Sequence[Symbol]) -> tuple[Symbol, ...]:
        """Embed a surviving-coordinate point into the original cube."""
        survivors = self.survivors
        if len(digits) != len(survivors):
            raise ValueError("digit count does not match surviving coordinates")
        out = [0] * self.n
        for c, s in zip(self.I, self.z):
            out[c - 1] = s
        for c, d in zip(survivors, digits):
            out[c - 1] = d
        return tuple(out)

    def lift_template(self, template: LineTemplate) -> LineTemplate:
        """Embed a line template of the restricted cube into the original one."""
        word = self.lift_point(template.word)  # wildcards ride along as digits
        return LineTemplate(word)


def sample_restriction(n: int, delta, nu: Mapping[Symbol, object] | JointDist,
                       seed_or_rng, *, source: str | None = None) -> Restriction:
    """Draw I (each coordinate enters with probability 1 - delta) and z iid from nu.

    ``nu`` maps symbols to weights (or is a one-coordinate joint law). Passing
    an integer seed makes the draw reproducible bit-for-bit; passing a
    numpy Generator continues that stream.
    """
    delta = _as_fraction(delta)
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    if isinstance(nu, JointDist):
        if nu.arity != 1:
            raise ValueError("nu must be a one-coordinate law")
        weights = {t[0]: p for t, p in nu.rows}
    else:
        weights = {s: _as_fraction(w) for s, w in nu.items()}
    symbols = sorted(weights)
    probs = np.array([float(weights[s]) for s in symbols])
    probs /= probs.sum()

    seed = seed_or_rng if isinstance(seed_or_rng, int) else None
    rng = make_rng(seed_or_rng, "restriction") if seed is not None else seed_or_rng
    mask = rng.random(n) < float(1 - delta)
    fixed = tuple(int(c) for c in np.flatnonzero(mask) + 1)
    picks = rng.choice(len(symbols), size=len(fixed), p=probs)
    z = tuple(symbols[int(i)] for i in picks)
    return Restriction(n, fixed, z, delta, seed, source)


def subcube_index_map(n: int, card: int, assignment: Mapping[int, int]) -> np.ndarray:
    """Full-cube indices of the subcube fixing some coordinates to digit values.

    ``assignment`` maps 1-based coordinates to digit indices (0..card-1 in the
    side's own digit order). The result has length card**(n - len(assignment))
    and walks the free coordinates in base-card order, most significant first.
    """
    m = n - len(assignment)
    if m < 1:
        raise ValueError("the subcube must keep at least one free coordinate")
    offset = 0
    for c, d in assignment.items():
        if not (1 <= c <= n and 0 <= d < card):
            raise ValueError(f"bad assignment entry {c}->{d}")
        offset += d * card ** (n - c)
    idx = np.full(card**m, offset, dtype=np.int64)
    codes = np.arange(card**m, dtype=np.int64)
    free = [c for c in range(1, n + 1) if c not in assignment]
    for j, c in enumerate(free):
        dig = (codes // card ** (m - 1 - j)) % card
        idx += dig * card ** (n - c)
    return idx


def restrict_set(s: CubeSet, r: Restriction) -> CubeSet:
    """The set of surviving-coordinate points y with (y, z) in s."""
    if r.n != s.n:
        raise ValueError("restriction dimension mismatch")
    alpha = SIDE_ALPHABET[s.side]
    card = len(alpha)
    for sym in r.z:
        if sym not in alpha:
            raise ValueError(f"symbol {sym} not in the {s.side} alphabet")
    if not r.I:
        return CubeSet.from_bits(s.n, s.side, s.bits)
    if s.n == len(r.I):
        raise ValueError("restriction must leave at least one coordinate alive")
    assignment = {c: alpha.index(sym) for c, sym in zip(r.I, r.z)}
    idx = subcube_index_map(s.n, card, assignment)
    return CubeSet.from_bits(s.n - len(r.I), s.side, s.bits[idx])


# ---------------------------------------------------------------------------
# coordinate collapse
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CollapseSpec:
    """Pairwise-disjoint coordinate blocks (1-based), each fused to one symbol.

    The collapsed cube's coordinates are: one fused coordinate per block, in
    the order the blocks are listed, followed by the untouched coordinates in
    increasing order.
    """

    n: int
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "blocks",
                           tuple(tuple(sorted(b)) for b in self.blocks))
        seen: set[int] = set()
        for b in self.blocks:
            if not b:
                raise ValueError("blocks must be nonempty")
            if not (1 <= b[0] and b[-1] <= self.n):
                raise ValueError("block coordinates must lie within 1..n")
            if len(set(b)) != len(b) or seen & set(b):
                raise ValueError("blocks must be pairwise disjoint")
            seen |= set(b)

    @property
    def untouched(self) -> tuple[int, ...]:
        fused = {c for b in self.blocks for c in b}
        return tuple(c for c in range(1, self.n + 1) if c not in fused)

    @property
    def out_dim(self) -> int:
        return len(self.blocks) + len(self.untouched)

    def lift_point(self, digits: Sequence[Symbol]) -> tuple[Symbol, ...]:
        """Expand a collapsed-cube point to the original cube."""
        if len(digits) != self.out_dim:
            raise ValueError("digit count does not match the collapsed cube")
        out = [0] * self.n
        for b, d in zip(self.blocks, digits):
            for c in b:
                out[c - 1] = d
        for c, d in zip(self.untouched, digits[len(self.blocks):]):
            out[c - 1] = d
        return tuple(out)

    def lift_template(self, template: LineTemplate) -> LineTemplate:
        return LineTemplate(self.lift_point(template.word))


def collapse_eq(s: CubeSet, spec: CollapseSpec) -> CubeSet:
    """Fuse each block to one coordinate: membership of v means the expanded
    point (every block coordinate set to the block's symbol) lies in s."""
    if spec.n != s.n:
        raise ValueError("collapse dimension mismatch")
    alpha = SIDE_ALPHABET[s.side]
    card = len(alpha)
    m = spec.out_dim
    place = []
    for b in spec.blocks:
        place.append(sum(card ** (s.n - c) for c in b))
    for c in spec.untouched:
        place.append(card ** (s.n - c))
    codes = np.arange(card**m, dtype=np.int64)
    idx = np.zeros(card**m, dtype=np.int64)
    for j, p in enumerate(place):
        dig = (codes // card ** (m - 1 - j)) % card
        idx += dig * p
    return CubeSet.from_bits(m, s.side, s.bits[idx])


# ---------------------------------------------------------------------------
# TV distance of the random-collapse law from uniform
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CollapseTvReport:
    n: int
    s_size: int
    k: int
    tv: Fraction | float
    bound_sq: Fraction
    method: str
    trials: int
    within_bound: bool

    @property
    def bound(self) -> float:
        return float(self.bound_sq) ** 0.5

    def to_json(self) -> dict:
        tv = ({"num": str(self.tv.numerator), "den": str(self.tv.denominator)}
              if isinstance(self.tv, Fraction) else float(self.tv))
        return {"n": self.n, "s_size": self.s_size, "k": self.k, "tv": tv,
                "bound": self.bound, "method": self.method,
                "trials": self.trials, "within_bound": self.within_bound}


def _class_ratio(counts: Sequence[int], k: int, s: int) -> Fraction:
    """Density ratio of the collapse mixture to uniform on a count class."""
    hits = sum(comb(c, k) for c in counts)
    return Fraction(3 ** (k - 1) * hits, comb(s, k))


def tv_of_collapse(n: int, s_coords: Sequence[int], k: int, trials: int = 0,
                   seed: int = 0) -> CollapseTvReport:
    """Distance from uniform of the law of v under a random size-k collapse.

    Draw T uniformly among the size-k subsets of s_coords, then draw the
    collapsed cube's point uniformly and expand it to v. The law of v depends
    on a point only through its symbol counts on s_coords, so the TV distance
    from uniform is an exact sum over count classes; with trials > 0 a
    Monte Carlo estimate over sampled count vectors is returned instead.
    The distance is checked against 10k/sqrt(|s_coords|).
    """
    s = len(s_coords)
    if not 1 <= k <= s:
        raise ValueError("need 1 <= k <= |s_coords|")
    if len(set(s_coords)) != s or (s and not all(1 <= c <= n for c in s_coords)):
        raise ValueError("s_coords must be distinct coordinates within 1..n")
    bound_sq = Fraction(100 * k * k, s)
    if trials <= 0:
        total = Fraction(0)
        for c0 in range(s + 1):
            for c1 in range(s + 1 - c0):
                c2 = s - c0 - c1
                weight = Fraction(comb(s, c0) * comb(s - c0, c1), 3**s)
                total += weight * abs(_class_ratio((c0, c1, c2), k, s) - 1)
        tv = total / 2
        ok = tv * tv <= bound_sq
        return CollapseTvReport(n, s, k, tv, bound_sq, "exact", 0, ok)
    rng = make_rng(seed, "collapse-tv")
    draws = rng.multinomial(s, [1 / 3, 1 / 3, 1 / 3], size=trials)
    acc = 0.0
    for row in draws:
        acc += abs(float(_class_ratio(tuple(int(c) for c in row), k, s)) - 1.0)
    tv_est = acc / (2 * trials)
    ok = tv_est <= float(bound_sq) ** 0.5
    return CollapseTvReport(n, s, k, tv_est, bound_sq, "mc", trials, ok)

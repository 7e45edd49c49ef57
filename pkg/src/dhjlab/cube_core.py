"""Points, dense subsets, and combinatorial lines of the 3-letter cube.

A point of the cube is a word over {0,1,2} of length n. Its integer index is
the base-3 value with coordinate 1 most significant, so "012" at n=3 has
index 5. Subsets are stored as dense bit vectors:

- side "full":      subsets of {0,1,2}^n, 3^n bits
- side "zero-one":  subsets of {0,1}^n, 2^n bits (images of the 1-recording
  projection)
- side "zero-two":  subsets of {0,2}^n, 2^n bits (images of the 2-recording
  projection)

A combinatorial line is encoded by a template over {0,1,2,*} with at least
one wildcard; its three points substitute 0, 1, 2 for every wildcard
simultaneously. There are exactly 4^n - 3^n templates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import lcm
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from . import kernels

SIDE_FULL = "full"
SIDE_ZERO_ONE = "zero-one"
SIDE_ZERO_TWO = "zero-two"
SIDES = (SIDE_FULL, SIDE_ZERO_ONE, SIDE_ZERO_TWO)

SIDE_ALPHABET = {
    SIDE_FULL: (0, 1, 2),
    SIDE_ZERO_ONE: (0, 1),
    SIDE_ZERO_TWO: (0, 2),
}

WILDCARD = 3  # template digit standing for the running coordinate

MAX_POINT_N = 20   # point/index arithmetic stays exact up to here
MAX_DENSE_N = 14   # dense bit-vector sets are guarded at 3^14 ~ 4.8M cells


def _check_n(n: int, dense: bool = False) -> None:
    if not isinstance(n, int) or n < 1:
        raise ValueError(f"dimension must be a positive integer, got {n!r}")
    cap = MAX_DENSE_N if dense else MAX_POINT_N
    if n > cap:
        kind = "dense set" if dense else "point"
        raise ValueError(f"{kind} operations support n <= {cap}, got {n}")


def point_index(digits: Sequence[int], n: int | None = None) -> int:
    """Base-3 index of a point, coordinate 1 most significant."""
    if n is not None and len(digits) != n:
        raise ValueError(f"expected {n} digits, got {len(digits)}")
    _check_n(len(digits))
    idx = 0
    for d in digits:
        if d not in (0, 1, 2):
            raise ValueError(f"digit out of range: {d!r}")
        idx = idx * 3 + d
    return idx


def point_from_index(idx: int, n: int) -> tuple[int, ...]:
    """Inverse of point_index."""
    _check_n(n)
    if not 0 <= idx < 3**n:
        raise ValueError(f"index {idx} out of range for n={n}")
    digits = [0] * n
    for pos in range(n - 1, -1, -1):
        idx, digits[pos] = divmod(idx, 3)
    return tuple(digits)


@dataclass(frozen=True)
class Point:
    """An immutable point of {0,1,2}^n."""

    digits: tuple[int, ...]

    def __post_init__(self):
        _check_n(len(self.digits))
        if any(d not in (0, 1, 2) for d in self.digits):
            raise ValueError(f"digits must lie in {{0,1,2}}: {self.digits}")

    @property
    def n(self) -> int:
        return len(self.digits)

    @property
    def index(self) -> int:
        return point_index(self.digits)

    @classmethod
    def from_index(cls, idx: int, n: int) -> "Point":
        return cls(point_from_index(idx, n))

    @classmethod
    def from_string(cls, s: str) -> "Point":
        return cls(tuple(int(c) for c in s))

    def __str__(self) -> str:
        return "".join(str(d) for d in self.digits)


def pi1(digits: Sequence[int]) -> tuple[int, ...]:
    """1-recording projection: keep the 1s, zero everything else."""
    return tuple(1 if d == 1 else 0 for d in digits)


def pi2(digits: Sequence[int]) -> tuple[int, ...]:
    """2-recording projection: keep the 2s, zero everything else."""
    return tuple(2 if d == 2 else 0 for d in digits)


# ---------------------------------------------------------------------------
# cached index maps
# ---------------------------------------------------------------------------


@lru_cache(maxsize=32)
def pi_index_maps(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Arrays mapping each full-cube index to its projected side indices.

    Returns (m1, m2): m1[i] is the zero-one side index of the 1-recording
    projection of point i; m2[i] likewise for the 2-recording projection.
    """
    _check_n(n, dense=True)
    m1 = np.zeros(1, dtype=np.int64)
    m2 = np.zeros(1, dtype=np.int64)
    width = 1
    for _ in range(n):
        # prepend a coordinate (most significant digit varies slowest)
        m1 = np.concatenate([m1, m1 + width, m1])
        m2 = np.concatenate([m2, m2, m2 + width])
        width *= 2
    return m1, m2


@lru_cache(maxsize=32)
def digit_count_arrays(n: int) -> tuple[np.ndarray, np.ndarray]:
    """(count of digit 1, count of digit 2) for every full-cube index."""
    _check_n(n, dense=True)
    c1 = np.zeros(1, dtype=np.int8)
    c2 = np.zeros(1, dtype=np.int8)
    for _ in range(n):
        c1 = np.concatenate([c1, c1 + 1, c1])
        c2 = np.concatenate([c2, c2, c2 + 1])
    return c1, c2


@lru_cache(maxsize=32)
def popcount_array(n: int) -> np.ndarray:
    """Number of nonzero digits for every two-symbol side index (2^n cells)."""
    c = np.zeros(1, dtype=np.int8)
    for _ in range(n):
        c = np.concatenate([c, c + 1])
    return c


# ---------------------------------------------------------------------------
# CubeSet
# ---------------------------------------------------------------------------


class CubeSet:
    """A dense subset of one side of the cube.

    The bit vector is indexed by the side's own base encoding: base 3 for the
    full side, base 2 for the two-symbol sides (digit order 0 < 1 or 0 < 2,
    coordinate 1 most significant).
    """

    __slots__ = ("n", "side", "bits")

    def __init__(self, n: int, side: str = SIDE_FULL, bits: np.ndarray | None = None):
        _check_n(n, dense=True)
        if side not in SIDES:
            raise ValueError(f"unknown side {side!r}")
        size = 3**n if side == SIDE_FULL else 2**n
        if bits is None:
            bits = np.zeros(size, dtype=bool)
        else:
            bits = np.asarray(bits, dtype=bool)
            if bits.shape != (size,):
                raise ValueError(f"bit vector must have shape ({size},), got {bits.shape}")
            bits = bits.copy()
        self.n = n
        self.side = side
        self.bits = bits

    # -- constructors ------------------------------------------------------

    @classmethod
    def empty(cls, n: int, side: str = SIDE_FULL) -> "CubeSet":
        return cls(n, side)

    @classmethod
    def full(cls, n: int, side: str = SIDE_FULL) -> "CubeSet":
        s = cls(n, side)
        s.bits[:] = True
        return s

    @classmethod
    def from_bits(cls, n: int, side: str, bits: np.ndarray) -> "CubeSet":
        return cls(n, side, bits)

    @classmethod
    def from_points(cls, n: int, points: Iterable[Sequence[int]], side: str = SIDE_FULL) -> "CubeSet":
        s = cls(n, side)
        for p in points:
            s.bits[s.index_of(tuple(p))] = True
        return s

    # -- indexing ----------------------------------------------------------

    @property
    def alphabet(self) -> tuple[int, ...]:
        return SIDE_ALPHABET[self.side]

    @property
    def size(self) -> int:
        return int(self.bits.shape[0])

    def index_of(self, digits: Sequence[int]) -> int:
        if len(digits) != self.n:
            raise ValueError(f"expected {self.n} digits, got {len(digits)}")
        alpha = self.alphabet
        idx = 0
        base = len(alpha)
        for d in digits:
            try:
                v = alpha.index(d)
            except ValueError:
                raise ValueError(f"digit {d!r} invalid for side {self.side!r}") from None
            idx = idx * base + v
        return idx

    def digits_of(self, idx: int) -> tuple[int, ...]:
        alpha = self.alphabet
        base = len(alpha)
        out = [0] * self.n
        for pos in range(self.n - 1, -1, -1):
            idx, r = divmod(idx, base)
            out[pos] = alpha[r]
        return tuple(out)

    def __contains__(self, point) -> bool:
        digits = point.digits if isinstance(point, Point) else tuple(point)
        return bool(self.bits[self.index_of(digits)])

    def iter_points(self) -> Iterator[tuple[int, ...]]:
        for idx in np.flatnonzero(self.bits):
            yield self.digits_of(int(idx))

    # -- set algebra ---------------------------------------------------------

    def _check_compatible(self, other: "CubeSet") -> None:
        if self.n != other.n or self.side != other.side:
            raise ValueError("sets live on different cubes")

    def union(self, other: "CubeSet") -> "CubeSet":
        self._check_compatible(other)
        return CubeSet(self.n, self.side, self.bits | other.bits)

    def intersection(self, other: "CubeSet") -> "CubeSet":
        self._check_compatible(other)
        return CubeSet(self.n, self.side, self.bits & other.bits)

    def difference(self, other: "CubeSet") -> "CubeSet":
        self._check_compatible(other)
        return CubeSet(self.n, self.side, self.bits & ~other.bits)

    def complement(self) -> "CubeSet":
        return CubeSet(self.n, self.side, ~self.bits)

    def is_subset_of(self, other: "CubeSet") -> bool:
        self._check_compatible(other)
        return bool(np.all(~self.bits | other.bits))

    def count(self) -> int:
        return int(np.count_nonzero(self.bits))

    def density(self) -> Fraction:
        return Fraction(self.count(), self.size)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, CubeSet)
            and self.n == other.n
            and self.side == other.side
            and bool(np.array_equal(self.bits, other.bits))
        )

    def __hash__(self):
        return hash((self.n, self.side, self.bits.tobytes()))

    def __repr__(self) -> str:
        return f"CubeSet(n={self.n}, side={self.side!r}, count={self.count()})"

    def content_key(self) -> bytes:
        """Canonical bytes identifying (n, side, membership)."""
        return f"{self.n}|{self.side}|".encode() + np.packbits(self.bits).tobytes()

    # -- serialization -------------------------------------------------------

    def to_json(self) -> dict:
        points = ["".join(str(d) for d in p) for p in self.iter_points()]
        return {"n": self.n, "side": self.side, "points": points}

    @classmethod
    def from_json(cls, obj: Mapping) -> "CubeSet":
        n = obj["n"]
        side = obj["side"]
        s = cls(n, side)
        for word in obj["points"]:
            if len(word) != n:
                raise ValueError(f"point {word!r} has wrong length for n={n}")
            s.bits[s.index_of(tuple(int(c) for c in word))] = True
        return s

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, sort_keys=True, indent=0)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "CubeSet":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


# ---------------------------------------------------------------------------
# measures
# ---------------------------------------------------------------------------


def uniform_weights(side: str) -> dict[int, Fraction]:
    """Uniform weights over the side's own alphabet."""
    alpha = SIDE_ALPHABET[side]
    w = Fraction(1, len(alpha))
    return {a: w for a in alpha}


def pullback_weights(side: str) -> dict[int, Fraction]:
    """Per-coordinate weights induced on a projected side by the uniform
    measure on the full cube (the 1- or 2-recording projection of a uniform
    letter keeps its recorded symbol with probability 1/3)."""
    if side == SIDE_FULL:
        return uniform_weights(side)
    keep = 1 if side == SIDE_ZERO_ONE else 2
    return {0: Fraction(2, 3), keep: Fraction(1, 3)}


def measure(s: CubeSet, dists: Sequence[Mapping[int, Fraction]] | Mapping[int, Fraction]) -> Fraction:
    """Exact measure sum(x in S) prod_i d_i(x_i).

    `dists` is either one weight mapping reused for every coordinate or a
    sequence of n mappings over the set's side alphabet.
    """
    if isinstance(dists, Mapping):
        dists = [dists] * s.n
    if len(dists) != s.n:
        raise ValueError(f"need {s.n} per-coordinate distributions, got {len(dists)}")
    alpha = s.alphabet
    norm = []
    for i, d in enumerate(dists):
        d = {int(k): Fraction(v) for k, v in d.items()}
        if set(d) - set(alpha):
            raise ValueError(f"coordinate {i}: symbols {set(d) - set(alpha)} not in side alphabet")
        if sum(d.values(), Fraction(0)) != 1:
            raise ValueError(f"coordinate {i}: weights must sum to 1 exactly")
        if any(v < 0 for v in d.values()):
            raise ValueError(f"coordinate {i}: weights must be nonnegative")
        norm.append({a: d.get(a, Fraction(0)) for a in alpha})

    iid = all(norm[i] == norm[0] for i in range(1, s.n))
    if iid:
        w = norm[0]
        if s.side == SIDE_FULL:
            c1, c2 = digit_count_arrays(s.n)
            cls_ids = c1.astype(np.int64) * (s.n + 1) + c2
            counts = np.bincount(cls_ids[s.bits], minlength=(s.n + 1) ** 2)
            total = Fraction(0)
            for a in range(s.n + 1):
                for b in range(s.n + 1 - a):
                    cnt = int(counts[a * (s.n + 1) + b])
                    if cnt:
                        total += cnt * w[1] ** a * w[2] ** b * w[0] ** (s.n - a - b)
            return total
        hot = s.alphabet[1]
        pc = popcount_array(s.n).astype(np.int64)
        counts = np.bincount(pc[s.bits], minlength=s.n + 1)
        total = Fraction(0)
        for k in range(s.n + 1):
            cnt = int(counts[k])
            if cnt:
                total += cnt * w[hot] ** k * w[0] ** (s.n - k)
        return total

    # general per-coordinate case: exact integer products over set points
    dens = []
    nums = []
    for d in norm:
        den = lcm(*[v.denominator for v in d.values()])
        dens.append(den)
        nums.append({a: int(v * den) for a, v in d.items()})
    total_num = 0
    for p in s.iter_points():
        prod = 1
        for i, digit in enumerate(p):
            prod *= nums[i][digit]
        total_num += prod
    den_prod = 1
    for den in dens:
        den_prod *= den
    return Fraction(total_num, den_prod)


# ---------------------------------------------------------------------------
# combinatorial lines
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LineTemplate:
    """A combinatorial-line template: word over {0,1,2,*}, >= 1 wildcard.

    Digit 3 stands for the wildcard. The three points of the line substitute
    0, 1, 2 for every wildcard simultaneously.
    """

    word: tuple[int, ...]

    def __post_init__(self):
        if not self.word:
            raise ValueError("template must be nonempty")
        if any(d not in (0, 1, 2, WILDCARD) for d in self.word):
            raise ValueError(f"template digits must lie in {{0,1,2,*}}: {self.word}")
        if WILDCARD not in self.word:
            raise ValueError("a line template needs at least one wildcard")

    @property
    def n(self) -> int:
        return len(self.word)

    @classmethod
    def from_string(cls, s: str) -> "LineTemplate":
        return cls(tuple(WILDCARD if c == "*" else int(c) for c in s))

    def __str__(self) -> str:
        return "".join("*" if d == WILDCARD else str(d) for d in self.word)

    def point(self, letter: int) -> tuple[int, ...]:
        """The line's point with every wildcard set to `letter`."""
        if letter not in (0, 1, 2):
            raise ValueError("letter must be 0, 1 or 2")
        return tuple(letter if d == WILDCARD else d for d in self.word)

    def points(self) -> tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]:
        return self.point(0), self.point(1), self.point(2)


def line_count(n: int) -> int:
    """Number of combinatorial lines of the n-cube: 4^n - 3^n."""
    _check_n(n)
    return 4**n - 3**n


def enumerate_lines(n: int) -> Iterator[LineTemplate]:
    """All line templates in base-4 word order (digits ordered 0,1,2,*)."""
    if n > 12:
        raise ValueError("full line enumeration is supported for n <= 12")
    _check_n(n)
    for code in range(4**n):
        word = [0] * n
        c = code
        for pos in range(n - 1, -1, -1):
            c, word[pos] = divmod(c, 4)
        if WILDCARD in word:
            yield LineTemplate(tuple(word))


def lines_in_set(s: CubeSet, witness_limit: int = 10) -> tuple[int, list[LineTemplate]]:
    """Count the lines fully inside `s`; return up to witness_limit templates.

    Only full-side sets can contain lines.
    """
    if s.side != SIDE_FULL:
        raise ValueError("lines live in the full cube")
    if s.n > 12:
        raise ValueError("exhaustive line scan is supported for n <= 12")
    count, witnesses = kernels.scan_lines(s.bits, s.n, witness_limit)
    return count, [LineTemplate(tuple(w)) for w in witnesses]


def first_line_in_set(s: CubeSet) -> LineTemplate | None:
    cnt, wits = lines_in_set(s, witness_limit=1)
    return wits[0] if wits else None


# ---------------------------------------------------------------------------
# the disjoint product
# ---------------------------------------------------------------------------


def disjoint_product(e1: CubeSet, e2: CubeSet) -> CubeSet:
    """Full-side set of points whose 1-recording projection lies in e1 and
    whose 2-recording projection lies in e2."""
    if e1.side != SIDE_ZERO_ONE or e2.side != SIDE_ZERO_TWO:
        raise ValueError("disjoint product takes a zero-one set and a zero-two set")
    if e1.n != e2.n:
        raise ValueError("sets must share the dimension")
    m1, m2 = pi_index_maps(e1.n)
    return CubeSet(e1.n, SIDE_FULL, e1.bits[m1] & e2.bits[m2])


def project_set(s: CubeSet, which: int) -> CubeSet:
    """Image of a full-side set under the 1- or 2-recording projection."""
    if s.side != SIDE_FULL:
        raise ValueError("projection applies to full-side sets")
    if which not in (1, 2):
        raise ValueError("which must be 1 or 2")
    m1, m2 = pi_index_maps(s.n)
    m = m1 if which == 1 else m2
    side = SIDE_ZERO_ONE if which == 1 else SIDE_ZERO_TWO
    bits = np.zeros(2**s.n, dtype=bool)
    np.logical_or.at(bits, m[s.bits], True)
    return CubeSet(s.n, side, bits)

"""The density-increment engine over structured triples.

The engine works on triples (S, E1, E2) with S a subset of the disjoint
product E1 ⊠ E2 inside the full cube.  It provides:

* ``check_structure`` — exact containment/density checks plus the product
  pseudorandomness tester run on both side functions;
* ``one_round_partition`` — one round of the uniformization pipeline: split
  by an exhaustive restriction on a witness coordinate set, and give the
  correlated branches the phase-killing treatment (bucket the product-function
  phases, pick a Dirichlet multiplier per bucket, fuse a random block of each
  bucket, restrict the rest);
* ``uniformize`` — iterate rounds until the mass of entries whose sides fail
  the tester is below threshold, tracking the exact partition index;
* ``increment_step`` — the chain-restriction pipeline that either finds a
  combinatorial line outright, jumps to a denser triple, or extracts a denser
  sub-rectangle from the recorded-side split of a four-slot correlation;
* ``main_driver`` — alternate the two moves from a root instance, with a JSON
  trace and provenance-verified line reporting.

Every density, weight, and index in sight is an exact ``Fraction``; floats
appear only inside the numerical correlation maximizer and the tester's
confidence intervals.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from math import ceil, sqrt
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._rng import make_rng
from .corr import (FunctionTable, ProductFunction, TesterReport, TesterWitness,
                   kwise_correlation, max_product_correlation,
                   product_pseudorandom_test)
from .cube_core import (SIDE_FULL, SIDE_ZERO_ONE, SIDE_ZERO_TWO, SIDE_ALPHABET,
                        CubeSet, LineTemplate, disjoint_product, lines_in_set)
from .dist_core import (CANONICAL_DHJ_WEIGHTS, ChainParams, JointDist,
                        chain_pair, dhj_distribution, lift_pair_to_line,
                        line_fourth_power_law)
from .errors import BucketShortfallError, NoKError
from .restrict import CollapseSpec, Restriction, collapse_eq, restrict_set, sample_restriction

__all__ = [
    "ParamSet", "DensityTriple", "PartitionState", "NonproductWitness",
    "StructureReport", "DirichletResult", "UniformizeResult",
    "RestrictStep", "CollapseStep", "SideSplitStep",
    "LineFound", "NewTriple", "Diagnostic", "TraceRecord", "DriverTrace",
    "check_structure", "partition_index", "pigeonhole_buckets", "dirichlet_k",
    "one_round_partition", "uniformize", "increment_step",
    "omega_concentration", "main_driver",
]

_PI1 = {0: 0, 1: 1, 2: 0}   # 1-recording on single symbols
_PI2 = {0: 0, 1: 0, 2: 2}   # 2-recording on single symbols


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, str)):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(value).limit_denominator(10**12)
    raise TypeError(f"cannot interpret {value!r} as a rational")


def _frac_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def _child_seed(seed: int, *parts) -> int:
    """A stable derived integer seed from a base seed and a label path."""
    acc = zlib.crc32(repr(tuple(parts)).encode("utf-8"))
    return (int(seed) * 0x9E3779B1 + acc) % (2**63)


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParamSet:
    """All tunables of the engine, exact where they enter exact arithmetic.

    The exponent fields hold the asymptotic choices for the bucketing layout;
    at desk-scale dimensions those formulas degenerate (m**zeta is about 1),
    so when ``use_desk_layout`` is set the literal desk values
    (group_count, group_size, radius, eps, k_max) are used instead.
    """

    alpha: Fraction = Fraction(1, 2)          # structure density target
    tau: Fraction = Fraction(1, 16)           # uniformize margin
    tau_tilde: Fraction = Fraction(1, 64)     # increment margin
    gamma: float = 0.3                        # pseudorandomness level
    gamma_prime: float = 0.4                  # secondary level (reported)
    eta: Fraction = Fraction(1, 100)          # chain defect budget
    eta_prime: Fraction = Fraction(1, 40000)  # per-step chain flip scale
    K: int = 4                                # chain length
    zeta: Fraction = Fraction(1, 72)                  # bucket-count exponent
    dirichlet_exponent: Fraction = Fraction(1, 12)    # k_max exponent
    radius_exponent: Fraction = Fraction(1, 6)        # bucket radius exponent
    approx_exponent: Fraction = Fraction(1, 36)       # Dirichlet eps exponent
    nprime_exponent: Fraction = Fraction(1, 4)        # tester dimension exponent
    use_desk_layout: bool = True
    group_count: int = 4
    group_size: int = 4
    radius: Fraction = Fraction(1, 8)
    eps: Fraction = Fraction(1, 16)
    k_max: int = 8
    beta_floor: Fraction = Fraction(1, 3)     # survival floor for the chain restriction
    z_enum_digits: int = 7                    # exhaustive split up to 3**this branches
    u_enum_budget: int = 729                  # exhaustive tail restriction up to this many
    u_sample_count: int = 27                  # sampled tail restrictions otherwise
    tester_trials: int = 12
    tester_restarts: int = 2
    tester_sweeps: int = 40
    tester_tol: float = 1e-6
    maximizer_restarts: int = 3
    maximizer_sweeps: int = 80
    maximizer_tol: float = 1e-8
    case_trials: int = 4
    final_trials: int = 8
    fourwise_max_dim: int = 8
    omega_max_dim: int = 6
    round_cap: int = 6

    def __post_init__(self):
        for name in ("alpha", "tau", "tau_tilde", "eta", "eta_prime", "zeta",
                     "dirichlet_exponent", "radius_exponent", "approx_exponent",
                     "nprime_exponent", "radius", "eps", "beta_floor"):
            object.__setattr__(self, name, _as_fraction(getattr(self, name)))
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if not 0 < self.gamma_prime < 1:
            raise ValueError("gamma_prime must lie in (0, 1)")
        for name in ("zeta", "dirichlet_exponent", "radius_exponent",
                     "approx_exponent", "nprime_exponent"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.tau <= 0 or self.tau_tilde <= 0:
            raise ValueError("tau and tau_tilde must be positive")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.K * self.eta_prime > self.eta / 100:
            raise ValueError("requires K * eta_prime <= eta / 100")
        if min(self.group_count, self.group_size, self.k_max) < 1:
            raise ValueError("bucket layout values must be >= 1")
        if not 0 < self.radius <= Fraction(1, 2):
            raise ValueError("radius must lie in (0, 1/2]")
        if not 0 < self.eps <= Fraction(1, 2):
            raise ValueError("eps must lie in (0, 1/2]")
        if not 0 < self.beta_floor < 1:
            raise ValueError("beta_floor must lie in (0, 1)")

    @classmethod
    def desk_defaults(cls) -> "ParamSet":
        return cls()

    def bucket_layout(self, m: int) -> tuple[int, int, float, float, int]:
        """(group count, group size, radius, eps, k_max) for m survivors."""
        if self.use_desk_layout:
            return (self.group_count, self.group_size,
                    float(self.radius), float(self.eps), self.k_max)
        count = max(1, ceil(m ** float(self.zeta)))
        size = max(1, ceil(sqrt(m) / 2))
        return (count, size, m ** -float(self.radius_exponent),
                m ** -float(self.approx_exponent),
                max(1, ceil(m ** float(self.dirichlet_exponent))))

    def tester_dimension(self, n: int) -> int:
        return max(1, ceil(n ** float(self.nprime_exponent)))

    def to_json(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, Fraction):
                out[f.name] = {"num": str(v.numerator), "den": str(v.denominator)}
            else:
                out[f.name] = v
        return out

    @classmethod
    def from_json(cls, obj: Mapping) -> "ParamSet":
        kwargs = {}
        names = {f.name for f in fields(cls)}
        for key, v in obj.items():
            if key not in names:
                raise ValueError(f"unknown parameter {key!r}")
            if isinstance(v, Mapping) and set(v) == {"num", "den"}:
                v = Fraction(int(v["num"]), int(v["den"]))
            kwargs[key] = v
        return cls(**kwargs)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "ParamSet":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


# ---------------------------------------------------------------------------
# provenance steps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RestrictStep:
    """Fix the coordinates of a full-alphabet restriction on all three sets.

    The stored symbols are full-alphabet; the two side sets receive the
    1-recorded and 2-recorded images of ``z`` respectively.
    """

    restriction: Restriction

    def lift_template(self, t: LineTemplate) -> LineTemplate:
        return self.restriction.lift_template(t)

    def to_json(self) -> dict:
        return {"kind": "restrict", "restriction": self.restriction.to_json()}


@dataclass(frozen=True)
class CollapseStep:
    """Fuse each listed coordinate block to a single shared coordinate."""

    spec: CollapseSpec

    def lift_template(self, t: LineTemplate) -> LineTemplate:
        return self.spec.lift_template(t)

    def to_json(self) -> dict:
        return {"kind": "collapse", "n": self.spec.n,
                "blocks": [list(b) for b in self.spec.blocks]}


@dataclass(frozen=True, eq=False)
class SideSplitStep:
    """Replace the side sets and clip S to the new disjoint product."""

    e1: CubeSet
    e2: CubeSet

    def lift_template(self, t: LineTemplate) -> LineTemplate:
        return t

    def to_json(self) -> dict:
        return {"kind": "sides", "e1": self.e1.to_json(), "e2": self.e2.to_json()}


def _side_restrictions(r: Restriction) -> tuple[Restriction, Restriction]:
    z1 = tuple(_PI1[s] for s in r.z)
    z2 = tuple(_PI2[s] for s in r.z)
    return (Restriction(r.n, r.I, z1, delta=r.delta, seed=r.seed),
            Restriction(r.n, r.I, z2, delta=r.delta, seed=r.seed))


def _apply_step(s: CubeSet, e1: CubeSet, e2: CubeSet, step):
    if isinstance(step, RestrictStep):
        r = step.restriction
        r1, r2 = _side_restrictions(r)
        return restrict_set(s, r), restrict_set(e1, r1), restrict_set(e2, r2)
    if isinstance(step, CollapseStep):
        return (collapse_eq(s, step.spec), collapse_eq(e1, step.spec),
                collapse_eq(e2, step.spec))
    if isinstance(step, SideSplitStep):
        if step.e1.n != s.n:
            raise ValueError("side-split dimension mismatch")
        box = disjoint_product(step.e1, step.e2)
        return s.intersection(box), step.e1, step.e2
    raise TypeError(f"unknown provenance step {step!r}")


# ---------------------------------------------------------------------------
# density triples and partition states
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DensityTriple:
    """S inside the disjoint product of E1 (zero-one) and E2 (zero-two).

    ``alpha`` is the exact relative density of S in the product, ``delta1``
    and ``delta2`` the exact uniform densities of the side sets, ``mu_box``
    the exact uniform measure of the product.  ``provenance`` records the
    steps from the root instance; replaying them reproduces the triple, and
    lifting a line template through them embeds it back into the root cube.
    """

    s: CubeSet
    e1: CubeSet
    e2: CubeSet
    alpha: Fraction
    delta1: Fraction
    delta2: Fraction
    mu_box: Fraction
    provenance: tuple = ()

    @classmethod
    def from_sets(cls, s: CubeSet, e1: CubeSet, e2: CubeSet,
                  provenance: Iterable = ()) -> "DensityTriple":
        if s.side != SIDE_FULL or e1.side != SIDE_ZERO_ONE or e2.side != SIDE_ZERO_TWO:
            raise ValueError("expected sides full / zero-one / zero-two")
        if not (s.n == e1.n == e2.n):
            raise ValueError("dimension mismatch between S, E1, E2")
        box = disjoint_product(e1, e2)
        if not s.is_subset_of(box):
            raise ValueError("S must lie inside the disjoint product of E1 and E2")
        mu_box = box.density()
        alpha = s.density() / mu_box if mu_box else Fraction(0)
        return cls(s, e1, e2, alpha, e1.density(), e2.density(), mu_box,
                   tuple(provenance))

    @property
    def n(self) -> int:
        return self.s.n

    @property
    def mu_s(self) -> Fraction:
        return self.s.density()

    def box(self) -> CubeSet:
        return disjoint_product(self.e1, self.e2)

    def index_term(self) -> Fraction:
        return self.delta1 ** 2 + self.delta2 ** 2

    def extend(self, step) -> "DensityTriple":
        s, e1, e2 = _apply_step(self.s, self.e1, self.e2, step)
        return DensityTriple.from_sets(s, e1, e2, self.provenance + (step,))

    def replay(self, root_s: CubeSet, root_e1: CubeSet, root_e2: CubeSet) -> "DensityTriple":
        """Re-apply the provenance steps to the given root sets."""
        s, e1, e2 = root_s, root_e1, root_e2
        for step in self.provenance:
            s, e1, e2 = _apply_step(s, e1, e2, step)
        return DensityTriple.from_sets(s, e1, e2, self.provenance)

    def verify_provenance(self, root_s: CubeSet, root_e1: CubeSet,
                          root_e2: CubeSet) -> bool:
        got = self.replay(root_s, root_e1, root_e2)
        return (got.s.content_key() == self.s.content_key()
                and got.e1.content_key() == self.e1.content_key()
                and got.e2.content_key() == self.e2.content_key())

    def lift_template(self, template: LineTemplate) -> LineTemplate:
        out = template
        for step in reversed(self.provenance):
            out = step.lift_template(out)
        return out

    def content_key(self) -> bytes:
        return (self.s.content_key() + self.e1.content_key()
                + self.e2.content_key())

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "alpha": _frac_str(self.alpha),
            "delta1": _frac_str(self.delta1),
            "delta2": _frac_str(self.delta2),
            "mu_s": _frac_str(self.mu_s),
            "mu_box": _frac_str(self.mu_box),
            "counts": {"s": self.s.count(), "e1": self.e1.count(),
                       "e2": self.e2.count()},
            "provenance": [step.to_json() for step in self.provenance],
        }


@dataclass
class PartitionState:
    """A finite weighted family of triples with exact index bookkeeping."""

    entries: tuple
    diagnostics: dict | None = None

    def __post_init__(self):
        entries = tuple((Fraction(w), t) for w, t in self.entries)
        if not entries:
            raise ValueError("a partition state needs at least one entry")
        if any(w <= 0 for w, _ in entries):
            raise ValueError("weights must be positive")
        total = sum((w for w, _ in entries), Fraction(0))
        if total != 1:
            raise ValueError(f"weights sum to {total}, not 1")
        object.__setattr__(self, "entries", entries)

    @property
    def index(self) -> Fraction:
        return sum((w * t.index_term() for w, t in self.entries), Fraction(0))

    @classmethod
    def merged(cls, pairs: Iterable, diagnostics: dict | None = None) -> "PartitionState":
        """Merge entries with identical (S, E1, E2) content, keeping first seen."""
        acc: dict[bytes, list] = {}
        order: list[bytes] = []
        for w, t in pairs:
            key = t.content_key()
            if key in acc:
                acc[key][0] += w
            else:
                acc[key] = [Fraction(w), t]
                order.append(key)
        return cls(tuple((acc[k][0], acc[k][1]) for k in order), diagnostics)

    def to_json(self) -> dict:
        return {
            "index": _frac_str(self.index),
            "entries": [{"weight": _frac_str(w), "triple": t.to_json()}
                        for w, t in self.entries],
            "diagnostics": self.diagnostics,
        }


def partition_index(ps: PartitionState) -> Fraction:
    """The exact index: the weighted mean of delta1**2 + delta2**2."""
    return ps.index


# ---------------------------------------------------------------------------
# structure membership
# ---------------------------------------------------------------------------

@dataclass
class NonproductWitness:
    """A tester witness that one side function correlates with a product."""

    side: int                       # 1 or 2
    delta: Fraction
    restriction: Restriction        # over the side cube, side-alphabet symbols
    value: complex
    product: ProductFunction | None

    def to_json(self) -> dict:
        return {"side": self.side, "delta": _frac_str(self.delta),
                "restriction": self.restriction.to_json(),
                "value": [self.value.real, self.value.imag],
                "product": None if self.product is None else self.product.to_json()}


def _trivial_tester_report(gamma: float, n_prime: int) -> TesterReport:
    # An identically zero side function has zero correlation with every
    # product, against every restriction; no sampling is needed.
    return TesterReport(verdict="PSEUDORANDOM", gamma=gamma, n_prime=n_prime,
                        stats=[], witness=None)


@dataclass
class StructureReport:
    """Exact membership checks plus the two side tester verdicts."""

    n: int
    alpha_target: Fraction
    contains: bool
    mu_s: Fraction
    mu_box: Fraction
    density_ok: bool
    n_prime: int
    side1: TesterReport
    side2: TesterReport
    witness: NonproductWitness | None

    @property
    def pseudorandom(self) -> bool:
        return (self.side1.verdict == "PSEUDORANDOM"
                and self.side2.verdict == "PSEUDORANDOM")

    @property
    def is_member(self) -> bool:
        return self.contains and self.density_ok and self.pseudorandom

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "alpha_target": _frac_str(self.alpha_target),
            "contains": self.contains,
            "mu_s": _frac_str(self.mu_s),
            "mu_box": _frac_str(self.mu_box),
            "density_ok": self.density_ok,
            "n_prime": self.n_prime,
            "side1": self.side1.to_json(),
            "side2": self.side2.to_json(),
            "pseudorandom": self.pseudorandom,
            "is_member": self.is_member,
            "witness": None if self.witness is None else self.witness.to_json(),
        }


def check_structure(t: DensityTriple, p: ParamSet, *, trials: int | None = None,
                    seed: int = 0, n_prime: int | None = None) -> StructureReport:
    """Exact containment/density checks plus both side tester runs.

    Containment and the density inequality mu(S) >= alpha * mu(box) are exact;
    the tester verdicts are one-sided statistical statements at the tester's
    own confidence level.  A side set that is empty or full has an identically
    zero centered indicator, which is pseudorandom by inspection.
    """
    contains = t.s.is_subset_of(t.box())
    density_ok = t.mu_s >= p.alpha * t.mu_box
    npr = p.tester_dimension(t.n) if n_prime is None else n_prime
    trials = p.tester_trials if trials is None else trials

    reports = []
    witness: NonproductWitness | None = None
    for side, e in ((1, t.e1), (2, t.e2)):
        cnt = e.count()
        if cnt == 0 or cnt == e.bits.size:
            reports.append(_trivial_tester_report(p.gamma, npr))
            continue
        delta_e = e.density()
        f = FunctionTable.from_cubeset(e, shift=float(delta_e))
        mu = {a: Fraction(1, 2) for a in SIDE_ALPHABET[e.side]}
        rep = product_pseudorandom_test(
            f, npr, p.gamma, mu, trials=trials,
            seed=_child_seed(seed, "structure", side),
            restarts=p.tester_restarts, max_sweeps=p.tester_sweeps,
            tol=p.tester_tol)
        reports.append(rep)
        if rep.verdict == "NOT" and rep.witness is not None and witness is None:
            w: TesterWitness = rep.witness
            witness = NonproductWitness(side, w.delta, w.restriction,
                                        w.value, w.product)
    return StructureReport(t.n, p.alpha, contains, t.mu_s, t.mu_box,
                           density_ok, npr, reports[0], reports[1], witness)


# ---------------------------------------------------------------------------
# bucketing and Dirichlet approximation
# ---------------------------------------------------------------------------

def _torus_dist(a: np.ndarray, b: np.ndarray) -> float:
    d = np.abs(np.mod(a - b, 1.0))
    return float(np.max(np.minimum(d, 1.0 - d), initial=0.0))


def pigeonhole_buckets(phases: Sequence, group_count: int, group_size: int,
                       radius) -> list[list[int]]:
    """Disjoint index groups, each inside one grid cell of width ``radius``.

    Cells are filled greedily, largest cell first (ties by cell key), indices
    ascending inside a cell.  Pairwise torus distances within a group are at
    most ``radius`` by construction.  When the vectors cannot fill the request
    a BucketShortfall error reports the achievable layout: the group count
    achievable at the requested size, and the largest size achievable at the
    requested count.
    """
    arr = np.mod(np.asarray(phases, dtype=np.float64), 1.0)
    if arr.ndim == 1:
        arr = arr[:, None]
    if group_count < 1 or group_size < 1:
        raise ValueError("group_count and group_size must be >= 1")
    w = float(radius)
    if not 0 < w <= 0.5:
        raise ValueError("radius must lie in (0, 1/2]")
    cells: dict[tuple, list[int]] = {}
    keys = np.floor(arr / w).astype(np.int64)
    for i, key in enumerate(map(tuple, keys)):
        cells.setdefault(key, []).append(i)
    ordered = sorted(cells.items(), key=lambda kv: (-len(kv[1]), kv[0]))

    groups: list[list[int]] = []
    for _, members in ordered:
        pos = 0
        while len(groups) < group_count and pos + group_size <= len(members):
            groups.append(members[pos:pos + group_size])
            pos += group_size
        if len(groups) == group_count:
            break
    if len(groups) < group_count:
        achievable_count = sum(len(m) // group_size for m in cells.values())
        achievable_size = 0
        for s in range(group_size, 0, -1):
            if sum(len(m) // s for m in cells.values()) >= group_count:
                achievable_size = s
                break
        raise BucketShortfallError(group_count, group_size,
                                   achievable_count, achievable_size)
    for grp in groups:
        for a in grp:
            for b in grp:
                if _torus_dist(arr[a], arr[b]) > w + 1e-12:
                    raise AssertionError("bucket radius violated")
    return groups


@dataclass(frozen=True)
class DirichletResult:
    k: int
    norm: float
    scan: tuple

    def to_json(self) -> dict:
        return {"k": self.k, "norm": self.norm,
                "scan": [[k, v] for k, v in self.scan]}


def dirichlet_k(v, k_max: int, eps) -> DirichletResult:
    """The smallest multiplier k in [1, k_max] with ||k*v||_inf <= eps.

    The norm is the torus distance to the integer lattice.  The scan of all
    tried multipliers is returned as a certificate; if none succeeds a NoK
    error carries the full scan.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    arr = np.mod(np.asarray(v, dtype=np.float64).ravel(), 1.0)
    epsf = float(eps)
    scan = []
    for k in range(1, k_max + 1):
        w = np.mod(k * arr, 1.0)
        norm = float(np.max(np.minimum(w, 1.0 - w), initial=0.0))
        scan.append((k, norm))
        if norm <= epsf:
            return DirichletResult(k, norm, tuple(scan))
    raise NoKError(k_max, epsf, tuple(scan))


# ---------------------------------------------------------------------------
# table-splitting helpers
# ---------------------------------------------------------------------------

def _axis_split(bits: np.ndarray, card: int, n: int,
                fixed: Sequence[int]) -> np.ndarray:
    """Rows of a cube table indexed by the digits of the fixed coordinates.

    Row r is the base-``card`` code of the fixed coordinates (listed order,
    first listed most significant); each row holds the subtable over the
    surviving coordinates in ascending order, coordinate 1 most significant —
    the same layout ``restrict_set`` produces.
    """
    fixed = list(fixed)
    fixed_set = set(fixed)
    rest = [c for c in range(1, n + 1) if c not in fixed_set]
    axes = [c - 1 for c in fixed] + [c - 1 for c in rest]
    cube = bits.reshape((card,) * n)
    return np.ascontiguousarray(cube.transpose(axes)).reshape(
        card ** len(fixed), -1)


def _digit_matrix(count: int, width: int, card: int) -> np.ndarray:
    """Base-``card`` digits of 0..count-1, first column most significant."""
    codes = np.arange(count, dtype=np.int64)
    digs = np.zeros((count, max(width, 1)), dtype=np.int8)
    for pos in range(width - 1, -1, -1):
        digs[:, pos] = codes % card
        codes //= card
    return digs[:, :width] if width else np.zeros((count, 0), dtype=np.int8)


def _recorded_codes(digs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Binary side codes of full-alphabet digit rows (1-recorded, 2-recorded)."""
    width = digs.shape[1]
    pows = (2 ** np.arange(width - 1, -1, -1)).astype(np.int64) if width else \
        np.zeros(0, dtype=np.int64)
    p1 = (digs == 1).astype(np.int64) @ pows if width else np.zeros(len(digs), dtype=np.int64)
    p2 = (digs == 2).astype(np.int64) @ pows if width else np.zeros(len(digs), dtype=np.int64)
    return p1, p2


def _collapse_gather(m: int, blocks: Sequence[Sequence[int]], card: int) -> np.ndarray:
    """Index map realizing the block-fusing collapse on an m-coordinate table.

    Output coordinate i carries block i (listed order); all of 1..m must be
    covered by the blocks.  Entry q of the result is the source index of the
    point where every coordinate of block i holds output digit i of q.
    """
    cover = sorted(c for blk in blocks for c in blk)
    if cover != list(range(1, m + 1)):
        raise ValueError("blocks must cover the coordinates exactly")
    place = np.array([sum(card ** (m - c) for c in blk) for blk in blocks],
                     dtype=np.int64)
    digs = _digit_matrix(card ** len(blocks), len(blocks), card).astype(np.int64)
    return digs @ place


def _embed_codes(m: int, symbols: Sequence[int]) -> np.ndarray:
    """Full-cube indices of the points with every digit in ``symbols``."""
    codes = np.zeros(1, dtype=np.int64)
    base = np.asarray(symbols, dtype=np.int64)
    for _ in range(m):
        codes = (codes[:, None] * 3 + base[None, :]).ravel()
    return codes


def _pack_rows(*row_groups: np.ndarray) -> list[bytes]:
    """One content byte-string per row across the given aligned row blocks."""
    combined = np.concatenate([np.asarray(g, dtype=np.uint8) for g in row_groups],
                              axis=1)
    packed = np.packbits(combined, axis=1)
    return [row.tobytes() for row in packed]


# ---------------------------------------------------------------------------
# one round of uniformization
# ---------------------------------------------------------------------------

def _normalized_phase_rows(product: ProductFunction) -> np.ndarray:
    """Per-coordinate phase vectors with the first alphabet entry pinned to 0."""
    ph = product.phases()
    return np.mod(ph - ph[:, :1], 1.0)


def one_round_partition(t: DensityTriple, witness: NonproductWitness,
                        p: ParamSet, seed: int = 0) -> PartitionState:
    """Split a triple along a witness coordinate set, defusing correlated parts.

    The witness's fixed coordinate set I (clipped to the exhaustive-split
    budget) is enumerated exactly: each assignment z gets weight 3**-|I|.
    Branches whose restricted side function still correlates with some product
    at level gamma (re-measured by the maximizer per branch) receive the
    phase-killing treatment: bucket the per-coordinate phases, choose a
    Dirichlet multiplier per bucket, fuse a random block of that size in each
    bucket, and restrict all remaining coordinates (exhaustively when the
    tail is small, by seeded sampling otherwise).  All weights and densities
    stay exact; layout fallbacks and drift statistics land in diagnostics.
    """
    if witness is None:
        raise ValueError("one_round_partition requires a non-pseudorandomness witness")
    n = t.n
    side = witness.side
    if side not in (1, 2):
        raise ValueError("witness side must be 1 or 2")
    e_side = t.e1 if side == 1 else t.e2
    side_alpha = SIDE_ALPHABET[e_side.side]
    delta_side = t.delta1 if side == 1 else t.delta2

    max_fix = min(p.z_enum_digits, n - 1)
    I = tuple(witness.restriction.I[:max_fix])
    m = n - len(I)

    s_rows = _axis_split(t.s.bits, 3, n, I)
    e1_rows = _axis_split(t.e1.bits, 2, n, I)
    e2_rows = _axis_split(t.e2.bits, 2, n, I)
    z_digits = _digit_matrix(3 ** len(I), len(I), 3)
    z_p1, z_p2 = _recorded_codes(z_digits)
    side_codes = z_p1 if side == 1 else z_p2

    group_count, group_size, radius, eps, k_max = p.bucket_layout(m)
    uniform_side = {a: Fraction(1, 2) for a in side_alpha}

    diag: dict = {
        "witness_side": side, "I": list(I), "m": m,
        "z_total": int(3 ** len(I)), "satisfying": 0,
        "plain_fallbacks": 0, "bucket_shortfalls": 0, "nok_drops": 0,
        "k_exceeds_group": 0, "u_sampled_mass": "0",
        "layout": {"group_count": group_count, "group_size": group_size,
                   "radius": radius, "eps": eps, "k_max": k_max},
    }

    # Per distinct side-restriction: does it still correlate, and with what
    # phases?  The answer depends only on the recorded image of z.
    sat_cache: dict[int, tuple[bool, np.ndarray | None]] = {}

    def _branch_info(code: int) -> tuple[bool, np.ndarray | None]:
        if code in sat_cache:
            return sat_cache[code]
        table = (e1_rows if side == 1 else e2_rows)[code]
        f = FunctionTable(m, side_alpha,
                          table.astype(np.float64) - float(delta_side))
        rep = max_product_correlation(
            f, uniform_side, method="alternating",
            restarts=p.maximizer_restarts, tol=p.maximizer_tol,
            seed=_child_seed(seed, "branch", code),
            max_sweeps=p.maximizer_sweeps, real_pass=False)
        if rep.magnitude >= p.gamma and rep.witness is not None:
            info = (True, _normalized_phase_rows(rep.witness))
        else:
            info = (False, None)
        sat_cache[code] = info
        return info

    w_z = Fraction(1, 3 ** len(I))
    pairs: list[tuple[Fraction, DensityTriple]] = []
    plain_acc: dict[bytes, list] = {}
    plain_order: list[bytes] = []
    u_sampled_mass = Fraction(0)

    def _plain_entry(zc: int) -> None:
        key = _pack_rows(s_rows[zc:zc + 1], e1_rows[z_p1[zc]:z_p1[zc] + 1],
                         e2_rows[z_p2[zc]:z_p2[zc] + 1])[0]
        if key in plain_acc:
            plain_acc[key][0] += w_z
        else:
            plain_acc[key] = [Fraction(w_z), zc]
            plain_order.append(key)

    fused_layouts: dict[int, tuple | None] = {}

    def _layout_for(code: int, phases: np.ndarray) -> tuple | None:
        """(blocks, J, spec, gathers...) for a satisfying side-code, or None."""
        if code in fused_layouts:
            return fused_layouts[code]
        rng = make_rng(_child_seed(seed, "layout", code), "oneround")
        groups: list[list[int]] | None = None
        try:
            groups = pigeonhole_buckets(phases, group_count, group_size, radius)
        except BucketShortfallError as exc:
            diag["bucket_shortfalls"] += 1
            if exc.achievable_count >= 1:
                groups = pigeonhole_buckets(phases, exc.achievable_count,
                                            group_size, radius)
            elif exc.achievable_size >= 1:
                groups = pigeonhole_buckets(phases, group_count,
                                            exc.achievable_size, radius)
        blocks: list[tuple[int, ...]] = []
        if groups:
            for grp in groups:
                try:
                    res = dirichlet_k(phases[grp[0]], k_max, eps)
                except NoKError:
                    diag["nok_drops"] += 1
                    continue
                if res.k > len(grp):
                    diag["k_exceeds_group"] += 1
                    continue
                chosen = sorted(int(grp[i]) + 1
                                for i in rng.choice(len(grp), size=res.k,
                                                    replace=False))
                blocks.append(tuple(chosen))
        if not blocks:
            fused_layouts[code] = None
            return None
        blocks.sort(key=lambda b: b[0])
        fused = sorted(c for blk in blocks for c in blk)
        J = tuple(c for c in range(1, m + 1) if c not in set(fused))
        rank = {c: i + 1 for i, c in enumerate(fused)}
        renamed = [tuple(rank[c] for c in blk) for blk in blocks]
        m_rem = len(fused)
        spec = CollapseSpec(m_rem, renamed)
        gather3 = _collapse_gather(m_rem, renamed, 3)
        gather2 = _collapse_gather(m_rem, renamed, 2)
        u_digits = None
        if 3 ** len(J) <= p.u_enum_budget:
            u_digits = _digit_matrix(3 ** len(J), len(J), 3)
        layout = (tuple(blocks), J, spec, gather3, gather2, u_digits)
        fused_layouts[code] = layout
        return layout

    for zc in range(3 ** len(I)):
        code = int(side_codes[zc])
        sat, phases = _branch_info(code)
        if not sat:
            _plain_entry(zc)
            continue
        diag["satisfying"] += 1
        layout = _layout_for(code, phases)
        if layout is None:
            diag["plain_fallbacks"] += 1
            _plain_entry(zc)
            continue
        blocks, J, spec, gather3, gather2, u_digits = layout
        s_z = s_rows[zc]
        e1_z = e1_rows[z_p1[zc]]
        e2_z = e2_rows[z_p2[zc]]
        su_rows = _axis_split(s_z, 3, m, J)
        e1u_rows = _axis_split(e1_z, 2, m, J)
        e2u_rows = _axis_split(e2_z, 2, m, J)
        if u_digits is not None:
            u_codes = np.arange(3 ** len(J))
            digs = u_digits
            per_u = Fraction(1, 3 ** len(J))
        else:
            rng_u = make_rng(_child_seed(seed, "tail", zc), "oneround")
            u_codes = rng_u.integers(0, 3 ** len(J), size=p.u_sample_count)
            digs = _digit_matrix(3 ** len(J), len(J), 3)[u_codes] \
                if len(J) else np.zeros((p.u_sample_count, 0), dtype=np.int8)
            per_u = Fraction(1, p.u_sample_count)
            u_sampled_mass += w_z
        u_p1, u_p2 = _recorded_codes(digs)
        s_cols = su_rows[u_codes][:, gather3]
        e1_cols = e1u_rows[u_p1][:, gather2]
        e2_cols = e2u_rows[u_p2][:, gather2]
        keys = _pack_rows(s_cols, e1_cols, e2_cols)
        seen: dict[bytes, list] = {}
        order: list[bytes] = []
        for pos, key in enumerate(keys):
            if key in seen:
                seen[key][0] += 1
            else:
                seen[key] = [1, pos]
                order.append(key)
        z_sym = tuple(int(d) for d in z_digits[zc])
        r_z = Restriction(n, I, z_sym)
        for key in order:
            hits, pos = seen[key]
            u_sym = tuple(int(d) for d in digs[pos])
            steps = (RestrictStep(r_z), RestrictStep(Restriction(m, J, u_sym)),
                     CollapseStep(spec))
            entry = DensityTriple.from_sets(
                CubeSet.from_bits(len(blocks), SIDE_FULL, s_cols[pos].copy()),
                CubeSet.from_bits(len(blocks), SIDE_ZERO_ONE, e1_cols[pos].copy()),
                CubeSet.from_bits(len(blocks), SIDE_ZERO_TWO, e2_cols[pos].copy()),
                t.provenance + steps)
            pairs.append((w_z * per_u * hits, entry))

    for key in plain_order:
        weight, zc = plain_acc[key]
        z_sym = tuple(int(d) for d in z_digits[zc])
        entry = DensityTriple.from_sets(
            CubeSet.from_bits(m, SIDE_FULL, s_rows[zc].copy()),
            CubeSet.from_bits(m, SIDE_ZERO_ONE, e1_rows[z_p1[zc]].copy()),
            CubeSet.from_bits(m, SIDE_ZERO_TWO, e2_rows[z_p2[zc]].copy()),
            t.provenance + (RestrictStep(Restriction(n, I, z_sym)),))
        pairs.append((weight, entry))

    diag["u_sampled_mass"] = _frac_str(u_sampled_mass)
    state = PartitionState.merged(pairs, diag)

    # Drift and gain accounting (exact, reported, never silently dropped).
    es = sum((w * e.mu_s for w, e in state.entries), Fraction(0))
    e1m = sum((w * e.delta1 for w, e in state.entries), Fraction(0))
    e2m = sum((w * e.delta2 for w, e in state.entries), Fraction(0))
    ebox = sum((w * e.mu_box for w, e in state.entries), Fraction(0))
    gain = state.index - t.index_term()
    diag["drift"] = {
        "mu_s": _frac_str(es - t.mu_s),
        "mu_e1": _frac_str(e1m - t.delta1),
        "mu_e2": _frac_str(e2m - t.delta2),
        "mu_box": _frac_str(ebox - t.mu_box),
    }
    diag["index_before"] = _frac_str(t.index_term())
    diag["index_after"] = _frac_str(state.index)
    diag["index_gain"] = _frac_str(gain)
    diag["gain_target"] = p.gamma ** 4 / 2
    diag["gain_realized"] = bool(gain > 0)
    diag["gain_meets_target"] = bool(float(gain) >= p.gamma ** 4 / 2)
    return state


# ---------------------------------------------------------------------------
# the uniformization loop
# ---------------------------------------------------------------------------

@dataclass
class UniformizeResult:
    """Outcome of the uniformization loop.

    ``triple`` is the selected entry (a good one of relative density at least
    alpha + tau/2 when available — ``selected_good`` says whether that bar was
    met).  ``nonterminated`` flags round-cap exhaustion; ``trajectory`` is the
    exact index after each round.
    """

    triple: DensityTriple
    state: PartitionState
    rounds: int
    terminated: bool
    nonterminated: bool
    trajectory: list
    not_good_mass: Fraction
    actionable_mass: Fraction
    selected_good: bool
    round_reports: list

    def to_json(self) -> dict:
        return {
            "rounds": self.rounds,
            "terminated": self.terminated,
            "nonterminated": self.nonterminated,
            "trajectory": [_frac_str(x) for x in self.trajectory],
            "not_good_mass": _frac_str(self.not_good_mass),
            "actionable_mass": _frac_str(self.actionable_mass),
            "selected_good": self.selected_good,
            "triple": self.triple.to_json(),
            "round_reports": self.round_reports,
        }


def uniformize(t: DensityTriple, p: ParamSet, round_cap: int | None = None,
               seed: int = 0) -> UniformizeResult:
    """Partition until the not-good mass is at most mu(box) * tau / 100.

    Each round replaces every entry that carries an actionable tester witness
    by its one-round partition; the exact index must not decrease (asserted).
    Entries the tester cannot settle, and entries whose partition is a no-op,
    are kept and flagged — if only such entries remain above threshold the
    loop stops with the nonterminated flag rather than spinning.
    """
    if t.mu_s < (p.alpha + p.tau) * t.mu_box:
        raise ValueError("uniformize requires mu(S) >= (alpha + tau) * mu(box)")
    cap = p.round_cap if round_cap is None else round_cap
    threshold = t.mu_box * p.tau / 100

    state = PartitionState(((Fraction(1), t),))
    trajectory = [state.index]
    reports: list[dict] = []
    report_cache: dict[bytes, StructureReport] = {}
    stuck: set[bytes] = set()

    def _report_for(entry: DensityTriple, tag: int) -> StructureReport:
        key = entry.content_key()
        if key not in report_cache:
            report_cache[key] = check_structure(
                entry, p, seed=_child_seed(seed, "uniformize", tag, len(report_cache)))
        return report_cache[key]

    terminated = False
    nonterminated = False
    not_good = Fraction(0)
    actionable = Fraction(0)
    rounds = 0
    for rnd in range(cap + 1):
        infos = []
        not_good = Fraction(0)
        actionable = Fraction(0)
        inconclusive = Fraction(0)
        for w, entry in state.entries:
            rep = _report_for(entry, rnd)
            good = rep.pseudorandom
            act = (not good and rep.witness is not None
                   and entry.content_key() not in stuck)
            if not good:
                not_good += w
                if act:
                    actionable += w
                else:
                    inconclusive += w
            infos.append((w, entry, rep, act))
        reports.append({
            "round": rnd,
            "entries": len(state.entries),
            "index": _frac_str(state.index),
            "not_good_mass": _frac_str(not_good),
            "actionable_mass": _frac_str(actionable),
            "unactionable_mass": _frac_str(inconclusive),
        })
        if not_good <= threshold:
            terminated = True
            break
        if actionable == 0 or rnd == cap:
            nonterminated = True
            break
        prev_index = state.index
        new_pairs: list[tuple[Fraction, DensityTriple]] = []
        for w, entry, rep, act in infos:
            if not act:
                new_pairs.append((w, entry))
                continue
            sub = one_round_partition(entry, rep.witness, p,
                                      seed=_child_seed(seed, "round", rnd,
                                                       entry.content_key()))
            if (len(sub.entries) == 1
                    and sub.entries[0][1].content_key() == entry.content_key()):
                stuck.add(entry.content_key())
                new_pairs.append((w, entry))
                continue
            new_pairs.extend((w * w2, t2) for w2, t2 in sub.entries)
        state = PartitionState.merged(new_pairs)
        assert state.index >= prev_index, \
            "partition index decreased across a round"
        trajectory.append(state.index)
        rounds = rnd + 1

    # Selection: prefer good entries meeting the alpha + tau/2 density bar.
    bar = p.alpha + p.tau / 2
    best_good = None
    best_any = None
    for w, entry in state.entries:
        rep = _report_for(entry, -1)
        dens = entry.alpha
        if best_any is None or dens > best_any[0]:
            best_any = (dens, entry)
        if rep.pseudorandom and entry.mu_box > 0 and entry.mu_s >= bar * entry.mu_box:
            if best_good is None or dens > best_good[0]:
                best_good = (dens, entry)
    if best_good is not None:
        chosen, selected_good = best_good[1], True
    else:
        chosen, selected_good = best_any[1], False
    return UniformizeResult(chosen, state, rounds, terminated, nonterminated,
                            trajectory, not_good, actionable, selected_good,
                            reports)


# ---------------------------------------------------------------------------
# the increment step
# ---------------------------------------------------------------------------

@dataclass
class LineFound:
    """A combinatorial line, reported in both local and root coordinates."""

    template_root: LineTemplate
    template_local: LineTemplate
    stage: str
    line_count: int
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"outcome": "LINE_FOUND", "stage": self.stage,
                "line_count": self.line_count,
                "template_root": str(self.template_root),
                "template_local": str(self.template_local),
                "diagnostics": self.diagnostics}


@dataclass
class NewTriple:
    """A strictly denser structured triple, with the exact density gain."""

    triple: DensityTriple
    stage: str
    gain: Fraction
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"outcome": "NEW_TRIPLE", "stage": self.stage,
                "gain": _frac_str(self.gain), "triple": self.triple.to_json(),
                "diagnostics": self.diagnostics}


@dataclass
class Diagnostic:
    """No line and no certified increment; every measured quantity reported."""

    report: dict

    def to_json(self) -> dict:
        return {"outcome": "DIAGNOSTIC", "report": self.report}


def _chain_best_pair(t: DensityTriple, p: ParamSet) -> tuple[dict, JointDist]:
    """The exact best two-step pair law for S, with the audit trail."""
    cp = ChainParams.create(p.K, p.eta_prime, p.eta, t.n)
    best_val: Fraction | None = None
    best_pair = None
    best_xi = None
    values = []
    for i in range(p.K):
        for j in range(i + 1, p.K + 1):
            xi = chain_pair(cp, i, j)
            rep = kwise_correlation([t.s, t.s], xi, t.n, mode="exact")
            val = rep.exact_value
            values.append({"i": i, "j": j, "value": _frac_str(val)})
            if best_val is None or val > best_val:
                best_val, best_pair, best_xi = val, (i, j), xi
    mu_s = t.mu_s
    bound = mu_s ** 2 - 6 * p.eta - mu_s / p.K
    info = {
        "pairs": values,
        "best_pair": list(best_pair),
        "best_value": _frac_str(best_val),
        "bound": _frac_str(bound),
        "meets_bound": bool(best_val >= bound),
    }
    return info, best_xi


def _fourwise_correlation(t1: DensityTriple, alpha: Fraction,
                          xblock: JointDist) -> Fraction:
    """E[f(x)f(x')f(x'')f(x''')] for f = 1_S - alpha 1_box, exactly.

    Expands the product into 16 indicator terms, each an exact four-slot
    template sum over the x-block law.
    """
    box = t1.box()
    total = Fraction(0)
    for mask in range(16):
        sets = [t1.s if (mask >> slot) & 1 else box for slot in range(4)]
        k = bin(mask).count("1")
        rep = kwise_correlation(sets, xblock, t1.n, mode="exact")
        total += (-alpha) ** (4 - k) * rep.exact_value
    return total


def _point_index(digits: Sequence[int], card: int) -> int:
    idx = 0
    for d in digits:
        idx = idx * card + int(d)
    return idx


def _final_increment(t1: DensityTriple, alpha_ref: Fraction, p: ParamSet,
                     seed: int, diag: dict):
    """The recorded-side split: aligned four-slot restriction and F-extraction.

    Decomposes the x-block law against the uniform three-atom component, draws
    aligned fixings (z, z', z'', z''') from the residual, keeps draws where
    the zero-filled z-point lies in the box, builds the four candidate side
    pairs from the z'' (1-recorded) and z' (2-recorded) restrictions, and
    recounts each candidate exactly.  Returns a LineFound or NewTriple when
    one is certified, else None with everything recorded in ``diag``.
    """
    m = t1.n
    xblock = line_fourth_power_law().marginal(["x", "x'", "x''", "x'''"])
    four: dict = {"computed": False}
    if m <= p.fourwise_max_dim:
        val = _fourwise_correlation(t1, alpha_ref, xblock)
        target = alpha_ref ** 12 * t1.delta1 ** 2 * t1.delta2 ** 2 / 2 ** 10
        four = {"computed": True, "value": _frac_str(val),
                "target": _frac_str(target), "meets_target": bool(val >= target)}
    diag["fourwise"] = four

    component = JointDist.from_rows(
        [(0, 1, 2)] * 4,
        {(0, 0, 0, 0): Fraction(1, 3), (0, 2, 0, 2): Fraction(1, 3),
         (0, 0, 1, 1): Fraction(1, 3)},
        ["x", "x'", "x''", "x'''"])
    beta2, resid2 = xblock.decompose(component)
    diag["beta2"] = _frac_str(beta2)
    if resid2 is None:
        diag["final_trials"] = [{"skip": "degenerate decomposition"}]
        return None
    resid_rows = resid2.rows
    probs = np.array([float(q) for _, q in resid_rows])
    probs = probs / probs.sum()

    box1 = t1.box()
    threshold_mult = alpha_ref - p.tau_tilde + alpha_ref ** 12 / 2 ** 14
    trials_log = []
    diag["final_trials"] = trials_log
    for ft in range(p.final_trials):
        rng = make_rng(_child_seed(seed, "final", ft), "recorded-split")
        mask = rng.random(m) < float(1 - beta2)
        fixed = tuple(c for c in range(1, m + 1) if mask[c - 1])
        m_surv = m - len(fixed)
        entry: dict = {"trial": ft, "fixed": list(fixed)}
        trials_log.append(entry)
        if m_surv == 0:
            entry["skip"] = "no surviving coordinates"
            continue
        draws = rng.choice(len(resid_rows), size=len(fixed), p=probs) \
            if fixed else np.zeros(0, dtype=np.int64)
        atoms = [resid_rows[int(d)][0] for d in draws]
        z0 = tuple(a[0] for a in atoms)
        z1 = tuple(a[1] for a in atoms)
        z2 = tuple(a[2] for a in atoms)
        z3 = tuple(a[3] for a in atoms)
        point = [0] * m
        for c, sym in zip(fixed, z0):
            point[c - 1] = sym
        if not box1.bits[_point_index(point, 3)]:
            entry["skip"] = "zero-filled point outside the box"
            continue
        r3 = Restriction(m, fixed, z3)
        t3 = t1.extend(RestrictStep(r3))
        if t3.s.count():
            cnt, wits = lines_in_set(t3.s, witness_limit=1)
            if cnt:
                return LineFound(t3.lift_template(wits[0]), wits[0],
                                 "recorded-split-scan", cnt, diag)
        s_z2 = restrict_set(t1.s, Restriction(m, fixed, z2))
        b_z2 = restrict_set(box1, Restriction(m, fixed, z2))
        s_z1 = restrict_set(t1.s, Restriction(m, fixed, z1))
        b_z1 = restrict_set(box1, Restriction(m, fixed, z1))
        emb01 = _embed_codes(m_surv, (0, 1))
        emb02 = _embed_codes(m_surv, (0, 2))
        f1_plus = CubeSet.from_bits(m_surv, SIDE_ZERO_ONE, s_z2.bits[emb01])
        f1_minus = CubeSet.from_bits(m_surv, SIDE_ZERO_ONE,
                                     b_z2.bits[emb01] & ~s_z2.bits[emb01])
        f2_plus = CubeSet.from_bits(m_surv, SIDE_ZERO_TWO, s_z1.bits[emb02])
        f2_minus = CubeSet.from_bits(m_surv, SIDE_ZERO_TWO,
                                     b_z1.bits[emb02] & ~s_z1.bits[emb02])
        candidates = []
        best = None
        for name1, f1 in (("plus", f1_plus), ("minus", f1_minus)):
            for name2, f2 in (("plus", f2_plus), ("minus", f2_minus)):
                fbox = disjoint_product(f1, f2)
                mb = fbox.density()
                cand: dict = {"f1": name1, "f2": name2, "mu_box": _frac_str(mb)}
                candidates.append(cand)
                if mb == 0:
                    continue
                ms = Fraction(int(np.count_nonzero(t3.s.bits & fbox.bits)),
                              3 ** m_surv)
                dens = ms / mb
                cand["mu_s"] = _frac_str(ms)
                cand["density"] = _frac_str(dens)
                cand["X"] = _frac_str(ms - threshold_mult * mb)
                if best is None or dens > best[0]:
                    best = (dens, f1, f2)
        entry["candidates"] = candidates
        if best is not None and best[0] > alpha_ref:
            t_new = t3.extend(SideSplitStep(best[1], best[2]))
            entry["accepted"] = True
            return NewTriple(t_new, "recorded-split", t_new.alpha - alpha_ref,
                             diag)
    return None


def increment_step(t: DensityTriple, p: ParamSet, seed: int = 0):
    """One increment attempt: line scan, chain restriction, case split.

    Returns LineFound when a line is present anywhere along the pipeline
    (lifted to root coordinates via provenance), NewTriple on a certified
    exact density increase (the direct jump or the recorded split), else a
    Diagnostic carrying every measured quantity.
    """
    diag: dict = {"n": t.n, "alpha": _frac_str(t.alpha),
                  "delta1": _frac_str(t.delta1), "delta2": _frac_str(t.delta2)}
    if t.s.count() == 0:
        diag["reason"] = "empty S"
        return Diagnostic(diag)
    cnt, wits = lines_in_set(t.s, witness_limit=1)
    if cnt:
        return LineFound(t.lift_template(wits[0]), wits[0], "direct-scan",
                         cnt, diag)

    chain_info, best_xi = _chain_best_pair(t, p)
    diag["chain"] = chain_info
    xi_line = lift_pair_to_line(best_xi)
    nu = dhj_distribution(*CANONICAL_DHJ_WEIGHTS)
    beta_chain, resid = xi_line.decompose(nu)
    beta_used = max(beta_chain, p.beta_floor)
    diag["beta_chain"] = _frac_str(beta_chain)
    diag["beta_used"] = _frac_str(beta_used)
    if resid is not None:
        # The minimum-ratio atom is the line atom, so the residual is
        # diagonal: each fixed coordinate carries one shared symbol.
        if any(len(set(atom)) != 1 for atom, _ in resid.rows):
            raise AssertionError("chain residual is not diagonal")
        sym_law = {atom[0]: q for atom, q in resid.rows}
    else:
        sym_law = {0: Fraction(1, 3), 1: Fraction(1, 3), 2: Fraction(1, 3)}
    diag["fixed_symbol_law"] = {str(a): _frac_str(q) for a, q in sym_law.items()}

    alpha0, d1, d2 = t.alpha, t.delta1, t.delta2
    case1_margin = alpha0 + alpha0 ** 3 * p.tau_tilde / 1000
    case2_target = alpha0 ** 3 * d1 ** 2 * d2 ** 2 / 4
    trials_log: list[dict] = []
    diag["case_trials"] = trials_log
    for trial in range(p.case_trials):
        rng = make_rng(_child_seed(seed, "chain", trial), "increment")
        if beta_used < 1:
            r = sample_restriction(t.n, beta_used, sym_law, rng)
        else:
            r = Restriction(t.n, (), ())
        entry: dict = {"trial": trial, "fixed_count": len(r.I)}
        trials_log.append(entry)
        if not r.survivors:
            entry["skip"] = "no surviving coordinates"
            continue
        t1 = t.extend(RestrictStep(r))
        entry["m"] = t1.n
        entry["alpha1"] = _frac_str(t1.alpha)
        entry["mu_box1"] = _frac_str(t1.mu_box)
        if t1.s.count():
            cnt, wits = lines_in_set(t1.s, witness_limit=1)
            if cnt:
                return LineFound(t1.lift_template(wits[0]), wits[0],
                                 "post-restriction-scan", cnt, diag)
        case1 = (t1.mu_s >= case1_margin * t1.mu_box
                 and t1.mu_box >= d1 * d2 / 2)
        entry["case1"] = case1
        if case1:
            entry["accepted"] = "density-jump"
            return NewTriple(t1, "density-jump", t1.alpha - alpha0, diag)
        three_sss = kwise_correlation([t1.s, t1.s, t1.s], nu, t1.n,
                                      mode="exact").exact_value
        box1 = t1.box()
        three_bss = kwise_correlation([box1, t1.s, t1.s], nu, t1.n,
                                      mode="exact").exact_value
        threewise = three_sss - alpha0 * three_bss
        entry["threewise"] = _frac_str(threewise)
        entry["threewise_target"] = _frac_str(case2_target)
        case2 = threewise >= case2_target
        entry["case2"] = case2
        if not case2:
            continue
        out = _final_increment(t1, alpha0, p,
                               _child_seed(seed, "final-stage", trial), entry)
        if out is not None:
            return out
    diag["reason"] = "no case hypothesis certified on any trial"
    return Diagnostic(diag)


# ---------------------------------------------------------------------------
# the concentration hook
# ---------------------------------------------------------------------------

def omega_concentration(e1: CubeSet, e2: CubeSet, max_dim: int = 6) -> dict:
    """Exact E|omega - delta1^2 delta2^2| for the four-slot conditional weight.

    omega(x-block pattern) is the conditional probability, under the
    fourth-power law, that both recorded y-slots land in E1 and both recorded
    z-slots land in E2.  The expectation enumerates every x-block pattern;
    tensor contractions run in float64 (documented rounding ~1e-12), and the
    deviation is reported, not asserted — the concentration claim is
    asymptotic.
    """
    n = e1.n
    if e2.n != n:
        raise ValueError("side sets must share the dimension")
    if e1.side != SIDE_ZERO_ONE or e2.side != SIDE_ZERO_TWO:
        raise ValueError("expected a zero-one and a zero-two side set")
    if n > max_dim:
        raise ValueError(f"omega hook is exact only up to n = {max_dim}")
    law = line_fourth_power_law()
    xblock = law.marginal(["x", "x'", "x''", "x'''"])
    atoms = [row for row, _ in xblock.rows]
    atom_prob = {row: q for row, q in xblock.rows}

    idx02 = {0: 0, 2: 1}
    conds = {}
    for atom in atoms:
        cond = law.condition(["x", "x'", "x''", "x'''"], atom)
        mat = np.zeros((4, 4))
        for (y, yp, z, zp), q in cond.rows:
            qy = 2 * _PI1[y] + _PI1[yp]
            qz = 2 * idx02[_PI2[z]] + idx02[_PI2[zp]]
            mat[qy, qz] += float(q)
        conds[atom] = mat

    def _interleave(bits: np.ndarray) -> np.ndarray:
        v = np.outer(bits, bits).ravel()
        perm = np.zeros(4 ** n, dtype=np.int64)
        digs = _digit_matrix(4 ** n, n, 4)
        hi = (digs >> 1).astype(np.int64)
        lo = (digs & 1).astype(np.int64)
        pw = (2 ** np.arange(n - 1, -1, -1)).astype(np.int64)
        perm = (hi @ pw) * (2 ** n) + (lo @ pw)
        return v[perm]

    y_vec = _interleave(e1.bits.astype(np.float64))
    z_vec = _interleave(e2.bits.astype(np.float64))
    delta1, delta2 = e1.density(), e2.density()
    ref = float(delta1) ** 2 * float(delta2) ** 2

    total = 0.0
    mean_omega = 0.0

    def _descend(coord: int, vec: np.ndarray, prob: float):
        nonlocal total, mean_omega
        if coord > n:
            omega = float(y_vec @ vec)
            total += prob * abs(omega - ref)
            mean_omega += prob * omega
            return
        shaped = vec.reshape(4 ** (coord - 1), 4, 4 ** (n - coord))
        for atom in atoms:
            child = np.einsum("ab,ibj->iaj", conds[atom], shaped).ravel()
            _descend(coord + 1, child, prob * float(atom_prob[atom]))

    _descend(1, z_vec, 1.0)
    return {
        "n": n,
        "delta1": _frac_str(delta1),
        "delta2": _frac_str(delta2),
        "reference": ref,
        "expected_abs_deviation": total,
        "mean_omega": mean_omega,
        "method": "exact-enumeration/float64",
    }


# ---------------------------------------------------------------------------
# the driver
# ---------------------------------------------------------------------------

@dataclass
class TraceRecord:
    step: int
    op: str
    n: int
    alpha: Fraction
    delta1: Fraction
    delta2: Fraction
    index: Fraction
    outcome: str
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"step": self.step, "op": self.op, "n": self.n,
                "alpha": _frac_str(self.alpha),
                "delta1": _frac_str(self.delta1),
                "delta2": _frac_str(self.delta2),
                "index": _frac_str(self.index), "outcome": self.outcome,
                "diagnostics": self.diagnostics}


@dataclass
class DriverTrace:
    records: list
    line: LineFound | None
    final: DensityTriple

    def to_jsonl(self) -> str:
        return "\n".join(json.dumps(r.to_json(), sort_keys=True)
                         for r in self.records)

    def to_json(self) -> dict:
        return {"records": [r.to_json() for r in self.records],
                "line": None if self.line is None else self.line.to_json(),
                "final": self.final.to_json()}


def _record(step: int, op: str, t: DensityTriple, outcome: str,
            diagnostics: dict) -> TraceRecord:
    return TraceRecord(step, op, t.n, t.alpha, t.delta1, t.delta2,
                       t.index_term(), outcome, diagnostics)


def main_driver(s0: CubeSet, p: ParamSet, step_cap: int = 8,
                seed: int = 0) -> DriverTrace:
    """Alternate increment steps and uniformization from the root instance.

    The root triple places S0 inside the full disjoint product.  Every
    reported line is re-verified against S0 through the provenance lift; a
    lift that fails to land in S0 raises immediately (soundness over output).
    """
    if s0.side != SIDE_FULL:
        raise ValueError("the root set must live in the full cube")
    n = s0.n
    t = DensityTriple.from_sets(s0, CubeSet.full(n, SIDE_ZERO_ONE),
                                CubeSet.full(n, SIDE_ZERO_TWO))
    records: list[TraceRecord] = []
    line: LineFound | None = None
    for step in range(1, step_cap + 1):
        out = increment_step(t, p, seed=_child_seed(seed, "driver", step))
        if isinstance(out, LineFound):
            lifted = out.template_root
            pts = lifted.points()
            in_s0 = [bool(s0.bits[s0.index_of(pt)]) for pt in pts]
            if not all(in_s0):
                raise AssertionError(
                    f"lifted line {lifted} escapes the root set: {in_s0}")
            out.diagnostics["lift_verified"] = True
            records.append(_record(step, "increment", t, "LINE_FOUND",
                                   out.to_json()))
            line = out
            break
        if isinstance(out, Diagnostic):
            records.append(_record(step, "increment", t, "DIAGNOSTIC",
                                   out.report))
            break
        assert isinstance(out, NewTriple)
        t_next = out.triple
        records.append(_record(step, "increment", t_next, "NEW_TRIPLE",
                               {"stage": out.stage, "gain": _frac_str(out.gain)}))
        local_alpha = t_next.alpha - p.tau
        if not 0 < local_alpha < 1 or t_next.mu_box == 0:
            records.append(_record(step, "uniformize", t_next, "SKIPPED",
                                   {"reason": "density target out of range"}))
            t = t_next
            continue
        p_local = replace(p, alpha=local_alpha)
        uni = uniformize(t_next, p_local, seed=_child_seed(seed, "uni", step))
        t = uni.triple
        records.append(_record(
            step, "uniformize", t,
            "NONTERMINATED" if uni.nonterminated else "UNIFORMIZED",
            {"rounds": uni.rounds,
             "trajectory": [_frac_str(x) for x in uni.trajectory],
             "not_good_mass": _frac_str(uni.not_good_mass),
             "selected_good": uni.selected_good}))
    return DriverTrace(records, line, t)

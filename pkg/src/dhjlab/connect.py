"""Connectivity classifiers for supports and joint distributions.

Three notions are implemented, each with a machine-checkable certificate:

- support connectivity: tuples are adjacent when they differ in exactly one
  coordinate; a connected support comes with a spanning tree, a disconnected
  one with a bipartition no support edge crosses;
- pairwise connectivity of a joint distribution: for every coordinate pair
  (i, j), the graph on the union of the two declared alphabets, with one edge
  per support pair of the 2-coordinate marginal, must be connected (declared
  but unused symbols count as isolated vertices);
- connectivity of every (k-1)-coordinate projection.

Supports here have at most a few dozen rows, so plain BFS is used throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .dist_core import JointDist, Row, Symbol

Edge = tuple[Row, Row]


@dataclass(frozen=True)
class ConnectivityCertificate:
    """Outcome of a support-connectivity check, with a verifiable witness."""

    connected: bool
    spanning_tree: tuple[Edge, ...] | None
    bipartition: tuple[tuple[Row, ...], tuple[Row, ...]] | None

    def to_json(self) -> dict:
        if self.connected:
            return {"connected": True,
                    "spanning_tree": [[list(a), list(b)] for a, b in self.spanning_tree]}
        return {"connected": False,
                "bipartition": [[list(t) for t in part] for part in self.bipartition]}


def _adjacent(a: Row, b: Row) -> bool:
    return sum(1 for x, y in zip(a, b) if x != y) == 1


def is_connected(support: Sequence[Row]) -> ConnectivityCertificate:
    """Check connectivity of a support under differ-in-one-coordinate edges."""
    tuples = [tuple(t) for t in support]
    if not tuples:
        raise ValueError("support must be nonempty")
    if len({len(t) for t in tuples}) != 1:
        raise ValueError("support tuples must share one arity")
    if len(set(tuples)) != len(tuples):
        tuples = list(dict.fromkeys(tuples))
    seen = {tuples[0]}
    frontier = [tuples[0]]
    tree: list[Edge] = []
    while frontier:
        cur = frontier.pop()
        for t in tuples:
            if t not in seen and _adjacent(cur, t):
                seen.add(t)
                tree.append((cur, t))
                frontier.append(t)
    if len(seen) == len(tuples):
        return ConnectivityCertificate(True, tuple(tree), None)
    inside = tuple(t for t in tuples if t in seen)
    outside = tuple(t for t in tuples if t not in seen)
    return ConnectivityCertificate(False, None, (inside, outside))


def certificate_is_valid(support: Sequence[Row], cert: ConnectivityCertificate) -> bool:
    """Verify a connectivity certificate independently of how it was found."""
    tuples = list(dict.fromkeys(tuple(t) for t in support))
    if cert.connected:
        if cert.spanning_tree is None:
            return False
        if len(tuples) == 1:
            return cert.spanning_tree == ()
        reached = {tuples[0]} if not cert.spanning_tree else {cert.spanning_tree[0][0]}
        for a, b in cert.spanning_tree:
            if not _adjacent(a, b) or a not in tuples or b not in tuples:
                return False
            if a in reached:
                reached.add(b)
            elif b in reached:
                reached.add(a)
            else:
                return False
        return reached == set(tuples)
    if cert.bipartition is None:
        return False
    inside, outside = (set(cert.bipartition[0]), set(cert.bipartition[1]))
    if not inside or not outside or inside | outside != set(tuples) or inside & outside:
        return False
    return not any(_adjacent(a, b) for a in inside for b in outside)


@dataclass(frozen=True)
class PairwiseResult:
    """Outcome of the all-coordinate-pairs connectivity check."""

    connected: bool
    failing_pair: tuple[int, int] | None
    failing_components: tuple[tuple[Symbol, ...], tuple[Symbol, ...]] | None

    def to_json(self) -> dict:
        if self.connected:
            return {"connected": True}
        return {"connected": False,
                "failing_pair": list(self.failing_pair),
                "failing_components": [list(c) for c in self.failing_components]}


def _symbol_graph_components(vertices: set[Symbol],
                             edges: Sequence[tuple[Symbol, Symbol]]) -> list[set[Symbol]]:
    adj: dict[Symbol, set[Symbol]] = {v: set() for v in vertices}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    components = []
    left = set(vertices)
    while left:
        start = min(left)
        comp = {start}
        frontier = [start]
        while frontier:
            cur = frontier.pop()
            for nb in adj[cur]:
                if nb not in comp:
                    comp.add(nb)
                    frontier.append(nb)
        components.append(comp)
        left -= comp
    return components


def is_pairwise_connected(dist: JointDist) -> PairwiseResult:
    """Check connectivity of the symbol graph of every coordinate pair.

    For coordinates i < j the graph lives on the union of the two declared
    alphabets (a symbol shared by both alphabets is a single vertex) and has
    an edge {a, b} for every support pair (a, b) of the (i, j)-marginal.
    Returns the lexicographically first failing pair with its component split.
    """
    if dist.arity < 2:
        raise ValueError("pairwise connectivity needs arity >= 2")
    for i in range(dist.arity):
        for j in range(i + 1, dist.arity):
            vertices = set(dist.alphabets[i]) | set(dist.alphabets[j])
            pairs = {(t[i], t[j]) for t in dist.support}
            comps = _symbol_graph_components(vertices, sorted(pairs))
            if len(comps) > 1:
                first = comps[0]
                rest = sorted(set().union(*comps[1:]))
                return PairwiseResult(False, (i, j),
                                      (tuple(sorted(first)), tuple(rest)))
    return PairwiseResult(True, None, None)


@dataclass(frozen=True)
class ProjectionReport:
    """Connectivity verdict for the marginal support dropping one coordinate."""

    dropped: int
    certificate: ConnectivityCertificate

    def to_json(self) -> dict:
        return {"dropped": self.dropped, **self.certificate.to_json()}


def check_all_k_minus_1_projections(dist: JointDist) -> tuple[bool, tuple[ProjectionReport, ...]]:
    """Apply the support-connectivity check to every drop-one-coordinate marginal."""
    if dist.arity < 3:
        raise ValueError("projection checks need arity >= 3")
    reports = []
    for dropped in range(dist.arity):
        keep = [i for i in range(dist.arity) if i != dropped]
        cert = is_connected(dist.marginal(keep).support)
        reports.append(ProjectionReport(dropped, cert))
    return all(r.certificate.connected for r in reports), tuple(reports)


def uniform_over(support: Sequence[Row],
                 alphabets: Sequence[Sequence[Symbol]] | None = None) -> JointDist:
    """Uniform joint distribution over a support (a convenience for checks)."""
    from fractions import Fraction

    tuples = list(dict.fromkeys(tuple(t) for t in support))
    k = len(tuples[0])
    if alphabets is None:
        alphabets = [tuple(sorted({t[i] for t in tuples})) for i in range(k)]
    p = Fraction(1, len(tuples))
    return JointDist.from_rows(alphabets, {t: p for t in tuples})

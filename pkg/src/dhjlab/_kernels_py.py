"""Pure numpy implementations of the hot kernels.

These are the fallback twins of the compiled kernels in ``_ckernels``; both
implement exactly the same contracts and must return identical results.
"""

from __future__ import annotations

import numpy as np

IMPLEMENTATION = "python-numpy"

_CHUNK = 1 << 17


def scan_lines(bits: np.ndarray, n: int, witness_limit: int) -> tuple[int, list[tuple[int, ...]]]:
    """Count line templates whose three points all lie in the set.

    Templates are base-4 words (digits 0,1,2 fixed; 3 = wildcard), scanned in
    increasing word order. Returns (count, first `witness_limit` template
    words as digit tuples).
    """
    total = 4**n
    pow3 = np.array([3 ** (n - 1 - i) for i in range(n)], dtype=np.int64)
    pow4 = np.array([4 ** (n - 1 - i) for i in range(n)], dtype=np.int64)
    count = 0
    witnesses: list[tuple[int, ...]] = []
    for start in range(0, total, _CHUNK):
        codes = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        ix = np.zeros_like(codes)
        iy = np.zeros_like(codes)
        iz = np.zeros_like(codes)
        has_wild = np.zeros(codes.shape, dtype=bool)
        for pos in range(n):
            dig = (codes // pow4[pos]) % 4
            wild = dig == 3
            has_wild |= wild
            fixed = np.where(wild, 0, dig)
            ix += fixed * pow3[pos]
            iy += np.where(wild, 1, dig) * pow3[pos]
            iz += np.where(wild, 2, dig) * pow3[pos]
        inside = has_wild & bits[ix] & bits[iy] & bits[iz]
        count += int(np.count_nonzero(inside))
        if len(witnesses) < witness_limit:
            for code in codes[inside][: witness_limit - len(witnesses)]:
                word = [0] * n
                c = int(code)
                for pos in range(n - 1, -1, -1):
                    c, word[pos] = divmod(c, 4)
                witnesses.append(tuple(word))
    return count, witnesses


def class_counts(sets: list[np.ndarray], digit_vals: np.ndarray, bases: np.ndarray,
                 n: int) -> np.ndarray:
    """Count, per atom-multiset class, the support templates inside all sets.

    A template is a word w in [k]^n over the k atoms. Slot j of atom a
    contributes digit value digit_vals[a, j] in base bases[j]; slot j's cell
    index is the base-bases[j] value of its digit word (coordinate 1 most
    significant). The template is "inside" when every slot's cell is a member
    of the corresponding set. The class of w is its atom count vector
    (c_0, ..., c_{k-2}) encoded as sum_a c_a * (n+1)^a.

    Returns an int64 array of length (n+1)**(k-1).
    """
    k, m = digit_vals.shape
    out_size = (n + 1) ** (k - 1)
    if out_size > 60_000_000:
        raise ValueError(f"class table too large: (n+1)^(k-1) = {out_size}")
    out = np.zeros(out_size, dtype=np.int64)
    total = k**n
    powk = np.array([k ** (n - 1 - i) for i in range(n)], dtype=np.int64)
    pow_slot = np.stack(
        [np.array([int(bases[j]) ** (n - 1 - i) for i in range(n)], dtype=np.int64) for j in range(m)]
    )
    powc = np.array([(n + 1) ** a for a in range(k - 1)], dtype=np.int64)
    for start in range(0, total, _CHUNK):
        codes = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        idx = np.zeros((m, codes.shape[0]), dtype=np.int64)
        cls = np.zeros(codes.shape[0], dtype=np.int64)
        for pos in range(n):
            dig = (codes // powk[pos]) % k
            for j in range(m):
                idx[j] += digit_vals[dig, j] * pow_slot[j, pos]
            for a in range(k - 1):
                cls += (dig == a) * powc[a]
        inside = np.ones(codes.shape[0], dtype=bool)
        for j in range(m):
            inside &= sets[j][idx[j]]
        np.add.at(out, cls[inside], 1)
    return out


def bb_max_independent(lines: np.ndarray, n_points: int,
                       node_budget: int) -> tuple[int, np.ndarray, int, bool]:
    """Maximum subset of points containing no line, by branch and bound.

    `lines` is an (m, 3) int array of point triples, assumed sorted. Branches
    on the first line none of whose points is excluded, in point order;
    propagates forced exclusions; prunes with a disjoint-threatened-line
    packing bound. Returns (best_size, witness membership array, nodes,
    proven) where proven is False when the node budget ran out.
    """
    m = lines.shape[0]
    lines_l = [tuple(int(x) for x in lines[i]) for i in range(m)]
    point_lines: list[list[int]] = [[] for _ in range(n_points)]
    for li, (a, b, c) in enumerate(lines_l):
        point_lines[a].append(li)
        point_lines[b].append(li)
        point_lines[c].append(li)

    degree = [len(point_lines[p]) for p in range(n_points)]
    order = sorted(range(n_points), key=lambda p: (degree[p], p))

    FREE, INC, EXC = 0, 1, 2

    def greedy() -> tuple[int, bytearray]:
        status = bytearray(n_points)
        size = 0
        for p in order:
            ok = True
            for li in point_lines[p]:
                a, b, c = lines_l[li]
                others = [q for q in (a, b, c) if q != p]
                if len(others) == 2 and status[others[0]] == INC and status[others[1]] == INC:
                    ok = False
                    break
            if ok:
                status[p] = INC
                size += 1
        return size, status

    best_size, best_status = greedy()
    best_witness = np.frombuffer(bytes(best_status), dtype=np.uint8) == INC

    nodes = 0
    budget_hit = False

    def propagate(status: bytearray) -> bool:
        """Force exclusions for lines with two included points; detect violation."""
        changed = True
        while changed:
            changed = False
            for a, b, c in lines_l:
                sa, sb, sc = status[a], status[b], status[c]
                if EXC in (sa, sb, sc):
                    continue
                inc = (sa == INC) + (sb == INC) + (sc == INC)
                if inc == 3:
                    return False
                if inc == 2:
                    for q in (a, b, c):
                        if status[q] == FREE:
                            status[q] = EXC
                            changed = True
        return True

    def bound(status: bytearray) -> int:
        inc = sum(1 for s in status if s == INC)
        free = sum(1 for s in status if s == FREE)
        used = bytearray(n_points)
        packed = 0
        for a, b, c in lines_l:
            if status[a] == FREE and status[b] == FREE and status[c] == FREE \
                    and not (used[a] or used[b] or used[c]):
                used[a] = used[b] = used[c] = 1
                packed += 1
        return inc + free - packed

    def search(status: bytearray) -> None:
        nonlocal best_size, best_witness, nodes, budget_hit
        if budget_hit:
            return
        nodes += 1
        if nodes > node_budget:
            budget_hit = True
            return
        if not propagate(status):
            return
        if bound(status) <= best_size:
            return
        target = -1
        for li, (a, b, c) in enumerate(lines_l):
            if status[a] != EXC and status[b] != EXC and status[c] != EXC:
                target = li
                break
        if target < 0:
            size = sum(1 for s in status if s != EXC)
            if size > best_size:
                best_size = size
                arr = np.frombuffer(bytes(status), dtype=np.uint8)
                best_witness = arr != EXC
            return
        a, b, c = lines_l[target]
        pts = (a, b, c)
        for i, p in enumerate(pts):
            if status[p] == INC:
                continue  # cannot exclude an included point
            child = bytearray(status)
            child[p] = EXC
            ok = True
            for q in pts[:i]:
                if child[q] == EXC:
                    ok = False
                    break
                child[q] = INC
            if ok:
                search(child)

    search(bytearray(n_points))
    return best_size, best_witness, nodes, not budget_hit

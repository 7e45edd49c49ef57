# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the hot kernels (see _kernels_py for the contracts)."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

IMPLEMENTATION = "cython"


def scan_lines(bits, int n, int witness_limit):
    cdef cnp.uint8_t[::1] b = np.ascontiguousarray(bits, dtype=np.uint8)
    cdef long long total = 1
    cdef int i
    for i in range(n):
        total *= 4
    cdef long long code, c, count = 0
    cdef long long ix, iy, iz
    cdef int pos, d, has_wild
    cdef long long[::1] pow3 = np.array([3 ** (n - 1 - i) for i in range(n)], dtype=np.int64)
    witnesses = []
    for code in range(total):
        c = code
        ix = 0
        iy = 0
        iz = 0
        has_wild = 0
        for pos in range(n - 1, -1, -1):
            d = <int> (c & 3)
            c >>= 2
            if d == 3:
                has_wild = 1
                iy += pow3[pos]
                iz += 2 * pow3[pos]
            else:
                ix += d * pow3[pos]
                iy += d * pow3[pos]
                iz += d * pow3[pos]
        if has_wild and b[ix] and b[iy] and b[iz]:
            count += 1
            if len(witnesses) < witness_limit:
                word = [0] * n
                c = code
                for pos in range(n - 1, -1, -1):
                    word[pos] = <int> (c & 3)
                    c >>= 2
                witnesses.append(tuple(word))
    return count, witnesses


def class_counts(sets, digit_vals, bases, int n):
    cdef int k = digit_vals.shape[0]
    cdef int m = digit_vals.shape[1]
    cdef long long out_size = 1
    cdef int a, j
    for a in range(k - 1):
        out_size *= (n + 1)
    if out_size > 60_000_000:
        raise ValueError(f"class table too large: (n+1)^(k-1) = {out_size}")
    out_arr = np.zeros(out_size, dtype=np.int64)
    cdef long long[::1] out = out_arr
    cdef cnp.int64_t[:, ::1] dv = np.ascontiguousarray(digit_vals, dtype=np.int64)
    # per-slot digit place values
    pow_slot_arr = np.zeros((m, n), dtype=np.int64)
    for j in range(m):
        for a in range(n):
            pow_slot_arr[j, a] = int(bases[j]) ** (n - 1 - a)
    cdef cnp.int64_t[:, ::1] pow_slot = pow_slot_arr
    powc_arr = np.array([(n + 1) ** a for a in range(k - 1)], dtype=np.int64)
    cdef cnp.int64_t[::1] powc = powc_arr
    # flatten set membership into one buffer with offsets
    sizes = [s.shape[0] for s in sets]
    offsets_arr = np.zeros(m, dtype=np.int64)
    for j in range(1, m):
        offsets_arr[j] = offsets_arr[j - 1] + sizes[j - 1]
    flat_arr = np.concatenate([np.ascontiguousarray(s, dtype=np.uint8) for s in sets])
    cdef cnp.uint8_t[::1] flat = flat_arr
    cdef cnp.int64_t[::1] offs = offsets_arr

    cdef long long total = 1
    for a in range(n):
        total *= k
    cdef long long code, c, cls, idx
    cdef int pos, d, inside
    cdef long long[::1] slot_idx = np.zeros(m, dtype=np.int64)
    for code in range(total):
        c = code
        cls = 0
        for j in range(m):
            slot_idx[j] = 0
        for pos in range(n - 1, -1, -1):
            d = <int> (c % k)
            c //= k
            for j in range(m):
                slot_idx[j] += dv[d, j] * pow_slot[j, pos]
            if d < k - 1:
                cls += powc[d]
        inside = 1
        for j in range(m):
            if not flat[offs[j] + slot_idx[j]]:
                inside = 0
                break
        if inside:
            out[cls] += 1
    return out_arr


# ---------------------------------------------------------------------------
# branch and bound for maximum line-free subsets
# ---------------------------------------------------------------------------

cdef int FREE = 0, INC = 1, EXC = 2

cdef struct BBState:
    long long nodes
    long long node_budget
    int budget_hit
    int best_size
    int n_points
    int m


cdef int _propagate(cnp.uint8_t[:, ::1] buf, int depth, cnp.int64_t[:, ::1] lines, int m) nogil:
    cdef int changed = 1, li, inc, a, b, c, sa, sb, sc
    while changed:
        changed = 0
        for li in range(m):
            a = <int> lines[li, 0]
            b = <int> lines[li, 1]
            c = <int> lines[li, 2]
            sa = buf[depth, a]
            sb = buf[depth, b]
            sc = buf[depth, c]
            if sa == EXC or sb == EXC or sc == EXC:
                continue
            inc = (sa == INC) + (sb == INC) + (sc == INC)
            if inc == 3:
                return 0
            if inc == 2:
                if sa == FREE:
                    buf[depth, a] = EXC
                elif sb == FREE:
                    buf[depth, b] = EXC
                else:
                    buf[depth, c] = EXC
                changed = 1
    return 1


cdef int _bound(cnp.uint8_t[:, ::1] buf, int depth, cnp.int64_t[:, ::1] lines, int m,
                cnp.uint8_t[::1] used, int n_points) nogil:
    cdef int inc = 0, free = 0, packed = 0, p, li, a, b, c
    for p in range(n_points):
        if buf[depth, p] == INC:
            inc += 1
        elif buf[depth, p] == FREE:
            free += 1
        used[p] = 0
    for li in range(m):
        a = <int> lines[li, 0]
        b = <int> lines[li, 1]
        c = <int> lines[li, 2]
        if buf[depth, a] == FREE and buf[depth, b] == FREE and buf[depth, c] == FREE \
                and used[a] == 0 and used[b] == 0 and used[c] == 0:
            used[a] = 1
            used[b] = 1
            used[c] = 1
            packed += 1
    return inc + free - packed


cdef void _search(cnp.uint8_t[:, ::1] buf, int depth, cnp.int64_t[:, ::1] lines,
                  BBState* st, cnp.uint8_t[::1] used, cnp.uint8_t[::1] best) nogil:
    cdef int li, target, a, b, c, p, i, q, size, ok
    if st.budget_hit:
        return
    st.nodes += 1
    if st.nodes > st.node_budget:
        st.budget_hit = 1
        return
    if not _propagate(buf, depth, lines, st.m):
        return
    if _bound(buf, depth, lines, st.m, used, st.n_points) <= st.best_size:
        return
    target = -1
    for li in range(st.m):
        a = <int> lines[li, 0]
        b = <int> lines[li, 1]
        c = <int> lines[li, 2]
        if buf[depth, a] != EXC and buf[depth, b] != EXC and buf[depth, c] != EXC:
            target = li
            break
    if target < 0:
        size = 0
        for p in range(st.n_points):
            if buf[depth, p] != EXC:
                size += 1
        if size > st.best_size:
            st.best_size = size
            for p in range(st.n_points):
                best[p] = 1 if buf[depth, p] != EXC else 0
        return
    a = <int> lines[target, 0]
    b = <int> lines[target, 1]
    c = <int> lines[target, 2]
    for i in range(3):
        p = a if i == 0 else (b if i == 1 else c)
        if buf[depth, p] == INC:
            continue
        for q in range(st.n_points):
            buf[depth + 1, q] = buf[depth, q]
        buf[depth + 1, p] = EXC
        ok = 1
        if i >= 1:
            if buf[depth + 1, a] == EXC:
                ok = 0
            else:
                buf[depth + 1, a] = INC
        if ok and i >= 2:
            if buf[depth + 1, b] == EXC:
                ok = 0
            else:
                buf[depth + 1, b] = INC
        if ok:
            _search(buf, depth + 1, lines, st, used, best)


def bb_max_independent(lines, int n_points, long long node_budget):
    cdef cnp.int64_t[:, ::1] lns = np.ascontiguousarray(lines, dtype=np.int64)
    cdef int m = lns.shape[0]
    cdef int p, li

    point_lines = [[] for _ in range(n_points)]
    for li in range(m):
        for p in (lines[li][0], lines[li][1], lines[li][2]):
            point_lines[int(p)].append(li)
    degree = [len(point_lines[p]) for p in range(n_points)]
    order = sorted(range(n_points), key=lambda q: (degree[q], q))

    status = bytearray(n_points)
    size = 0
    lines_l = [tuple(int(x) for x in lines[i]) for i in range(m)]
    for p in order:
        ok = True
        for li in point_lines[p]:
            a, b, c = lines_l[li]
            others = [q for q in (a, b, c) if q != p]
            if len(others) == 2 and status[others[0]] == 1 and status[others[1]] == 1:
                ok = False
                break
        if ok:
            status[p] = 1
            size += 1

    best_arr = np.frombuffer(bytes(status), dtype=np.uint8).copy()
    cdef cnp.uint8_t[::1] best = best_arr

    cdef BBState st
    st.nodes = 0
    st.node_budget = node_budget
    st.budget_hit = 0
    st.best_size = size
    st.n_points = n_points
    st.m = m

    buf_arr = np.zeros((n_points + 2, n_points), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] buf = buf_arr
    used_arr = np.zeros(n_points, dtype=np.uint8)
    cdef cnp.uint8_t[::1] used = used_arr

    _search(buf, 0, lns, &st, used, best)

    witness = best_arr.astype(bool)
    return st.best_size, witness, int(st.nodes), not bool(st.budget_hit)

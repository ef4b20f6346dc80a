# cython: language_level=3
"""Compiled grid kernels. Semantics mirror ``_pykernels`` exactly."""

from libc.math cimport floor, fabs, sqrt, INFINITY
from libc.stdlib cimport malloc, realloc, free

import numpy as np
cimport numpy as cnp

cdef double SQRT2 = 1.4142135623730951

cdef struct Node:
    double f
    double h
    int r
    int c


cdef inline bint _less(Node* a, Node* b) nogil:
    if a.f != b.f:
        return a.f < b.f
    if a.h != b.h:
        return a.h < b.h
    if a.r != b.r:
        return a.r < b.r
    return a.c < b.c


cdef struct Heap:
    Node* data
    Py_ssize_t size
    Py_ssize_t cap


cdef int _push(Heap* hp, Node n) nogil:
    cdef Py_ssize_t i, parent
    cdef Node* grown
    if hp.size == hp.cap:
        grown = <Node*> realloc(hp.data, 2 * hp.cap * sizeof(Node))
        if grown == NULL:
            return -1
        hp.data = grown
        hp.cap = 2 * hp.cap
    i = hp.size
    hp.size += 1
    hp.data[i] = n
    while i > 0:
        parent = (i - 1) >> 1
        if _less(&hp.data[i], &hp.data[parent]):
            hp.data[i], hp.data[parent] = hp.data[parent], hp.data[i]
            i = parent
        else:
            break
    return 0


cdef Node _pop(Heap* hp) nogil:
    cdef Node top = hp.data[0]
    cdef Py_ssize_t i = 0, l, r, m
    hp.size -= 1
    hp.data[0] = hp.data[hp.size]
    while True:
        l = 2 * i + 1
        r = l + 1
        m = i
        if l < hp.size and _less(&hp.data[l], &hp.data[m]):
            m = l
        if r < hp.size and _less(&hp.data[r], &hp.data[m]):
            m = r
        if m == i:
            break
        hp.data[i], hp.data[m] = hp.data[m], hp.data[i]
        i = m
    return top


cdef inline double _octile(int r, int c, int gr, int gc) nogil:
    cdef int dr = r - gr
    cdef int dc = c - gc
    cdef int mx, mn
    if dr < 0:
        dr = -dr
    if dc < 0:
        dc = -dc
    if dr > dc:
        mx = dr
        mn = dc
    else:
        mx = dc
        mn = dr
    return <double>(mx - mn) + SQRT2 * <double>mn


def astar(const cnp.uint8_t[:, ::1] blocked, int sr, int sc, int gr, int gc):
    """8-connected A*; returns a list of (row, col) or None when unreachable."""
    cdef int H = blocked.shape[0]
    cdef int W = blocked.shape[1]
    cdef int[8] DR = [-1, -1, -1, 0, 0, 1, 1, 1]
    cdef int[8] DC = [-1, 0, 1, -1, 1, -1, 0, 1]
    cdef double[:, ::1] g = np.full((H, W), np.inf)
    cdef cnp.uint8_t[:, ::1] closed = np.zeros((H, W), dtype=np.uint8)
    cdef cnp.int64_t[:, ::1] parent = np.full((H, W), -1, dtype=np.int64)
    cdef Heap hp
    cdef Node cur, nxt
    cdef int k, nr, nc
    cdef double step, ng, hn
    cdef bint found = False
    cdef long long idx

    if blocked[sr, sc] or blocked[gr, gc]:
        return None
    hp.cap = 1024
    hp.size = 0
    hp.data = <Node*> malloc(hp.cap * sizeof(Node))
    if hp.data == NULL:
        raise MemoryError()
    try:
        g[sr, sc] = 0.0
        cur.h = _octile(sr, sc, gr, gc)
        cur.f = cur.h
        cur.r = sr
        cur.c = sc
        _push(&hp, cur)
        while hp.size > 0:
            cur = _pop(&hp)
            if closed[cur.r, cur.c]:
                continue
            closed[cur.r, cur.c] = 1
            if cur.r == gr and cur.c == gc:
                found = True
                break
            for k in range(8):
                nr = cur.r + DR[k]
                nc = cur.c + DC[k]
                if nr < 0 or nr >= H or nc < 0 or nc >= W:
                    continue
                if blocked[nr, nc] or closed[nr, nc]:
                    continue
                step = SQRT2 if (DR[k] != 0 and DC[k] != 0) else 1.0
                ng = g[cur.r, cur.c] + step
                if ng < g[nr, nc]:
                    g[nr, nc] = ng
                    parent[nr, nc] = cur.r * W + cur.c
                    hn = _octile(nr, nc, gr, gc)
                    nxt.f = ng + hn
                    nxt.h = hn
                    nxt.r = nr
                    nxt.c = nc
                    if _push(&hp, nxt) != 0:
                        raise MemoryError()
    finally:
        free(hp.data)
    if not found:
        return None
    path = []
    idx = gr * W + gc
    while idx != -1:
        path.append((int(idx // W), int(idx % W)))
        idx = parent[idx // W, idx % W]
    path.reverse()
    return path


cdef inline bint _overlaps(double* en, int m, double x0, double x1, double y0, double y1,
                           double minx, double maxx, double eps) nogil:
    cdef int i
    cdef double nx, ny
    if x1 <= minx + eps or x0 >= maxx - eps:
        return False
    for i in range(m):
        nx = en[3 * i]
        ny = en[3 * i + 1]
        if nx * (x0 if nx >= 0.0 else x1) + ny * (y0 if ny >= 0.0 else y1) >= en[3 * i + 2]:
            return False
    return True


def fill_convex(cnp.int8_t[:, ::1] cells, const double[:, ::1] poly, double ox, double oy,
                double res, cnp.int8_t value, double eps=1e-9):
    """Set ``value`` on every cell whose interior overlaps the CCW convex polygon."""
    cdef int H = cells.shape[0]
    cdef int W = cells.shape[1]
    cdef int n = poly.shape[0]
    cdef int i, j, m, r, c, r0, r1, c0, c1, lo, hi
    cdef double minx, maxx, miny, maxy, ax, ay, bx, by, nx, ny, ln, y0, y1
    cdef double* en
    if n < 3:
        return
    minx = maxx = poly[0, 0]
    miny = maxy = poly[0, 1]
    for i in range(1, n):
        minx = min(minx, poly[i, 0])
        maxx = max(maxx, poly[i, 0])
        miny = min(miny, poly[i, 1])
        maxy = max(maxy, poly[i, 1])
    c0 = <int> floor((minx - ox) / res) - 1
    c1 = <int> floor((maxx - ox) / res) + 1
    r0 = <int> floor((miny - oy) / res) - 1
    r1 = <int> floor((maxy - oy) / res) + 1
    if c0 < 0:
        c0 = 0
    if r0 < 0:
        r0 = 0
    if c1 > W - 1:
        c1 = W - 1
    if r1 > H - 1:
        r1 = H - 1
    # unit outward edge normals and offsets, skipping zero-length edges
    en = <double*> malloc(3 * n * sizeof(double))
    if en == NULL:
        raise MemoryError()
    m = 0
    for i in range(n):
        j = i + 1
        if j == n:
            j = 0
        ax = poly[i, 0]
        ay = poly[i, 1]
        bx = poly[j, 0]
        by = poly[j, 1]
        nx = by - ay
        ny = ax - bx
        ln = sqrt(nx * nx + ny * ny)
        if ln == 0.0:
            continue
        nx = nx / ln
        ny = ny / ln
        en[3 * m] = nx
        en[3 * m + 1] = ny
        en[3 * m + 2] = nx * ax + ny * ay - eps
        m += 1
    try:
        for r in range(r0, r1 + 1):
            y0 = oy + r * res
            y1 = oy + (r + 1) * res
            if y1 <= miny + eps or y0 >= maxy - eps:
                continue
            # a convex polygon meets each row in one run of cells: find both ends
            lo = c0
            while lo <= c1 and not _overlaps(en, m, ox + lo * res, ox + (lo + 1) * res, y0, y1,
                                             minx, maxx, eps):
                lo += 1
            if lo > c1:
                continue
            hi = c1
            while hi > lo and not _overlaps(en, m, ox + hi * res, ox + (hi + 1) * res, y0, y1,
                                            minx, maxx, eps):
                hi -= 1
            for c in range(lo, hi + 1):
                cells[r, c] = value
    finally:
        free(en)

"""Pure-Python grid kernels; the reference semantics for the compiled ``_ext``."""

from __future__ import annotations

import heapq
import math

import numpy as np

SQRT2 = 1.4142135623730951
_MOVES = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


def _octile(r: int, c: int, gr: int, gc: int) -> float:
    dr, dc = abs(r - gr), abs(c - gc)
    mx, mn = (dr, dc) if dr > dc else (dc, dr)
    return float(mx - mn) + SQRT2 * float(mn)


def astar(blocked: np.ndarray, sr: int, sc: int, gr: int, gc: int):
    """8-connected A* with (f, h, row, col) tie-breaking; None when unreachable."""
    H, W = blocked.shape
    blk = blocked.tolist()
    if blk[sr][sc] or blk[gr][gc]:
        return None
    inf = math.inf
    g = [[inf] * W for _ in range(H)]
    closed = [[False] * W for _ in range(H)]
    parent: dict[tuple[int, int], tuple[int, int]] = {}
    g[sr][sc] = 0.0
    h0 = _octile(sr, sc, gr, gc)
    heap = [(h0, h0, sr, sc)]
    found = False
    while heap:
        _, _, r, c = heapq.heappop(heap)
        if closed[r][c]:
            continue
        closed[r][c] = True
        if r == gr and c == gc:
            found = True
            break
        gcur = g[r][c]
        for dr, dc in _MOVES:
            nr, nc = r + dr, c + dc
            if nr < 0 or nr >= H or nc < 0 or nc >= W:
                continue
            if blk[nr][nc] or closed[nr][nc]:
                continue
            ng = gcur + (SQRT2 if dr and dc else 1.0)
            if ng < g[nr][nc]:
                g[nr][nc] = ng
                parent[(nr, nc)] = (r, c)
                hn = _octile(nr, nc, gr, gc)
                heapq.heappush(heap, (ng + hn, hn, nr, nc))
    if not found:
        return None
    path = [(gr, gc)]
    while path[-1] != (sr, sc):
        path.append(parent[path[-1]])
    path.reverse()
    return path


def fill_convex(cells: np.ndarray, poly: np.ndarray, ox: float, oy: float, res: float,
                value: int, eps: float = 1e-9) -> None:
    """Set ``value`` on every cell whose interior overlaps the CCW convex polygon."""
    H, W = cells.shape
    n = len(poly)
    if n < 3:
        return
    minx, maxx = float(poly[:, 0].min()), float(poly[:, 0].max())
    miny, maxy = float(poly[:, 1].min()), float(poly[:, 1].max())
    c0 = max(int(math.floor((minx - ox) / res)) - 1, 0)
    c1 = min(int(math.floor((maxx - ox) / res)) + 1, W - 1)
    r0 = max(int(math.floor((miny - oy) / res)) - 1, 0)
    r1 = min(int(math.floor((maxy - oy) / res)) + 1, H - 1)
    if c0 > c1 or r0 > r1:
        return
    cols = np.arange(c0, c1 + 1)
    rows = np.arange(r0, r1 + 1)
    x0 = ox + cols * res
    x1 = ox + (cols + 1) * res
    y0 = oy + rows * res
    y1 = oy + (rows + 1) * res
    ok = ((y1 > miny + eps) & (y0 < maxy - eps))[:, None] & ((x1 > minx + eps) & (x0 < maxx - eps))[None, :]
    for i in range(n):
        ax, ay = float(poly[i, 0]), float(poly[i, 1])
        bx, by = float(poly[(i + 1) % n, 0]), float(poly[(i + 1) % n, 1])
        nx, ny = by - ay, ax - bx
        ln = math.sqrt(nx * nx + ny * ny)
        if ln == 0.0:
            continue
        nx, ny = nx / ln, ny / ln
        lim = nx * ax + ny * ay
        px = nx * (x0 if nx >= 0.0 else x1)
        py = ny * (y0 if ny >= 0.0 else y1)
        ok &= (py[:, None] + px[None, :]) < lim - eps
    sub = cells[r0:r1 + 1, c0:c1 + 1]
    sub[ok] = value

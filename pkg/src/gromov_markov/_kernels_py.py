"""Pure-Python twin of the compiled product-length kernel."""

from __future__ import annotations

import numpy as np


def _product_length(x, lx, y, ly, gfac, gexp, order) -> int:
    total = lx + ly
    i = lx - 1
    j = 0
    while i >= 0 and j < ly:
        fx = gfac[x[i]]
        if fx != gfac[y[j]]:
            break
        i0 = i
        ex = 0
        while i0 >= 0 and gfac[x[i0]] == fx:
            ex += gexp[x[i0]]
            i0 -= 1
        j0 = j
        ey = 0
        while j0 < ly and gfac[y[j0]] == fx:
            ey += gexp[y[j0]]
            j0 += 1
        n = order[fx]
        s = ex + ey
        if n > 0:
            m = s % n
            newlen = min(m, n - m)
        else:
            newlen = abs(s)
        total -= (i - i0) + (j0 - j) - newlen
        if newlen:
            break
        i, j = i0, j0
    return total


def product_lengths(X, xl, Y, yl, gfac, gexp, order) -> np.ndarray:
    """Matrix of |x_i y_j| for canonical words given as padded rows."""
    gfac = [int(v) for v in gfac]
    gexp = [int(v) for v in gexp]
    order = [int(v) for v in order]
    xs = [list(map(int, row[: int(n)])) for row, n in zip(np.asarray(X), xl)]
    ys = [list(map(int, row[: int(n)])) for row, n in zip(np.asarray(Y), yl)]
    out = np.empty((len(xs), len(ys)), dtype=np.int32)
    for a, x in enumerate(xs):
        lx = len(x)
        row = out[a]
        for b, y in enumerate(ys):
            row[b] = _product_length(x, lx, y, len(y), gfac, gexp, order)
    return out


def _walk(D, right, u, v):
    path = [u]
    cur = u
    while cur != v:
        target = D[cur][v] - 1
        for nxt in right[cur]:
            if nxt >= 0 and D[nxt][v] == target:
                cur = nxt
                break
        else:
            return None
        path.append(cur)
    return path


def slim_triangles(D, right, root, bound):
    """Worst slimness defect over triangles (root, x, y) with x < y."""
    D = np.asarray(D).tolist()
    right = np.asarray(right).tolist()
    n = len(D)
    worst, wx, wy, wside, wpoint, escaped = -1, -1, -1, -1, -1, 0
    for a in range(n):
        sa = _walk(D, right, root, a)
        if sa is None:
            escaped += n - a - 1
            continue
        for b in range(a + 1, n):
            sb = _walk(D, right, root, b)
            sc = _walk(D, right, a, b)
            if sb is None or sc is None:
                escaped += 1
                continue
            for side, pts, o1, o2 in ((0, sa, sb, sc), (1, sb, sa, sc), (2, sc, sa, sb)):
                for p in pts:
                    row = D[p]
                    g = min(min(row[o] for o in o1), min(row[o] for o in o2))
                    if g > bound and g > worst:
                        worst, wx, wy, wside, wpoint = g, a, b, side, p
    return worst, wx, wy, wside, wpoint, escaped

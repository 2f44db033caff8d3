# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled product-length kernel for free products of cyclic groups."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline int _product_length(
    const int[:] x, int lx, const int[:] y, int ly,
    const int[:] gfac, const int[:] gexp, const int[:] order,
) noexcept nogil:
    cdef int total = lx + ly
    cdef int i = lx - 1
    cdef int j = 0
    cdef int fx, i0, j0, ex, ey, n, s, m, newlen
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
            if m < 0:
                m += n
            newlen = m if m <= n - m else n - m
        else:
            newlen = s if s >= 0 else -s
        total -= (i - i0) + (j0 - j) - newlen
        if newlen != 0:
            break
        i = i0
        j = j0
    return total


def product_lengths(
    const int[:, :] X, const int[:] xl,
    const int[:, :] Y, const int[:] yl,
    const int[:] gfac, const int[:] gexp, const int[:] order,
):
    """Matrix of |x_i y_j| for canonical words given as padded rows."""
    cdef Py_ssize_t m = X.shape[0]
    cdef Py_ssize_t k = Y.shape[0]
    out = np.empty((m, k), dtype=np.int32)
    cdef int[:, :] res = out
    cdef Py_ssize_t a, b
    with nogil:
        for a in range(m):
            for b in range(k):
                res[a, b] = _product_length(X[a], xl[a], Y[b], yl[b], gfac, gexp, order)
    return out


cdef int _walk(const int[:, :] D, const int[:, :] right, int u, int v, int[:] out) noexcept nogil:
    """Greedy geodesic u -> v inside the ball; writes ids, returns point count or -1."""
    cdef int cur = u
    cdef int k = 0
    cdef int q = right.shape[1]
    cdef int s, nxt, found
    out[0] = u
    k = 1
    while cur != v:
        found = 0
        for s in range(q):
            nxt = right[cur, s]
            if nxt >= 0 and D[nxt, v] == D[cur, v] - 1:
                cur = nxt
                found = 1
                break
        if not found:
            return -1
        out[k] = cur
        k += 1
    return k


cdef int _gap(const int[:, :] D, int p, int[:] s1, int n1, int[:] s2, int n2) noexcept nogil:
    cdef int best = 1 << 30
    cdef int i, d
    for i in range(n1):
        d = D[p, s1[i]]
        if d < best:
            best = d
    for i in range(n2):
        d = D[p, s2[i]]
        if d < best:
            best = d
    return best


def slim_triangles(const int[:, :] D, const int[:, :] right, int root, int bound):
    """Worst slimness defect over triangles (root, x, y) with x < y.

    Returns (worst_gap, x, y, side, point, escaped) where side is 0, 1, 2
    for [root,x], [root,y], [x,y]; worst_gap is -1 when every triangle passes.
    ``escaped`` counts triangles whose greedy geodesic left the ball.
    """
    cdef int n = D.shape[0]
    cdef int width = 0
    cdef int a, b
    for a in range(n):
        if D[root, a] > width:
            width = D[root, a]
    width = 2 * width + 2
    sa_arr = np.empty(width, dtype=np.int32)
    sb_arr = np.empty(width, dtype=np.int32)
    sc_arr = np.empty(width, dtype=np.int32)
    cdef int[:] sa = sa_arr
    cdef int[:] sb = sb_arr
    cdef int[:] sc = sc_arr
    cdef int na, nb, nc, i, g
    cdef int worst = -1
    cdef int wx = -1, wy = -1, wside = -1, wpoint = -1
    cdef long escaped = 0
    with nogil:
        for a in range(n):
            na = _walk(D, right, root, a, sa)
            if na < 0:
                escaped += n - a - 1
                continue
            for b in range(a + 1, n):
                nb = _walk(D, right, root, b, sb)
                nc = _walk(D, right, a, b, sc)
                if nb < 0 or nc < 0:
                    escaped += 1
                    continue
                for i in range(na):
                    g = _gap(D, sa[i], sb, nb, sc, nc)
                    if g > bound and g > worst:
                        worst = g; wx = a; wy = b; wside = 0; wpoint = sa[i]
                for i in range(nb):
                    g = _gap(D, sb[i], sa, na, sc, nc)
                    if g > bound and g > worst:
                        worst = g; wx = a; wy = b; wside = 1; wpoint = sb[i]
                for i in range(nc):
                    g = _gap(D, sc[i], sa, na, sb, nb)
                    if g > bound and g > worst:
                        worst = g; wx = a; wy = b; wside = 2; wpoint = sc[i]
    return worst, wx, wy, wside, wpoint, escaped

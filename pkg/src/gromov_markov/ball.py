"""Cayley balls: breadth-first enumeration in shortlex order."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import OracleError, ResourceLimitError
from .group import GroupElement, GroupPresentation
from .kernels import product_lengths
from .reports import Report


class CayleyBall:
    """All elements of length at most ``radius``, indexed in shortlex order.

    ``right[i, s]`` is the index of ``x_i s`` or -1 when that element lies
    outside the ball.  ``p_parent[i]`` is ``x_i s`` for the least generator
    index ``s`` that shortens ``x_i``.
    """

    def __init__(self, G: GroupPresentation, radius: int, words: list[GroupElement], sphere_start: list[int], right: np.ndarray):
        self.G = G
        self.radius = radius
        self.words = words
        self.index = {w: i for i, w in enumerate(words)}
        self.sphere_start = sphere_start
        self.lengths = np.repeat(
            np.arange(radius + 1, dtype=np.int32), np.diff(np.asarray(sphere_start))
        )
        self.right = right
        q = G.rank
        parent = np.full(len(words), -1, dtype=np.int32)
        parent_gen = np.full(len(words), -1, dtype=np.int32)
        nb = right.copy()
        nb_len = np.where(nb >= 0, self.lengths[np.maximum(nb, 0)], 10**9)
        shorter = nb_len == (self.lengths[:, None] - 1)
        has = shorter.any(axis=1)
        first = np.argmax(shorter, axis=1)
        parent_gen[has] = first[has]
        parent[has] = nb[np.arange(len(words))[has], first[has]]
        self.p_parent = parent
        self.p_parent_gen = parent_gen
        del q

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, x: GroupElement) -> bool:
        return x in self.index

    def __iter__(self) -> Iterator[GroupElement]:
        return iter(self.words)

    def id(self, x: GroupElement) -> int:
        try:
            return self.index[x]
        except KeyError:
            from .errors import BoundaryError

            raise BoundaryError(
                f"{self.G.word(x)} (length {len(x)}) lies outside the ball of radius {self.radius}"
            ) from None

    def sphere(self, n: int) -> range:
        if n < 0 or n > self.radius:
            return range(0)
        return range(self.sphere_start[n], self.sphere_start[n + 1])

    def sphere_words(self, n: int) -> list[GroupElement]:
        r = self.sphere(n)
        return self.words[r.start:r.stop]

    def sphere_sizes(self) -> list[int]:
        return [len(self.sphere(n)) for n in range(self.radius + 1)]

    def children(self, i: int) -> list[int]:
        """Indices of geodesic extensions ``x s`` with ``|x s| = |x| + 1``."""
        n = self.lengths[i]
        return [int(j) for j in self.right[i] if j >= 0 and self.lengths[j] == n + 1]

    def parents(self, i: int) -> list[int]:
        n = self.lengths[i]
        return [int(j) for j in self.right[i] if j >= 0 and self.lengths[j] == n - 1]

    def p_children(self, i: int) -> list[int]:
        return [j for j in self.children(i) if self.p_parent[j] == i]

    def geodesic_ancestors(self, i: int, level: int) -> list[int]:
        """All elements of length ``level`` on some geodesic from e to ``x_i``."""
        cur = {i}
        for _ in range(int(self.lengths[i]) - level):
            nxt: set[int] = set()
            for j in cur:
                nxt.update(self.parents(j))
            cur = nxt
        return sorted(cur)


def enumerate_ball(G: GroupPresentation, r: int, max_elements: int | None = None) -> CayleyBall:
    """Enumerate ``B_r(e)`` by spheres, checking lengths against BFS depth."""
    if r < 0:
        raise ValueError("radius must be nonnegative")
    budget = G.max_elements if max_elements is None else max_elements
    q = G.rank
    words: list[GroupElement] = [()]
    index: dict[GroupElement, int] = {(): 0}
    sphere_start = [0, 1]
    gens = [G.generator(s) for s in range(q)]
    for s, g in enumerate(gens):
        if len(g) != 1:
            raise OracleError(f"generator {G.generators[s]} does not have length 1")
    rows: list[list[int]] = []
    frontier = [()]
    for n in range(r + 1):
        new: set[GroupElement] = set()
        for x in frontier:
            row = []
            for s in range(q):
                y = G.multiply(x, gens[s])
                ly = len(y)
                if ly <= n:
                    j = index.get(y)
                    if j is None:
                        raise OracleError(
                            f"normal form {G.word(y)} of length {ly} was not reached by breadth-first search"
                        )
                    row.append(j)
                elif ly == n + 1:
                    if n < r:
                        new.add(y)
                    row.append(-2)
                else:
                    raise OracleError(f"word length jumped from {n} to {ly} after one generator")
            rows.append(row)
        if n == r:
            break
        nxt = sorted(new)
        if len(words) + len(nxt) > budget:
            raise ResourceLimitError(
                f"ball of radius {r} exceeds the element budget {budget} (reached {len(words) + len(nxt)} at radius {n + 1})"
            )
        for y in nxt:
            index[y] = len(words)
            words.append(y)
        sphere_start.append(len(words))
        frontier = nxt
    right = np.array(rows, dtype=np.int32).reshape(len(words), q)
    # resolve forward edges now that all spheres are indexed
    fwd = np.argwhere(right == -2)
    for i, s in fwd:
        y = G.multiply(words[i], gens[s])
        right[i, s] = index.get(y, -1)
    return CayleyBall(G, r, words, sphere_start, right)


def free_ball_size(k: int, r: int) -> int:
    """Closed-form size of the ball of radius r in a free group of rank k >= 2."""
    return 1 + 2 * k * ((2 * k - 1) ** r - 1) // (2 * k - 2)


def distance_matrix(G: GroupPresentation, words: Sequence[GroupElement]) -> np.ndarray:
    """Matrix of ``d(x, y) = |x^-1 y|`` computed through the group oracle.

    Presentations whose multiplication is the stock free-product law use
    the compiled kernel; anything else (including subclasses overriding the
    law) goes through ``G.multiply`` pair by pair.
    """
    from .group import FreeProductPresentation

    inv = [G.invert(x) for x in words]
    native = isinstance(G, FreeProductPresentation) and type(G).multiply is FreeProductPresentation.multiply
    if native:
        return product_lengths(inv, words, G.kernel_data())
    out = np.empty((len(words), len(words)), dtype=np.int32)
    for a, x in enumerate(inv):
        for b, y in enumerate(words):
            out[a, b] = len(G.multiply(x, y))
    return out


def check_thin_triangles(G: GroupPresentation, delta_candidate: int, r: int, ball: CayleyBall | None = None) -> Report:
    """Check that triangles ``(e, x, y)`` with ``x, y`` in ``B_r`` are 4δ-thin.

    Each side is a geodesic found greedily from the oracle's distance
    matrix, taking the least generator index that gets closer.  Every
    vertex of each side must lie within ``4 * delta_candidate`` of the
    union of the other two sides.  Triangles with a vertex elsewhere are
    translates of these.  Triangles whose geodesic leaves the ball are
    counted as escaped and reported, not judged.  A pass is a necessary
    condition for hyperbolicity, not a certificate.
    """
    from . import kernels

    if ball is None or ball.radius < r:
        ball = enumerate_ball(G, r)
    n = ball.sphere_start[r + 1]
    words = ball.words[:n]
    D = np.ascontiguousarray(distance_matrix(G, words), dtype=np.int32)
    right = np.ascontiguousarray(ball.right[:n], dtype=np.int32)
    right = np.where(right < n, right, -1).astype(np.int32)
    bound = 4 * delta_candidate
    worst, wx, wy, side, point, escaped = kernels._impl.slim_triangles(D, right, 0, bound)
    report = Report("thin-triangles", worst < 0)
    if escaped:
        report.notes.append(f"{int(escaped)} triangles have a side leaving the ball and were skipped")
    report.stats.update(triangles=n * (n - 1) // 2, radius=r, bound=bound, escaped=int(escaped))
    if worst >= 0:
        report.witness = {
            "x": G.word(words[wx]),
            "y": G.word(words[wy]),
            "side": ("[e,x]", "[e,y]", "[x,y]")[side],
            "point": G.word(words[point]),
            "distance_to_other_sides": int(worst),
        }
    return report

"""Priority genealogy and the Z, A, B and C type tower.

Everything lives on one enumerated ball.  Types of an element only read
its own sphere (cousins and neighbours have the same length) and its
p-ancestors, so the whole ball is typed without truncation; the ball
N-types behind the Z-type come from the :class:`TypeEngine`, which has no
radius limit of its own.

Internally each level of the tower is an integer id per ball element.
Ids are exact: two elements get the same B id (or C id) only after their
values have been compared member by member.  For free groups the
comparison is preceded by a hash that makes the common case linear:
cousin sets are blocks of the lexicographically sorted sphere sharing a
prefix, and a block is fingerprinted by ``sum c(W) M(x')`` for a random
SL2(F_p) representation ``M``, so that ``M(x)^-1 * sum`` is invariant
under left translation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Iterator, Sequence

import numpy as np

from .ball import CayleyBall, distance_matrix, enumerate_ball
from .balltypes import BallType, TypeEngine, torsion_radius
from .errors import BoundaryError, DomainError, ResourceLimitError
from .group import FreeProductPresentation, GroupElement, GroupPresentation
from .reports import Report

_P = 1_000_000_007
_GENERAL_SPHERE_LIMIT = 12_000


@dataclass(frozen=True)
class ZAType:
    """A-type: the Z-type (ball type, or a tag for short elements) and n_g."""

    z: BallType | str
    n: int


@dataclass(frozen=True)
class BTypeValue:
    """Explicit B-type: pairs ``(g^-1 g', W_{g,g'})`` over the cousins ``g'``."""

    pairs: frozenset
    ks: tuple[int, ...]

    def a_type(self) -> ZAType:
        for h, W in self.pairs:
            if h == ():
                return W[-1]
        raise ValueError("B-type without the identity pair")

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class ExtendedType:
    """``h -> base(gh)`` over the r-fellows ``h`` of ``g``.

    Values are the tower's ids for the base type; ids are exact names of
    type values, so two extended types are equal iff their tables are.
    """

    base: str
    r: int
    table: tuple

    def as_dict(self) -> dict[GroupElement, Hashable]:
        return dict(self.table)

    @property
    def domain(self) -> frozenset:
        return frozenset(h for h, _ in self.table)

    def __call__(self, h: GroupElement) -> Hashable:
        return self.as_dict()[h]


def _intern_rows(rows: np.ndarray) -> np.ndarray:
    """Dense ids for the distinct rows of an integer matrix."""
    if len(rows) == 0:
        return np.zeros(0, dtype=np.int64)
    _, inv = np.unique(rows, axis=0, return_inverse=True)
    return inv.reshape(-1).astype(np.int64)


def _first_difference(rows: np.ndarray) -> tuple[set[int], bool]:
    """Set of first differing columns over all row pairs; flag for repeats."""
    if len(rows) < 2:
        return set(), False
    order = np.lexsort(rows.T[::-1])
    s = rows[order]
    diff = s[1:] != s[:-1]
    anyd = diff.any(axis=1)
    first = np.argmax(diff, axis=1)
    return set(int(k) for k in np.unique(first[anyd])), bool((~anyd).any())


def _random_sl2(rng: np.random.Generator) -> np.ndarray:
    a, b, c = (int(v) for v in rng.integers(1, _P, size=3))
    # d chosen so that ad - bc = 1
    d = (1 + b * c) * pow(a, -1, _P) % _P
    return np.array([[a, b], [c, d]], dtype=np.int64)


def _inv_sl2(m: np.ndarray) -> np.ndarray:
    a, b, c, d = (int(v) for v in m.reshape(-1))
    return np.array([[d, (-b) % _P], [(-c) % _P, a]], dtype=np.int64)


def _mm(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return np.matmul(A, B) % _P


class TypeTower:
    """Genealogy and type tower on ``B_radius`` for fixed ``N``, ``L``, ``R``.

    Elements are addressed by ball index internally; public methods take
    words.  ``R`` defaults to the torsion radius of the group.
    """

    def __init__(
        self,
        G: GroupPresentation,
        radius: int,
        N: int,
        L: int,
        R: int | None = None,
        engine: TypeEngine | None = None,
        ball: CayleyBall | None = None,
        seed: int = 0,
    ):
        if L < 1:
            raise DomainError("the stride L must be at least 1")
        if N < 0:
            raise DomainError("N must be nonnegative")
        self.G = G
        self.radius = radius
        self.N = N
        self.L = L
        self.R = torsion_radius(G).R if R is None else int(R)
        self.engine = engine or TypeEngine(G)
        if ball is None or ball.radius < radius:
            ball = enumerate_ball(G, radius)
        self.ball = ball
        self.words = ball.words[: ball.sphere_start[radius + 1]]
        self.n = len(self.words)
        self.lengths = ball.lengths[: self.n]
        self.rng = np.random.default_rng(seed)
        self._free = (
            isinstance(G, FreeProductPresentation)
            and G._free
            and type(G).multiply is FreeProductPresentation.multiply
        )
        self.violations: dict[str, object] = {}
        self._sphere_cache: dict[int, np.ndarray] = {}
        self._a_memo: dict[int, ZAType] = {}
        self._block_cache: dict[tuple[int, int], np.ndarray] = {}
        self._dist_cache: dict[int, np.ndarray] = {}
        self._translate_memo: dict[tuple, bool] = {}
        self._build_genealogy()
        self._build_z()
        self._build_a()
        self._build_b()
        self._build_c()

    # genealogy

    def _build_genealogy(self) -> None:
        n = self.n
        parent = self.ball.p_parent[:n].astype(np.int64)
        self.parent = parent
        grand = np.arange(n, dtype=np.int64)
        for _ in range(self.L):
            grand = np.where(grand >= 0, parent[np.maximum(grand, 0)], -1)
        grand[self.lengths < self.L] = -1
        self.grand = grand
        # p-grandchildren of each element, in shortlex (index) order
        has = np.nonzero(grand >= 0)[0]
        order = has[np.argsort(grand[has], kind="stable")]
        self._gc_order = order
        starts = np.searchsorted(grand[order], np.arange(n + 1))
        self._gc_start = starts
        rank = np.empty(n, dtype=np.int64)
        rank[:] = -1
        rank[order] = np.arange(len(order)) - starts[grand[order]]
        self._gc_rank = rank

    def _grandchildren(self, i: int) -> np.ndarray:
        return self._gc_order[self._gc_start[i]: self._gc_start[i + 1]]

    def _sphere_ids(self, level: int) -> range:
        return self.ball.sphere(level)

    def _id(self, g: GroupElement) -> int:
        j = self.ball.index.get(g)
        if j is None or j >= self.n:
            raise BoundaryError(f"{self.G.word(g)} lies outside the tower's ball of radius {self.radius}")
        return j

    def p_parent(self, y: GroupElement) -> GroupElement:
        if not y:
            raise DomainError("the identity has no p-parent")
        return self.words[self.parent[self._id(y)]]

    def p_grandparent(self, y: GroupElement) -> GroupElement:
        if len(y) < self.L:
            raise DomainError(f"elements shorter than L={self.L} have no p-grandparent")
        return self.words[self.grand[self._id(y)]]

    def p_ancestor(self, y: GroupElement, k: int) -> GroupElement:
        """``y^{⇑k}``, the p-ancestor ``kL`` levels up."""
        i = self._id(y)
        for _ in range(k):
            i = int(self.grand[i])
            if i < 0:
                raise DomainError(f"{self.G.word(y)} has no p-ancestor at generation {k}")
        return self.words[i]

    def p_children(self, x: GroupElement) -> list[GroupElement]:
        return [self.words[j] for j in self.ball.p_children(self._id(x)) if j < self.n]

    def p_grandchildren(self, x: GroupElement) -> list[GroupElement]:
        i = self._id(x)
        if self.lengths[i] + self.L > self.radius:
            raise BoundaryError(f"p-grandchildren of {self.G.word(x)} leave the ball")
        return [self.words[j] for j in self._grandchildren(i)]

    # Z and A types

    def _build_z(self) -> None:
        L = self.L
        short = int(self.ball.sphere_start[min(L, self.radius + 1)])
        self.bid = self.engine.ball_type_ids(self.words, self.N)
        zid = np.where(self.lengths < L, np.arange(self.n), short + self.bid)
        self.zid = zid
        _, first = np.unique(zid, return_index=True)
        rep_of = {int(zid[i]): int(i) for i in first}
        self._rep_of = rep_of

    def _build_a(self) -> None:
        G, words = self.G, self.words
        n_g = np.zeros(self.n, dtype=np.int64)
        gamma_cache: dict[int, GroupElement | None] = {}
        bad = []
        for g in np.nonzero(self.grand >= 0)[0]:
            p = int(self.grand[g])
            rep = self._rep_of[int(self.zid[p])]
            if rep == p:
                n_g[g] = self._gc_rank[g]
                continue
            gam = gamma_cache.get(p, ())
            if gam == ():
                gam = G.multiply(words[rep], G.invert(words[p]))
                gamma_cache[p] = gam
            j = self.ball.index.get(G.multiply(gam, words[g]))
            if j is None or j >= self.n or self.grand[j] != rep:
                n_g[g] = -1
                bad.append((int(g), p, rep))
            else:
                n_g[g] = self._gc_rank[j]
        if bad:
            g, p, rep = bad[0]
            self.violations["descendant-number"] = {
                "g": G.word(words[g]),
                "grandparent": G.word(words[p]),
                "representative": G.word(words[rep]),
                "count": len(bad),
            }
        self.n_g = n_g
        self.aid = _intern_rows(np.stack([self.zid, n_g], axis=1))

    def z_type(self, g: GroupElement) -> BallType | str:
        i = self._id(g)
        if self.lengths[i] < self.L:
            return f"short:{self.G.word(g)}"
        return self.engine.ball_type(g, self.N)

    def descendant_number(self, g: GroupElement) -> int:
        return int(self.n_g[self._id(g)])

    def a_type(self, g: GroupElement) -> ZAType:
        return ZAType(self.z_type(g), self.descendant_number(g))

    def _a_type_of(self, i: int) -> ZAType:
        a = int(self.aid[i])
        t = self._a_memo.get(a)
        if t is None:
            t = self._a_memo[a] = self.a_type(self.words[i])
        return t

    def representative(self, g: GroupElement) -> GroupElement:
        """``g_τ`` for the Z-type τ of ``g``: the shortlex-least element of that type."""
        return self.words[self._rep_of[int(self.zid[self._id(g)])]]

    # per-sphere data

    def _sphere_matrix(self, level: int) -> np.ndarray:
        m = self._sphere_cache.get(level)
        if m is None:
            rg = self._sphere_ids(level)
            if level == 0:
                m = np.zeros((1, 0), dtype=np.int16)
            else:
                m = np.array(self.words[rg.start: rg.stop], dtype=np.int16).reshape(len(rg), level)
            self._sphere_cache[level] = m
        return m

    def _sphere_distances(self, level: int) -> np.ndarray:
        D = self._dist_cache.get(level)
        if D is None:
            rg = self._sphere_ids(level)
            if len(rg) > _GENERAL_SPHERE_LIMIT:
                raise ResourceLimitError(
                    f"sphere {level} has {len(rg)} elements, too many for pairwise distances"
                )
            D = distance_matrix(self.G, self.words[rg.start: rg.stop])
            self._dist_cache[level] = D
        return D

    def _blocks(self, level: int, half: int) -> np.ndarray:
        """Block label per sphere element: equal prefix of length level - half."""
        c = max(0, level - half)
        lab = self._block_cache.get((level, c))
        if lab is not None:
            return lab
        rg = self._sphere_ids(level)
        if c == 0 or len(rg) < 2:
            lab = np.zeros(len(rg), dtype=np.int64)
        else:
            M = self._sphere_matrix(level)[:, :c]
            change = np.any(M[1:] != M[:-1], axis=1)
            lab = np.concatenate([[0], np.cumsum(change)]).astype(np.int64)
        self._block_cache[(level, c)] = lab
        return lab

    def _same_level(self, i: int, r: int) -> np.ndarray:
        """Ball ids of elements with the same length as ``i`` within distance ``r``."""
        level = int(self.lengths[i])
        rg = self._sphere_ids(level)
        if self._free:
            lab = self._blocks(level, r // 2)
            return rg.start + np.nonzero(lab == lab[i - rg.start])[0]
        D = self._sphere_distances(level)
        return rg.start + np.nonzero(D[i - rg.start] <= r)[0]

    def _aseq(self, ids: np.ndarray, level: int) -> np.ndarray:
        """Rows ``(A(x), A(x^⇑), ...)`` down to generation ``level // L``."""
        cols = level // self.L + 1
        out = np.empty((len(ids), cols), dtype=np.int64)
        cur = np.asarray(ids, dtype=np.int64)
        for k in range(cols):
            out[:, k] = self.aid[cur]
            if k + 1 < cols:
                cur = self.grand[cur]
        return out

    # B types

    def _matrices(self) -> tuple[np.ndarray, np.ndarray]:
        """Random SL2(F_p) images ``M(x)`` and ``M(x)^-1`` of every ball element."""
        if hasattr(self, "_M"):
            return self._M, self._Minv
        G = self.G
        q = G.rank
        gens = [None] * q
        for s in range(q):
            if gens[s] is None:
                m = _random_sl2(self.rng)
                gens[s] = m
                gens[G.inverse[s]] = _inv_sl2(m)
        Mg = np.stack(gens)
        Mgi = np.stack([_inv_sl2(m) for m in gens])
        M = np.empty((self.n, 2, 2), dtype=np.int64)
        Mi = np.empty((self.n, 2, 2), dtype=np.int64)
        M[0] = Mi[0] = np.eye(2, dtype=np.int64)
        for level in range(1, self.radius + 1):
            rg = self._sphere_ids(level)
            ids = np.arange(rg.start, rg.stop)
            last = self._sphere_matrix(level)[:, -1].astype(np.int64)
            par = self.parent[ids]
            M[ids] = _mm(M[par], Mg[last])
            Mi[ids] = _mm(Mgi[last], Mi[par])
        self._M, self._Minv = M, Mi
        return M, Mi

    def _coef(self, ids: np.ndarray, table: dict) -> np.ndarray:
        need = int(ids.max()) + 1 if len(ids) else 0
        arr = table.get("c")
        if arr is None or len(arr) < need:
            extra = self.rng.integers(1, _P, size=max(need, 64) * 2)
            arr = extra if arr is None else np.concatenate([arr, extra])
            table["c"] = arr
        return arr[ids]

    def _fingerprint(self, level: int, labels: np.ndarray, values: np.ndarray, table: dict) -> np.ndarray:
        """``M(x)^-1 * sum_{x' in block(x)} c(value(x')) M(x')`` per sphere element."""
        M, Mi = self._matrices()
        rg = self._sphere_ids(level)
        ids = np.arange(rg.start, rg.stop)
        c = self._coef(values, table)
        terms = (M[ids] * c[:, None, None]) % _P
        nb = int(labels.max()) + 1
        S = np.zeros((nb, 2, 2), dtype=np.int64)
        for a in range(2):
            for b in range(2):
                # chunked bincount keeps sums exact in float64 range
                S[:, a, b] = _exact_group_sum(labels, terms[:, a, b], nb)
        H = _mm(Mi[ids], S[labels])
        return H.reshape(len(ids), 4)

    def _build_b(self) -> None:
        self.wid = np.full(self.n, -1, dtype=np.int64)
        self.kseq: dict[int, tuple[int, ...]] = {}
        self.b_id = np.full(self.n, -1, dtype=np.int64)
        self._b_block: dict[int, np.ndarray] = {}
        self._b_explicit: dict[int, frozenset] = {}
        w_intern: dict[tuple, int] = {}
        b_intern: dict[Hashable, int] = {}
        leaders: dict[Hashable, list[tuple[int, int]]] = {}
        table: dict = {}
        repeats = []
        for level in range(self.radius + 1):
            rg = self._sphere_ids(level)
            ids = np.arange(rg.start, rg.stop)
            aseq = self._aseq(ids, level)
            if self._free:
                lab = self._blocks(level, self.R // 2)
                self._b_block[level] = lab
                bounds = np.concatenate([[0], np.nonzero(np.diff(lab))[0] + 1, [len(ids)]])
                for a, b in zip(bounds[:-1], bounds[1:]):
                    ks, rep = _first_difference(aseq[a:b])
                    if rep:
                        repeats.append(int(ids[a]))
                    K = tuple(sorted(ks | {0}, reverse=True))
                    for i in range(a, b):
                        self.kseq[int(ids[i])] = K
                    W = aseq[a:b][:, list(K)]
                    for i in range(a, b):
                        key = (len(K),) + tuple(W[i - a].tolist())
                        w = w_intern.get(key)
                        if w is None:
                            w = len(w_intern)
                            w_intern[key] = w
                        self.wid[ids[i]] = w
                H = self._fingerprint(level, lab, self.wid[ids], table)
                for i in range(len(ids)):
                    key = ("B",) + tuple(H[i].tolist())
                    x = int(ids[i])
                    self.b_id[x] = self._classify(x, key, leaders, b_intern, self._same_b_config)
            else:
                D = self._sphere_distances(level)
                for i in range(len(ids)):
                    x = int(ids[i])
                    cz = np.nonzero(D[i] <= self.R)[0]
                    ks, rep = _first_difference(aseq[cz])
                    if rep:
                        repeats.append(x)
                    K = tuple(sorted(ks | {0}, reverse=True))
                    self.kseq[x] = K
                    val = frozenset(
                        (self._offset(x, int(ids[j])), tuple(aseq[j, list(K)].tolist())) for j in cz
                    )
                    t = b_intern.get(val)
                    if t is None:
                        t = len(b_intern)
                        b_intern[val] = t
                    self.b_id[x] = t
        if repeats:
            self.violations["ancestor-sequences-distinct"] = {
                "g": self.G.word(self.words[repeats[0]]),
                "count": len(repeats),
            }
        self.b_count = len(set(self.b_id.tolist()))

    def _offset(self, x: int, y: int) -> GroupElement:
        G = self.G
        return G.multiply(G.invert(self.words[x]), self.words[y])

    def _classify(self, x: int, key: Hashable, leaders: dict, intern: dict, same: Callable[[int, int], bool]) -> int:
        """Exact id for ``x`` among elements sharing the fingerprint ``key``."""
        cands = leaders.setdefault(key, [])
        for lead, t in cands:
            if same(lead, x):
                return t
        t = len(intern)
        intern[(key, len(cands))] = t
        cands.append((x, t))
        return t

    def _translate_block(self, tag: str, x: int, y: int, blocks: dict[int, np.ndarray], value: np.ndarray) -> bool:
        """Does ``γ = y x^-1`` carry the block of ``x`` onto the block of ``y``, values included?

        The two elements may sit on different spheres.  The answer only
        depends on the two blocks and on ``γ``, so it is memoized on that key.
        """
        G, words, index = self.G, self.words, self.ball.index
        lx, ly = int(self.lengths[x]), int(self.lengths[y])
        sx, sy = self._sphere_ids(lx).start, self._sphere_ids(ly).start
        labx, laby = blocks[lx], blocks[ly]
        bx, by = int(labx[x - sx]), int(laby[y - sy])
        gam = G.multiply(words[y], G.invert(words[x]))
        key = (tag, lx, ly, bx, by, gam)
        hit = self._translate_memo.get(key)
        if hit is not None:
            return hit
        mx = sx + np.nonzero(labx == bx)[0]
        ok = len(mx) == int((laby == by).sum())
        if ok:
            stop = self._sphere_ids(ly).stop
            for m in mx:
                j = index.get(G.multiply(gam, words[int(m)]))
                if j is None or j < sy or j >= stop or laby[j - sy] != by or value[m] != value[j]:
                    ok = False
                    break
        self._translate_memo[key] = ok
        return ok

    def _same_b_config(self, x: int, y: int) -> bool:
        return self._translate_block("B", x, y, self._b_block, self.wid)

    def _same_c_config(self, x: int, y: int) -> bool:
        return self._translate_block("C", x, y, self._c_block, self.b_id)

    def cousins(self, g: GroupElement) -> set[GroupElement]:
        """``C_g``: same-length elements within distance R (complete inside the ball)."""
        i = self._id(g)
        return {self.words[int(j)] for j in self._same_level(i, self.R)}

    def neighbours(self, g: GroupElement) -> set[GroupElement]:
        i = self._id(g)
        return {self.words[int(j)] for j in self._same_level(i, 8 * self.G.delta)}

    def k_value(self, g1: GroupElement, g2: GroupElement) -> int:
        """``k_{g',g''}``: first generation whose p-ancestors have different A-types."""
        i, j = self._id(g1), self._id(g2)
        if self.lengths[i] != self.lengths[j] or i == j:
            raise DomainError("k is defined for distinct elements of equal length")
        rows = self._aseq(np.array([i, j]), int(self.lengths[i]))
        d = np.nonzero(rows[0] != rows[1])[0]
        if len(d) == 0:
            raise DomainError("no generation separates these elements")
        return int(d[0])

    def b_type(self, g: GroupElement) -> BTypeValue:
        i = self._id(g)
        cz = self._same_level(i, self.R)
        K = self.kseq[i]
        pairs = set()
        for j in cz:
            W = tuple(self._a_type_of(self._ancestor_id(int(j), k)) for k in K)
            pairs.add((self._offset(i, int(j)), W))
        return BTypeValue(frozenset(pairs), K)

    def _ancestor_id(self, i: int, k: int) -> int:
        for _ in range(k):
            i = int(self.grand[i])
        return i

    def b_type_id(self, g: GroupElement) -> int:
        return int(self.b_id[self._id(g)])

    # C types

    def _build_c(self) -> None:
        self.c_id = np.full(self.n, -1, dtype=np.int64)
        self._c_block: dict[int, np.ndarray] = {}
        c_intern: dict[Hashable, int] = {}
        leaders: dict[Hashable, list[tuple[int, int]]] = {}
        table: dict = {}
        r = 8 * self.G.delta
        for level in range(self.radius + 1):
            rg = self._sphere_ids(level)
            ids = np.arange(rg.start, rg.stop)
            if self._free:
                lab = self._blocks(level, r // 2)
                self._c_block[level] = lab
                H = self._fingerprint(level, lab, self.b_id[ids], table)
                for i in range(len(ids)):
                    x = int(ids[i])
                    key = ("C",) + tuple(H[i].tolist())
                    self.c_id[x] = self._classify(x, key, leaders, c_intern, self._same_c_config)
            else:
                D = self._sphere_distances(level)
                for i in range(len(ids)):
                    x = int(ids[i])
                    nb = np.nonzero(D[i] <= r)[0]
                    val = frozenset((self._offset(x, int(ids[j])), int(self.b_id[ids[j]])) for j in nb)
                    t = c_intern.get(val)
                    if t is None:
                        t = len(c_intern)
                        c_intern[val] = t
                    self.c_id[x] = t
        self.c_count = len(set(self.c_id.tolist()))

    def _base_ids(self, base: str | Callable[[GroupElement], Hashable]) -> Callable[[int], Hashable]:
        if callable(base):
            return lambda j: base(self.words[j])
        table = {"Z": self.zid, "A": self.aid, "B": self.b_id, "C": self.c_id}.get(base)
        if table is None:
            raise DomainError(f"unknown base type {base!r}; use Z, A, B, C or a callable")
        return lambda j: int(table[j])

    def extended_type(self, g: GroupElement, base: str | Callable = "B", r: int = 0) -> ExtendedType:
        """``T^{+r}(g)``: ``h -> base(gh)`` over the r-fellows ``h`` of ``g``."""
        if r < 0:
            raise DomainError("r must be nonnegative")
        i = self._id(g)
        val = self._base_ids(base)
        tab = sorted(
            ((self._offset(i, int(j)), val(int(j))) for j in self._same_level(i, r)),
            key=lambda t: (len(t[0]), t[0]),
        )
        name = base if isinstance(base, str) else getattr(base, "__name__", "custom")
        return ExtendedType(name, r, tuple(tab))

    def c_type(self, g: GroupElement) -> ExtendedType:
        return self.extended_type(g, "B", 8 * self.G.delta)

    def theta_type(self, g: GroupElement, theta: int) -> ExtendedType:
        """``T^B_θ``: the B-type extended by ``θ * 12δ``."""
        return self.extended_type(g, "B", theta * 12 * self.G.delta)

    def c_type_id(self, g: GroupElement) -> int:
        return int(self.c_id[self._id(g)])

    def type_ids(self, kind: str) -> np.ndarray:
        return {"Z": self.zid, "A": self.aid, "B": self.b_id, "C": self.c_id, "ball": self.bid}[kind]

    def is_neighbour(self, i: int, j: int) -> bool:
        if self.lengths[i] != self.lengths[j]:
            return False
        return self._dist(i, j) <= 8 * self.G.delta

    def _dist(self, i: int, j: int) -> int:
        level = int(self.lengths[i])
        if self._free:
            a, b = self.words[i], self.words[j]
            k = 0
            while k < level and a[k] == b[k]:
                k += 1
            return 2 * (level - k)
        s = self._sphere_ids(level).start
        if int(self.lengths[j]) == level:
            return int(self._sphere_distances(level)[i - s, j - s])
        return self.G.distance(self.words[i], self.words[j])

    def dump(self) -> list[dict]:
        """Per-element records for the type-tower table export."""
        out = []
        for i, w in enumerate(self.words):
            out.append({
                "word": self.G.word(w),
                "length": int(self.lengths[i]),
                "z": int(self.zid[i]),
                "n": int(self.n_g[i]),
                "b": int(self.b_id[i]),
                "c": int(self.c_id[i]),
            })
        return out


def _exact_group_sum(labels: np.ndarray, vals: np.ndarray, nb: int) -> np.ndarray:
    """Per-label sums of int64 residues, reduced mod p without overflow."""
    out = np.zeros(nb, dtype=np.int64)
    # residues are < 2^30, so 2^33 of them fit in int64
    np.add.at(out, labels, vals)
    return out % _P


# verification


def _walk_pairs(T: TypeTower, X: np.ndarray, Y: np.ndarray, depth: int) -> tuple[np.ndarray, np.ndarray, tuple | None]:
    """Follow p-children of ``x`` and ``y`` along the same generators.

    Right multiplication by a generator commutes with left translation by
    ``γ = y x^-1``, so the pairs reached after ``depth`` steps are the
    pairs ``(x', γx')`` of p-descendants.  Returns the surviving pairs and
    the first pair whose p-child patterns differ.
    """
    right = T.ball.right
    parent = T.parent
    n = T.n
    q = T.G.rank
    bad = None
    for _ in range(depth):
        nx, ny = [], []
        for s in range(q):
            cx = right[X, s].astype(np.int64)
            cy = right[Y, s].astype(np.int64)
            okx = (cx >= 0) & (cx < n)
            oky = (cy >= 0) & (cy < n)
            px = okx & (parent[np.maximum(cx, 0)] == X) & (T.lengths[np.maximum(cx, 0)] == T.lengths[X] + 1)
            py = oky & (parent[np.maximum(cy, 0)] == Y) & (T.lengths[np.maximum(cy, 0)] == T.lengths[Y] + 1)
            mism = px != py
            if bad is None and mism.any():
                k = int(np.argmax(mism))
                bad = (int(X[k]), int(Y[k]), s)
            both = px & py
            nx.append(cx[both])
            ny.append(cy[both])
        X = np.concatenate(nx) if nx else X[:0]
        Y = np.concatenate(ny) if ny else Y[:0]
    return X, Y, bad


def _class_pairs(ids: np.ndarray, eligible: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(leader, member) pairs for every class with at least two eligible members."""
    idx = np.nonzero(eligible)[0]
    if len(idx) == 0:
        return idx, idx
    vals = ids[idx]
    order = np.argsort(vals, kind="stable")
    sv = vals[order]
    start = np.concatenate([[True], sv[1:] != sv[:-1]])
    lead = idx[order][np.maximum.accumulate(np.where(start, np.arange(len(sv)), 0))]
    mem = idx[order]
    keep = lead != mem
    return lead[keep], mem[keep]


def verify_genealogy_lemmas(T: TypeTower, radius: int | None = None, samples: int = 2000) -> Report:
    """Exhaustive checks of the genealogy facts on the tower's ball.

    Every translation statement is checked against the shortlex-first
    member of each type class, which suffices because the relations are
    transitive.  Failures carry a witness; they mean N or L is below the
    threshold for this group.
    """
    radius = T.radius if radius is None else min(radius, T.radius)
    G, L, words = T.G, T.L, T.words
    W = G.word
    rep = Report("genealogy", True)
    rep.stats.update(N=T.N, L=L, R=T.R, radius=radius, elements=T.n, b_types=T.b_count, c_types=T.c_count)
    lengths = T.lengths

    # p-children pattern and p-descendant bijection, by equal ball N-type
    elig = lengths < radius
    X, Y = _class_pairs(T.bid, elig)
    depth = 1
    _, _, bad = _walk_pairs(T, X, Y, depth)
    rep.add("p-children-pattern", bad is None, bad and {"x": W(words[bad[0]]), "y": W(words[bad[1]]), "generator": G.generators[bad[2]]})
    bad_all = None
    for d in range(1, radius + 1):
        sel = (lengths[X] + d == radius) | (lengths[Y] + d == radius)
        sel &= np.maximum(lengths[X], lengths[Y]) + d <= radius
        if sel.any():
            _, _, b = _walk_pairs(T, X[sel], Y[sel], d)
            if b is not None:
                bad_all = b
                break
    rep.add("p-descendant-bijection", bad_all is None, bad_all and {"x": W(words[bad_all[0]]), "y": W(words[bad_all[1]])})

    rep.add("descendant-numbers", "descendant-number" not in T.violations, T.violations.get("descendant-number"))
    rep.add("ancestor-sequences-distinct", "ancestor-sequences-distinct" not in T.violations, T.violations.get("ancestor-sequences-distinct"))

    def translated(ids_cls: np.ndarray, ids_child: np.ndarray, name: str) -> None:
        X, Y = _class_pairs(ids_cls, lengths + L <= radius)
        X2, Y2, bad = _walk_pairs(T, X, Y, L)
        wit = None
        ok = bad is None
        if bad is not None:
            wit = {"x": W(words[bad[0]]), "y": W(words[bad[1]]), "reason": "p-grandchildren do not correspond"}
        else:
            diff = ids_child[X2] != ids_child[Y2]
            if diff.any():
                k = int(np.argmax(diff))
                ok = False
                wit = {"child": W(words[X2[k]]), "translate": W(words[Y2[k]])}
        rep.add(name, ok, wit)
        rep.stats[f"{name}-pairs"] = int(len(X))

    translated(T.zid, T.aid, "A-translation")
    translated(T.b_id, T.b_id, "B-children")

    # B separation: equal B-type within 16δ on a sphere forces equality
    sep_bad = None
    r16 = 16 * G.delta
    for level in range(radius + 1):
        rg = T._sphere_ids(level)
        ids = np.arange(rg.start, rg.stop)
        b = T.b_id[ids]
        if T._free:
            lab = T._blocks(level, r16 // 2)
            key = np.stack([lab, b], axis=1)
            _, first, counts = np.unique(key, axis=0, return_index=True, return_counts=True)
            if (counts > 1).any():
                k = int(first[np.argmax(counts > 1)])
                other = [int(j) for j in np.nonzero((lab == lab[k]) & (b == b[k]))[0] if j != k][0]
                sep_bad = (int(ids[k]), int(ids[other]))
                break
        else:
            D = T._sphere_distances(level)
            close = (D <= r16) & (b[:, None] == b[None, :])
            np.fill_diagonal(close, False)
            if close.any():
                a, c = np.argwhere(close)[0]
                sep_bad = (int(ids[a]), int(ids[c]))
                break
    rep.add(
        "B-separation",
        sep_bad is None,
        sep_bad and {"g": W(words[sep_bad[0]]), "h": W(words[sep_bad[1]]), "distance": T._dist(*sep_bad)},
    )

    # B determines A, via the class structure and explicit round trips
    X, Y = _class_pairs(T.b_id, np.ones(T.n, dtype=bool))
    diff = T.aid[X] != T.aid[Y]
    wit = None
    if diff.any():
        k = int(np.argmax(diff))
        wit = {"g": W(words[X[k]]), "h": W(words[Y[k]])}
    rt_ok = True
    rng = np.random.default_rng(1)
    small = [i for i in rng.permutation(T.n)[:200] if len(T._same_level(int(i), T.R)) <= 400][:20]
    for i in small:
        g = words[int(i)]
        if T.b_type(g).a_type() != T.a_type(g):
            rt_ok, wit = False, {"g": W(g), "reason": "round trip"}
            break
    rep.add("B-determines-A", not diff.any() and rt_ok, wit)

    # k recursion on sampled quadruples
    kr_bad = None
    cand = np.nonzero(lengths >= L + 1)[0]
    cand = cand[lengths[cand] <= radius]
    for _ in range(min(samples, len(cand))):
        g2 = int(rng.choice(cand))
        cz = T._same_level(g2, T.R)
        if len(cz) < 2:
            continue
        a, b = (int(v) for v in rng.choice(cz, size=2, replace=False))
        pa, pb = int(T.grand[a]), int(T.grand[b])
        try:
            # identical ancestor sequences are reported by their own check
            ka = T.k_value(words[a], words[b])
            if T.aid[a] == T.aid[b]:
                want = T.k_value(words[pa], words[pb]) + 1 if pa != pb else None
            else:
                want = 0
        except DomainError:
            continue
        if want is not None and ka != want:
            kr_bad = {"g'": W(words[a]), "g''": W(words[b]), "k": ka, "expected": want}
            break
    rep.add("k-recursion", kr_bad is None, kr_bad)

    # C-types
    sib_bad = None
    gc = T._gc_order
    par = T.grand[gc]
    key = np.stack([par, T.c_id[gc]], axis=1)
    if len(key):
        _, first, counts = np.unique(key, axis=0, return_index=True, return_counts=True)
        if (counts > 1).any():
            k = int(first[np.argmax(counts > 1)])
            sib_bad = {"parent": W(words[par[k]]), "child": W(words[gc[k]])}
    rep.add("C-siblings-distinct", sib_bad is None, sib_bad)
    translated(T.c_id, T.c_id, "C-children")

    glue = check_c_gluing(T, radius, assume_distinct=sib_bad is None)
    rep.add("C-gluing", glue.passed, glue.witness)
    rep.stats["C-gluing-pairs"] = glue.stats.get("pairs", 0)
    if not rep.passed:
        rep.notes.append(
            f"N={T.N}, L={T.L} are below the threshold for this group; least_sufficient_parameters searches upward"
        )
    return rep


def _neighbour_pair_chunks(T: TypeTower, level: int, max_rows: int = 2_000_000) -> Iterator[np.ndarray]:
    """Ordered pairs ``(p, p')`` on one sphere with ``p <-> p'`` (including ``p = p'``), in chunks."""
    rg = T._sphere_ids(level)
    ids = np.arange(rg.start, rg.stop)
    r = 8 * T.G.delta
    if T._free:
        lab = T._blocks(level, r // 2)
        bounds = np.concatenate([[0], np.nonzero(np.diff(lab))[0] + 1, [len(ids)]])
        out, rows = [], 0
        for a, b in zip(bounds[:-1], bounds[1:]):
            blk = ids[a:b]
            out.append(np.stack(np.meshgrid(blk, blk, indexing="ij"), axis=-1).reshape(-1, 2))
            rows += len(blk) ** 2
            if rows >= max_rows:
                yield np.concatenate(out)
                out, rows = [], 0
        if out:
            yield np.concatenate(out)
        return
    D = T._sphere_distances(level)
    a, b = np.nonzero(D <= r)
    if len(a):
        yield np.stack([ids[a], ids[b]], axis=1)


def _neighbour_pairs(T: TypeTower, level: int) -> np.ndarray:
    chunks = list(_neighbour_pair_chunks(T, level))
    return np.concatenate(chunks) if chunks else np.zeros((0, 2), dtype=np.int64)


def check_c_gluing(
    T: TypeTower,
    radius: int | None = None,
    assume_distinct: bool = True,
    budget: int = 5_000_000,
    ids: np.ndarray | None = None,
) -> Report:
    """The gluing hypothesis for C-types at levels that are multiples of L.

    For grandchild pairs ``(g, g')`` and ``(h, h')`` whose p-grandparents
    are neighbours and carry equal C-type pairs, equal C-types of
    ``(g, g')`` and ``(h, h')`` with ``g <-> g'`` must give ``h <-> h'``.
    When siblings have distinct C-types, a parent pair whose C-type pair
    occurs only once can only be compared with itself, which is trivial,
    so only repeated parent keys are expanded.  ``ids`` replaces the
    C-type table.
    """
    radius = T.radius if radius is None else radius
    cid = T.c_id if ids is None else ids
    L = T.L
    rep = Report("C-gluing", True)
    pairs_seen = 0
    for m in range(0, radius - L + 1, L):
        P = _neighbour_pairs(T, m)
        if len(P) == 0:
            continue
        key = np.stack([cid[P[:, 0]], cid[P[:, 1]]], axis=1)
        _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        inv = inv.reshape(-1)
        sel = counts[inv] > 1 if assume_distinct else np.ones(len(P), dtype=bool)
        seen: dict[tuple, tuple[bool, tuple]] = {}
        for (p, pp), grp in zip(P[sel], inv[sel]):
            gs = T._grandchildren(int(p))
            gps = T._grandchildren(int(pp))
            pairs_seen += len(gs) * len(gps)
            if pairs_seen > budget:
                rep.notes.append(f"stopped after {budget} grandchild pairs")
                rep.stats["pairs"] = pairs_seen
                return rep
            for g in gs:
                for gp in gps:
                    k = (int(grp), int(cid[g]), int(cid[gp]))
                    nb = T.is_neighbour(int(g), int(gp))
                    prev = seen.get(k)
                    if prev is None:
                        seen[k] = (nb, (int(g), int(gp)))
                    elif prev[0] != nb:
                        a, b = prev[1] if prev[0] else (int(g), int(gp))
                        c, d = (int(g), int(gp)) if prev[0] else prev[1]
                        W = T.G.word
                        rep.passed = False
                        rep.witness = {
                            "g": W(T.words[a]), "g'": W(T.words[b]),
                            "h": W(T.words[c]), "h'": W(T.words[d]),
                        }
                        rep.stats["pairs"] = pairs_seen
                        return rep
    rep.stats["pairs"] = pairs_seen
    return rep


def least_sufficient_parameters(
    G: GroupPresentation,
    radius: int,
    Ns: Iterable[int] = range(0, 9),
    Ls: Sequence[int] = (1, 2, 3),
    engine: TypeEngine | None = None,
) -> tuple[int, int, Report] | None:
    """First ``(N, L)`` (by L, then N) for which every genealogy check passes."""
    engine = engine or TypeEngine(G)
    ball = enumerate_ball(G, radius)
    R = torsion_radius(G).R
    Ns = list(Ns)
    for L in Ls:
        for N in Ns:
            T = TypeTower(G, radius, N, L, R=R, engine=engine, ball=ball)
            rep = verify_genealogy_lemmas(T)
            if rep.passed:
                return N, L, rep
    return None

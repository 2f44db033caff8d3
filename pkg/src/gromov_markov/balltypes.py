"""Ball types, truncated cone types, fellow sets and torsion.

The ball N-type of ``x`` is the table ``y -> |xy| - |x|`` over ``B_N(e)``.
Tables are stored as int8 rows indexed by the shortlex enumeration of
``B_N(e)`` and interned to small integer ids per radius.

For free products of cyclics, the table of ``x`` only depends on a short
suffix of ``x``: at most ``N`` letters of ``x`` can cancel against a word of
length ``N``, so the last syllables covering ``N + 1`` letters determine
it, with a long infinite-order syllable capped at ``N + 1`` letters.  Rows
are computed once per distinct suffix by the compiled kernel.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .ball import CayleyBall, enumerate_ball
from .errors import DomainError, InconclusiveError, ResourceLimitError
from .group import FAMILY_FREE, FreeProductPresentation, GroupElement, GroupPresentation
from .kernels import pack_words, packed_product_lengths
from .reports import Report


@dataclass(frozen=True, eq=False)
class BallType:
    """The function ``y -> |xy| - |x|`` on ``B_N(e)``.

    ``domain`` is the shortlex list of ``B_N(e)``; ``table`` holds the values
    in that order.  Equality and hashing use ``(N, table)``.
    """

    N: int
    table: tuple[int, ...]
    domain: tuple[GroupElement, ...] = field(repr=False)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, BallType) and self.N == other.N and self.table == other.table

    def __post_init__(self) -> None:
        object.__setattr__(self, "_hash", hash((self.N, self.table)))

    def __hash__(self) -> int:
        return self._hash

    def __lt__(self, other: "BallType") -> bool:
        return (self.N, self.table) < (other.N, other.table)

    def __call__(self, y: GroupElement) -> int:
        return self.table[self.domain.index(y)]

    def as_dict(self) -> dict[GroupElement, int]:
        return dict(zip(self.domain, self.table))

    @property
    def content_hash(self) -> str:
        return hashlib.sha256(bytes(np.asarray(self.table, dtype=np.int8)) + bytes([self.N % 256])).hexdigest()[:16]


@dataclass(frozen=True)
class ConeSet:
    """Truncated cone type: all ``y`` with ``|y| <= depth`` and ``|xy| = |x| + |y|``."""

    base: GroupElement
    depth: int
    members: frozenset[GroupElement]

    def __contains__(self, y: GroupElement) -> bool:
        return y in self.members


@dataclass(frozen=True)
class FellowSet:
    """``P_r(x)``: all ``y`` with ``|y| <= r`` and ``|xy| = |x|``."""

    base: GroupElement
    r: int
    members: frozenset[GroupElement]

    def __contains__(self, y: GroupElement) -> bool:
        return y in self.members

    def __len__(self) -> int:
        return len(self.members)


@dataclass
class TypeConfig:
    """Parameters N, L and the constants ladder derived from δ and N₀."""

    N: int
    L: int
    N0: int
    N1: int
    N2: int
    N3: int
    N4: int
    N5: int
    source: str = "configured"

    @classmethod
    def ladder(cls, delta: int, N0: int) -> dict[str, int]:
        return {
            "N0": N0,
            "N1": N0 + 4 * delta,
            "N2": N0 + 16 * delta,
            "N3": N0 + 21 * delta,
            "N4": N0 + 64 * delta,
            "N5": 2 * N0 + 8 * delta + 2,
        }

    @classmethod
    def derived(cls, delta: int, N0: int, R: int) -> "TypeConfig":
        lad = cls.ladder(delta, N0)
        N = lad["N5"]
        L = max(N + 4 * delta, 14 * delta, -(-R // 2) + 4 * delta)
        return cls(N=N, L=L, source="derived-from-delta", **lad)

    @classmethod
    def configured(cls, delta: int, N0: int, N: int, L: int) -> "TypeConfig":
        return cls(N=N, L=L, source="configured", **cls.ladder(delta, N0))

    def violations(self, delta: int, R: int) -> list[str]:
        """Ladder inequalities that the configured N and L miss."""
        out = []
        if self.N < self.N5:
            out.append(f"N={self.N} < N5={self.N5}")
        if self.L < max(self.N + 4 * delta, 14 * delta):
            out.append(f"L={self.L} < max(N+4δ, 14δ)={max(self.N + 4 * delta, 14 * delta)}")
        if 2 * self.L < R + 8 * delta:
            out.append(f"L={self.L} < R/2+4δ={R / 2 + 4 * delta}")
        return out


def suffix_key(G: FreeProductPresentation, x: GroupElement, N: int) -> GroupElement:
    """Shortest suffix of ``x`` whose ball N-type equals that of ``x``.

    Takes whole syllables from the end until at least ``N + 1`` letters are
    covered, capping the oldest syllable at ``N + 1`` letters when it has
    infinite order.
    """
    n = len(x)
    if n <= N:
        return x
    gf = G.gen_factor
    need = N + 1
    i = n
    covered = 0
    while i > 0 and covered < need:
        f = gf[x[i - 1]]
        j = i - 1
        while j > 0 and gf[x[j - 1]] == f:
            j -= 1
        syl = i - j
        if covered + syl >= need and G.orders[f] == 0:
            # infinite syllable: only its sign and its size up to need matter
            return x[i - (need - covered):]
        covered += syl
        i = j
    return x[i:]


class TypeEngine:
    """Memoized ball types, cone types and fellow sets for one presentation."""

    def __init__(self, G: GroupPresentation):
        self.G = G
        self._domains: dict[int, CayleyBall] = {}
        self._intern: dict[int, dict[bytes, int]] = {}
        self._tables: dict[int, list[bytes]] = {}
        self._reps: dict[int, list[GroupElement]] = {}
        self._memo: dict[int, dict[GroupElement, int]] = {}
        self._native = isinstance(G, FreeProductPresentation) and type(G).multiply is FreeProductPresentation.multiply
        self._kdata = G.kernel_data() if self._native else None
        self._pack: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._fellow_memo: dict[tuple[GroupElement, int], list[GroupElement]] = {}

    # domains

    def domain_ball(self, N: int) -> CayleyBall:
        b = self._domains.get(N)
        if b is None:
            for R, big in self._domains.items():
                if R >= N:
                    words = big.words[: big.sphere_start[N + 1]]
                    b = _SubBall(words)
                    break
            else:
                b = enumerate_ball(self.G, N)
            self._domains[N] = b
        return b

    def domain(self, N: int) -> list[GroupElement]:
        return self.domain_ball(N).words

    def _packed(self, N: int) -> tuple[np.ndarray, np.ndarray]:
        p = self._pack.get(N)
        if p is None:
            p = pack_words(self.domain(N))
            self._pack[N] = p
        return p

    # rows

    def rows(self, xs: Sequence[GroupElement], N: int) -> np.ndarray:
        """int8 matrix of ``|x y| - |x|`` for ``y`` in ``B_N(e)``."""
        dom = self.domain(N)
        if not xs:
            return np.zeros((0, len(dom)), dtype=np.int8)
        if self._native:
            keys: dict[GroupElement, int] = {}
            which = np.empty(len(xs), dtype=np.int64)
            for i, x in enumerate(xs):
                k = suffix_key(self.G, x, N)
                j = keys.get(k)
                if j is None:
                    j = len(keys)
                    keys[k] = j
                which[i] = j
            reps = list(keys)
            X, lens = pack_words(reps)
            Y, yl = self._packed(N)
            full = packed_product_lengths(X, lens, Y, yl, self._kdata)
            rows = (full - lens[:, None]).astype(np.int8)
            return rows[which]
        out = np.empty((len(xs), len(dom)), dtype=np.int8)
        G = self.G
        for i, x in enumerate(xs):
            lx = len(x)
            out[i] = [len(G.multiply(x, y)) - lx for y in dom]
        return out

    # interning

    def _ids_from_rows(self, xs: Sequence[GroupElement], rows: np.ndarray, N: int) -> np.ndarray:
        intern = self._intern.setdefault(N, {})
        tables = self._tables.setdefault(N, [])
        reps = self._reps.setdefault(N, [])
        memo = self._memo.setdefault(N, {})
        ids = np.empty(len(xs), dtype=np.int64)
        for i, x in enumerate(xs):
            key = rows[i].tobytes()
            t = intern.get(key)
            if t is None:
                t = len(tables)
                intern[key] = t
                tables.append(key)
                reps.append(x)
            elif (len(x), x) < (len(reps[t]), reps[t]):
                reps[t] = x
            ids[i] = t
            memo[x] = t
        return ids

    def ball_type_ids(self, xs: Sequence[GroupElement], N: int) -> np.ndarray:
        memo = self._memo.setdefault(N, {})
        missing = [x for x in dict.fromkeys(xs) if x not in memo]
        if missing:
            self._ids_from_rows(missing, self.rows(missing, N), N)
        return np.fromiter((memo[x] for x in xs), dtype=np.int64, count=len(xs))

    def ball_type_id(self, x: GroupElement, N: int) -> int:
        memo = self._memo.setdefault(N, {})
        t = memo.get(x)
        if t is None:
            t = int(self.ball_type_ids([x], N)[0])
        return t

    def ball_type(self, x: GroupElement, N: int) -> BallType:
        if N < 0:
            raise DomainError("N must be nonnegative")
        t = self.ball_type_id(x, N)
        return self.type_from_id(t, N)

    def type_from_id(self, t: int, N: int) -> BallType:
        row = np.frombuffer(self._tables[N][t], dtype=np.int8)
        return BallType(N, tuple(int(v) for v in row), tuple(self.domain(N)))

    def census(self, N: int) -> list[tuple[int, GroupElement]]:
        """Interned types at radius N with their shortlex-least representatives."""
        return list(enumerate(self._reps.get(N, [])))

    # cones and fellows

    def cone_type(self, x: GroupElement, depth: int) -> ConeSet:
        if depth < 0:
            raise DomainError("depth must be nonnegative")
        dom = self.domain(depth)
        row = self.rows([x], depth)[0]
        lens = np.fromiter((len(y) for y in dom), dtype=np.int8, count=len(dom))
        members = frozenset(dom[i] for i in np.nonzero(row == lens)[0])
        return ConeSet(x, depth, members)

    def cone_masks(self, xs: Sequence[GroupElement], depth: int) -> np.ndarray:
        dom = self.domain(depth)
        lens = np.fromiter((len(y) for y in dom), dtype=np.int8, count=len(dom))
        return self.rows(xs, depth) == lens[None, :]

    def fellows(self, x: GroupElement, r: int) -> FellowSet:
        if r < 0:
            raise DomainError("r must be nonnegative")
        dom = self.domain(r)
        row = self.rows([x], r)[0]
        return FellowSet(x, r, frozenset(dom[i] for i in np.nonzero(row == 0)[0]))

    def fellow_list(self, x: GroupElement, r: int) -> list[GroupElement]:
        """``P_r(x)`` in shortlex order."""
        key = (x, r)
        out = self._fellow_memo.get(key)
        if out is None:
            dom = self.domain(r)
            row = self.rows([x], r)[0]
            out = [dom[i] for i in np.nonzero(row == 0)[0]]
            self._fellow_memo[key] = out
        return out

    def restrict_type(self, t: BallType, y: GroupElement, k: int) -> BallType:
        """``z -> t(yz) - t(y)`` on ``B_{t.N - k}``: the N-type of ``xy``."""
        if len(y) > k:
            raise DomainError(f"|y|={len(y)} exceeds k={k}")
        N = t.N - k
        if N < 0:
            raise DomainError("k exceeds the radius of the type")
        big = {w: v for w, v in zip(t.domain, t.table)}
        fy = big[y]
        dom = self.domain(N)
        G = self.G
        return BallType(N, tuple(big[G.multiply(y, z)] - fy for z in dom), tuple(dom))


class _SubBall:
    """Prefix of a larger ball used as a type domain."""

    def __init__(self, words: list[GroupElement]):
        self.words = words


def ball_type(engine: TypeEngine, x: GroupElement, N: int) -> BallType:
    return engine.ball_type(x, N)


def verify_ball_determines_cone(engine: TypeEngine, N: int, radius: int, depth: int, ball: CayleyBall | None = None) -> Report:
    """Equal ball N-types imply equal truncated cone types, over ``B_radius``."""
    G = engine.G
    if ball is None or ball.radius < radius:
        ball = enumerate_ball(G, radius)
    words = ball.words[: ball.sphere_start[radius + 1]]
    ids = engine.ball_type_ids(words, N)
    masks = engine.cone_masks(words, depth)
    leader: dict[int, int] = {}
    report = Report("ball-determines-cone", True)
    bad = 0
    for i, t in enumerate(ids):
        j = leader.setdefault(int(t), i)
        if j != i and not np.array_equal(masks[i], masks[j]):
            bad += 1
            if report.witness is None:
                report.witness = {"x": G.word(words[j]), "y": G.word(words[i]), "N": N}
    report.passed = bad == 0
    report.stats.update(
        elements=len(words), ball_types=len(leader), counterexamples=bad,
        cone_types=len({m.tobytes() for m in masks}),
    )
    return report


def empirical_N0(engine: TypeEngine, radius: int, depth: int, max_N: int = 12) -> int:
    """Least N for which ball types determine cone types on the ball."""
    for N in range(max_N + 1):
        if verify_ball_determines_cone(engine, N, radius, depth).passed:
            return N
    raise InconclusiveError(f"no N <= {max_N} determines cone types on B_{radius}")


def cone_census(engine: TypeEngine, radius: int, depth: int, ball: CayleyBall | None = None) -> int:
    if ball is None or ball.radius < radius:
        ball = enumerate_ball(engine.G, radius)
    words = ball.words[: ball.sphere_start[radius + 1]]
    masks = engine.cone_masks(words, depth)
    return len({m.tobytes() for m in masks})


def ball_census(engine: TypeEngine, N: int, radius: int, ball: CayleyBall | None = None) -> int:
    if ball is None or ball.radius < radius:
        ball = enumerate_ball(engine.G, radius)
    words = ball.words[: ball.sphere_start[radius + 1]]
    return len(set(engine.ball_type_ids(words, N).tolist()))


@dataclass
class TorsionInfo:
    torsion: frozenset[GroupElement]
    R: int
    method: str


def torsion_radius(
    G: GroupPresentation,
    max_power: int = 10_000,
    max_length: int | None = None,
) -> TorsionInfo:
    """Torsion elements of length at most 16δ and the cousin radius R.

    ``R`` is the maximum of ``16δ`` and the lengths of all powers of those
    torsion elements.  Free groups are torsion-free, so nothing is
    enumerated for them.  Otherwise each element of ``B_{16δ}`` is cycled
    through its powers until it returns to ``e``; an element whose powers
    run past the budget must be certified torsion-free by the family's
    normal form, otherwise an inconclusive error is raised.
    """
    r = 16 * G.delta
    if G.family == FAMILY_FREE:
        return TorsionInfo(frozenset({()}), r, "torsion-free family")
    if max_length is None:
        max_length = 64 * r
    ball = enumerate_ball(G, r)
    tor = {(): 0}
    R = r
    for x in ball.words[1:]:
        cert = G.is_torsion_certificate(x)
        if cert is False:
            continue
        h = x
        longest = len(x)
        k = 1
        while h:
            h = G.multiply(h, x)
            k += 1
            longest = max(longest, len(h))
            if k > max_power or longest > max_length:
                raise InconclusiveError(
                    f"powers of {G.word(x)} left the budget (power {k}, length {longest}) without repeating"
                )
        tor[x] = longest
        R = max(R, longest)
    return TorsionInfo(frozenset(tor), R, "power iteration")


def verify_torsion_dichotomy(engine: TypeEngine, N: int, r: int, radius: int, torsion: Iterable[GroupElement] | None = None) -> Report:
    """Equal N-types of ``g`` and ``gh`` with ``|gh| = |g|``, ``|h| <= r`` force torsion ``h``."""
    G = engine.G
    ball = enumerate_ball(G, radius)
    words = ball.words
    ids = engine.ball_type_ids(words, N)
    dom = engine.domain(r)
    rows = engine.rows(words, r)
    report = Report("torsion-dichotomy", True)
    pairs = 0
    bad = 0
    tor_cache: dict[GroupElement, bool] = {}
    torsion = set(torsion) if torsion is not None else None

    def is_torsion(h: GroupElement) -> bool:
        if torsion is not None:
            return h in torsion
        v = tor_cache.get(h)
        if v is None:
            cert = G.is_torsion_certificate(h)
            if cert is None:
                p = h
                for _ in range(10_000):
                    if not p:
                        break
                    p = G.multiply(p, h)
                    if len(p) > 64 * max(1, len(h)) * G.delta:
                        break
                cert = not p
            v = bool(cert)
            tor_cache[h] = v
        return v

    for i, x in enumerate(words):
        for j in np.nonzero(rows[i] == 0)[0]:
            h = dom[j]
            if not h:
                continue
            gh = G.multiply(x, h)
            k = ball.index.get(gh)
            if k is None:
                continue
            if ids[k] == ids[i]:
                pairs += 1
                if not is_torsion(h):
                    bad += 1
                    if report.witness is None:
                        report.witness = {"g": G.word(x), "h": G.word(h)}
    report.passed = bad == 0
    report.stats.update(equal_type_pairs=pairs, violations=bad)
    return report


def verify_fellows_from_type(engine: TypeEngine, N: int, r: int, radius: int) -> Report:
    """Equal N-types give equal fellow sets ``P_r`` for ``r <= N``."""
    G = engine.G
    ball = enumerate_ball(G, radius)
    words = ball.words
    ids = engine.ball_type_ids(words, N)
    masks = engine.rows(words, r) == 0
    leader: dict[int, int] = {}
    report = Report("fellows-from-type", True)
    for i, t in enumerate(ids):
        j = leader.setdefault(int(t), i)
        if not np.array_equal(masks[i], masks[j]):
            report.passed = False
            report.witness = {"x": G.word(words[j]), "y": G.word(words[i])}
            break
    return report


def verify_descendant_types(engine: TypeEngine, N: int, M: int, radius: int) -> Report:
    """Equal N-types give equal M-types of corresponding deep descendants.

    For ``x, x'`` with equal ``T^b_N`` and ``y`` in the cone of ``x`` with
    ``|y| >= M + 4δ`` and ``|xy|``, ``|x'y|`` inside the ball, the M-types
    of ``xy`` and ``x'y`` agree.
    """
    G = engine.G
    ball = enumerate_ball(G, radius)
    words = ball.words
    ids = engine.ball_type_ids(words, N)
    classes: dict[int, list[int]] = {}
    for i, t in enumerate(ids):
        classes.setdefault(int(t), []).append(i)
    report = Report("descendant-types", True)
    stride = M + 4 * G.delta
    checked = 0
    for members in classes.values():
        if len(members) < 2:
            continue
        a = members[0]
        xa = words[a]
        room = radius - len(xa)
        if room < stride:
            continue
        cone = engine.cone_type(xa, room)
        deep = [y for y in cone.members if len(y) >= stride]
        for b in members[1:]:
            xb = words[b]
            for y in deep:
                if len(xb) + len(y) > radius:
                    continue
                u = G.multiply(xa, y)
                v = G.multiply(xb, y)
                checked += 1
                if engine.ball_type_id(u, M) != engine.ball_type_id(v, M):
                    report.passed = False
                    report.witness = {"x": G.word(xa), "x'": G.word(xb), "y": G.word(y)}
                    report.stats["checked"] = checked
                    return report
    report.stats["checked"] = checked
    return report


def census_export(engine: TypeEngine, N: int) -> list[dict]:
    """Records for each interned N-type: id, content hash, representative."""
    G = engine.G
    out = []
    for t, rep in engine.census(N):
        bt = engine.type_from_id(t, N)
        out.append({"id": t, "hash": bt.content_hash, "representative": G.word(rep), "table": list(bt.table)})
    out.sort(key=lambda r: (len(r["representative"]) if r["representative"] != "e" else 0, r["representative"]))
    return out


__all__ = [
    "BallType",
    "ConeSet",
    "FellowSet",
    "TypeConfig",
    "TypeEngine",
    "TorsionInfo",
    "ResourceLimitError",
    "ball_census",
    "ball_type",
    "cone_census",
    "census_export",
    "empirical_N0",
    "torsion_radius",
    "verify_ball_determines_cone",
    "verify_descendant_types",
    "verify_fellows_from_type",
    "verify_torsion_dichotomy",
]

"""Markov systems as data: validation, finite description, rebuild and metrics.

A *system* here is anything with ``complexes`` (list of
``SimplicialComplex``), ``maps`` (``maps[n] : K_{n+1} -> K_n``) and
``simplex_type(n, s)``.  ``NerveSystem`` and ``RebuiltSystem`` both fit.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Iterable, Protocol, Sequence

from .complexes import (
    AffineMap,
    SimplicialComplex,
    barycentre,
    hull_l1_diameter,
    identity_map,
    l1_distance,
    push_point,
    sort_key,
    vertex_point,
)
from .errors import CensusIncompleteError, DomainError, GluingError, PreconditionError
from .group import GroupElement, GroupPresentation
from .reports import Report

__all__ = [
    "l1_distance",
    "MetricParams",
    "LimitPoint",
    "limit_point",
    "simplicial_distance",
    "boundary_distance_da",
    "sample_bilipschitz",
    "MarkovSystemDescription",
    "RebuiltSystem",
    "describe",
    "rebuild_from_prefix",
    "typed_isomorphic",
    "validate_markov_compactum",
]


class MarkovSystem(Protocol):
    complexes: list[SimplicialComplex]
    maps: list[AffineMap]

    def simplex_type(self, n: int, s: Sequence[Hashable]) -> Hashable: ...


def type_token(t: Hashable) -> str:
    """Stable short name for a simplex type."""
    if isinstance(t, str):
        return t
    return hashlib.sha256(repr(t).encode()).hexdigest()[:16]


def _composites(system: MarkovSystem, j: int) -> list[AffineMap]:
    """``[f^j_j, f^j_{j-1}, ..., f^j_0]``."""
    if hasattr(system, "composite"):
        return [system.composite(j, i) for i in range(j, -1, -1)]
    out = [identity_map(system.complexes[j])]
    for n in range(j - 1, -1, -1):
        out.append(system.maps[n].compose(out[-1]))
    return out


def _preimage(system: MarkovSystem, n: int, s: Sequence[Hashable]) -> set[tuple]:
    return system.complexes[n + 1].full_subcomplex(system.maps[n].preimage_vertices(s))


def _ordered(simplices: Iterable[tuple]) -> list[tuple]:
    return sorted(simplices, key=lambda t: (len(t), [sort_key(v) for v in t]))


# finite descriptions


@dataclass
class MarkovSystemDescription:
    """Prefix ``K_0..K_P`` with types and bonding maps."""

    complexes: list[SimplicialComplex]
    maps: list[AffineMap]
    types: dict[tuple[int, tuple], str]
    census_closed: bool

    @property
    def prefix(self) -> int:
        return len(self.complexes) - 1

    def simplex_type(self, n: int, s: Sequence[Hashable]) -> str:
        return self.types[(n, SimplicialComplex.canon(s))]

    def level_hash(self, n: int) -> str:
        h = hashlib.sha256()
        for s in self.complexes[n].ordered():
            h.update(repr((s, self.types[(n, s)])).encode())
        if n < len(self.maps):
            for v in self.complexes[n + 1].vertices:
                h.update(repr((v, sorted(self.maps[n].images[v].items(), key=lambda kv: sort_key(kv[0])))).encode())
        return h.hexdigest()

    def to_json(self) -> str:
        levels = []
        for n, K in enumerate(self.complexes):
            levels.append(
                {
                    "level": n,
                    "sha256": self.level_hash(n),
                    "vertices": [list(v) for v in K.vertices],
                    "simplices": [[list(v) for v in s] + [self.types[(n, s)]] for s in K.ordered()],
                    "map": None
                    if n == 0
                    else [
                        [list(v), [[list(u), str(w)] for u, w in sorted(self.maps[n - 1].images[v].items(), key=lambda kv: sort_key(kv[0]))]]
                        for v in K.vertices
                    ],
                }
            )
        return json.dumps({"census_closed": self.census_closed, "levels": levels}, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "MarkovSystemDescription":
        data = json.loads(text)
        complexes, maps, types = [], [], {}
        for lv in data["levels"]:
            n = lv["level"]
            verts = [tuple(v) for v in lv["vertices"]]
            simplices = []
            for row in lv["simplices"]:
                s = SimplicialComplex.canon(tuple(v) for v in row[:-1])
                simplices.append(s)
                types[(n, s)] = row[-1]
            complexes.append(SimplicialComplex(n, verts, set(simplices)))
            if lv["map"] is not None:
                images = {tuple(v): {tuple(u): Fraction(w) for u, w in img} for v, img in lv["map"]}
                maps.append(AffineMap(n, n - 1, images))
        desc = cls(complexes, maps, types, data["census_closed"])
        for lv in data["levels"]:
            if desc.level_hash(lv["level"]) != lv["sha256"]:
                raise DomainError(f"content hash mismatch at level {lv['level']}")
        return desc


def describe(system: MarkovSystem, prefix: int) -> MarkovSystemDescription:
    """Cut ``K_0..K_prefix`` out of a system, with types as stable tokens."""
    if prefix < 1 or prefix >= len(system.complexes):
        raise DomainError(f"prefix must lie in 1..{len(system.complexes) - 1}")
    types = {}
    for n in range(prefix + 1):
        for s in system.complexes[n].simplices:
            types[(n, s)] = type_token(system.simplex_type(n, s))
    modelled = {t for (n, _), t in types.items() if n < prefix}
    closed = all(t in modelled for t in types.values())
    return MarkovSystemDescription(list(system.complexes[: prefix + 1]), list(system.maps[:prefix]), types, closed)


@dataclass
class RebuiltSystem:
    complexes: list[SimplicialComplex]
    maps: list[AffineMap]
    types: dict[tuple[int, tuple], str]

    @property
    def depth(self) -> int:
        return len(self.complexes) - 1

    def simplex_type(self, n: int, s: Sequence[Hashable]) -> str:
        return self.types[(n, SimplicialComplex.canon(s))]


def _type_bijection(src: MarkovSystem, m: int, sigma: tuple, dst: MarkovSystem, n: int, s: tuple) -> dict:
    """The type-preserving vertex bijection ``σ -> s``; a GluingError if it is not unique."""
    def by_type(sys_, lvl, simplex):
        out: dict[str, list] = {}
        for v in simplex:
            out.setdefault(type_token(sys_.simplex_type(lvl, (v,))), []).append(v)
        return out

    a, b = by_type(src, m, sigma), by_type(dst, n, s)
    if {k: len(v) for k, v in a.items()} != {k: len(v) for k, v in b.items()}:
        raise GluingError(f"vertex types of {s!r} do not match its model {sigma!r}")
    if any(len(v) > 1 for v in a.values()):
        raise GluingError(f"repeated vertex types in {sigma!r}: the injection is not unique")
    return {a[k][0]: b[k][0] for k in a}


def rebuild_from_prefix(desc: MarkovSystemDescription, levels: int) -> RebuiltSystem:
    """Extend the prefix to ``K_levels`` by copying preimages of same-type models.

    A new vertex is named ``(carrier, type)`` where ``carrier`` is the
    simplex spanned by its image; distinct types in preimages make the
    name unique and make copies glue along shared faces.
    """
    P = desc.prefix
    models: dict[str, tuple[int, tuple]] = {}
    for n in range(P):
        for s in desc.complexes[n].ordered():
            models.setdefault(desc.types[(n, s)], (n, s))
    complexes = list(desc.complexes)
    maps = list(desc.maps)
    types = dict(desc.types)
    sys_ = RebuiltSystem(complexes, maps, types)
    for n in range(P, levels):
        K = complexes[n]
        images: dict = {}
        vtypes: dict = {}
        simplices: dict[tuple, str] = {}
        for s in K.maximal():
            t = types[(n, s)]
            if t not in models:
                raise CensusIncompleteError(f"type {t} at level {n} has no model in the prefix")
            m, sigma = models[t]
            beta = _type_bijection(sys_, m, sigma, sys_, n, s)
            pre = _preimage(sys_, m, sigma)
            names = {}
            for v in sorted({v for p in pre for v in p}, key=sort_key):
                img = {beta[u]: w for u, w in maps[m].images[v].items()}
                vt = types[(m + 1, (v,))]
                name = (SimplicialComplex.canon(img), vt)
                if name in images and images[name] != img:
                    raise GluingError(f"copies disagree on the image of {name!r}")
                images[name] = img
                vtypes[name] = vt
                names[v] = name
            for p in pre:
                q = SimplicialComplex.canon(names[v] for v in p)
                pt = types[(m + 1, p)]
                if simplices.get(q, pt) != pt:
                    raise GluingError(f"copies disagree on the type of {q!r}")
                simplices[q] = pt
        newK = SimplicialComplex(n + 1, list(images), set(simplices))
        if newK.simplices != set(simplices):
            raise GluingError(f"copied simplexes at level {n + 1} are not closed under faces")
        complexes.append(newK)
        maps.append(AffineMap(n + 1, n, images))
        for q, pt in simplices.items():
            types[(n + 1, q)] = pt
    return sys_


def _canonical_names(system: MarkovSystem, prefix: int, top: int) -> list[dict]:
    """Rename vertices above ``prefix`` by ``(carrier, type)``, level by level."""
    names = [{v: v for v in system.complexes[n].vertices} for n in range(prefix + 1)]
    for n in range(prefix, top):
        f = system.maps[n]
        cur = {}
        for v in system.complexes[n + 1].vertices:
            carrier = SimplicialComplex.canon(names[n][u] for u in f.images[v])
            cur[v] = (carrier, type_token(system.simplex_type(n + 1, (v,))))
        names.append(cur)
    return names


def typed_isomorphic(a: MarkovSystem, b: MarkovSystem, prefix: int, top: int) -> Report:
    """Compare two systems that agree up to ``prefix``, levels ``prefix+1..top``."""
    rep = Report("typed-isomorphism")
    na, nb = _canonical_names(a, prefix, top), _canonical_names(b, prefix, top)
    for n in range(prefix + 1, top + 1):
        def view(sys_, names):
            simp = {
                (SimplicialComplex.canon(names[n][v] for v in s), type_token(sys_.simplex_type(n, s)))
                for s in sys_.complexes[n].simplices
            }
            f = sys_.maps[n - 1]
            img = {
                names[n][v]: tuple(sorted(((names[n - 1][u], w) for u, w in f.images[v].items()), key=lambda kv: sort_key(kv[0])))
                for v in sys_.complexes[n].vertices
            }
            return simp, img

        sa, ia = view(a, na)
        sb, ib = view(b, nb)
        rep.add(f"level-{n}-simplices", sa == sb, {"only-left": len(sa - sb), "only-right": len(sb - sa)})
        rep.add(f"level-{n}-maps", ia == ib, None)
        rep.stats[f"level-{n}"] = len(sa)
    return rep


def verify_abstract_markov(system: MarkovSystem, levels: Iterable[int]) -> Report:
    """One-step Markov check without group elements.

    For same-type simplexes the vertex bijection is the type-preserving
    one; it must carry preimage onto preimage, types onto types and the
    bonding map onto itself.  Ladders of every length follow by induction.
    """
    rep = Report("abstract-markov")
    first: dict[str, tuple[int, tuple]] = {}
    bad = None
    pairs = 0
    for n in levels:
        if n >= len(system.maps):
            break
        for s in _ordered(system.complexes[n].simplices):
            t = type_token(system.simplex_type(n, s))
            if t not in first:
                first[t] = (n, s)
                continue
            m, sigma = first[t]
            if m >= len(system.maps):
                continue
            pairs += 1
            try:
                beta = _type_bijection(system, m, sigma, system, n, s)
            except GluingError as exc:
                bad = {"simplex": (n, s), "model": (m, sigma), "reason": str(exc)}
                break
            P, Q = _preimage(system, m, sigma), _preimage(system, n, s)
            tp = {type_token(system.simplex_type(m + 1, (v,))): v for p in P for v in p}
            tq = {type_token(system.simplex_type(n + 1, (v,))): v for q in Q for v in q}
            if set(tp) != set(tq):
                bad = {"simplex": (n, s), "model": (m, sigma), "reason": "vertex types differ"}
                break
            phi = {tp[k]: tq[k] for k in tp}
            moved = {SimplicialComplex.canon(phi[v] for v in p): type_token(system.simplex_type(m + 1, p)) for p in P}
            want = {q: type_token(system.simplex_type(n + 1, q)) for q in Q}
            if moved != want:
                bad = {"simplex": (n, s), "model": (m, sigma), "reason": "preimages not isomorphic"}
                break
            for v, w in phi.items():
                lhs = system.maps[n].images[w]
                rhs = {beta[u]: x for u, x in system.maps[m].images[v].items()}
                if lhs != rhs:
                    bad = {"simplex": (n, s), "model": (m, sigma), "vertex": w}
                    break
            if bad:
                break
        if bad:
            break
    rep.add("one-step-ladder", bad is None, bad)
    rep.stats["pairs"] = pairs
    return rep


# validation


def validate_markov_compactum(system: MarkovSystem, depth: int | None = None) -> Report:
    """Conditions (i)-(iii), mesh, barycentricity and distinct types on a finite tower."""
    top = len(system.complexes) - 1 if depth is None else min(depth, len(system.complexes) - 1)
    rep = Report("markov-compactum")
    dims = [system.complexes[n].dimension for n in range(top + 1)]
    seen: set = set()
    new = []
    for n in range(top + 1):
        k = 0
        for s in system.complexes[n].simplices:
            t = type_token(system.simplex_type(n, s))
            if t not in seen:
                seen.add(t)
                k += 1
        new.append(k)
    closed = top >= 1 and new[-1] == 0
    settled = [n for n in range(top + 1) if all(x == 0 for x in new[n:])]
    horizon = settled[0] if settled else top + 1
    bounded = closed and all(d <= max(dims[: max(horizon, 1)]) for d in dims)
    rep.add("i:bounded-dimension", bounded, None if bounded else {"dimensions": dims, "new-types": new})

    bad_affine = None
    for f in system.maps[:top]:
        K = system.complexes[f.target]
        for v, p in f.images.items():
            if any(w <= 0 for w in p.values()) or sum(p.values()) != 1 or SimplicialComplex.canon(p) not in K:
                bad_affine = {"level": f.source, "vertex": v}
                break
        if bad_affine is None:
            for s in system.complexes[f.source].simplices:
                if f.simplex_image(s) not in K:
                    bad_affine = {"level": f.source, "simplex": s, "reason": "image leaves every simplex"}
                    break
        if bad_affine:
            break
    rep.add("ii:affine", bad_affine is None, bad_affine)

    markov = system.verify_markov(top) if hasattr(system, "verify_markov") else verify_abstract_markov(system, range(top))
    rep.add("iii:markov", markov.passed, markov.witnesses or markov.witness)

    n_dim = max(dims)
    ratio = Fraction(n_dim, n_dim + 1)
    worst: dict[int, Fraction] = {}
    mesh_bad = None
    for j in range(top + 1):
        for f in _composites(system, j):
            i = f.target
            for s in system.complexes[j].simplices:
                d = hull_l1_diameter([f.images[v] for v in s])
                worst[j - i] = max(worst.get(j - i, Fraction(0)), d)
                if d > 2 * ratio ** (j - i) and mesh_bad is None:
                    mesh_bad = {"simplex": (j, s), "i": i, "diameter": str(d)}
    rep.add("mesh", mesh_bad is None, mesh_bad)
    rep.stats["mesh-diameters"] = {k: str(v) for k, v in sorted(worst.items())}

    bary = None
    for f in system.maps[:top]:
        for v, p in f.images.items():
            if set(p.values()) != {Fraction(1, len(p))}:
                bary = {"level": f.source, "vertex": v}
                break
        if bary:
            break
    rep.add("barycentric", bary is None, bary)

    distinct = None
    for n in range(top):
        for s in system.complexes[n].simplices:
            ts = [type_token(system.simplex_type(n + 1, p)) for p in _preimage(system, n, s)]
            if len(ts) != len(set(ts)):
                distinct = {"simplex": (n, s)}
                break
        if distinct:
            break
    rep.add("distinct-types", distinct is None, distinct)
    rep.stats.update({"dimensions": dims, "new-types": new})
    return rep


# metrics


@dataclass(frozen=True)
class MetricParams:
    """Weight ``a > 1``, dimension bound ``n`` and truncation depth ``T``."""

    a: Fraction
    n: int = 0
    T: int = 10
    C: Fraction | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "a", Fraction(self.a))
        if self.a <= 1:
            raise DomainError("the weight a must exceed 1")
        if self.T < 0 or self.n < 0:
            raise DomainError("T and n must be non-negative")

    def require_bilipschitz(self) -> None:
        if self.n > 0 and self.a >= Fraction(self.n + 1, self.n):
            raise DomainError(f"a = {self.a} violates a < (n+1)/n = {Fraction(self.n + 1, self.n)}")

    def tail(self) -> Fraction:
        """``2 a^{-T} a/(a-1)``."""
        return 2 * self.a ** (-self.T) * self.a / (self.a - 1)


@dataclass
class LimitPoint:
    """Thread ``x_0, ..., x_T`` with ``f_i(x_{i+1}) = x_i`` exactly."""

    points: list[dict]
    label: Hashable = None

    @property
    def depth(self) -> int:
        return len(self.points) - 1

    def simplex(self, i: int) -> tuple:
        return SimplicialComplex.canon(self.points[i])

    def consistent(self, maps: Sequence[AffineMap]) -> bool:
        return all(push_point(self.points[i + 1], maps[i].images) == self.points[i] for i in range(self.depth))


def limit_point(cover, word: GroupElement, L: int, depth: int) -> LimitPoint:
    """Thread of the boundary point represented by ``word`` down from level ``depth``.

    ``x_depth`` is the vertex of the atom at the prefix of length
    ``depth·L``.  Lower levels push it down through barycentric bonding
    maps computed on demand from ancestry, so no complex is enumerated.
    """
    if len(word) < depth * L:
        raise DomainError(f"representative of length {len(word)} is shorter than level {depth * L}")
    G = cover.G
    top = G.prefix(word, depth * L) if hasattr(G, "prefix") else word[: depth * L]
    pts = [vertex_point(top)]
    cache: dict = {}
    nonempty = cover.spans.span_nonempty if hasattr(cover, "spans") else (lambda x: True)
    for i in range(depth - 1, -1, -1):
        nxt: dict = {}
        for v, w in pts[-1].items():
            img = cache.get(v)
            if img is None:
                anc = [f for f in cover.ancestors(v, i * L) if nonempty(f)]
                img = cache[v] = barycentre(SimplicialComplex.canon(anc))
            for u, x in img.items():
                nxt[u] = nxt.get(u, Fraction(0)) + w * x
        pts.append(nxt)
    pts.reverse()
    return LimitPoint(pts, label=word)


def simplicial_distance(x: LimitPoint, y: LimitPoint, params: MetricParams) -> tuple[Fraction, Fraction]:
    """Interval for ``Σ a^{-i} d_{K_i}(x_i, y_i)`` from threads to depth ``T``.

    Once the supports at level ``T`` are disjoint every deeper term is
    exactly 2, and the interval collapses to the exact value.
    """
    T = min(params.T, x.depth, y.depth)
    a = params.a
    part = sum((a ** (-i) * l1_distance(x.points[i], y.points[i]) for i in range(T + 1)), Fraction(0))
    if not set(x.points[T]) & set(y.points[T]):
        exact = part + 2 * a ** (-T) / (a - 1)
        return exact, exact
    tail = 2 * a ** (-T) * a / (a - 1)
    return part, part + tail


def boundary_distance_da(G: GroupPresentation, p: GroupElement, q: GroupElement, a: Fraction) -> tuple[Fraction, bool]:
    """``a^{-l}`` with ``l`` the distance from ``e`` to a geodesic from ``p`` to ``q``.

    Returns ``(value, exact)``.  In tree families geodesics are unique and
    ``l`` is the Gromov product ``(p|q)_e``.  Elsewhere the Gromov
    product is a lower bound for ``l`` and the value is flagged.
    """
    if len(p) != len(q):
        raise DomainError("representatives must have equal depth")
    a = Fraction(a)
    l2 = len(p) + len(q) - G.distance(p, q)
    tree = bool(getattr(G, "_free", False))
    return a ** (-(l2 // 2)), tree and l2 % 2 == 0


def _random_geodesic(G: GroupPresentation, length: int, rng: random.Random) -> GroupElement:
    x: GroupElement = ()
    gens = [G.generator(s) for s in range(G.rank)]
    for _ in range(length):
        kids = [y for y in (G.multiply(x, g) for g in gens) if len(y) == len(x) + 1]
        x = rng.choice(sorted(set(kids)))
    return x


def sample_bilipschitz(cover, params: MetricParams, pairs: int, depth: int, L: int = 1, seed: int = 0) -> Report:
    """Ratios ``d^M_a / d_a`` over seeded random boundary pairs at ``depth``."""
    params.require_bilipschitz()
    rng = random.Random(seed)
    G = cover.G
    P = MetricParams(params.a, params.n, depth, params.C)
    lo_r: Fraction | None = None
    hi_r: Fraction | None = None
    used = skipped = 0
    flagged = 0
    threads: dict = {}
    for _ in range(pairs):
        p = _random_geodesic(G, depth * L, rng)
        q = _random_geodesic(G, depth * L, rng)
        if p == q:
            skipped += 1
            continue
        for w in (p, q):
            if w not in threads:
                threads[w] = limit_point(cover, w, L, depth)
        dlo, dhi = simplicial_distance(threads[p], threads[q], P)
        da, exact = boundary_distance_da(G, p, q, params.a)
        flagged += not exact
        rlo, rhi = dlo / da, dhi / da
        lo_r = rlo if lo_r is None else min(lo_r, rlo)
        hi_r = rhi if hi_r is None else max(hi_r, rhi)
        used += 1
    rep = Report("bilipschitz")
    finite = used > 0 and lo_r is not None and lo_r > 0
    rep.add("ratios-bounded", finite, None if finite else {"used": used})
    rep.stats.update(
        {
            "a": str(params.a),
            "depth": depth,
            "pairs": used,
            "identical-skipped": skipped,
            "min": lo_r,
            "max": hi_r,
            "distortion": (hi_r / lo_r) if finite else None,
            "seed": seed,
            "inexact-da": flagged,
        }
    )
    if flagged:
        rep.notes.append(f"{flagged} pairs used a Gromov-product bound for d_a")
    return rep

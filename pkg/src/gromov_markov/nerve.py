"""Nerves of the level-nL covers, bonding maps, simplex types and the Markov ladder.

Vertices of ``K_n`` are the atoms of the cover at level ``nL``, named by
their group elements.  Two atoms carry one vertex each even if their sets
happen to coincide; the cover interface has no set equality to decide that.
"""

from __future__ import annotations

import copy
import hashlib
import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Hashable, Iterable, Mapping, Protocol, Sequence

import networkx as nx

from .complexes import (
    AffineMap,
    SimplicialComplex,
    barycentre,
    hull_l1_diameter,
    identity_map,
    sort_key,
)
from .errors import DomainError, InconsistencyError, PreconditionError
from .group import GroupElement, GroupPresentation
from .reports import Report

STRONG_LABELS = ("B", "C", "theta")


class CoverSystem(Protocol):
    G: GroupPresentation
    strength: str

    def atoms(self, level: int) -> list[GroupElement]: ...
    def neighbours(self, x: GroupElement) -> list[GroupElement]: ...
    def adjacent(self, x: GroupElement, y: GroupElement) -> bool: ...
    def ancestors(self, x: GroupElement, level: int) -> list[GroupElement]: ...
    def label(self, x: GroupElement) -> Hashable: ...
    def shift(self, x: GroupElement, y: GroupElement) -> GroupElement: ...
    def translate(self, g: GroupElement, x: GroupElement) -> GroupElement: ...
    def relative(self, x: GroupElement, y: GroupElement) -> GroupElement: ...


class ExplicitCoverSystem:
    """Cover given by tables, for constructed fixtures.

    ``atoms`` maps a level to its atoms, ``edges`` lists adjacent pairs and
    ``parents`` maps an atom to the atoms containing it one nerve level up.
    ``meets`` optionally decides whether a clique has a common point.
    """

    def __init__(
        self,
        G: GroupPresentation,
        atoms: Mapping[int, Sequence[GroupElement]],
        edges: Iterable[tuple[GroupElement, GroupElement]] = (),
        parents: Mapping[GroupElement, Sequence[GroupElement]] | None = None,
        labels: Mapping[GroupElement, Hashable] | Callable[[GroupElement], Hashable] | None = None,
        strength: str = "ball",
        meets: Callable[[Sequence[GroupElement]], bool] | None = None,
    ):
        self.G = G
        self._atoms = {k: list(v) for k, v in atoms.items()}
        self._level = {x: k for k, v in self._atoms.items() for x in v}
        self._adj: dict[GroupElement, set] = {}
        for x, y in edges:
            self._adj.setdefault(x, set()).add(y)
            self._adj.setdefault(y, set()).add(x)
        self._parents = {k: list(v) for k, v in (parents or {}).items()}
        self._labels = labels
        self.strength = strength
        if meets is not None:
            self.meets = meets

    def atoms(self, level: int) -> list[GroupElement]:
        return list(self._atoms.get(level, []))

    def neighbours(self, x: GroupElement) -> list[GroupElement]:
        return sorted(self._adj.get(x, ()), key=sort_key)

    def adjacent(self, x: GroupElement, y: GroupElement) -> bool:
        return y in self._adj.get(x, ())

    def ancestors(self, x: GroupElement, level: int) -> list[GroupElement]:
        out, frontier = [], list(self._parents.get(x, ()))
        while frontier:
            nxt = []
            for u in frontier:
                lv = self._level.get(u)
                if lv == level:
                    out.append(u)
                elif lv is not None and lv > level:
                    nxt.extend(self._parents.get(u, ()))
            frontier = list(dict.fromkeys(nxt))
        return list(dict.fromkeys(out))

    def label(self, x: GroupElement) -> Hashable:
        if self._labels is None:
            return 0
        if callable(self._labels):
            return self._labels(x)
        return self._labels[x]

    def relative(self, x: GroupElement, y: GroupElement) -> GroupElement:
        return self.G.multiply(self.G.invert(x), y)

    def translate(self, g: GroupElement, x: GroupElement) -> GroupElement:
        return self.G.multiply(g, x)

    def shift(self, x: GroupElement, y: GroupElement) -> GroupElement:
        return self.G.multiply(y, self.G.invert(x))


def build_nerve(cover: CoverSystem, n: int, L: int) -> tuple[SimplicialComplex, bool]:
    """``K_n`` from the atoms at level ``nL``.

    Simplexes are cliques of the adjacency graph that pass the cover's
    ``meets`` test when it has one.  The flag is true when a clique of three
    or more atoms was accepted without such a test.
    """
    atoms = cover.atoms(n * L)
    aset = set(atoms)
    graph = nx.Graph()
    graph.add_nodes_from(atoms)
    for x in atoms:
        for y in cover.neighbours(x):
            if y in aset and y != x and not graph.has_edge(x, y) and cover.adjacent(x, y):
                graph.add_edge(x, y)
    meets = getattr(cover, "meets", None)
    simplices = set()
    over = False
    rejected: list[frozenset] = []
    for clique in nx.enumerate_all_cliques(graph):
        if len(clique) >= 3:
            fc = frozenset(clique)
            if any(r <= fc for r in rejected):
                continue
            if meets is None:
                over = True
            elif not meets(clique):
                rejected.append(fc)
                continue
        simplices.add(tuple(clique))
    return SimplicialComplex(n, atoms, simplices), over


def build_bonding_map(cover: CoverSystem, source: SimplicialComplex, target: SimplicialComplex, L: int) -> AffineMap:
    """Each vertex goes to the barycentre of the simplex of atoms containing it."""
    images = {}
    level = target.level * L
    for v in source.vertices:
        anc = [f for f in cover.ancestors(v, level) if target.has_vertex(f)]
        if not anc:
            raise InconsistencyError(f"atom {v!r} at level {source.level * L} has no ancestor atom")
        if anc not in target:
            raise InconsistencyError(f"ancestors of {v!r} do not span a simplex of K_{target.level}")
        images[v] = barycentre(SimplicialComplex.canon(anc))
    return AffineMap(source.level, target.level, images)


@dataclass(frozen=True)
class SimplexGraph:
    """Labelled complete digraph on the elements of a simplex."""

    vertices: tuple
    labels: tuple
    edges: tuple  # edges[i][j] = v_i^{-1} v_j

    def canonical(self) -> tuple:
        k = len(self.vertices)
        order = sorted(range(k), key=lambda i: sort_key(self.labels[i]))
        groups = [list(g) for _, g in itertools.groupby(order, key=lambda i: sort_key(self.labels[i]))]
        best = None
        for parts in itertools.product(*(itertools.permutations(g) for g in groups)):
            perm = [i for p in parts for i in p]
            form = tuple(tuple(self.edges[a][b] for b in perm) for a in perm)
            if best is None or form < best:
                best = form
        return (tuple(sort_key(self.labels[i]) for i in order), best)


@dataclass(frozen=True)
class SimplexType:
    """Similarity class of a simplex: canonical form of its simplex graph."""

    canon: tuple

    @property
    def digest(self) -> str:
        return hashlib.sha256(repr(self.canon).encode()).hexdigest()[:16]

    def __repr__(self) -> str:
        return f"SimplexType({self.digest})"


@dataclass(frozen=True)
class StrengthenedType:
    base: SimplexType
    parent: SimplexType | None
    placed: tuple | None

    def __repr__(self) -> str:
        return f"StrengthenedType({self.base.digest}, {self.parent.digest if self.parent else None}, {self.placed})"


class NerveSystem:
    """Complexes ``K_0..K_depth`` with bonding maps and simplex types."""

    def __init__(self, cover: CoverSystem, L: int = 1, depth: int = 4, labeler: Callable | None = None):
        if L < 1 or depth < 0:
            raise DomainError("L must be positive and depth non-negative")
        self.cover = cover
        self.G = cover.G
        self.L = L
        self.depth = depth
        self.labeler = labeler if labeler is not None else cover.label
        self.strength = getattr(cover, "strength", "ball")
        self.mode = "delta"
        self.complexes: list[SimplicialComplex] = []
        self.over_approximated: list[int] = []
        for n in range(depth + 1):
            K, over = build_nerve(cover, n, L)
            self.complexes.append(K)
            if over:
                self.over_approximated.append(n)
        self.maps = [
            build_bonding_map(cover, self.complexes[n + 1], self.complexes[n], L) for n in range(depth)
        ]
        self._composite: dict[tuple[int, int], AffineMap] = {}
        self._dtype: dict[tuple[int, tuple], SimplexType] = {}
        self._stype: dict[tuple[int, tuple], StrengthenedType] = {}
        self._reps: dict[SimplexType, tuple[int, tuple]] | None = None

    # maps

    def composite(self, j: int, i: int) -> AffineMap:
        """``f^j_i : K_j -> K_i``."""
        if i > j:
            raise DomainError("composite maps go down the tower")
        m = self._composite.get((j, i))
        if m is None:
            m = identity_map(self.complexes[j]) if i == j else self.maps[i].compose(self.composite(j, i + 1))
            self._composite[(j, i)] = m
        return m

    def parent_simplex(self, n: int, s: Sequence[GroupElement]) -> tuple:
        """``s↑``: the least simplex of ``K_{n-1}`` containing ``f_{n-1}(s)``."""
        if n == 0:
            raise DomainError("level 0 has no parent simplexes")
        return self.maps[n - 1].simplex_image(s)

    def preimage(self, n: int, s: Sequence[GroupElement], k: int) -> set[tuple]:
        """Simplexes of ``K_{n+k}`` whose image under ``f^{n+k}_n`` lies in ``s``."""
        good = self.composite(n + k, n).preimage_vertices(s)
        return self.complexes[n + k].full_subcomplex(good)

    # types

    def simplex_graph(self, s: Sequence[GroupElement]) -> SimplexGraph:
        vs = SimplicialComplex.canon(s)
        rel = self.cover.relative
        edges = tuple(tuple(rel(x, y) for y in vs) for x in vs)
        return SimplexGraph(vs, tuple(self.labeler(x) for x in vs), edges)

    def delta_type(self, n: int, s: Sequence[GroupElement]) -> SimplexType:
        key = (n, SimplicialComplex.canon(s))
        t = self._dtype.get(key)
        if t is None:
            t = self._dtype[key] = SimplexType(self.simplex_graph(key[1]).canonical())
        return t

    def simplex_type(self, n: int, s: Sequence[GroupElement]) -> Hashable:
        if self.mode == "delta":
            return self.delta_type(n, s)
        return self.strengthened_type(n, s)

    def all_shifts(self, s: Sequence[GroupElement], t: Sequence[GroupElement]) -> list[GroupElement]:
        """Every ``γ`` with ``γ·s = t`` preserving labels, anchored at the first vertex of ``s``."""
        s, t = SimplicialComplex.canon(s), SimplicialComplex.canon(t)
        if len(s) != len(t):
            return []
        x0 = s[0]
        lab0 = self.labeler(x0)
        tset = set(t)
        out = []
        for y in t:
            if self.labeler(y) != lab0:
                continue
            g = self.cover.shift(x0, y)
            ok = True
            for x in s:
                z = self.cover.translate(g, x)
                if z not in tset or self.labeler(z) != self.labeler(x):
                    ok = False
                    break
            if ok:
                out.append(g)
        return out

    def find_shift(self, s: Sequence[GroupElement], t: Sequence[GroupElement]) -> GroupElement | None:
        shifts = self.all_shifts(s, t)
        return min(shifts, key=sort_key) if shifts else None

    def simplices(self, upto: int | None = None) -> Iterable[tuple[int, tuple]]:
        top = self.depth if upto is None else upto
        for n in range(top + 1):
            for s in self.complexes[n].ordered():
                yield n, s

    def representatives(self) -> dict[SimplexType, tuple[int, tuple]]:
        """Least (level, shortlex) simplex of each ``T^Δ`` type."""
        if self._reps is None:
            reps: dict = {}
            for n, s in self.simplices():
                reps.setdefault(self.delta_type(n, s), (n, s))
            self._reps = reps
        return self._reps

    def strengthened_type(self, n: int, s: Sequence[GroupElement]) -> StrengthenedType:
        key = (n, SimplicialComplex.canon(s))
        t = self._stype.get(key)
        if t is None:
            base = self.delta_type(n, key[1])
            if n == 0:
                t = StrengthenedType(base, None, None)
            else:
                up = self.parent_simplex(n, key[1])
                ptype = self.delta_type(n - 1, up)
                _, rep = self.representatives()[ptype]
                g = self.find_shift(up, rep)
                if g is None:
                    raise InconsistencyError(f"no shift from {up!r} to its representative {rep!r}")
                placed = SimplicialComplex.canon(self.cover.translate(g, x) for x in key[1])
                t = StrengthenedType(base, ptype, placed)
            self._stype[key] = t
        return t

    # verification

    def census(self) -> list[int]:
        """Number of types first seen at each level."""
        seen: set = set()
        out = []
        for n in range(self.depth + 1):
            new = 0
            for s in self.complexes[n].ordered():
                t = self.simplex_type(n, s)
                if t not in seen:
                    seen.add(t)
                    new += 1
            out.append(new)
        return out

    def verify_markov(self, depth: int | None = None, all_pairs: bool = True, max_pairs: int = 200_000) -> Report:
        """Translate preimage ladders between same-type simplexes and check every square.

        Pairs are drawn from levels up to ``depth``; their ladders run to the
        top of the built tower.  With ``all_pairs`` false, each simplex is
        compared with the first of its type only; isomorphisms compose, so
        the other pairs follow.
        """
        depth = self.depth if depth is None else min(depth, self.depth)
        rep = Report("markov")
        classes: dict[Hashable, list[tuple[int, tuple]]] = {}
        for n, s in self.simplices(depth):
            classes.setdefault(self.simplex_type(n, s), []).append((n, s))
        fails: dict[str, list] = {k: [] for k in ("shift", "well-defined", "isomorphism", "type-preserving", "commuting")}
        pairs = squares = 0
        for members in classes.values():
            if all_pairs and len(members) * (len(members) - 1) // 2 <= max_pairs:
                it = itertools.combinations(members, 2)
            else:
                it = ((members[0], m) for m in members[1:])
            for (i, s), (j, t) in it:
                pairs += 1
                squares += self._check_pair(i, s, j, t, self.depth, fails)
        for key, bad in fails.items():
            rep.add(key, not bad, bad[0] if bad else None)
        rep.stats.update(
            {"types": len(classes), "pairs": pairs, "squares": squares, "mode": self.mode, "census": self.census()}
        )
        if self.over_approximated:
            rep.notes.append(f"clique rule used without a common-point test at levels {self.over_approximated}")
        return rep

    def _check_pair(self, i: int, s: tuple, j: int, t: tuple, depth: int, fails: dict) -> int:
        g = self.find_shift(s, t)
        if g is None:
            fails["shift"].append({"s": (i, s), "t": (j, t)})
            return 0
        tr = self.cover.translate
        squares = 0
        for k in range(depth - max(i, j) + 1):
            P = self.preimage(i, s, k)
            Q = self.preimage(j, t, k)
            pv = sorted({v for p in P for v in p}, key=sort_key)
            qv = {v for q in Q for v in q}
            phi = {v: tr(g, v) for v in pv}
            missing = [v for v in pv if phi[v] not in qv]
            if missing:
                fails["well-defined"].append({"s": (i, s), "t": (j, t), "k": k, "vertex": missing[0]})
                return squares
            image = {SimplicialComplex.canon(phi[v] for v in p) for p in P}
            if image != Q:
                fails["isomorphism"].append({"s": (i, s), "t": (j, t), "k": k})
                return squares
            for p in P:
                q = SimplicialComplex.canon(phi[v] for v in p)
                if self.simplex_type(i + k, p) != self.simplex_type(j + k, q):
                    fails["type-preserving"].append({"s": (i, s), "t": (j, t), "k": k, "simplex": p})
                    return squares
            if k >= 1:
                fi, fj = self.maps[i + k - 1], self.maps[j + k - 1]
                for v in pv:
                    lhs = fj.images[phi[v]]
                    rhs = {tr(g, u): w for u, w in fi.images[v].items()}
                    squares += 1
                    if lhs != rhs:
                        fails["commuting"].append(
                            {"s": (i, s), "t": (j, t), "k": k, "vertex": v, "f(i(v))": lhs, "i(f(v))": rhs}
                        )
                        return squares
        return squares

    def check_barycentric(self) -> Report:
        rep = Report("barycentric")
        bad = []
        for f in self.maps:
            for v, p in f.images.items():
                ws = set(p.values())
                if len(ws) != 1 or sum(p.values()) != 1 or next(iter(ws)) != Fraction(1, len(p)):
                    bad.append({"level": f.source, "vertex": v, "image": p})
        rep.add("equal-weights", not bad, bad[0] if bad else None)
        return rep

    def dimension_bound(self) -> int:
        return max(K.dimension for K in self.complexes)

    def check_mesh(self, depth: int | None = None) -> Report:
        """``diam f^j_i(σ) ≤ 2 (n/(n+1))^{j-i}`` for every simplex, exactly."""
        depth = self.depth if depth is None else min(depth, self.depth)
        n = self.dimension_bound()
        ratio = Fraction(n, n + 1)
        rep = Report("mesh")
        bad = []
        checked = 0
        for j in range(depth + 1):
            for s in self.complexes[j].simplices:
                for i in range(j + 1):
                    f = self.composite(j, i)
                    d = hull_l1_diameter([f.images[v] for v in s])
                    checked += 1
                    if d > 2 * ratio ** (j - i):
                        bad.append({"simplex": (j, s), "i": i, "diameter": d, "bound": 2 * ratio ** (j - i)})
        rep.add("mesh-bound", not bad, bad[0] if bad else None)
        rep.stats.update({"dimension": n, "checked": checked, "violations": len(bad)})
        return rep

    def check_distinct_types(self, depth: int | None = None) -> Report:
        """Types inside every one-step preimage are pairwise distinct."""
        depth = self.depth if depth is None else min(depth, self.depth)
        rep = Report("distinct-types")
        bad = []
        for n in range(depth):
            for s in self.complexes[n].ordered():
                seen: dict = {}
                for p in sorted(self.preimage(n, s, 1), key=lambda t: (len(t), [sort_key(v) for v in t])):
                    t = self.simplex_type(n + 1, p)
                    if t in seen:
                        bad.append({"simplex": (n, s), "first": seen[t], "second": p})
                        break
                    seen[t] = p
        rep.add("pairwise-distinct", not bad, bad[0] if bad else None)
        rep.stats["violations"] = len(bad)
        return rep


def strengthen_delta_A(ns: NerveSystem, depth: int | None = None) -> NerveSystem:
    """Copy of ``ns`` typed by ``T^{Δ+A}``, with its verification in ``.strengthen_report``."""
    if ns.strength not in STRONG_LABELS:
        raise PreconditionError(
            f"the strengthened type needs atom labels at least as strong as B-types, got {ns.strength!r}"
        )
    out = copy.copy(ns)
    out.mode = "delta+A"
    out._stype = {}
    depth = ns.depth if depth is None else min(depth, ns.depth)
    rep = Report("delta+A")
    ambiguous = []
    for n, s in ns.simplices(depth):
        if n == 0:
            continue
        up = ns.parent_simplex(n, s)
        _, r = ns.representatives()[ns.delta_type(n - 1, up)]
        if len(ns.all_shifts(up, r)) != 1:
            ambiguous.append({"simplex": (n, s), "parent": up, "representative": r})
            break
    rep.add("unique-shift", not ambiguous, ambiguous[0] if ambiguous else None)
    rep.merge(out.check_distinct_types(depth))
    rep.merge(out.verify_markov(depth))
    out.strengthen_report = rep
    return out


def check_star_property(cover: CoverSystem, L: int, depth: int) -> Report:
    """Every star at level ``L(n+1)`` lies in one atom of level ``Ln`` (containment = ancestry)."""
    rep = Report("star")
    bad = []
    stars = 0
    for n in range(depth):
        up = set(cover.atoms(n * L))
        atoms = cover.atoms((n + 1) * L)
        aset = set(atoms)
        for U in atoms:
            star = [U] + [y for y in cover.neighbours(U) if y in aset and cover.adjacent(U, y)]
            stars += 1
            common = None
            for W in star:
                anc = {f for f in cover.ancestors(W, n * L) if f in up}
                common = anc if common is None else common & anc
                if not common:
                    break
            if not common:
                bad.append({"level": (n + 1) * L, "atom": U, "star": star})
    rep.add("star-property", not bad, bad[0] if bad else None)
    rep.stats.update({"stars": stars, "violations": len(bad), "L": L})
    return rep


def find_L0(cover: CoverSystem, depth: int, J: int = 1, max_level: int | None = None) -> int | None:
    """Least multiple of ``J`` whose covers have the star property up to ``depth``."""
    L = J
    while max_level is None or L * depth <= max_level:
        if check_star_property(cover, L, depth).passed:
            return L
        L += J
        if max_level is None and L > 64 * J:
            break
    return None


def tower_labeler(tower, kind: str = "C") -> Callable[[GroupElement], Hashable]:
    """Atom labels read off a ``TypeTower`` (``"A"``, ``"B"``, ``"C"`` or ``"ball"``)."""
    ids = tower.type_ids(kind)

    def label(x: GroupElement) -> int:
        return int(ids[tower._id(x)])

    return label

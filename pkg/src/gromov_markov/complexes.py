"""Finite simplicial complexes, rational points and affine maps between them.

A point of a complex is a dict from vertices to positive ``Fraction``
weights summing to one; its support must span a simplex.  Nothing here
uses floating point.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Iterable, Mapping, Sequence

from .errors import InconsistencyError

Point = dict  # vertex -> Fraction


def vertex_point(v: Hashable) -> Point:
    return {v: Fraction(1)}


def barycentre(vertices: Iterable[Hashable]) -> Point:
    vs = list(dict.fromkeys(vertices))
    if not vs:
        raise InconsistencyError("barycentre of an empty vertex set")
    w = Fraction(1, len(vs))
    return {v: w for v in vs}


def l1_distance(p: Mapping[Hashable, Fraction], q: Mapping[Hashable, Fraction]) -> Fraction:
    """``||p - q||_1`` in vertex coordinates; at most 2 for points of one complex."""
    keys = set(p) | set(q)
    return sum((abs(p.get(k, Fraction(0)) - q.get(k, Fraction(0))) for k in keys), Fraction(0))


def push_point(p: Mapping[Hashable, Fraction], images: Mapping[Hashable, Mapping[Hashable, Fraction]]) -> Point:
    """Image of ``p`` under the affine map given on vertices by ``images``."""
    out: dict = {}
    for v, w in p.items():
        for u, x in images[v].items():
            out[u] = out.get(u, Fraction(0)) + w * x
    return {u: x for u, x in out.items() if x}


def sort_key(v: Hashable):
    """Total order on vertex names mixing words, ints and tuples."""
    if isinstance(v, tuple):
        return (1, len(v), tuple(sort_key(t) for t in v))
    if isinstance(v, int):
        return (0, v)
    return (2, repr(v))


@dataclass
class SimplicialComplex:
    """Face-closed family of simplexes, each a sorted tuple of vertices."""

    level: int
    vertices: list
    simplices: set = field(default_factory=set)

    def __post_init__(self) -> None:
        closed = set()
        for s in self.simplices:
            closed.update(_faces(tuple(s)))
        extra = [s[0] for s in closed if len(s) == 1]
        self.vertices = sorted(dict.fromkeys([*self.vertices, *extra]), key=sort_key)
        self._vset = set(self.vertices)
        for v in self.vertices:
            closed.add((v,))
        self.simplices = {self.canon(s) for s in closed}

    @staticmethod
    def canon(s: Iterable[Hashable]) -> tuple:
        return tuple(sorted(set(s), key=sort_key))

    def __contains__(self, s) -> bool:
        return self.canon(s) in self.simplices

    def has_vertex(self, v: Hashable) -> bool:
        return v in self._vset

    @property
    def dimension(self) -> int:
        return max((len(s) for s in self.simplices), default=0) - 1

    def maximal(self) -> list[tuple]:
        out = []
        for s in sorted(self.simplices, key=lambda t: (-len(t), [sort_key(v) for v in t])):
            if not any(set(s) < set(m) for m in out):
                out.append(s)
        return sorted(out, key=lambda t: [sort_key(v) for v in t])

    def ordered(self) -> list[tuple]:
        return sorted(self.simplices, key=lambda t: (len(t), [sort_key(v) for v in t]))

    def star_index(self) -> dict:
        """Vertex -> simplexes containing it (built once)."""
        idx = self.__dict__.get("_star")
        if idx is None:
            idx = {}
            for t in self.simplices:
                for v in t:
                    idx.setdefault(v, []).append(t)
            self.__dict__["_star"] = idx
        return idx

    def full_subcomplex(self, vertices: Iterable[Hashable]) -> set[tuple]:
        """Simplexes all of whose vertices lie in ``vertices``."""
        vs = set(vertices)
        star = self.star_index()
        return {t for v in vs for t in star.get(v, ()) if vs.issuperset(t)}

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for s in self.ordered():
            h.update(repr(s).encode())
        return h.hexdigest()[:16]


def _faces(s: tuple) -> Iterable[tuple]:
    for k in range(1, len(s) + 1):
        yield from itertools.combinations(s, k)


@dataclass
class AffineMap:
    """Simplicial-affine map ``K_{n+1} -> K_n`` given by images of vertices."""

    source: int
    target: int
    images: dict  # vertex -> Point

    def __call__(self, p: Mapping[Hashable, Fraction]) -> Point:
        return push_point(p, self.images)

    def inverse_index(self) -> dict:
        """Target vertex -> source vertices whose image involves it (built once)."""
        idx = self.__dict__.get("_inv")
        if idx is None:
            idx = {}
            for v, p in self.images.items():
                for u in p:
                    idx.setdefault(u, []).append(v)
            self.__dict__["_inv"] = idx
        return idx

    def preimage_vertices(self, s: Iterable[Hashable]) -> set:
        """Source vertices whose image lies in the closed simplex ``s``."""
        target = set(s)
        inv = self.inverse_index()
        return {v for u in target for v in inv.get(u, ()) if target.issuperset(self.images[v])}

    def support(self, v: Hashable) -> tuple:
        return SimplicialComplex.canon(self.images[v])

    def simplex_image(self, s: Sequence[Hashable]) -> tuple:
        """Vertices of the smallest simplex containing the image of ``s``."""
        out: set = set()
        for v in s:
            out.update(self.images[v])
        return SimplicialComplex.canon(out)

    def compose(self, other: "AffineMap") -> "AffineMap":
        """``self ∘ other`` where ``other`` maps into the source of ``self``."""
        return AffineMap(other.source, self.target, {v: push_point(p, self.images) for v, p in other.images.items()})


def identity_map(K: SimplicialComplex) -> AffineMap:
    return AffineMap(K.level, K.level, {v: vertex_point(v) for v in K.vertices})


def hull_l1_diameter(points: Sequence[Mapping[Hashable, Fraction]]) -> Fraction:
    """l¹ diameter of a convex hull: attained at a pair of its generating points."""
    best = Fraction(0)
    for p, q in itertools.combinations(points, 2):
        d = l1_distance(p, q)
        if d > best:
            best = d
    return best

"""Span covers: emptiness and intersection of spans, fellow stars, adjacency.

``span(g)`` is the set of boundary limits of geodesic rays from ``e``
through ``g``.  It is nonempty iff ``g`` has an infinite geodesic
extension; this is decided by cycle reachability in the graph of ball
types under one-step geodesic extension.

Two spans of equal-length elements meet iff there are geodesic rays
through them staying within 4δ of each other.  Exact mode decides this on
a quotient automaton whose states are ``(T(u), T(v), u^-1 v)``; the
transition function on these keys is audited against concrete pairs and
the answer falls back to a depth-bounded search when the audit fails.
"""

from __future__ import annotations

import warnings
from fractions import Fraction
from typing import Callable, Hashable, Iterable, Mapping

import numpy as np

from .ball import CayleyBall, enumerate_ball
from .balltypes import TypeEngine
from .errors import DomainError, UndecidedError
from .group import GroupElement, GroupPresentation, shortlex_key
from .reports import Report

DISJOINT = "disjoint"
ADJACENT = "adjacent"
OVER = "adjacent-over-approx"


def has_infinite_path(succ: Mapping[Hashable, Iterable[Hashable]], start: Hashable) -> bool:
    """True iff some infinite walk starts at ``start`` in a finite graph."""
    return start in infinite_core(succ, [start])


def infinite_core(succ: Mapping[Hashable, Iterable[Hashable]], starts: Iterable[Hashable]) -> set:
    """Nodes reachable from ``starts`` that begin an infinite walk."""
    seen: set = set()
    stack = list(starts)
    while stack:
        v = stack.pop()
        if v in seen:
            continue
        seen.add(v)
        stack.extend(w for w in succ.get(v, ()) if w not in seen)
    out_deg = {v: 0 for v in seen}
    preds: dict = {v: [] for v in seen}
    for v in seen:
        for w in set(succ.get(v, ())):
            out_deg[v] += 1
            preds[w].append(v)
    queue = [v for v, d in out_deg.items() if d == 0]
    dead = set(queue)
    while queue:
        w = queue.pop()
        for v in preds[w]:
            out_deg[v] -= 1
            if out_deg[v] == 0 and v not in dead:
                dead.add(v)
                queue.append(v)
    return seen - dead


class PairAutomaton:
    """Quotient automaton on keys ``(T(u), T(v), u^-1 v)`` with ``|u^-1 v| <= 4δ``.

    States are discovered from seed pairs by extending both coordinates by
    one geodesic step.  Every key remembers the concrete pair that first
    produced it; later pairs with the same key are audited to produce the
    same successor keys.
    """

    def __init__(self, system: "SpanSystem", audit_budget: int = 20000):
        self.system = system
        self.succ: dict[tuple, frozenset] = {}
        self.rep: dict[tuple, tuple[GroupElement, GroupElement]] = {}
        self.accepting: dict[tuple, bool] = {}
        self.audit_budget = audit_budget
        self.audits = 0
        self.audit_failure: tuple | None = None

    def key(self, u: GroupElement, v: GroupElement) -> tuple:
        s = self.system
        return (s.tid(u), s.tid(v), s.G.multiply(s.G.invert(u), v))

    def _successors(self, u: GroupElement, v: GroupElement) -> dict[tuple, tuple[GroupElement, GroupElement]]:
        s = self.system
        bound = 4 * s.G.delta
        out: dict[tuple, tuple[GroupElement, GroupElement]] = {}
        cu = s.children(u)
        cv = s.children(v)
        for a in cu:
            for b in cv:
                if s.G.distance(a, b) <= bound:
                    k = self.key(a, b)
                    if k not in out:
                        out[k] = (a, b)
        return out

    def explore(self, u: GroupElement, v: GroupElement) -> tuple:
        start = self.key(u, v)
        if start in self.succ:
            self._audit(start, u, v)
            return start
        stack = [(start, u, v)]
        while stack:
            k, a, b = stack.pop()
            if k in self.succ:
                if self.rep[k] != (a, b):
                    self._audit(k, a, b)
                continue
            nxt = self._successors(a, b)
            self.succ[k] = frozenset(nxt)
            self.rep[k] = (a, b)
            for k2, (a2, b2) in nxt.items():
                stack.append((k2, a2, b2))
        return start

    def _audit(self, k: tuple, a: GroupElement, b: GroupElement) -> None:
        if self.audit_failure is not None or self.audits >= self.audit_budget:
            return
        if self.rep.get(k) == (a, b):
            return
        self.audits += 1
        got = frozenset(self._successors(a, b))
        if got != self.succ[k]:
            self.audit_failure = (k, self.rep[k], (a, b))

    def accepts(self, k: tuple) -> bool:
        v = self.accepting.get(k)
        if v is None:
            core = infinite_core(self.succ, [k])
            seen: set = set()
            stack = [k]
            while stack:
                w = stack.pop()
                if w in seen:
                    continue
                seen.add(w)
                stack.extend(self.succ.get(w, ()))
            for w in seen:
                self.accepting[w] = w in core
            v = self.accepting[k]
        return v

    def states(self) -> list[tuple]:
        return list(self.succ)

    def to_dot(self, G: GroupPresentation) -> str:
        names = {k: f"q{i}" for i, k in enumerate(self.succ)}
        lines = ["digraph pairs {"]
        for k, n in names.items():
            shape = "doublecircle" if self.accepting.get(k) else "circle"
            lines.append(f'  {n} [shape={shape}, label="{k[0]},{k[1]},{G.word(k[2])}"];')
        for k, succ in self.succ.items():
            for k2 in sorted(succ, key=lambda t: names[t]):
                lines.append(f"  {names[k]} -> {names[k2]};")
        lines.append("}")
        return "\n".join(lines) + "\n"


class SpanSystem:
    """Span-star cover system on one presentation.

    ``N`` is the ball-type radius used for the automaton keys (at least 1).
    ``mode`` is ``"exact"`` or ``"horizon"``; ``horizon`` is the search depth
    used in horizon mode and as the exact-mode fallback.
    """

    def __init__(
        self,
        G: GroupPresentation,
        N: int = 4,
        mode: str = "exact",
        horizon: int = 12,
        engine: TypeEngine | None = None,
        strict: bool = False,
    ):
        if N < 1:
            raise DomainError("span keys need ball types of radius at least 1")
        if mode not in ("exact", "horizon"):
            raise DomainError(f"unknown mode {mode!r}")
        self.G = G
        self.N = N
        self.mode = mode
        self.horizon = horizon
        self.strict = strict
        self.engine = engine if engine is not None else TypeEngine(G)
        self.pairs = PairAutomaton(self)
        self._children: dict[GroupElement, list[GroupElement]] = {}
        self._type_succ: dict[int, frozenset[int]] = {}
        self._type_rep: dict[int, GroupElement] = {}
        self._nonempty: dict[int, bool] = {}
        self._istar: dict[GroupElement, tuple[GroupElement, ...]] = {}
        self._inter: dict[tuple[GroupElement, GroupElement], bool] = {}
        self._gens = [G.generator(s) for s in range(G.rank)]
        self.warnings: list[str] = []

    # basic helpers

    def tid(self, x: GroupElement) -> int:
        return self.engine.ball_type_id(x, self.N)

    def children(self, x: GroupElement) -> list[GroupElement]:
        c = self._children.get(x)
        if c is None:
            n = len(x)
            c = []
            for g in self._gens:
                y = self.G.multiply(x, g)
                if len(y) == n + 1 and y not in c:
                    c.append(y)
            self._children[x] = c
        return c

    # emptiness

    def _explore_types(self, x: GroupElement) -> int:
        t0 = self.tid(x)
        stack = [(t0, x)]
        while stack:
            t, w = stack.pop()
            if t in self._type_succ:
                continue
            succ = {}
            for c in self.children(w):
                succ.setdefault(self.tid(c), c)
            self._type_succ[t] = frozenset(succ)
            self._type_rep[t] = w
            stack.extend(succ.items())
        return t0

    def span_nonempty(self, g: GroupElement) -> bool:
        t = self._explore_types(g)
        v = self._nonempty.get(t)
        if v is None:
            core = infinite_core(self._type_succ, [t])
            for w in self._type_succ:
                if w not in self._nonempty and (w in core):
                    self._nonempty[w] = True
            v = t in core
            self._nonempty[t] = v
        return v

    def audit_type_graph(self, ball: CayleyBall) -> Report:
        """Same-type elements of the ball have the same child-type sets."""
        report = Report("type-graph-audit", True)
        for i, x in enumerate(ball.words):
            if len(x) >= ball.radius:
                break
            t = self._explore_types(x)
            got = frozenset(self.tid(c) for c in self.children(x))
            if got != self._type_succ[t]:
                report.passed = False
                report.witness = {"x": self.G.word(x), "representative": self.G.word(self._type_rep[t])}
                break
        return report

    # intersection

    def span_intersects(self, x: GroupElement, y: GroupElement) -> bool:
        if len(x) != len(y):
            raise DomainError("span_intersects needs elements of equal length")
        if x == y:
            return self.span_nonempty(x)
        if y < x:
            x, y = y, x
        key = (x, y)
        v = self._inter.get(key)
        if v is not None:
            return v
        if self.G.distance(x, y) > 4 * self.G.delta:
            v = False
        elif self.mode == "horizon":
            v = self.span_intersects_horizon(x, y, self.horizon)
        else:
            k = self.pairs.explore(x, y)
            if self.pairs.audit_failure is not None:
                msg = "pair-automaton key audit failed; using horizon search"
                if self.strict:
                    raise UndecidedError(msg)
                if msg not in self.warnings:
                    self.warnings.append(msg)
                    warnings.warn(msg, RuntimeWarning, stacklevel=2)
                v = self.span_intersects_horizon(x, y, self.horizon)
            else:
                v = self.pairs.accepts(k)
        self._inter[key] = v
        return v

    def span_intersects_horizon(self, x: GroupElement, y: GroupElement, depth: int) -> bool:
        """Geodesic extensions of ``x`` and ``y`` of length ``depth`` staying within 4δ."""
        bound = 4 * self.G.delta
        dead: set[tuple[GroupElement, GroupElement, int]] = set()

        def go(u: GroupElement, v: GroupElement, d: int) -> bool:
            if d == 0:
                return True
            if (u, v, d) in dead:
                return False
            for a in self.children(u):
                for b in self.children(v):
                    if self.G.distance(a, b) <= bound and go(a, b, d - 1):
                        return True
            dead.add((u, v, d))
            return False

        if self.G.distance(x, y) > bound:
            return False
        return go(x, y, depth)

    # fellow star and adjacency

    def fellow_star(self, g: GroupElement) -> tuple[GroupElement, ...]:
        """``I(g)``: fellows ``h`` in ``P_{4δ}(g)`` with ``span(gh)`` meeting ``span(g)``."""
        v = self._istar.get(g)
        if v is None:
            G = self.G
            out = []
            for h in self.engine.fellow_list(g, 4 * G.delta):
                if self.span_intersects(g, G.multiply(g, h)):
                    out.append(h)
            v = tuple(out)
            self._istar[g] = v
        return v

    def nerve_adjacency(self, x: GroupElement, y: GroupElement) -> str:
        if len(x) != len(y):
            raise DomainError("nerve_adjacency needs elements of equal length")
        if self.span_intersects(x, y):
            return ADJACENT
        G = self.G
        bound = 4 * G.delta
        if G.distance(x, y) > 3 * bound:
            return DISJOINT
        for u in self.fellow_star(x):
            xu = G.multiply(x, u)
            for v in self.fellow_star(y):
                yv = G.multiply(y, v)
                if G.distance(xu, yv) <= bound and self.span_intersects(xu, yv):
                    return OVER
        return DISJOINT

    def adjacency_candidates(self, x: GroupElement) -> list[GroupElement]:
        """Same-length elements whose adjacency verdict with ``x`` may be non-disjoint."""
        G = self.G
        r = 4 * G.delta
        out: set[GroupElement] = set()
        n = len(x)
        # y v = x u h with v in I(y): then v^-1 is a fellow of z = x u h
        for u in self.fellow_star(x):
            xu = G.multiply(x, u)
            for h in self.engine.fellow_list(xu, r):
                z = G.multiply(xu, h)
                for w in self.engine.fellow_list(z, r):
                    y = G.multiply(z, w)
                    if len(y) != n or y in out:
                        continue
                    if not w or G.invert(w) in self.fellow_star(y):
                        out.add(y)
        out.discard(x)
        return sorted(out, key=shortlex_key)

    def adjacency_list(self, x: GroupElement, include_over: bool = True) -> list[tuple[GroupElement, str]]:
        res = []
        for y in self.adjacency_candidates(x):
            v = self.nerve_adjacency(x, y)
            if v == ADJACENT or (include_over and v == OVER):
                res.append((y, v))
        return res

    # ancestry

    def geodesic_ancestors(self, g: GroupElement, k: int) -> list[GroupElement]:
        """Elements of length ``k`` on some geodesic from ``e`` to ``g``, shortlex."""
        G = self.G
        cur = {g}
        for _ in range(len(g) - k):
            nxt = set()
            for x in cur:
                n = len(x)
                for s in self._gens:
                    y = G.multiply(x, s)
                    if len(y) == n - 1:
                        nxt.add(y)
            cur = nxt
        return sorted(cur, key=shortlex_key)

    def cover_ancestor(self, g: GroupElement, k: int) -> GroupElement:
        if not 0 <= k < len(g):
            raise DomainError(f"cover_ancestor needs 0 <= k < |g|, got k={k}, |g|={len(g)}")
        return self.geodesic_ancestors(g, k)[0]

    def is_ancestor(self, f: GroupElement, g: GroupElement) -> bool:
        return len(f) + self.G.distance(f, g) == len(g)


class SpanCoverSystem:
    """The cover system seen through its atoms, as consumed by the nerve code.

    Atoms at level ``n`` are elements of length ``n`` with nonempty span.
    Containment between levels is geodesic ancestry.  Atoms are labelled by
    ball types unless ``labeler`` is given; ``strength`` names the labelling
    ("ball", "A", "B", "C") so that consumers can check preconditions.
    """

    def __init__(
        self,
        spans: SpanSystem,
        ball: CayleyBall,
        include_over: bool = False,
        labeler: Callable[[GroupElement], Hashable] | None = None,
        strength: str = "ball",
    ):
        self.spans = spans
        self.G = spans.G
        self.ball = ball
        self.include_over = include_over
        self._labeler = labeler
        self.strength = strength if labeler is not None else "ball"
        self._atoms: dict[int, list[GroupElement]] = {}

    def atoms(self, level: int) -> list[GroupElement]:
        a = self._atoms.get(level)
        if a is None:
            if level > self.ball.radius:
                from .errors import BoundaryError

                raise BoundaryError(f"level {level} exceeds the ball radius {self.ball.radius}")
            a = [x for x in self.ball.sphere_words(level) if self.spans.span_nonempty(x)]
            self._atoms[level] = a
        return a

    def neighbours(self, x: GroupElement) -> list[GroupElement]:
        return [y for y, v in self.spans.adjacency_list(x, self.include_over)]

    def adjacent(self, x: GroupElement, y: GroupElement) -> bool:
        v = self.spans.nerve_adjacency(x, y)
        return v == ADJACENT or (self.include_over and v == OVER)

    def ancestors(self, x: GroupElement, level: int) -> list[GroupElement]:
        return [f for f in self.spans.geodesic_ancestors(x, level)]

    def label(self, x: GroupElement) -> Hashable:
        if self._labeler is not None:
            return self._labeler(x)
        return self.spans.tid(x)

    def relative(self, x: GroupElement, y: GroupElement) -> GroupElement:
        return self.G.multiply(self.G.invert(x), y)

    def translate(self, g: GroupElement, x: GroupElement) -> GroupElement:
        return self.G.multiply(g, x)

    def shift(self, x: GroupElement, y: GroupElement) -> GroupElement:
        """``γ`` with ``γ x = y``."""
        return self.G.multiply(y, self.G.invert(x))

    def name(self, x: GroupElement) -> str:
        return self.G.word(x)


def _gromov_product(G: GroupPresentation, p: GroupElement, q: GroupElement) -> Fraction:
    return Fraction(len(p) + len(q) - G.distance(p, q), 2)


def audit_quasi_invariance(
    spans: SpanSystem,
    radius: int,
    type_fn: Callable[[GroupElement], Hashable] | str = "ball",
    J: int = 1,
    a: Fraction = Fraction(3, 2),
    ball: CayleyBall | None = None,
) -> Report:
    """Check QI1 to QI4 combinatorially on ``B_radius``.

    QI2: non-disjoint adjacency implies distance at most 12δ; the largest
    observed distance is reported as ``D``.  QI3: cover ancestors exist at
    every multiple of ``J`` below and are geodesic ancestors.  QI4: within
    each type class, translation by ``g = x x0^-1`` carries the fellow star,
    span emptiness and ball types over ``I`` (a), adjacency verdicts (b) and
    the types of descendants ``J`` levels deeper (c).  QI1: sampled span
    diameters ``D_k`` in the ``a``-metric decay monotonically; the
    constant ``max a^k D_k`` is reported.
    """
    G = spans.G
    if ball is None or ball.radius < radius:
        ball = enumerate_ball(G, radius)
    words = ball.words[: ball.sphere_start[radius + 1]]
    if type_fn == "ball":
        tf: Callable[[GroupElement], Hashable] = spans.tid
    elif callable(type_fn):
        tf = type_fn
    else:
        raise DomainError(f"unknown type function {type_fn!r}")
    delta = G.delta
    report = Report("quasi-invariance", True)
    report.stats["J"] = J

    # QI2
    D_obs = 0
    adj_cache: dict[GroupElement, list[tuple[GroupElement, str]]] = {}

    def adj(x: GroupElement) -> list[tuple[GroupElement, str]]:
        v = adj_cache.get(x)
        if v is None:
            v = spans.adjacency_list(x, include_over=True)
            adj_cache[x] = v
        return v

    qi2_ok = True
    qi2_w = None
    for x in words:
        if not spans.span_nonempty(x):
            continue
        for y, _ in adj(x):
            d = G.distance(x, y)
            D_obs = max(D_obs, d)
            if d > 12 * delta and qi2_ok:
                qi2_ok = False
                qi2_w = {"x": G.word(x), "y": G.word(y), "distance": d}
    report.stats["D"] = D_obs
    report.add("QI2", qi2_ok, qi2_w)

    # QI3
    qi3_ok = True
    qi3_w = None
    for x in words:
        for k in range(len(x) - J, -1, -J):
            f = spans.cover_ancestor(x, k)
            if len(f) != k or not spans.is_ancestor(f, x) or (spans.span_nonempty(x) and not spans.span_nonempty(f)):
                qi3_ok = False
                qi3_w = {"g": G.word(x), "k": k, "ancestor": G.word(f)}
                break
        if not qi3_ok:
            break
    report.add("QI3", qi3_ok, qi3_w)

    # QI4
    classes: dict[Hashable, list[GroupElement]] = {}
    for x in words:
        classes.setdefault(tf(x), []).append(x)
    ok_a = ok_b = ok_c = True
    w_a = w_b = w_c = None
    cone_words = [y for y in spans.engine.domain(J) if len(y) == J]
    pairs = 0
    for members in classes.values():
        x0 = members[0]
        I0 = spans.fellow_star(x0)
        ne0 = spans.span_nonempty(x0)
        adj0 = adj(x0) if ne0 else []
        desc0 = [G.multiply(x0, y) for y in cone_words if len(G.multiply(x0, y)) == len(x0) + J]
        for x in members[1:]:
            pairs += 1
            g = G.multiply(x, G.invert(x0))
            if ok_a:
                good = spans.fellow_star(x) == I0 and spans.span_nonempty(x) == ne0
                if good:
                    good = all(spans.tid(G.multiply(x0, h)) == spans.tid(G.multiply(x, h)) for h in I0)
                if not good:
                    ok_a = False
                    w_a = {"x0": G.word(x0), "x": G.word(x)}
            if ok_b and ne0:
                for y, verdict in adj0:
                    gy = G.multiply(g, y)
                    if (
                        len(gy) != len(x)
                        or spans.nerve_adjacency(x, gy) != verdict
                        or spans.fellow_star(gy) != spans.fellow_star(y)
                    ):
                        ok_b = False
                        w_b = {"x0": G.word(x0), "x": G.word(x), "y": G.word(y)}
                        break
            if ok_c and len(x) + J <= radius:
                for y in desc0:
                    gy = G.multiply(g, y)
                    if len(gy) != len(x) + J or tf(gy) != tf(y):
                        ok_c = False
                        w_c = {"x0": G.word(x0), "x": G.word(x), "y": G.word(y)}
                        break
    report.add("QI4a", ok_a, w_a)
    report.add("QI4b", ok_b, w_b)
    report.add("QI4c", ok_c, w_c)
    report.stats["type_classes"] = len(classes)
    report.stats["translated_pairs"] = pairs

    # QI1
    diam = span_diameters(spans, ball, radius, a)
    mono = all(diam[k + 1] <= diam[k] for k in range(len(diam) - 1))
    C = max((d * a**k for k, d in enumerate(diam)), default=Fraction(0))
    report.stats["span_diameters"] = [str(d) for d in diam]
    report.stats["diameter_constant"] = str(C)
    report.add("QI1", mono, None if mono else {"diameters": [str(d) for d in diam]})
    return report


def span_diameters(spans: SpanSystem, ball: CayleyBall, radius: int, a: Fraction) -> list[Fraction]:
    """Per level ``k``, the largest sampled ``a^-(p|q)`` between extensions of one element.

    Each element contributes, for every geodesic child, the extension to
    length ``radius`` that always takes the least generator; pairs of
    these endpoints give lower estimates of the span diameter.
    """
    G = spans.G
    out = []
    for k in range(radius):
        best = Fraction(0)
        for x in ball.sphere_words(k):
            ends = []
            for c in spans.children(x):
                y = c
                while len(y) < radius:
                    ch = spans.children(y)
                    if not ch:
                        break
                    y = ch[0]
                if len(y) == radius:
                    ends.append(y)
            for i in range(len(ends)):
                for j in range(i + 1, len(ends)):
                    gp = _gromov_product(G, ends[i], ends[j])
                    best = max(best, Fraction(1) / a ** int(gp))
        out.append(best)
    return out

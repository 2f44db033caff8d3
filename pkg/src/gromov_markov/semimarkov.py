"""Compatible sequences, the C-type alphabet and the harvested semi-Markov automaton.

A compatible sequence is a chain ``e = g_0, g_1, ...`` in which ``g_k``
is the p-grandparent of ``g_{k+1}``.  Its type word lists the C-types of
its terms.  The automaton's relations are exactly the steps realized on
the ball; nothing is extrapolated past the harvested depth.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Sequence

import networkx as nx
import numpy as np

from .errors import BoundaryError, DomainError
from .genealogy import TypeTower, _neighbour_pair_chunks, check_c_gluing
from .group import GroupElement
from .reports import Report


@dataclass
class SemiMarkovAutomaton:
    """Alphabet, initial symbols, transitions and the pair relation."""

    alphabet: list[int]
    initial: list[int]
    transitions: set[tuple[int, int]]
    pair_array: np.ndarray  # rows (τ1, τ1', τ2, τ2') of the pair relation, sorted
    L: int
    depth: int
    stabilized: bool
    history: list[tuple[int, int, int]] = field(default_factory=list)  # (symbols, transitions, pairs)

    @property
    def pairs(self) -> set[tuple[tuple[int, int], tuple[int, int]]]:
        return {((a, b), (x, y)) for a, b, x, y in self.pair_array.tolist()}

    @property
    def pair_initial(self) -> list[tuple[int, int]]:
        return [(a, a) for a in self.initial]

    def successors(self) -> dict[int, set[int]]:
        succ: dict[int, set[int]] = {a: set() for a in self.alphabet}
        for a, b in self.transitions:
            succ[a].add(b)
        return succ

    def path_count(self, n: int) -> int:
        """Number of length-``n`` paths starting in the initial symbols."""
        succ = self.successors()
        counts = {a: 1 for a in self.initial}
        for _ in range(n):
            nxt: dict[int, int] = {}
            for a, c in counts.items():
                for b in succ[a]:
                    nxt[b] = nxt.get(b, 0) + c
            counts = nxt
        return sum(counts.values())

    def infinite_branches(self) -> float:
        """Number of infinite paths from the initial symbols (``math.inf`` if uncountable).

        The count is finite exactly when every cycle reachable in the
        infinite core is a simple cycle with no exit inside the core.
        """
        g = nx.DiGraph()
        g.add_nodes_from(self.alphabet)
        g.add_edges_from(self.transitions)
        reach = set(self.initial)
        for a in self.initial:
            reach |= nx.descendants(g, a)
        sub = g.subgraph(reach)
        cyclic = set()
        for comp in nx.strongly_connected_components(sub):
            v = next(iter(comp))
            if len(comp) > 1 or sub.has_edge(v, v):
                cyclic |= comp
        # states that can reach a cycle, by one backward sweep
        core = set(cyclic)
        stack = list(cyclic)
        while stack:
            v = stack.pop()
            for u in sub.predecessors(v):
                if u not in core:
                    core.add(u)
                    stack.append(u)
        core_g = sub.subgraph(core)
        for v in cyclic:
            if core_g.out_degree(v) > 1:
                return math.inf
        memo: dict[int, int] = {}

        def count(v: int) -> int:
            if v in cyclic:
                return 1
            if v not in memo:
                memo[v] = sum(count(w) for w in core_g.successors(v))
            return memo[v]

        # a cycle entered from several core paths is counted once per path
        return sum(count(a) for a in self.initial if a in core)

    def certificate(self) -> str:
        h = hashlib.sha256()
        h.update(repr((sorted(self.alphabet), sorted(self.initial))).encode())
        h.update(repr(sorted(self.transitions)).encode())
        h.update(np.ascontiguousarray(self.pair_array, dtype=np.int64).tobytes())
        return h.hexdigest()

    def to_dot(self) -> str:
        lines = ["digraph semimarkov {", "  rankdir=LR;"]
        for a in sorted(self.alphabet):
            shape = "doublecircle" if a in self.initial else "circle"
            lines.append(f'  c{a} [shape={shape}, label="{a}"];')
        for a, b in sorted(self.transitions):
            lines.append(f"  c{a} -> c{b};")
        lines.append("}")
        return "\n".join(lines) + "\n"

    def pairs_to_dot(self) -> str:
        lines = ["digraph pairs {", "  rankdir=LR;"]
        rows = self.pair_array.tolist()
        nodes = sorted({(a, b) for a, b, _, _ in rows} | {(c, d) for _, _, c, d in rows} | set(self.pair_initial))
        for a, b in nodes:
            shape = "doublecircle" if (a, b) in self.pair_initial else "circle"
            lines.append(f'  p{a}_{b} [shape={shape}, label="{a},{b}"];')
        for a, b, c, d in rows:
            lines.append(f"  p{a}_{b} -> p{c}_{d};")
        lines.append("}")
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        """Structured-text listing; see docs/formats.md."""
        out = [
            "# semi-markov automaton",
            f"L {self.L}",
            f"depth {self.depth}",
            f"stabilized {str(self.stabilized).lower()}",
            "alphabet " + " ".join(map(str, sorted(self.alphabet))),
            "initial " + " ".join(map(str, sorted(self.initial))),
        ]
        out += [f"arrow {a} {b}" for a, b in sorted(self.transitions)]
        out += [f"pair {a} {b} {c} {d}" for a, b, c, d in self.pair_array.tolist()]
        out.append(f"sha256 {self.certificate()}")
        return "\n".join(out) + "\n"


def _types(T: TypeTower, types: np.ndarray | None) -> np.ndarray:
    return T.c_id if types is None else np.asarray(types)


def build_automaton(T: TypeTower, depth: int, types: np.ndarray | None = None) -> SemiMarkovAutomaton:
    """Harvest ``(Σ, Σ_0, →)`` and ``⇝`` from levels ``0, L, ..., depth·L``."""
    L = T.L
    if depth * L > T.radius:
        raise BoundaryError(f"depth {depth} needs level {depth * L}, beyond the tower radius {T.radius}")
    c = _types(T, types)
    e = int(c[T.ball.index[()]])
    alphabet = {e}
    arrows: set[tuple[int, int]] = set()
    base = int(c.max()) + 1
    packed = base ** 4 < 2**62
    keys = np.zeros(0, dtype=np.int64)
    rows = np.zeros((0, 4), dtype=np.int64)
    history = [(1, 0, 0)]
    r = 8 * T.G.delta
    for k in range(1, depth + 1):
        level = k * L
        rg = T._sphere_ids(level)
        ids = np.arange(rg.start, rg.stop)
        up = T.grand[ids]
        alphabet.update(int(v) for v in np.unique(c[ids]))
        arrows.update(map(tuple, np.unique(np.stack([c[up], c[ids]], axis=1), axis=0).tolist()))
        D = None if T._free else T._sphere_distances(level - L)
        s0 = T._sphere_ids(level - L).start
        for P in _neighbour_pair_chunks(T, level):
            a, b = T.grand[P[:, 0]], T.grand[P[:, 1]]
            if D is not None:
                # in trees the grandparents of neighbours are always neighbours
                ok = D[a - s0, b - s0] <= r
                P, a, b = P[ok], a[ok], b[ok]
            q = [c[a].astype(np.int64), c[b].astype(np.int64), c[P[:, 0]].astype(np.int64), c[P[:, 1]].astype(np.int64)]
            if packed:
                keys = np.union1d(keys, ((q[0] * base + q[1]) * base + q[2]) * base + q[3])
            else:
                rows = np.unique(np.concatenate([rows, np.unique(np.stack(q, axis=1), axis=0)]), axis=0)
        history.append((len(alphabet), len(arrows), len(keys) if packed else len(rows)))
    if packed:
        quads = np.stack([keys // base**3, keys // base**2 % base, keys // base % base, keys % base], axis=1)
    else:
        quads = rows
    stabilized = depth >= 2 and history[-1] == history[-2] == history[-3]
    return SemiMarkovAutomaton(sorted(alphabet), [e], arrows, quads, L, depth, stabilized, history)


CompatibleSequence = tuple  # (g_0, ..., g_n) of group elements


def enumerate_compatible(T: TypeTower, depth: int) -> list[CompatibleSequence]:
    """Every compatible prefix of length ``depth``, in shortlex order of the last term."""
    L = T.L
    if depth * L > T.radius:
        raise BoundaryError(f"depth {depth} needs level {depth * L}, beyond the tower radius {T.radius}")
    out = []
    for i in T._sphere_ids(depth * L):
        chain = [i]
        for _ in range(depth):
            chain.append(int(T.grand[chain[-1]]))
        out.append(tuple(T.words[j] for j in reversed(chain)))
    return out


def type_word(T: TypeTower, seq: CompatibleSequence, types: np.ndarray | None = None) -> tuple[int, ...]:
    c = _types(T, types)
    return tuple(int(c[T._id(g)]) for g in seq)


def same_limit(T: TypeTower, seq1: CompatibleSequence, seq2: CompatibleSequence) -> bool:
    """Neighbour criterion at every index of two equal-depth prefixes."""
    if len(seq1) != len(seq2):
        raise DomainError("compatible prefixes must have equal depth")
    return all(T.is_neighbour(T._id(g), T._id(h)) for g, h in zip(seq1, seq2))


def verify_criterion(T: TypeTower, depth: int, types: np.ndarray | None = None) -> Report:
    """Distinct sibling types, children fixed by type, and the gluing condition.

    The harvested automaton is attached as ``report.stats["automaton"]``
    together with its certificate hash.
    """
    c = _types(T, types)
    L = T.L
    W = T.G.word
    rep = Report("semi-markov")
    sib_bad = child_bad = None
    kids_of_type: dict[int, tuple[frozenset, int]] = {}
    for k in range(depth):
        for p in T._sphere_ids(k * L):
            kids = [int(c[g]) for g in T._grandchildren(p)]
            if sib_bad is None and len(set(kids)) != len(kids):
                sib_bad = {"parent": W(T.words[p])}
            tp = int(c[p])
            ks = frozenset(kids)
            prev = kids_of_type.get(tp)
            if prev is None:
                kids_of_type[tp] = (ks, p)
            elif prev[0] != ks and child_bad is None:
                child_bad = {"g": W(T.words[prev[1]]), "g'": W(T.words[p]), "type": tp}
    rep.add("a:distinct-sibling-types", sib_bad is None, sib_bad)
    rep.add("b:children-determined", child_bad is None, child_bad)
    glue = check_c_gluing(T, depth * L, assume_distinct=sib_bad is None, ids=c)
    rep.add("c:gluing", glue.passed, glue.witness)

    A = build_automaton(T, depth, c)
    Q = A.pair_array
    proj = np.unique(np.concatenate([Q[:, [0, 2]], Q[:, [1, 3]]]), axis=0) if len(Q) else np.zeros((0, 2), dtype=np.int64)
    stray = sorted(set(map(tuple, proj.tolist())) - A.transitions)
    rep.add("pairs-project-to-arrows", not stray, {"pair": stray[0]} if stray else None)
    words: dict[tuple, CompatibleSequence] = {}
    clash = None
    for seq in enumerate_compatible(T, depth):
        tw = type_word(T, seq, c)
        if tw in words and clash is None:
            clash = {"first": [W(g) for g in words[tw]], "second": [W(g) for g in seq]}
        words.setdefault(tw, seq)
    rep.add("type-words-injective", clash is None, clash)
    rep.stats.update(
        {
            "automaton": A,
            "certificate": A.certificate(),
            "symbols": len(A.alphabet),
            "arrows": len(A.transitions),
            "pairs": len(A.pair_array),
            "stabilized": A.stabilized,
            "gluing-pairs": glue.stats.get("pairs", 0),
        }
    )
    if not A.stabilized:
        rep.notes.append(f"no stabilization by depth {depth}: history {A.history}")
    return rep


def transitivity_events(T: TypeTower, depth: int, limit: int = 2000) -> list[tuple[Sequence[GroupElement], ...]]:
    """Triples of prefixes where ``same_limit`` fails to be transitive, up to ``limit`` prefixes."""
    seqs = enumerate_compatible(T, depth)[:limit]
    adj = {i: [j for j in range(len(seqs)) if j != i and same_limit(T, seqs[i], seqs[j])] for i in range(len(seqs))}
    out = []
    for i, js in adj.items():
        for j in js:
            for k in adj[j]:
                if k != i and k not in adj[i]:
                    out.append((seqs[i], seqs[j], seqs[k]))
    return out

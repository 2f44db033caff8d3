"""Group presentations with a decidable word problem.

Elements are canonical words: tuples of generator indices in normal form.
Every family implemented here has geodesic normal forms, so the length of
an element is the length of its tuple.

Three families are supported:

* ``free``: free groups, normal form by free reduction.
* ``free-product-of-finite-cyclics``: free products of finite cyclic
  groups in alternating syllable normal form.
* ``dehn-rewriting``: a finite rewriting system applied to a fixed point.
  The rules must decrease words in shortlex order.  Confluence is checked
  on all critical pairs.

Free groups are handled by the same syllable machinery as free products,
with factors of infinite order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Sequence

from .errors import ConfigError, OracleError

GroupElement = tuple[int, ...]

IDENTITY: GroupElement = ()

FAMILY_FREE = "free"
FAMILY_FREE_PRODUCT = "free-product-of-finite-cyclics"
FAMILY_REWRITING = "dehn-rewriting"
FAMILIES = (FAMILY_FREE, FAMILY_FREE_PRODUCT, FAMILY_REWRITING)

DEFAULT_MAX_ELEMENTS = 2_000_000


def shortlex_key(x: GroupElement) -> tuple[int, GroupElement]:
    return (len(x), x)


class GroupPresentation:
    """Common interface of the three families."""

    family: str
    name: str
    generators: tuple[str, ...]
    inverse: tuple[int, ...]
    delta: int
    max_elements: int
    unique_geodesics: bool = False

    def _init_common(
        self,
        name: str,
        generators: Sequence[str],
        inverse: Sequence[int],
        delta: int,
        max_elements: int,
    ) -> None:
        self.name = name
        self.generators = tuple(generators)
        self.inverse = tuple(int(i) for i in inverse)
        self.delta = int(delta)
        self.max_elements = int(max_elements)
        q = len(self.generators)
        if q == 0:
            raise ConfigError("a presentation needs at least one generator")
        if len(set(self.generators)) != q:
            raise ConfigError("generator names must be distinct")
        if len(self.inverse) != q:
            raise ConfigError("inverse table has the wrong size")
        for i, j in enumerate(self.inverse):
            if not 0 <= j < q or self.inverse[j] != i:
                raise ConfigError(
                    f"inversion is not an involution at generator {self.generators[i]!r}"
                )
        if self.delta < 1:
            raise ConfigError("delta must be a positive integer")
        if self.max_elements < 1:
            raise ConfigError("max_elements must be positive")
        self._name_index = {s: i for i, s in enumerate(self.generators)}
        self._single_char = all(len(s) == 1 for s in self.generators)

    @property
    def rank(self) -> int:
        """Number of generators Q (the symmetric generating set)."""
        return len(self.generators)

    # group law

    def normal_form(self, word: Iterable[int]) -> GroupElement:
        raise NotImplementedError

    def multiply(self, x: GroupElement, y: GroupElement) -> GroupElement:
        if not x:
            return y
        if not y:
            return x
        return self.normal_form(x + y)

    def invert(self, x: GroupElement) -> GroupElement:
        inv = self.inverse
        return self.normal_form(tuple(inv[g] for g in reversed(x)))

    def length(self, x: GroupElement) -> int:
        return len(x)

    def distance(self, x: GroupElement, y: GroupElement) -> int:
        return len(self.multiply(self.invert(x), y))

    def generator(self, i: int) -> GroupElement:
        return self.normal_form((i,))

    def is_torsion_certificate(self, x: GroupElement) -> bool | None:
        """Decide torsion structurally when the family allows it, else None."""
        return None

    def kernel_data(self):
        """Arrays describing a free product of cyclics for the compiled kernels.

        Returns None for families the kernels do not cover.
        """
        return None

    # words and names

    def parse(self, text: str | Sequence[str]) -> GroupElement:
        """Read a word such as ``"abA"`` or ``"a b a^-1"`` and normalize it."""
        if not isinstance(text, str):
            return self.normal_form(self._index_of(tok) for tok in text)
        text = text.strip()
        if text in ("", "e", "1") and text not in self._name_index:
            return IDENTITY
        letters: list[int] = []
        tokens = text.split() if (" " in text or not self._single_char) else list(text)
        for tok in tokens:
            power = 1
            m = re.fullmatch(r"(.+?)\^(-?\d+)", tok)
            if m:
                tok, power = m.group(1), int(m.group(2))
            i = self._index_of(tok)
            if power < 0:
                i, power = self.inverse[i], -power
            letters.extend([i] * power)
        return self.normal_form(letters)

    def _index_of(self, tok: str) -> int:
        try:
            return self._name_index[tok]
        except KeyError:
            raise ConfigError(f"unknown generator {tok!r}") from None

    def word(self, x: GroupElement) -> str:
        if not x:
            return "e"
        sep = "" if self._single_char else " "
        return sep.join(self.generators[i] for i in x)

    def words(self, xs: Iterable[GroupElement]) -> list[str]:
        return [self.word(x) for x in xs]

    def describe(self) -> dict:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.name} gens={''.join(self.generators)} delta={self.delta}>"


@dataclass(frozen=True)
class CyclicFactor:
    """One free factor: a generator, its inverse and its order (0 = infinite)."""

    generator: int
    inverse: int
    order: int


class FreeProductPresentation(GroupPresentation):
    """Free product of cyclic groups, including free groups (all orders infinite).

    Each factor contributes a generator ``g`` and, unless the order is 2,
    a separate inverse generator.  A syllable of exponent ``m`` in a factor
    of finite order ``n`` is spelled ``g^m`` when ``m <= n - m`` and with the
    inverse letter otherwise; a tie goes to the letter with smaller index.
    """

    unique_geodesics = True

    def __init__(
        self,
        generators: Sequence[str],
        factors: Sequence[CyclicFactor],
        delta: int = 1,
        name: str = "",
        max_elements: int = DEFAULT_MAX_ELEMENTS,
        family: str | None = None,
    ):
        q = len(generators)
        inverse = [-1] * q
        gen_factor = [-1] * q
        gen_exp = [0] * q
        for f, fac in enumerate(factors):
            if fac.order < 0 or fac.order == 1:
                raise ConfigError(f"factor order must be 0 (infinite) or at least 2, got {fac.order}")
            for idx in (fac.generator, fac.inverse):
                if not 0 <= idx < q:
                    raise ConfigError("factor refers to an unknown generator")
            if fac.order == 2 and fac.generator != fac.inverse:
                raise ConfigError("an order-2 factor has a single self-inverse generator")
            if fac.order != 2 and fac.generator == fac.inverse:
                raise ConfigError("only order-2 generators may be self-inverse")
            for idx, e in ((fac.generator, 1), (fac.inverse, -1)):
                if gen_factor[idx] != -1 and fac.generator != fac.inverse:
                    raise ConfigError("a generator belongs to two factors")
                gen_factor[idx] = f
                gen_exp[idx] = e if fac.order != 2 else 1
            inverse[fac.generator] = fac.inverse
            inverse[fac.inverse] = fac.generator
        if -1 in gen_factor:
            missing = generators[gen_factor.index(-1)]
            raise ConfigError(f"generator {missing!r} belongs to no factor")
        orders = [fac.order for fac in factors]
        if family is None:
            family = FAMILY_FREE if all(n == 0 for n in orders) else FAMILY_FREE_PRODUCT
        if family == FAMILY_FREE and any(orders):
            raise ConfigError("family 'free' needs factors of infinite order")
        if family == FAMILY_FREE_PRODUCT and not all(orders):
            raise ConfigError("family 'free-product-of-finite-cyclics' needs finite orders")
        self.family = family
        self.factors = tuple(factors)
        self.gen_factor = tuple(gen_factor)
        self.gen_exp = tuple(gen_exp)
        self.orders = tuple(orders)
        self._init_common(name or family, generators, inverse, delta, max_elements)
        self._free = not any(orders)
        # spelling of a syllable: (letter, count)
        self._spell: list[dict[int, tuple[int, int]]] = []
        for fac in factors:
            n = fac.order
            table: dict[int, tuple[int, int]] = {}
            if n:
                for m in range(1, n):
                    if m < n - m:
                        table[m] = (fac.generator, m)
                    elif m > n - m:
                        table[m] = (fac.inverse, n - m)
                    else:
                        table[m] = (min(fac.generator, fac.inverse), m)
            self._spell.append(table)

    # syllable machinery

    def _letter(self, f: int, e: int) -> tuple[int, int]:
        n = self.orders[f]
        if n:
            return self._spell[f][e]
        fac = self.factors[f]
        return (fac.generator, e) if e > 0 else (fac.inverse, -e)

    def syllables(self, word: Iterable[int]) -> list[list[int]]:
        """Reduced syllable list ``[[factor, exponent], ...]`` of any word."""
        gf, ge, orders = self.gen_factor, self.gen_exp, self.orders
        stack: list[list[int]] = []
        for g in word:
            f = gf[g]
            s = ge[g]
            if stack and stack[-1][0] == f:
                n = orders[f]
                e = stack[-1][1] + s
                if n:
                    e %= n
                if e == 0:
                    stack.pop()
                else:
                    stack[-1][1] = e
            else:
                n = orders[f]
                stack.append([f, s % n if n else s])
        return stack

    def _render(self, sylls: Iterable[Sequence[int]]) -> GroupElement:
        out: list[int] = []
        for f, e in sylls:
            g, c = self._letter(f, e)
            out.extend([g] * c)
        return tuple(out)

    def normal_form(self, word: Iterable[int]) -> GroupElement:
        return self._render(self.syllables(word))

    def multiply(self, x: GroupElement, y: GroupElement) -> GroupElement:
        if not x:
            return y
        if not y:
            return x
        if self.gen_factor[x[-1]] != self.gen_factor[y[0]]:
            return x + y
        if self._free:
            inv = self.inverse
            k = 0
            m = min(len(x), len(y))
            while k < m and inv[x[-1 - k]] == y[k]:
                k += 1
            return x[: len(x) - k] + y[k:]
        return self.normal_form(x + y)

    def invert(self, x: GroupElement) -> GroupElement:
        if not x:
            return x
        inv = self.inverse
        w = tuple(inv[g] for g in reversed(x))
        if any(self.orders):
            return self.normal_form(w)
        return w

    def is_torsion_certificate(self, x: GroupElement) -> bool:
        sylls = self.syllables(x)
        orders = self.orders
        # cyclic reduction: conjugate while the ends lie in the same factor
        while len(sylls) >= 2 and sylls[0][0] == sylls[-1][0]:
            f = sylls[0][0]
            n = orders[f]
            e = sylls[0][1] + sylls[-1][1]
            if n:
                e %= n
            sylls = sylls[1:-1]
            if e:
                if sylls:
                    sylls = [[f, e]] + sylls
                else:
                    sylls = [[f, e]]
        if not sylls:
            return True
        if len(sylls) == 1:
            return orders[sylls[0][0]] != 0
        return False

    def kernel_data(self):
        return (self.gen_factor, self.gen_exp, self.orders)

    def describe(self) -> dict:
        return {
            "name": self.name,
            "family": self.family,
            "generators": list(self.generators),
            "factors": [
                {
                    "generator": self.generators[f.generator],
                    "inverse": self.generators[f.inverse],
                    "order": f.order,
                }
                for f in self.factors
            ],
            "delta": self.delta,
        }


@dataclass(frozen=True)
class RewriteRule:
    lhs: GroupElement
    rhs: GroupElement


@dataclass
class ConfluenceReport:
    checked: int = 0
    failures: list[tuple[GroupElement, GroupElement, GroupElement]] = field(default_factory=list)

    @property
    def confluent(self) -> bool:
        return not self.failures


class RewritingPresentation(GroupPresentation):
    """Presentation whose word problem is solved by a finite rewriting system.

    Rules are applied until no left-hand side occurs.  Each rule must
    strictly decrease words in shortlex order, which makes the process
    terminate; irreducible words are taken as geodesic normal forms and this
    is cross-checked against breadth-first distances during ball
    enumeration.
    """

    family = FAMILY_REWRITING

    def __init__(
        self,
        generators: Sequence[str],
        inverse: Sequence[int],
        rules: Sequence[RewriteRule],
        delta: int = 1,
        name: str = "",
        max_elements: int = DEFAULT_MAX_ELEMENTS,
        check_confluence: bool = True,
        unique_geodesics: bool = False,
    ):
        self._init_common(name or FAMILY_REWRITING, generators, inverse, delta, max_elements)
        self.unique_geodesics = unique_geodesics
        q = len(self.generators)
        seen: dict[GroupElement, GroupElement] = {}
        for r in rules:
            if not r.lhs:
                raise ConfigError("a rewriting rule has an empty left-hand side")
            if any(not 0 <= g < q for g in r.lhs + r.rhs):
                raise ConfigError("a rewriting rule uses an unknown generator")
            if shortlex_key(r.rhs) >= shortlex_key(r.lhs):
                raise ConfigError(
                    f"rule {self.word(r.lhs)} -> {self.word(r.rhs)} does not decrease in shortlex order"
                )
            if r.lhs in seen and seen[r.lhs] != r.rhs:
                raise ConfigError(f"two rules share the left-hand side {self.word(r.lhs)}")
            seen[r.lhs] = r.rhs
        self.rules = tuple(RewriteRule(k, v) for k, v in seen.items())
        self._table = dict(seen)
        self._max_lhs = max((len(k) for k in seen), default=0)
        if check_confluence:
            report = self.check_confluence()
            if not report.confluent:
                w, a, b = report.failures[0]
                raise ConfigError(
                    f"rewriting system is not confluent: {self.word(w)} reduces to both "
                    f"{self.word(a)} and {self.word(b)}"
                )

    def normal_form(self, word: Iterable[int]) -> GroupElement:
        table = self._table
        m = self._max_lhs
        pending = list(word)
        pending.reverse()
        stack: list[int] = []
        steps = 0
        while pending:
            stack.append(pending.pop())
            top = len(stack)
            for k in range(1, min(m, top) + 1):
                rhs = table.get(tuple(stack[top - k:]))
                if rhs is not None:
                    del stack[top - k:]
                    pending.extend(reversed(rhs))
                    steps += 1
                    break
            if steps > 10_000_000:
                raise OracleError("rewriting did not terminate")
        return tuple(stack)

    def check_confluence(self) -> ConfluenceReport:
        """Resolve every critical pair (overlaps and inclusions) of the rules."""
        report = ConfluenceReport()
        rules = self.rules
        for r1 in rules:
            for r2 in rules:
                l1, l2 = r1.lhs, r2.lhs
                # overlap: a proper suffix of l1 equals a proper prefix of l2
                for k in range(1, min(len(l1), len(l2))):
                    if l1[-k:] == l2[:k]:
                        w = l1 + l2[k:]
                        a = self.normal_form(r1.rhs + l2[k:])
                        b = self.normal_form(l1[:-k] + r2.rhs)
                        report.checked += 1
                        if a != b:
                            report.failures.append((w, a, b))
                # inclusion: l2 occurs inside l1
                if r1 is not r2 and len(l2) <= len(l1):
                    for i in range(len(l1) - len(l2) + 1):
                        if l1[i:i + len(l2)] == l2:
                            a = self.normal_form(r1.rhs)
                            b = self.normal_form(l1[:i] + r2.rhs + l1[i + len(l2):])
                            report.checked += 1
                            if a != b:
                                report.failures.append((l1, a, b))
        return report

    def describe(self) -> dict:
        return {
            "name": self.name,
            "family": self.family,
            "generators": list(self.generators),
            "inverses": {self.generators[i]: self.generators[j] for i, j in enumerate(self.inverse)},
            "rules": [f"{self.word(r.lhs)} -> {self.word(r.rhs) if r.rhs else ''}".strip() for r in self.rules],
            "delta": self.delta,
        }


# constructors for the standard examples


def free_group(rank: int = 2, names: Sequence[str] | None = None, delta: int = 1, **kw) -> FreeProductPresentation:
    """Free group with generators ``a, A, b, B, ...`` (capital letter = inverse)."""
    if names is None:
        base = "abcdefghijklmnopqrsuvwxyz"
        if rank > len(base):
            raise ConfigError("rank too large for default generator names")
        names = []
        for c in base[:rank]:
            names += [c, c.upper()]
    if len(names) != 2 * rank:
        raise ConfigError("a free group of rank k needs 2k generator names")
    factors = [CyclicFactor(2 * i, 2 * i + 1, 0) for i in range(rank)]
    kw.setdefault("name", f"F{rank}")
    return FreeProductPresentation(names, factors, delta=delta, family=FAMILY_FREE, **kw)


def integers(delta: int = 1, **kw) -> FreeProductPresentation:
    """The infinite cyclic group with generators ``t, T``."""
    kw.setdefault("name", "Z")
    return free_group(1, names=("t", "T"), delta=delta, **kw)


def cyclic_free_product(orders: Sequence[int], names: Sequence[str] | None = None, delta: int = 1, **kw) -> FreeProductPresentation:
    """Free product of finite cyclic groups of the given orders.

    Default names use ``s, t, u, ...`` with the capital letter for the
    inverse; order-2 factors get one self-inverse generator.
    """
    letters = "stuvwxyzabcdefghijklmnopqr"
    gens: list[str] = []
    factors: list[CyclicFactor] = []
    for i, n in enumerate(orders):
        if n < 2:
            raise ConfigError("cyclic factors need order at least 2")
        if names is None:
            c = letters[i]
            pair = [c] if n == 2 else [c, c.upper()]
        else:
            pair = list(names[len(gens):len(gens) + (1 if n == 2 else 2)])
        g = len(gens)
        gens += pair
        factors.append(CyclicFactor(g, g if n == 2 else g + 1, n))
    kw.setdefault("name", "*".join(f"Z{n}" for n in orders))
    return FreeProductPresentation(gens, factors, delta=delta, family=FAMILY_FREE_PRODUCT, **kw)


def modular_group(**kw) -> FreeProductPresentation:
    """Z2 * Z3 with generators ``s`` (order 2) and ``t, T`` (order 3)."""
    kw.setdefault("name", "Z2*Z3")
    return cyclic_free_product((2, 3), **kw)


def parse_rule(text: str, index: dict[str, int], single_char: bool) -> RewriteRule:
    if "->" not in text:
        raise ConfigError(f"rule {text!r} lacks '->'")
    left, right = text.split("->", 1)

    def toks(side: str) -> GroupElement:
        side = side.strip()
        if side in ("", "e", "1"):
            return ()
        parts = side.split() if (" " in side or not single_char) else list(side)
        try:
            return tuple(index[p] for p in parts)
        except KeyError as exc:
            raise ConfigError(f"rule {text!r} uses unknown generator {exc.args[0]!r}") from None

    return RewriteRule(toks(left), toks(right))


def rewriting_presentation(
    generators: Sequence[str],
    inverses: dict[str, str],
    rules: Sequence[str],
    delta: int = 1,
    **kw,
) -> RewritingPresentation:
    index = {s: i for i, s in enumerate(generators)}
    inverse = []
    for s in generators:
        if s not in inverses:
            raise ConfigError(f"generator {s!r} has no inverse")
        if inverses[s] not in index:
            raise ConfigError(f"inverse {inverses[s]!r} is not a generator")
        inverse.append(index[inverses[s]])
    single = all(len(s) == 1 for s in generators)
    parsed = [parse_rule(r, index, single) for r in rules]
    return RewritingPresentation(generators, inverse, parsed, delta=delta, **kw)


def free_reduction_rules(generators: Sequence[str], inverses: dict[str, str]) -> list[str]:
    """Cancellation rules ``x X -> e`` for every generator."""
    return [f"{g} {inverses[g]} ->" for g in generators]


def sample_words(G: GroupPresentation, max_len: int) -> Iterable[GroupElement]:
    """All raw words up to a length (not normalized); tiny lengths only."""
    for n in range(max_len + 1):
        yield from product(range(G.rank), repeat=n)

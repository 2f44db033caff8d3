import json
import random
from dataclasses import dataclass
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gromov_markov import (
    CensusIncompleteError,
    DomainError,
    MarkovSystemDescription,
    MetricParams,
    NerveSystem,
    SpanCoverSystem,
    SpanSystem,
    boundary_distance_da,
    describe,
    enumerate_ball,
    free_group,
    integers,
    l1_distance,
    limit_point,
    rebuild_from_prefix,
    sample_bilipschitz,
    simplicial_distance,
    typed_isomorphic,
    validate_markov_compactum,
)
from gromov_markov.compactum import LimitPoint
from gromov_markov.complexes import AffineMap, SimplicialComplex

F2, Z = free_group(2), integers()
h = Fraction(1, 2)


@dataclass
class Toy:
    """Hand-made system: complexes, maps and a type table."""

    complexes: list
    maps: list
    table: dict

    def simplex_type(self, n, s):
        return self.table[(n, SimplicialComplex.canon(s))]


def one_vertex(levels, types=None):
    types = types or ["x"] * (levels + 1)
    Ks = [SimplicialComplex(n, [(0,)]) for n in range(levels + 1)]
    maps = [AffineMap(n + 1, n, {(0,): {(0,): Fraction(1)}}) for n in range(levels)]
    return Toy(Ks, maps, {(n, ((0,),)): types[n] for n in range(levels + 1)})


def growing(levels):
    """K_n is a full n-simplex with fresh types at every level."""
    Ks, maps, table = [], [], {}
    for n in range(levels + 1):
        verts = [(i,) for i in range(n + 1)]
        Ks.append(SimplicialComplex(n, verts, {tuple(verts)}))
        for s in Ks[-1].simplices:
            table[(n, s)] = f"{n}:{len(s)}:{s[0][0]}"
        if n:
            maps.append(AffineMap(n, n - 1, {(i,): {(min(i, n - 1),): Fraction(1)} for i in range(n + 1)}))
    return Toy(Ks, maps, table)


def ball_nerves(G, L, depth, radius):
    C = SpanCoverSystem(SpanSystem(G, N=1), enumerate_ball(G, radius))
    return NerveSystem(C, L, depth)


@pytest.fixture(scope="module")
def f2_system():
    return ball_nerves(F2, 1, 7, 7)


@pytest.fixture(scope="module")
def z_system():
    return ball_nerves(Z, 2, 7, 14)


# l1 metric


def test_l1_examples():
    v1, v2, v3 = "v1", "v2", "v3"
    assert l1_distance({v1: h, v2: h}, {v1: h, v2: h}) == 0
    assert l1_distance({v1: Fraction(1)}, {v2: h, v3: h}) == 2
    assert l1_distance({v1: Fraction(1)}, {v1: h, v2: h}) == 1


@given(st.lists(st.integers(1, 9), min_size=3, max_size=3), st.lists(st.integers(1, 9), min_size=3, max_size=3), st.randoms())
def test_l1_ignores_vertex_order(xs, ys, rnd):
    names = ["u", "v", "w"]
    p = {n: Fraction(x, sum(xs)) for n, x in zip(names, xs)}
    q = {n: Fraction(y, sum(ys)) for n, y in zip(names, ys)}
    perm = names[:]
    rnd.shuffle(perm)
    ren = dict(zip(names, perm))
    assert l1_distance(p, q) == l1_distance({ren[k]: v for k, v in p.items()}, {ren[k]: v for k, v in q.items()})


# simplicial distance


def thread(*names):
    return LimitPoint([{v: Fraction(1)} for v in names])


def test_equal_threads_give_the_tail():
    P = MetricParams(Fraction(3, 2), 1, 10)
    x = thread(*"abcdefghijk")
    lo, hi = simplicial_distance(x, x, P)
    assert lo == 0 and hi == P.tail() == 2 * Fraction(2, 3) ** 10 * 3


def test_disjoint_threads_are_exact():
    a = Fraction(3, 2)
    P = MetricParams(a, 1, 6)
    x, y = thread(*"abcdefg"), thread(*"ABCDEFG")
    lo, hi = simplicial_distance(x, y, P)
    assert lo == hi
    assert lo >= sum(2 * a ** -t for t in range(7))
    assert lo == 2 * a / (a - 1)


def test_threads_splitting_at_level_three():
    a = Fraction(3, 2)
    x, y = thread("e", "a", "b", "c", "d"), thread("e", "a", "b", "C", "D")
    lo, hi = simplicial_distance(x, y, MetricParams(a, 1, 4))
    assert lo == hi == sum(2 * a ** -t for t in range(3, 5)) + 2 * a ** -4 / (a - 1)


def test_intervals_nest_in_depth(f2_system):
    ball = enumerate_ball(F2, 7)
    rng = random.Random(3)
    C = f2_system.cover
    words = [w for w in ball.words if len(w) == 7]
    for _ in range(20):
        p, q = rng.sample(words, 2)
        x, y = limit_point(C, p, 1, 7), limit_point(C, q, 1, 7)
        prev = None
        for T in range(8):
            lo, hi = simplicial_distance(x, y, MetricParams(Fraction(3, 2), 1, T))
            if prev is not None:
                assert prev[0] <= lo <= hi <= prev[1]
            prev = (lo, hi)


def test_limit_points_are_threads(f2_system):
    x = limit_point(f2_system.cover, F2.parse("abAAbab"), 1, 7)
    assert x.consistent(f2_system.maps)
    with pytest.raises(DomainError):
        limit_point(f2_system.cover, F2.parse("ab"), 1, 3)


# visual distance


def test_da_examples():
    a = Fraction(3, 2)
    p, q = F2.parse("abababaa"), F2.parse("abababab")
    assert boundary_distance_da(F2, F2.parse("abababaab"), F2.parse("abababaBB"), a) == (a ** -7, True)
    assert boundary_distance_da(F2, p, p, a) == (a ** -8, True)
    assert boundary_distance_da(Z, Z.parse("ttttt"), Z.parse("TTTTT"), a)[0] == 1
    assert boundary_distance_da(F2, p, q, a)[0] == a ** -7
    with pytest.raises(DomainError):
        boundary_distance_da(F2, p, F2.parse("ab"), a)


@settings(max_examples=50)
@given(st.integers(0, 5), st.randoms())
def test_da_stable_in_depth(k, rnd):
    # rays diverging at k give the same value at depths 6 and 7
    stem = "".join(rnd.choice("ab") for _ in range(k))
    p, q = stem + "a" + "b" * 6, stem + "b" + "a" * 6
    a = Fraction(3, 2)
    d6 = boundary_distance_da(F2, F2.parse(p[:6]), F2.parse(q[:6]), a)
    d7 = boundary_distance_da(F2, F2.parse(p[:7]), F2.parse(q[:7]), a)
    assert d6 == d7 == (a ** -k, True)


def test_metric_params():
    MetricParams(Fraction(3, 2), 1).require_bilipschitz()
    with pytest.raises(DomainError):
        MetricParams(Fraction(5, 2), 1).require_bilipschitz()
    with pytest.raises(DomainError):
        MetricParams(Fraction(1), 1)
    # n = 0 imposes nothing
    MetricParams(Fraction(7), 0).require_bilipschitz()


# finite description


@pytest.mark.parametrize("which", ["f2_system", "z_system"])
def test_round_trip(request, which):
    ns = request.getfixturevalue(which)
    desc = describe(ns, 4)
    assert desc.census_closed
    rebuilt = rebuild_from_prefix(desc, 7)
    rep = typed_isomorphic(rebuilt, ns, 4, 7)
    assert rep.passed, rep.witnesses
    # idempotent
    again = rebuild_from_prefix(describe(rebuilt, 4), 7)
    assert typed_isomorphic(again, rebuilt, 4, 7).passed


def test_description_json_round_trip(f2_system):
    desc = describe(f2_system, 3)
    text = desc.to_json()
    back = MarkovSystemDescription.from_json(text)
    assert back.to_json() == text
    assert typed_isomorphic(rebuild_from_prefix(back, 5), f2_system, 3, 5).passed
    data = json.loads(text)
    data["levels"][2]["simplices"][0][-1] = "forged"
    with pytest.raises(DomainError, match="level 2"):
        MarkovSystemDescription.from_json(json.dumps(data))


def test_one_vertex_tower():
    sys_ = one_vertex(5)
    rebuilt = rebuild_from_prefix(describe(sys_, 1), 5)
    assert [len(K.vertices) for K in rebuilt.complexes] == [1] * 6
    assert typed_isomorphic(rebuilt, sys_, 1, 5).passed


def test_missing_type_is_census_incomplete():
    sys_ = one_vertex(3, ["x", "y", "y", "y"])
    desc = describe(sys_, 1)
    assert not desc.census_closed
    with pytest.raises(CensusIncompleteError):
        rebuild_from_prefix(desc, 3)


def test_describe_prefix_range(f2_system):
    with pytest.raises(DomainError):
        describe(f2_system, 0)
    with pytest.raises(DomainError):
        describe(f2_system, 8)


# validation


def test_nerve_system_is_a_markov_compactum(f2_system):
    rep = validate_markov_compactum(f2_system, 5)
    assert rep.passed, rep.witnesses


def test_one_vertex_is_a_markov_compactum():
    assert validate_markov_compactum(one_vertex(4)).passed


def test_non_affine_map_fails_ii():
    sys_ = one_vertex(3)
    sys_.maps[1] = AffineMap(2, 1, {(0,): {(0,): h}})
    rep = validate_markov_compactum(sys_)
    assert not rep.checks["ii:affine"]
    assert rep.witnesses["ii:affine"]["level"] == 2


def test_dimension_growth_fails_i():
    rep = validate_markov_compactum(growing(4))
    assert not rep.checks["i:bounded-dimension"]
    assert rep.witnesses["i:bounded-dimension"]["dimensions"] == [0, 1, 2, 3, 4]


# sampling


def test_bilipschitz_free():
    C = SpanCoverSystem(SpanSystem(F2, N=1), enumerate_ball(F2, 6))
    rep = sample_bilipschitz(C, MetricParams(Fraction(3, 2), 1), 60, 6, seed=1)
    assert rep.passed
    assert rep.stats["inexact-da"] == 0
    assert rep.stats["pairs"] + rep.stats["identical-skipped"] == 60
    again = sample_bilipschitz(C, MetricParams(Fraction(3, 2), 1), 60, 6, seed=1)
    assert again.stats == rep.stats


def test_bilipschitz_skips_identical_pairs():
    # the line at depth 1 has two rays, so some draws coincide
    C = SpanCoverSystem(SpanSystem(Z, N=1), enumerate_ball(Z, 4))
    rep = sample_bilipschitz(C, MetricParams(Fraction(3, 2), 1), 40, 2, L=2, seed=0)
    assert rep.stats["identical-skipped"] > 0
    assert rep.stats["min"] == rep.stats["max"] and rep.stats["distortion"] == 1


def test_bilipschitz_checks_the_weight():
    C = SpanCoverSystem(SpanSystem(F2, N=1), enumerate_ball(F2, 3))
    with pytest.raises(DomainError):
        sample_bilipschitz(C, MetricParams(Fraction(5, 2), 1), 10, 3)

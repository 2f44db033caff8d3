from fractions import Fraction

import pytest

from gromov_markov import (
    ExplicitCoverSystem,
    InconsistencyError,
    NerveSystem,
    PreconditionError,
    SpanCoverSystem,
    SpanSystem,
    TypeTower,
    build_bonding_map,
    build_nerve,
    check_star_property,
    enumerate_ball,
    find_L0,
    free_group,
    strengthen_delta_A,
    tower_labeler,
)
from gromov_markov.complexes import SimplicialComplex

F2 = free_group(2)
w = F2.parse


def ladder_cover(fault=False, labels=None):
    """Three-level cover whose aa has two parents; the fault drops one for aaa."""
    atoms = {0: [w("")], 1: [w("a"), w("b")], 2: [w("aa"), w("ab")], 3: [w("aaa"), w("aab")]}
    edges = [(w("a"), w("b")), (w("aa"), w("ab")), (w("aaa"), w("aab"))]
    parents = {
        w("a"): [w("")],
        w("b"): [w("")],
        w("aa"): [w("a"), w("b")],
        w("ab"): [w("b")],
        w("aaa"): [w("aa")] if fault else [w("aa"), w("ab")],
        w("aab"): [w("ab")],
    }
    return ExplicitCoverSystem(F2, atoms, edges, parents, labels or (lambda x: F2.word(x)[-1:]))


def cover(G, N=1, radius=8, **kw):
    return SpanCoverSystem(SpanSystem(G, N=N), enumerate_ball(G, radius), **kw)


@pytest.fixture(scope="module")
def f2_nerves():
    return NerveSystem(cover(F2, 1), 1, 5)


# nerves


def test_free_sphere_nerve_is_discrete():
    K, over = build_nerve(cover(F2), 2, 1)
    assert len(K.vertices) == 12 and K.dimension == 0 and not over


def test_line_nerve(Z):
    K, _ = build_nerve(cover(Z), 3, 1)
    assert K.vertices == sorted([Z.parse("ttt"), Z.parse("TTT")])
    assert K.dimension == 0


def test_level_zero_nerve(golden):
    for G in golden.values():
        K, _ = build_nerve(cover(G, radius=3), 0, 1)
        assert K.vertices == [()] and K.simplices == {((),)}


def test_nerve_cliques_need_pairwise_adjacency():
    K, over = build_nerve(ladder_cover(), 2, 1)
    assert (w("aa"), w("ab")) in K
    assert K.dimension == 1 and not over


def test_clique_without_witness_is_flagged():
    atoms = {0: [()], 1: [w("a"), w("b"), w("A")]}
    edges = [(w("a"), w("b")), (w("b"), w("A")), (w("a"), w("A"))]
    parents = {x: [()] for x in atoms[1]}
    C = ExplicitCoverSystem(F2, atoms, edges, parents, lambda x: 0)
    K, over = build_nerve(C, 1, 1)
    assert over and K.dimension == 2
    C.meets = lambda xs: False
    K, over = build_nerve(C, 1, 1)
    assert not over and K.dimension == 1


# bonding maps


def test_bonding_map_in_a_tree(f2_nerves):
    f = f2_nerves.maps[1]
    assert f.images[w("ab")] == {w("a"): Fraction(1)}


def test_bonding_map_two_ancestors():
    ns = NerveSystem(ladder_cover(), 1, 3)
    assert ns.maps[1].images[w("aa")] == {w("a"): Fraction(1, 2), w("b"): Fraction(1, 2)}
    assert ns.maps[1].images[w("ab")] == {w("b"): Fraction(1)}


def test_bonding_map_needs_an_image_simplex():
    atoms = {0: [()], 1: [w("a"), w("b")], 2: [w("aa")]}
    parents = {w("a"): [()], w("b"): [()], w("aa"): [w("a"), w("b")]}
    C = ExplicitCoverSystem(F2, atoms, [], parents, lambda x: 0)
    K1, _ = build_nerve(C, 1, 1)
    K2, _ = build_nerve(C, 2, 1)
    with pytest.raises(InconsistencyError):
        build_bonding_map(C, K2, K1, 1)


# types and shifts


def test_find_shift_examples(f2_nerves):
    ns = f2_nerves
    g = ns.find_shift((w("ab"),), (w("bb"),))
    assert g is not None and F2.multiply(g, w("ab")) == w("bb")
    assert ns.find_shift((w("ab"),), (w("ab"),)) == ()
    assert ns.find_shift((w("a"),), (w("A"),)) is None


def test_shifts_preserve_types(f2_nerves):
    ns = f2_nerves
    for n, s in ns.simplices(3):
        _, r = ns.representatives()[ns.delta_type(n, s)]
        g = ns.find_shift(s, r)
        assert g is not None
        assert SimplicialComplex.canon(F2.multiply(g, v) for v in s) == r


# Markov ladder


def test_markov_free(golden):
    # radius-4 labels separate every simplex below the top, so no ladder exists
    assert NerveSystem(cover(golden["F2"], N=4), 1, 5).verify_markov().passed
    rep = NerveSystem(cover(golden["F2"], N=1), 1, 5).verify_markov()
    assert rep.passed and rep.stats["squares"] > 0


def test_markov_line(Z):
    rep = NerveSystem(cover(Z, N=4, radius=6), 1, 6).verify_markov()
    assert rep.passed


def test_markov_clean_fixture():
    assert NerveSystem(ladder_cover(), 1, 3).verify_markov().passed


def test_markov_fault_gives_non_commuting_square():
    rep = NerveSystem(ladder_cover(fault=True), 1, 3).verify_markov()
    assert not rep.passed
    assert not rep.checks["commuting"]
    assert rep.witnesses["commuting"] is not None


# strengthening and distinct types


def test_strengthening_needs_strong_labels(f2_nerves):
    with pytest.raises(PreconditionError):
        strengthen_delta_A(f2_nerves)


@pytest.mark.parametrize("name", ["F2", "Z", "Z2*Z3"])
def test_distinct_types_after_strengthening(golden, name):
    G = golden[name]
    T = TypeTower(G, 8, 6, 2)
    C = SpanCoverSystem(SpanSystem(G, N=4), T.ball, labeler=tower_labeler(T, "C"), strength="C")
    ns = NerveSystem(C, 2, 4)
    strong = strengthen_delta_A(ns)
    assert strong.mode == "delta+A"
    assert strong.check_distinct_types(4).passed
    assert strong.strengthen_report.passed


def test_one_vertex_level_is_distinct(f2_nerves):
    assert f2_nerves.check_distinct_types(0).passed


# stars


@pytest.mark.parametrize("name", ["F2", "Z"])
def test_star_property(golden, name):
    C = cover(golden[name], radius=6)
    assert check_star_property(C, 1, 6).passed
    assert find_L0(C, 6) == 1


def test_star_violation_fixture():
    atoms = {0: [()], 1: [w("a"), w("b")], 2: [w("aa"), w("ab")]}
    parents = {w("a"): [()], w("b"): [()], w("aa"): [w("a")], w("ab"): [w("b")]}
    C = ExplicitCoverSystem(F2, atoms, [(w("aa"), w("ab"))], parents, lambda x: 0)
    rep = check_star_property(C, 1, 2)
    assert not rep.passed
    assert rep.witnesses["star-property"]["level"] == 2
    assert find_L0(C, 2, max_level=2) is None


# compactum properties


def test_barycentric_and_mesh(f2_nerves):
    assert f2_nerves.check_barycentric().passed
    assert f2_nerves.check_mesh().passed


def test_census_closes_with_ball_labels(f2_nerves):
    census = f2_nerves.census()
    assert census[:2] == [1, 4] and not any(census[2:])

import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gromov_markov import DomainError, SpanCoverSystem, SpanSystem, audit_quasi_invariance, enumerate_ball
from gromov_markov.spans import ADJACENT, DISJOINT, OVER, has_infinite_path, infinite_core


@pytest.fixture(scope="module")
def spans(golden):
    return {k: SpanSystem(G, N=4) for k, G in golden.items()}


# emptiness


def test_trees_have_no_dead_ends(spans, F2, Z):
    assert spans["F2"].span_nonempty(F2.parse("ab"))
    assert spans["Z"].span_nonempty(Z.parse("TT"))


def test_every_modular_element_extends(spans, Z2Z3):
    for x in enumerate_ball(Z2Z3, 6).words:
        assert spans["Z2*Z3"].span_nonempty(x)


def test_sink_has_no_infinite_path():
    succ = {"start": ["room"], "room": ["sink"], "sink": []}
    assert not has_infinite_path(succ, "start")
    succ["room"].append("loop")
    succ["loop"] = ["loop"]
    assert has_infinite_path(succ, "start")
    assert infinite_core(succ, ["start"]) == {"start", "room", "loop"}


# intersection


def test_intersection_examples(spans, F2, Z):
    p, q = F2.parse, Z.parse
    assert not spans["F2"].span_intersects(p("a"), p("b"))
    assert spans["F2"].span_intersects(p("ab"), p("ab"))
    assert spans["Z"].span_intersects(q("tt"), q("tt"))
    assert not spans["Z"].span_intersects(q("tt"), q("TT"))


def test_intersection_needs_equal_lengths(spans, F2):
    with pytest.raises(DomainError):
        spans["F2"].span_intersects(F2.parse("a"), F2.parse("ab"))


def test_exact_and_horizon_modes_agree(Z2Z3):
    exact = SpanSystem(Z2Z3, N=4, mode="exact")
    horizon = SpanSystem(Z2Z3, N=4, mode="horizon", horizon=10)
    ball = enumerate_ball(Z2Z3, 5)
    for n in range(1, 6):
        sphere = ball.sphere_words(n)
        for x, y in itertools.combinations(sphere, 2):
            assert exact.span_intersects(x, y) == horizon.span_intersects(x, y)


def test_horizon_answers_shrink_with_depth(Z2Z3):
    S = SpanSystem(Z2Z3, N=4, mode="horizon")
    ball = enumerate_ball(Z2Z3, 4)
    for x, y in itertools.combinations(ball.sphere_words(4), 2):
        answers = [S.span_intersects_horizon(x, y, d) for d in range(1, 8)]
        assert answers == sorted(answers, reverse=True)


# fellow stars and adjacency


def test_fellow_star_examples(spans, F2, Z, Z2Z3):
    assert spans["F2"].fellow_star(F2.parse("ab")) == ((),)
    assert spans["Z"].fellow_star(Z.parse("ttt")) == ((),)
    g = enumerate_ball(Z2Z3, 3).sphere_words(3)[0]
    assert () in spans["Z2*Z3"].fellow_star(g)


def test_adjacency_examples(spans, F2, Z):
    p, q = F2.parse, Z.parse
    assert spans["F2"].nerve_adjacency(p("a"), p("b")) == DISJOINT
    assert spans["F2"].nerve_adjacency(p("ab"), p("ab")) == ADJACENT
    assert spans["Z"].nerve_adjacency(q("tt"), q("TT")) == DISJOINT


def test_free_group_approximations_agree(spans, F2):
    # the over-approximation never fires in a tree
    ball = enumerate_ball(F2, 4)
    S = spans["F2"]
    for n in range(1, 5):
        for x, y in itertools.combinations(ball.sphere_words(n), 2):
            assert S.nerve_adjacency(x, y) != OVER


def test_adjacent_implies_close(spans, Z2Z3):
    S = spans["Z2*Z3"]
    for x in enumerate_ball(Z2Z3, 5).sphere_words(5):
        for y, _ in S.adjacency_list(x):
            assert Z2Z3.distance(x, y) <= 12 * Z2Z3.delta


# ancestry


def test_cover_ancestor_examples(spans, F2, Z, Z2Z3):
    assert spans["F2"].cover_ancestor(F2.parse("abab"), 2) == F2.parse("ab")
    assert spans["Z"].cover_ancestor(Z.parse("ttttt"), 3) == Z.parse("ttt")
    g = Z2Z3.parse("tsts")
    anc = spans["Z2*Z3"].cover_ancestor(g, 2)
    assert anc == min(spans["Z2*Z3"].geodesic_ancestors(g, 2), key=lambda x: (len(x), x))
    assert spans["Z2*Z3"].is_ancestor(anc, g)


def test_cover_ancestor_range(spans, F2):
    with pytest.raises(DomainError):
        spans["F2"].cover_ancestor(F2.parse("ab"), 2)


@settings(max_examples=50, deadline=None)
@given(st.data())
def test_cover_ancestor_monotone_in_trees(spans, F2, data):
    g = data.draw(st.sampled_from(enumerate_ball(F2, 6).sphere_words(6)))
    k = data.draw(st.integers(1, 5))
    j = data.draw(st.integers(0, k - 1))
    S = spans["F2"]
    assert S.cover_ancestor(S.cover_ancestor(g, k), j) == S.cover_ancestor(g, j)


# quasi-invariance


def test_quasi_invariance_free(spans):
    rep = audit_quasi_invariance(spans["F2"], 8)
    assert rep.passed
    assert rep.stats["D"] == 0


def test_quasi_invariance_line(spans):
    assert audit_quasi_invariance(spans["Z"], 10).passed


def test_quasi_invariance_modular(Z2Z3):
    rep = audit_quasi_invariance(SpanSystem(Z2Z3, N=6), 8)
    assert rep.passed or rep.witnesses
    assert rep.stats["D"] <= 12


def test_quasi_invariance_rejects_unknown_type(spans):
    with pytest.raises(DomainError):
        audit_quasi_invariance(spans["F2"], 4, type_fn="nonsense")


def test_cover_system_atoms(spans, F2):
    C = SpanCoverSystem(spans["F2"], enumerate_ball(F2, 4))
    assert C.atoms(0) == [()]
    assert len(C.atoms(2)) == 12
    x, y = F2.parse("ab"), F2.parse("bb")
    g = C.shift(x, y)
    assert F2.multiply(g, x) == y

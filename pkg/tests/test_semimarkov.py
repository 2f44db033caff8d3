import math

import numpy as np
import pytest

from gromov_markov import (
    BoundaryError,
    DomainError,
    TypeTower,
    build_automaton,
    enumerate_compatible,
    free_group,
    integers,
    modular_group,
    same_limit,
    type_word,
    verify_criterion,
)
from gromov_markov.semimarkov import SemiMarkovAutomaton

F2, Z, MOD = free_group(2), integers(), modular_group()


@pytest.fixture(scope="module")
def f2_tower():
    return TypeTower(F2, 7, 6, 1)


@pytest.fixture(scope="module")
def z_tower():
    return TypeTower(Z, 16, 6, 2)


def test_line_has_two_branches(z_tower):
    A = build_automaton(z_tower, 8)
    assert A.stabilized
    assert A.infinite_branches() == 2
    assert [A.path_count(n) for n in range(5)] == [1, 2, 2, 2, 2]


def test_line_alphabet_growth(z_tower):
    # one new symbol per direction and level until the types settle
    A = build_automaton(z_tower, 4)
    assert len(A.alphabet) == 9 and not A.stabilized
    # no cycle closes before the alphabet stops growing
    assert A.infinite_branches() == 0
    assert len(build_automaton(z_tower, 8).alphabet) == 11


def test_free_path_counts(f2_tower):
    A = build_automaton(f2_tower, 6)
    assert [A.path_count(n) for n in range(1, 7)] == [4 * 3 ** (n - 1) for n in range(1, 7)]
    assert not A.stabilized


def test_depth_zero(f2_tower):
    A = build_automaton(f2_tower, 0)
    assert A.alphabet == A.initial == [int(f2_tower.c_id[0])]
    assert not A.transitions and len(A.pair_array) == 0


def test_depth_beyond_ball(f2_tower):
    with pytest.raises(BoundaryError):
        build_automaton(f2_tower, 8)


def test_pairs_are_symmetric_and_project(f2_tower):
    A = build_automaton(f2_tower, 4)
    pairs = A.pairs
    for (a, b), (c, d) in pairs:
        assert ((b, a), (d, c)) in pairs
        assert (a, c) in A.transitions and (b, d) in A.transitions


def test_certificate_and_text_are_stable(f2_tower):
    A1 = build_automaton(f2_tower, 4)
    A2 = build_automaton(f2_tower, 4)
    assert A1.certificate() == A2.certificate()
    text = A1.to_text()
    assert text.splitlines()[-1] == f"sha256 {A1.certificate()}"
    assert sum(line.startswith("arrow ") for line in text.splitlines()) == len(A1.transitions)
    assert A1.to_dot().startswith("digraph semimarkov")


def test_infinite_branches_on_small_graphs():
    def auto(edges, initial=(0,)):
        nodes = sorted({v for e in edges for v in e} | set(initial))
        return SemiMarkovAutomaton(nodes, list(initial), set(edges), np.zeros((0, 4), dtype=np.int64), 1, 1, True)

    assert auto({(0, 1), (1, 1), (0, 2), (2, 2)}).infinite_branches() == 2
    assert auto({(0, 1), (1, 2)}).infinite_branches() == 0
    assert auto({(0, 0), (0, 1), (1, 1)}).infinite_branches() == math.inf
    assert auto({(0, 1), (1, 0)}).infinite_branches() == 1


# compatible sequences


def test_compatible_sequence_counts(f2_tower):
    assert len(enumerate_compatible(f2_tower, 1)) == 4
    TZ = TypeTower(Z, 6, 2, 1)
    assert len(enumerate_compatible(TZ, 3)) == 2
    for seq in enumerate_compatible(f2_tower, 3):
        assert seq[0] == () and all(f2_tower.p_grandparent(seq[i + 1]) == seq[i] for i in range(3))


def test_type_words_injective(f2_tower):
    seqs = enumerate_compatible(f2_tower, 4)
    words = {type_word(f2_tower, s) for s in seqs}
    assert len(words) == len(seqs)


def test_same_limit(f2_tower):
    seqs = enumerate_compatible(f2_tower, 6)
    s = seqs[0]
    assert same_limit(f2_tower, s, s)
    far = next(t for t in seqs if F2.distance(t[-1], s[-1]) > 8)
    assert not same_limit(f2_tower, s, far)
    near = next(t for t in seqs if t != s and F2.distance(t[-1], s[-1]) <= 8)
    # still indistinguishable at this depth
    assert same_limit(f2_tower, s, near)


def test_line_rays_separate():
    T = TypeTower(Z, 9, 2, 1)
    plus, minus = enumerate_compatible(T, 9)
    assert not same_limit(T, plus, minus)


def test_same_limit_needs_equal_depth(f2_tower):
    a = enumerate_compatible(f2_tower, 2)[0]
    b = enumerate_compatible(f2_tower, 3)[0]
    with pytest.raises(DomainError):
        same_limit(f2_tower, a, b)


# criterion


def test_criterion_free():
    rep = verify_criterion(TypeTower(F2, 6, 6, 1), 5)
    assert rep.passed, rep.witnesses


def test_criterion_line():
    rep = verify_criterion(TypeTower(Z, 12, 6, 2), 6)
    assert rep.passed, rep.witnesses


def test_criterion_modular():
    rep = verify_criterion(TypeTower(MOD, 10, 6, 2), 5)
    assert rep.passed, rep.witnesses


def test_corrupted_type_table_breaks_determinism(f2_tower):
    T = f2_tower
    c = T.c_id.copy()
    x, y = T._id(F2.parse("ab")), T._id(F2.parse("ba"))
    c[c == c[y]] = c[x]
    rep = verify_criterion(T, 4, types=c)
    assert not rep.checks["b:children-determined"]
    w = rep.witnesses["b:children-determined"]
    assert {w["g"], w["g'"]} == {"ab", "ba"}

"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line (with its measurements) that is printed
in the terminal summary under "acceptance criteria".  Tolerances are
pinned in the constants below and are not tuned per run.
"""

import time
from fractions import Fraction

import pytest

from gromov_markov import (
    MetricParams,
    NerveSystem,
    SpanCoverSystem,
    SpanSystem,
    TypeEngine,
    TypeTower,
    audit_quasi_invariance,
    ball_census,
    cone_census,
    describe,
    enumerate_ball,
    free_group,
    integers,
    modular_group,
    rebuild_from_prefix,
    sample_bilipschitz,
    strengthen_delta_A,
    tower_labeler,
    typed_isomorphic,
    verify_ball_determines_cone,
    verify_criterion,
    verify_genealogy_lemmas,
)

F2, Z, MOD = free_group(2), integers(), modular_group()
GOLDEN = {"F2": F2, "Z": Z, "Z2*Z3": MOD}

CONE_SECONDS = 10.0
ROUND_TRIP_SECONDS = 60.0
QI_D_PER_DELTA = 12
DRIFT = Fraction(1, 10)
WEIGHT = Fraction(3, 2)

pytestmark = pytest.mark.acceptance


def ball_nerves(G, L, depth, N=1):
    return NerveSystem(SpanCoverSystem(SpanSystem(G, N=N), enumerate_ball(G, depth * L)), L, depth)


@pytest.mark.criterion(1, "cone types from ball types (F2 N=2 r8 d4, Z N=2 r10)")
def test_cone_from_ball(criterion):
    t = time.perf_counter()
    f2 = verify_ball_determines_cone(TypeEngine(F2), 2, 8, 4)
    z = verify_ball_determines_cone(TypeEngine(Z), 2, 10, 4)
    elapsed = time.perf_counter() - t
    criterion.detail = f"counterexamples {f2.stats['counterexamples']}+{z.stats['counterexamples']}, {elapsed:.1f}s"
    assert f2.passed and z.passed, (f2.witness, z.witness)
    assert f2.stats["counterexamples"] == z.stats["counterexamples"] == 0
    assert elapsed < CONE_SECONDS


@pytest.mark.criterion(2, "F2 census at radius 8: 5 ball-1-types, 5 cone types")
def test_census(criterion):
    eng = TypeEngine(F2)
    ball = enumerate_ball(F2, 8)
    b, c = ball_census(eng, 1, 8, ball), cone_census(eng, 8, 4, ball)
    criterion.detail = f"ball {b}, cone {c}"
    assert (b, c) == (5, 5)


@pytest.mark.criterion(3, "QI1-QI4 on F2 and Z at radius 8, D <= 12 delta")
def test_quasi_invariance(criterion):
    out = []
    for G in (F2, Z):
        rep = audit_quasi_invariance(SpanSystem(G, N=4), 8)
        out.append((G.name, rep))
    criterion.detail = ", ".join(f"{n} D={r.stats['D']}" for n, r in out)
    for name, rep in out:
        assert rep.passed, (name, rep.witnesses)
        assert rep.stats["D"] <= QI_D_PER_DELTA * GOLDEN[name].delta


@pytest.mark.criterion(4, "Markov squares commute to depth 5 on F2 and Z")
def test_markov_ladder(criterion):
    reps = {"F2": ball_nerves(F2, 1, 5).verify_markov(5), "Z": ball_nerves(Z, 2, 5).verify_markov(5)}
    criterion.detail = ", ".join(f"{k} pairs={r.stats['pairs']} squares={r.stats['squares']}" for k, r in reps.items())
    for name, rep in reps.items():
        assert rep.passed, (name, rep.witnesses)
        assert rep.stats["squares"] > 0


@pytest.mark.criterion(5, "pairwise distinct strengthened types in preimages to depth 4")
def test_distinct_after_strengthening(criterion):
    counts = []
    for name, G in GOLDEN.items():
        T = TypeTower(G, 8, 6, 2)
        C = SpanCoverSystem(SpanSystem(G, N=4), T.ball, labeler=tower_labeler(T, "C"), strength="C")
        strong = strengthen_delta_A(NerveSystem(C, 2, 4))
        rep = strong.check_distinct_types(4)
        counts.append(f"{name} {rep.stats['violations']}")
        assert strong.strengthen_report.passed, (name, strong.strengthen_report.witnesses)
        assert rep.passed, (name, rep.witnesses)
    criterion.detail = "violations " + ", ".join(counts)


@pytest.mark.criterion(6, "mesh bound diam <= 2 (n/(n+1))^(j-i) to depth 6")
def test_mesh(criterion):
    parts = []
    for name, G, L in (("F2", F2, 1), ("Z", Z, 2), ("Z2*Z3", MOD, 1)):
        rep = ball_nerves(G, L, 6).check_mesh(6)
        parts.append(f"{name} n={rep.stats['dimension']} checked={rep.stats['checked']}")
        assert rep.passed and rep.stats["violations"] == 0, (name, rep.witnesses)
    criterion.detail = ", ".join(parts)


@pytest.fixture(scope="module")
def towers10():
    return {name: TypeTower(G, 10, 6, 2) for name, G in GOLDEN.items()}


@pytest.fixture(scope="module")
def lemmas10(towers10):
    return {name: verify_genealogy_lemmas(T) for name, T in towers10.items()}


@pytest.mark.criterion(7, "B-type separation on B_10 (N=6, L=2)")
def test_b_separation(criterion, lemmas10):
    criterion.detail = ", ".join(f"{k} b_types={r.stats['b_types']}" for k, r in lemmas10.items())
    for name, rep in lemmas10.items():
        assert rep.checks["B-separation"], (name, rep.witnesses.get("B-separation"))


@pytest.mark.criterion(8, "C-type sibling distinctness and determinism on B_10")
def test_c_types(criterion, lemmas10):
    criterion.detail = ", ".join(f"{k} c_types={r.stats['c_types']}" for k, r in lemmas10.items())
    for name, rep in lemmas10.items():
        for check in ("C-siblings-distinct", "C-children", "C-gluing"):
            assert rep.checks[check], (name, check, rep.witnesses.get(check))


@pytest.mark.criterion(9, "semi-Markov automaton: F2 counts 4*3^(n-1), Z two branches")
def test_semi_markov(criterion):
    f2 = verify_criterion(TypeTower(F2, 12, 6, 1), 12)
    z = verify_criterion(TypeTower(Z, 16, 6, 2), 8)
    A, B = f2.stats["automaton"], z.stats["automaton"]
    counts = [A.path_count(n) for n in range(1, 7)]
    criterion.detail = f"F2 stabilized={A.stabilized} counts={counts}, Z branches={B.infinite_branches()}"
    assert f2.passed, f2.witnesses
    assert z.passed, z.witnesses
    assert A.stabilized and B.stabilized
    assert counts == [4 * 3 ** (n - 1) for n in range(1, 7)]
    assert B.infinite_branches() == 2


@pytest.mark.criterion(10, "finite description: prefix 4 rebuilds levels 5-7 on F2 and Z")
def test_round_trip(criterion):
    t = time.perf_counter()
    sizes = []
    for G, L in ((F2, 1), (Z, 2)):
        ns = ball_nerves(G, L, 7)
        desc = describe(ns, 4)
        rep = typed_isomorphic(rebuild_from_prefix(desc, 7), ns, 4, 7)
        assert rep.passed, (G.name, rep.witnesses)
        sizes.append(f"{G.name} {[rep.stats[f'level-{n}'] for n in range(5, 8)]}")
    elapsed = time.perf_counter() - t
    criterion.detail = f"simplexes {'; '.join(sizes)}, {elapsed:.1f}s"
    assert elapsed < ROUND_TRIP_SECONDS


@pytest.mark.criterion(11, "bi-Lipschitz sampling on F2, a=3/2, 1000 pairs, drift 10 -> 12 < 10%")
def test_bilipschitz(criterion):
    cover = SpanCoverSystem(SpanSystem(F2, N=1), enumerate_ball(F2, 2))
    params = MetricParams(WEIGHT, 1)
    reps = {d: sample_bilipschitz(cover, params, 1000, d, seed=0) for d in (10, 12)}
    dist = {d: r.stats["distortion"] for d, r in reps.items()}
    assert all(r.passed for r in reps.values())
    assert all(r.stats["pairs"] + r.stats["identical-skipped"] == 1000 for r in reps.values())
    drift = abs(dist[12] - dist[10]) / dist[10]
    criterion.detail = f"distortion {dist[10]} -> {dist[12]}, drift {drift}"
    assert drift < DRIFT

import json
from fractions import Fraction

from gromov_markov import NerveSystem, SpanCoverSystem, SpanSystem, enumerate_ball, free_group
from gromov_markov.complexes import AffineMap, SimplicialComplex
from gromov_markov.formats import (
    Manifest,
    adjacency_text,
    complex_to_json,
    complex_to_off,
    dumps,
    map_to_sparse,
    read_sparse,
    verify_manifest,
)

h = Fraction(1, 2)


def test_dumps_is_canonical():
    a = dumps({"b": Fraction(1, 3), "a": [1, float("inf")], (1, 2): {3}})
    b = dumps({(1, 2): {3}, "a": [1, float("inf")], "b": Fraction(1, 3)})
    assert a == b
    data = json.loads(a)
    assert data == {"(1, 2)": [3], "a": [1, "inf"], "b": "1/3"}


def test_off_listing():
    K = SimplicialComplex(2, ["u", "v", "w"], {("u", "v")})
    text = complex_to_off(K, str, lambda v: v.upper())
    assert text.splitlines() == ["OFF", "# level 2 dimension 1", "3 2 0", "0 0 0 # u U", "1 0 0 # v V", "2 0 0 # w W", "2 0 1", "1 2"]


def test_json_and_adjacency():
    K = SimplicialComplex(0, ["u", "v", "w"], {("u", "v"), ("v", "w")})
    data = json.loads(complex_to_json(K))
    assert data["maximal"] == [["u", "v"], ["v", "w"]] and data["sha256"] == K.content_hash()
    assert adjacency_text(K).splitlines()[2:] == ["u v", "v w"]


def test_sparse_round_trip():
    src = SimplicialComplex(1, ["x", "y"])
    dst = SimplicialComplex(0, ["a", "b"], {("a", "b")})
    f = AffineMap(1, 0, {"x": {"a": Fraction(1)}, "y": {"a": h, "b": h}})
    shape, entries = read_sparse(map_to_sparse(f, src, dst))
    assert shape == (2, 2)
    assert entries == {(0, 0): 1, (1, 0): h, (1, 1): h}


def test_sparse_rows_are_stochastic():
    G = free_group(2)
    ns = NerveSystem(SpanCoverSystem(SpanSystem(G, N=1), enumerate_ball(G, 4)), 1, 3)
    for n in range(1, 4):
        shape, entries = read_sparse(map_to_sparse(ns.maps[n - 1], ns.complexes[n], ns.complexes[n - 1]))
        assert shape == (len(ns.complexes[n].vertices), len(ns.complexes[n - 1].vertices))
        rows = {}
        for (i, _), w in entries.items():
            rows[i] = rows.get(i, 0) + w
        assert set(rows.values()) == {1} and len(rows) == shape[0]


def test_manifest_records_and_verifies(tmp_path):
    m = Manifest(tmp_path, "analyze", {"N": 2})
    m.write("a/x.txt", "hello\n")
    m.write("b.bin", b"\x00\x01")
    path = m.save("manifest-analyze.json")
    assert verify_manifest(path) == []
    m2 = Manifest(tmp_path, "nerves", {"N": 2})
    m2.chain([path, tmp_path / "manifest-missing.json"])
    assert list(m2.parents) == ["manifest-analyze.json"]
    (tmp_path / "a" / "x.txt").write_text("tampered\n")
    (tmp_path / "b.bin").unlink()
    assert verify_manifest(path) == ["a/x.txt", "b.bin"]

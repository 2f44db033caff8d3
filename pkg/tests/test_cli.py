import json
import subprocess
import sys

import pytest
from filelock import FileLock

from gromov_markov.cli import STAGES, main
from gromov_markov.formats import verify_manifest

F2_RUN = """\
presentation: {family: free, rank: 2}
run: {N: 2, L: 1, radius: 5, depth: 3, prefix: 2, pairs: 20, T: 4}
"""

Z_RUN = """\
presentation: {family: free, rank: 1, generators: [t, T]}
run: {N: 6, L: 2, radius: 16, depth: 8}
"""


@pytest.fixture
def f2_config(tmp_path):
    p = tmp_path / "run.yaml"
    p.write_text(F2_RUN)
    return p


def run_all(config, out):
    return [main([c, "--config", str(config), "--out", str(out)]) for c in STAGES]


def tree(out):
    return {str(p.relative_to(out)): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file() and p.name != ".lock"}


def test_pipeline_is_deterministic(f2_config, tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_all(f2_config, a) == [0] * 5
    assert run_all(f2_config, b) == [0] * 5
    ta, tb = tree(a), tree(b)
    assert ta.keys() == tb.keys() and ta == tb
    assert {"nerves/level-3.off", "nerves/map-3-2.txt", "automaton/automaton.dot", "verify/description.json"} <= ta.keys()
    for s in STAGES:
        assert verify_manifest(a / f"manifest-{s}.json") == []


def test_manifests_chain(f2_config, tmp_path):
    out = tmp_path / "out"
    run_all(f2_config, out)
    m = json.loads((out / "manifest-metric.json").read_text())
    assert set(m["parents"]) == {f"manifest-{s}.json" for s in STAGES[:-1]}
    assert m["config"]["radius"] == 5 and m["results"]["passed"]


def test_line_automaton_has_two_branches(tmp_path):
    cfg = tmp_path / "z.yaml"
    cfg.write_text(Z_RUN)
    assert main(["automaton", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    m = json.loads((tmp_path / "o" / "manifest-automaton.json").read_text())
    assert m["results"]["infinite_branches"] == 2 and m["results"]["stabilized"]
    assert (tmp_path / "o" / "automaton" / "automaton.dot").read_text().startswith("digraph")


def test_config_error_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text(F2_RUN.replace("N: 2", "N: -2"))
    assert main(["analyze", "--config", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert "bad.yaml:2" in capsys.readouterr().err


def test_strict_ladder_exit_1(tmp_path, capsys):
    cfg = tmp_path / "s.yaml"
    cfg.write_text(F2_RUN.replace("T: 4}", "T: 4, ladder: strict}"))
    assert main(["analyze", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "14" in capsys.readouterr().err


def test_metric_weight_exit_1(f2_config, tmp_path, monkeypatch):
    monkeypatch.setenv("GROMOV_MARKOV_A", "5/2")
    monkeypatch.setenv("GROMOV_MARKOV_DIMENSION_BOUND", "1")
    assert main(["metric", "--config", str(f2_config), "--out", str(tmp_path / "o")]) == 1


def test_budget_exit_2(tmp_path, monkeypatch):
    cfg = tmp_path / "m.yaml"
    cfg.write_text("presentation: {family: free-product-of-finite-cyclics, orders: [2, 3]}\nrun: {radius: 10}\n")
    monkeypatch.setenv("GROMOV_MARKOV_MAX_ELEMENTS", "50")
    assert main(["analyze", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_depth_beyond_radius_exit_2(f2_config, tmp_path):
    assert main(["nerves", "--config", str(f2_config), "--out", str(tmp_path / "o"), "--depth", "9"]) == 2


def test_verification_failure_exit_3(f2_config, tmp_path, monkeypatch):
    monkeypatch.setenv("GROMOV_MARKOV_N", "0")
    out = tmp_path / "o"
    assert main(["analyze", "--config", str(f2_config), "--out", str(out)]) == 3
    report = json.loads((out / "analyze" / "report.json").read_text())
    assert not report["passed"]


def test_locked_output_exit_2(f2_config, tmp_path, capsys):
    out = tmp_path / "o"
    out.mkdir()
    with FileLock(str(out / ".lock")):
        assert main(["analyze", "--config", str(f2_config), "--out", str(out)]) == 2
    assert "in use" in capsys.readouterr().err


def test_console_script(f2_config, tmp_path):
    r = subprocess.run(
        [sys.executable, "-m", "gromov_markov.cli", "automaton", "--config", str(f2_config), "--out", str(tmp_path / "o")],
        capture_output=True,
        text=True,
    )
    assert r.returncode == 0 and r.stdout.strip() == "automaton: ok"
    r = subprocess.run([sys.executable, "-m", "gromov_markov.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and all(s in r.stdout for s in STAGES)

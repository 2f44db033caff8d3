"""Command-line front end: ``gromov-markov <command> --config run.yaml``.

Commands run one pipeline stage each and write their artifacts, a report
and a manifest into ``--out``.  Exit codes: 0 success, 1 configuration
error, 2 resource limit, 3 verification failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

from filelock import FileLock, Timeout

from .ball import enumerate_ball
from .balltypes import TypeEngine, ball_census, census_export, cone_census, verify_ball_determines_cone
from .compactum import MetricParams, describe, rebuild_from_prefix, sample_bilipschitz, typed_isomorphic, validate_markov_compactum
from .config import RunConfig, load_config
from .errors import BoundaryError, CensusIncompleteError, GluingError, GromovMarkovError, PreconditionError
from .formats import Manifest, adjacency_text, complex_to_json, complex_to_off, dumps, map_to_sparse
from .genealogy import TypeTower, verify_genealogy_lemmas
from .nerve import NerveSystem, check_star_property, strengthen_delta_A, tower_labeler
from .reports import Report
from .semimarkov import verify_criterion
from .spans import SpanCoverSystem, SpanSystem

STAGES = ("analyze", "nerves", "verify", "automaton", "metric")

EXIT_OK, EXIT_CONFIG, EXIT_RESOURCE, EXIT_VERIFY = 0, 1, 2, 3


def _plain(stats: dict) -> dict:
    return {k: v for k, v in stats.items() if isinstance(v, (int, float, str, bool, list, dict, tuple, Fraction, type(None)))}


def _report_dict(rep: Report) -> dict:
    d = rep.to_dict()
    if "stats" in d:
        d["stats"] = {k: (_plain(v) if isinstance(v, dict) else v) for k, v in _plain(d["stats"]).items()}
    return d


# shared builders


def _tower(cfg: RunConfig, G, ball=None) -> TypeTower:
    if ball is None:
        ball = enumerate_ball(G, cfg.radius, max_elements=cfg.max_elements)
    return TypeTower(G, cfg.radius, cfg.N, cfg.L, cfg.R, ball=ball, seed=cfg.seed)


def _cover(cfg: RunConfig, G) -> SpanCoverSystem:
    spans = SpanSystem(G, N=cfg.nerve_N, mode=cfg.mode, horizon=cfg.horizon)
    ball = enumerate_ball(G, cfg.radius, max_elements=cfg.max_elements)
    if cfg.labels == "ball":
        return SpanCoverSystem(spans, ball)
    tower = _tower(cfg, G, ball)
    return SpanCoverSystem(spans, ball, labeler=tower_labeler(tower, cfg.labels), strength=cfg.labels)


def _nerves(cfg: RunConfig, G, depth: int | None = None) -> NerveSystem:
    depth = cfg.depth if depth is None else depth
    if depth * cfg.L > cfg.radius:
        raise BoundaryError(f"depth {depth} with L={cfg.L} needs radius {depth * cfg.L}, have {cfg.radius}")
    return NerveSystem(_cover(cfg, G), L=cfg.L, depth=depth)


# commands


def cmd_analyze(cfg: RunConfig, m: Manifest) -> bool:
    """Ball and cone type census plus the genealogy lemmas on the tower."""
    G = cfg.group()
    engine = TypeEngine(G)
    ball = enumerate_ball(G, cfg.radius, max_elements=cfg.max_elements)
    rep = Report("analyze")
    cone_depth = min(cfg.depth, cfg.radius)
    rep.merge(verify_ball_determines_cone(engine, cfg.N, cfg.radius, cone_depth, ball))
    tower = _tower(cfg, G, ball)
    rep.merge(verify_genealogy_lemmas(tower))
    rep.stats["census"] = {
        "ball_types": ball_census(engine, cfg.N, cfg.radius, ball),
        "cone_types": cone_census(engine, cfg.radius, cone_depth, ball),
        "b_types": tower.b_count,
        "c_types": tower.c_count,
    }
    m.write("analyze/census.json", dumps(census_export(engine, cfg.N)))
    rows = ["# word length ball A B C"]
    for i, w in enumerate(tower.words):
        rows.append(f"{G.word(w)} {len(w)} {tower.bid[i]} {tower.aid[i]} {tower.b_id[i]} {tower.c_id[i]}")
    m.write("analyze/tower.txt", "\n".join(rows) + "\n")
    m.write("analyze/report.json", dumps(_report_dict(rep)))
    m.results.update(passed=rep.passed, census=rep.stats["census"])
    return rep.passed


def _write_nerves(ns: NerveSystem, m: Manifest, prefix: str) -> None:
    G = ns.G
    for n, K in enumerate(ns.complexes):
        lab = lambda v: str(ns.cover.label(v))
        m.write(f"{prefix}/level-{n}.off", complex_to_off(K, G.word, lab))
        m.write(f"{prefix}/level-{n}.json", complex_to_json(K, G.word, lab))
        m.write(f"{prefix}/adjacency-{n}.txt", adjacency_text(K, G.word))
        if n:
            m.write(f"{prefix}/map-{n}-{n - 1}.txt", map_to_sparse(ns.maps[n - 1], K, ns.complexes[n - 1]))


def cmd_nerves(cfg: RunConfig, m: Manifest) -> bool:
    """Nerve complexes and bonding maps with OFF, JSON and sparse exports."""
    G = cfg.group()
    ns = _nerves(cfg, G)
    rep = Report("nerves")
    rep.merge(ns.check_barycentric())
    rep.merge(check_star_property(ns.cover, cfg.L, cfg.depth))
    rep.stats.update(
        vertices=[len(K.vertices) for K in ns.complexes],
        dimensions=[K.dimension for K in ns.complexes],
        over_approximated=ns.over_approximated,
        census=ns.census(),
    )
    if ns.over_approximated:
        rep.notes.append(f"clique rule over-approximates at levels {ns.over_approximated}")
    _write_nerves(ns, m, "nerves")
    m.write("nerves/report.json", dumps(_report_dict(rep)))
    m.results.update(passed=rep.passed, dimensions=rep.stats["dimensions"], vertices=rep.stats["vertices"])
    return rep.passed


def cmd_verify(cfg: RunConfig, m: Manifest) -> bool:
    """Markov, compactum and finite-description checks on the nerve system."""
    G = cfg.group()
    ns = _nerves(cfg, G)
    rep = Report("verify")
    rep.merge(ns.verify_markov(max_pairs=cfg.max_pairs))
    rep.merge(validate_markov_compactum(ns))
    try:
        strong = strengthen_delta_A(ns)
        rep.merge(strong.strengthen_report)
    except PreconditionError as exc:
        rep.notes.append(f"delta+A skipped: {exc}")
    if 0 < cfg.prefix < cfg.depth:
        desc = describe(ns, cfg.prefix)
        m.write("verify/description.json", desc.to_json())
        try:
            rebuilt = rebuild_from_prefix(desc, cfg.depth)
            rep.merge(typed_isomorphic(rebuilt, ns, cfg.prefix, cfg.depth))
        except (CensusIncompleteError, GluingError) as exc:
            rep.add("round-trip", False, {"error": type(exc).__name__, "message": str(exc)})
    m.write("verify/report.json", dumps(_report_dict(rep)))
    m.results.update(passed=rep.passed, checks=rep.checks)
    return rep.passed


def cmd_automaton(cfg: RunConfig, m: Manifest) -> bool:
    """Semi-Markov automaton with the criterion checks and DOT exports."""
    G = cfg.group()
    tower = _tower(cfg, G)
    rep = verify_criterion(tower, cfg.depth)
    A = rep.stats["automaton"]
    inf = A.infinite_branches()
    rep.stats.update(
        path_counts=[A.path_count(k) for k in range(cfg.depth + 1)],
        infinite_branches="inf" if inf == float("inf") else int(inf),
        history=[list(h) for h in A.history],
    )
    m.write("automaton/automaton.txt", A.to_text())
    m.write("automaton/automaton.dot", A.to_dot())
    m.write("automaton/pairs.dot", A.pairs_to_dot())
    m.write("automaton/report.json", dumps(_report_dict(rep)))
    m.results.update(
        passed=rep.passed,
        stabilized=A.stabilized,
        infinite_branches=rep.stats["infinite_branches"],
        certificate=A.certificate(),
    )
    return rep.passed


def cmd_metric(cfg: RunConfig, m: Manifest) -> bool:
    """Sampled bi-Lipschitz ratios between the simplicial and visual metrics."""
    G = cfg.group()
    n, source = cfg.dimension_bound, "configured"
    if n is None:
        ns = _nerves(cfg, G, depth=min(cfg.prefix, cfg.radius // cfg.L))
        n, source = ns.dimension_bound(), "observed"
    params = MetricParams(cfg.a, n, cfg.T)
    params.require_bilipschitz()
    cover = _cover(cfg, G)
    rep = Report("metric")
    depths = sorted({max(1, cfg.depth - 2), cfg.depth})
    dist = {}
    for d in depths:
        r = sample_bilipschitz(cover, params, cfg.pairs, d, cfg.L, cfg.seed)
        rep.merge(Report(f"depth-{d}", r.passed, r.witness, r.stats, r.checks, r.witnesses))
        dist[d] = r.stats["distortion"]
    rep.stats["n"] = {"value": n, "source": source}
    if len(depths) == 2 and all(dist.values()):
        lo, hi = dist[depths[0]], dist[depths[1]]
        rep.stats["drift"] = abs(hi - lo) / lo
    m.write("metric/report.json", dumps(_report_dict(rep)))
    m.results.update(passed=rep.passed, distortion={str(k): v for k, v in dist.items()})
    return rep.passed


COMMANDS: dict[str, Callable[[RunConfig, Manifest], bool]] = {
    "analyze": cmd_analyze,
    "nerves": cmd_nerves,
    "verify": cmd_verify,
    "automaton": cmd_automaton,
    "metric": cmd_metric,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gromov-markov", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in STAGES:
        s = sub.add_parser(name, help=(COMMANDS[name].__doc__ or name).splitlines()[0])
        s.add_argument("--config", required=True, help="run file (YAML)")
        s.add_argument("--out", default="run", help="output directory (default: ./run)")
        s.add_argument("--depth", type=int)
        s.add_argument("--radius", type=int)
        s.add_argument("--mode", choices=("exact", "horizon"))
        s.add_argument("--seed", type=int)
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def run(command: str, cfg: RunConfig, out: str | Path) -> int:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        with FileLock(str(out / ".lock"), timeout=0):
            m = Manifest(out, command, cfg.to_dict())
            earlier = STAGES[: STAGES.index(command)]
            m.chain(out / f"manifest-{s}.json" for s in earlier)
            ok = COMMANDS[command](cfg, m)
            m.save(f"manifest-{command}.json")
    except Timeout:
        print(f"error: {out} is in use by another run", file=sys.stderr)
        return EXIT_RESOURCE
    return EXIT_OK if ok else EXIT_VERIFY


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    overrides: dict[str, Any] = {k: getattr(args, k) for k in ("depth", "radius", "mode", "seed")}
    try:
        cfg = load_config(args.config, overrides)
        code = run(args.command, cfg, args.out)
    except MemoryError:
        print("error: out of memory", file=sys.stderr)
        return EXIT_RESOURCE
    except GromovMarkovError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    if code == EXIT_VERIFY:
        print(f"{args.command}: verification failed, see {args.out}", file=sys.stderr)
    else:
        print(f"{args.command}: ok")
    return code


if __name__ == "__main__":
    sys.exit(main())

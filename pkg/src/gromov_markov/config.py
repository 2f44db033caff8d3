"""Run configuration: YAML files, environment overrides and the constants ladder.

A run file has two sections::

    presentation:            # mapping, or a path to a presentation file
      family: free
      rank: 2
      delta: 1
    run:
      N: 6
      L: 1
      radius: 8

Every error raised while loading is a :class:`ConfigError` that cites the
offending line.  Environment variables ``GROMOV_MARKOV_<KEY>`` override run
keys (``GROMOV_MARKOV_DEPTH=5``); command-line flags override both.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping

import yaml

from .balltypes import TypeConfig
from .errors import ConfigError
from .group import (
    FAMILIES,
    FAMILY_FREE,
    FAMILY_FREE_PRODUCT,
    FAMILY_REWRITING,
    GroupPresentation,
    cyclic_free_product,
    free_group,
    rewriting_presentation,
)

ENV_PREFIX = "GROMOV_MARKOV_"

LABELS = ("ball", "A", "B", "C")


# YAML with positions


class _Located:
    """A loaded YAML document plus the line of every mapping key."""

    def __init__(self, text: str, source: str):
        self.source = source
        try:
            node = yaml.compose(text, Loader=yaml.SafeLoader)
            self.data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            line = mark.line + 1 if mark is not None else None
            problem = getattr(exc, "problem", None) or str(exc)
            raise ConfigError(f"YAML syntax: {problem}", line, source) from None
        self.lines: dict[tuple, int] = {}
        if node is not None:
            self._walk(node, ())
        if self.data is None:
            self.data = {}

    def _walk(self, node: yaml.Node, path: tuple) -> None:
        self.lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                key = k.value
                self.lines[path + (key,)] = k.start_mark.line + 1
                self._walk(v, path + (key,))
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                self._walk(v, path + (i,))

    def line(self, *path) -> int | None:
        while path and path not in self.lines:
            path = path[:-1]
        return self.lines.get(path)

    def error(self, message: str, *path) -> ConfigError:
        return ConfigError(message, self.line(*path), self.source)


def _load_text(path: str | os.PathLike) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None


# presentations

PRESENTATION_KEYS = {"name", "family", "rank", "generators", "inverses", "orders", "rules", "delta", "max_elements"}


def parse_presentation(data: Mapping[str, Any], doc: _Located | None = None, base: tuple = ()) -> GroupPresentation:
    """Build a presentation from its mapping form."""
    doc = doc or _Located(yaml.safe_dump(dict(data)), "<presentation>")
    if not isinstance(data, Mapping):
        raise doc.error("presentation must be a mapping", *base)
    for k in data:
        if k not in PRESENTATION_KEYS:
            raise doc.error(f"unknown presentation key {k!r}", *base, k)
    family = data.get("family")
    if family not in FAMILIES:
        raise doc.error(f"family must be one of {', '.join(FAMILIES)}", *base, "family")
    delta = data.get("delta", 1)
    if not isinstance(delta, int) or isinstance(delta, bool) or delta < 1:
        raise doc.error("delta must be a positive integer", *base, "delta")
    kw: dict[str, Any] = {"delta": delta}
    if "name" in data:
        kw["name"] = str(data["name"])
    if "max_elements" in data:
        kw["max_elements"] = int(data["max_elements"])
    gens = data.get("generators")
    try:
        if family == FAMILY_FREE:
            rank = data.get("rank")
            if rank is None:
                if not gens or len(gens) % 2:
                    raise doc.error("free family needs rank or an even generator list", *base, "generators")
                rank = len(gens) // 2
            if not isinstance(rank, int) or rank < 1:
                raise doc.error("rank must be a positive integer", *base, "rank")
            return free_group(rank, names=gens, **kw)
        if family == FAMILY_FREE_PRODUCT:
            orders = data.get("orders")
            if not orders or not all(isinstance(n, int) for n in orders):
                raise doc.error("free products need a list of integer orders", *base, "orders")
            return cyclic_free_product(orders, names=gens, **kw)
        if not gens:
            raise doc.error("rewriting presentations need generators", *base, "generators")
        inverses = data.get("inverses")
        if not isinstance(inverses, Mapping):
            raise doc.error("rewriting presentations need an inverses mapping", *base, "inverses")
        rules = data.get("rules") or []
        return rewriting_presentation(gens, dict(inverses), [str(r) for r in rules], **kw)
    except ConfigError as exc:
        if exc.line is not None:
            raise
        key = {FAMILY_REWRITING: "rules", FAMILY_FREE_PRODUCT: "orders"}.get(family, "family")
        raise doc.error(str(exc), *base, key) from None


def load_presentation(path: str | os.PathLike) -> GroupPresentation:
    doc = _Located(_load_text(path), str(path))
    return parse_presentation(doc.data, doc)


# run configuration


@dataclass
class RunConfig:
    """Resolved parameters of one run.

    ``ladder`` is ``"strict"`` (the constants-ladder inequalities are
    enforced at load) or ``"desk"`` (they are recorded in the manifest as
    ``ladder_violations`` and the lemma checks judge the run empirically).
    ``dimension_bound`` is the ``n`` of the metric constraint ``a < (n+1)/n``;
    left unset, the metric command reads it off the nerves.
    """

    presentation: dict = field(default_factory=dict)
    source: str = "<memory>"
    N: int = 6
    L: int = 1
    R: int | None = None
    N0: int | None = None
    radius: int = 8
    depth: int = 4
    prefix: int = 4
    nerve_N: int = 1
    labels: str = "ball"
    mode: str = "exact"
    horizon: int = 12
    ladder: str = "desk"
    a: Fraction = Fraction(3, 2)
    dimension_bound: int | None = None
    T: int = 8
    pairs: int = 100
    seed: int = 0
    max_elements: int = 2_000_000
    max_pairs: int = 200_000
    ladder_violations: list[str] = field(default_factory=list)

    def group(self) -> GroupPresentation:
        G = parse_presentation(self.presentation)
        G.max_elements = min(G.max_elements, self.max_elements)
        return G

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["a"] = str(self.a)
        return out


RUN_KEYS = {f.name for f in fields(RunConfig)} - {"presentation", "source", "ladder_violations"}

_INT_KEYS = {"N", "L", "R", "N0", "radius", "depth", "prefix", "nerve_N", "horizon", "dimension_bound", "T", "pairs", "seed", "max_elements", "max_pairs"}
_OPTIONAL = {"R", "N0", "dimension_bound"}


def _coerce(key: str, value: Any) -> Any:
    if key in _OPTIONAL and value in (None, "", "null", "none"):
        return None
    if key in _INT_KEYS:
        if isinstance(value, bool):
            raise ValueError("expected an integer")
        return int(value)
    if key == "a":
        return Fraction(str(value))
    return str(value)


def _validate(cfg: RunConfig) -> list[tuple[str, str]]:
    """(key, message) for each invalid value."""
    bad = []
    if cfg.mode not in ("exact", "horizon"):
        bad.append(("mode", "mode must be exact or horizon"))
    if cfg.ladder not in ("strict", "desk"):
        bad.append(("ladder", "ladder must be strict or desk"))
    if cfg.labels not in LABELS:
        bad.append(("labels", f"labels must be one of {', '.join(LABELS)}"))
    for k in ("L", "radius", "depth", "nerve_N", "horizon", "T", "pairs", "max_elements", "max_pairs"):
        if getattr(cfg, k) < 1:
            bad.append((k, f"{k} must be positive"))
    for k in ("N", "prefix", "seed"):
        if getattr(cfg, k) < 0:
            bad.append((k, f"{k} must be nonnegative"))
    if cfg.a <= 1:
        bad.append(("a", "the visual parameter a must exceed 1"))
    return bad


def _ladder(cfg: RunConfig, G: GroupPresentation) -> list[str]:
    delta = G.delta
    R = cfg.R if cfg.R is not None else 16 * delta
    N0 = cfg.N0 if cfg.N0 is not None else 0
    return TypeConfig.configured(delta, N0, cfg.N, cfg.L).violations(delta, R)


def load_config(
    path: str | os.PathLike | None = None,
    overrides: Mapping[str, Any] | None = None,
    environ: Mapping[str, str] | None = None,
    text: str | None = None,
) -> RunConfig:
    """Load a run file, apply environment and explicit overrides, validate."""
    if text is None:
        if path is None:
            raise ConfigError("no configuration given")
        text = _load_text(path)
    source = str(path) if path is not None else "<string>"
    doc = _Located(text, source)
    data = doc.data
    if not isinstance(data, Mapping):
        raise doc.error("top level must be a mapping")
    for k in data:
        if k not in ("presentation", "run"):
            raise doc.error(f"unknown section {k!r}", k)
    pres = data.get("presentation")
    if pres is None:
        raise doc.error("missing presentation section")
    if isinstance(pres, str):
        ppath = Path(pres)
        if not ppath.is_absolute() and path is not None:
            ppath = Path(path).parent / ppath
        pdoc = _Located(_load_text(ppath), str(ppath))
        pres_data = pdoc.data
        G = parse_presentation(pres_data, pdoc)
    else:
        pres_data = pres
        G = parse_presentation(pres_data, doc, ("presentation",))
    run = data.get("run") or {}
    if not isinstance(run, Mapping):
        raise doc.error("run section must be a mapping", "run")

    values: dict[str, Any] = {}
    origin: dict[str, tuple] = {}
    for k, v in run.items():
        if k not in RUN_KEYS:
            raise doc.error(f"unknown run key {k!r}", "run", k)
        values[k] = v
        origin[k] = ("file", ("run", k))
    env = os.environ if environ is None else environ
    for k in RUN_KEYS:
        name = ENV_PREFIX + k.upper()
        if name in env:
            values[k] = env[name]
            origin[k] = ("env", name)
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        if k not in RUN_KEYS:
            raise ConfigError(f"unknown override {k!r}")
        values[k] = v
        origin[k] = ("flag", k)

    def fail(key: str, message: str) -> ConfigError:
        kind, where = origin.get(key, ("file", ("run",)))
        if kind == "file":
            return doc.error(message, *where)
        return ConfigError(f"{message} (from {'environment ' + where if kind == 'env' else '--' + where})")

    cfg = RunConfig(presentation=dict(pres_data), source=source)
    for k, v in values.items():
        try:
            setattr(cfg, k, _coerce(k, v))
        except (TypeError, ValueError, ZeroDivisionError):
            raise fail(k, f"{k}: cannot read {v!r}") from None
    for k, message in _validate(cfg):
        raise fail(k, message)
    cfg.ladder_violations = _ladder(cfg, G)
    if cfg.ladder == "strict" and cfg.ladder_violations:
        key = "L" if any(v.startswith("L=") for v in cfg.ladder_violations) else "N"
        raise fail(key, "constants ladder violated: " + "; ".join(cfg.ladder_violations))
    return cfg

"""Artifact writers and the run manifest.

Every writer returns text with a fixed ordering so that equal inputs give
byte-identical files.  The formats are described with examples in
``docs/formats.md``.
"""

from __future__ import annotations

import hashlib
import json
import os
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Hashable, Iterable

from .complexes import AffineMap, SimplicialComplex, sort_key

MANIFEST = "manifest.json"


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _default(obj: Any) -> Any:
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (set, frozenset)):
        return sorted(obj, key=sort_key)
    if hasattr(obj, "item"):  # numpy scalars
        return obj.item()
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if obj == float("inf"):
        return "inf"
    return repr(obj)


def dumps(obj: Any) -> str:
    """Canonical JSON: sorted keys, fractions as strings."""
    return json.dumps(_clean(obj), sort_keys=True, indent=1, default=_default) + "\n"


def _clean(obj: Any) -> Any:
    # json cannot express tuple keys or infinities; spell them out
    if isinstance(obj, dict):
        return {k if isinstance(k, str) else repr(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float) and obj in (float("inf"), float("-inf")):
        return str(obj)
    return obj


# complexes


Namer = Callable[[Hashable], str]


def complex_to_off(K: SimplicialComplex, name: Namer = str, label: Callable[[Hashable], Any] | None = None) -> str:
    """OFF-style listing: vertices with labels, then maximal simplexes.

    Vertex ``i`` sits at the placeholder coordinates ``(i, 0, 0)``; the
    name and label follow in a comment.
    """
    index = {v: i for i, v in enumerate(K.vertices)}
    top = K.maximal()
    out = ["OFF", f"# level {K.level} dimension {K.dimension}", f"{len(K.vertices)} {len(top)} 0"]
    for v, i in index.items():
        tail = f" {label(v)}" if label is not None else ""
        out.append(f"{i} 0 0 # {name(v)}{tail}")
    for s in top:
        out.append(" ".join([str(len(s))] + [str(index[v]) for v in s]))
    return "\n".join(out) + "\n"


def complex_to_json(K: SimplicialComplex, name: Namer = str, label: Callable[[Hashable], Any] | None = None) -> str:
    data = {
        "level": K.level,
        "dimension": K.dimension,
        "vertices": [{"name": name(v), **({"label": label(v)} if label else {})} for v in K.vertices],
        "maximal": [[name(v) for v in s] for s in K.maximal()],
        "sha256": K.content_hash(),
    }
    return dumps(data)


def adjacency_text(K: SimplicialComplex, name: Namer = str) -> str:
    """Edge list of the 1-skeleton, one ``u v`` pair per line."""
    out = [f"# adjacency level {K.level}", f"vertices {len(K.vertices)}"]
    for s in K.ordered():
        if len(s) == 2:
            out.append(f"{name(s[0])} {name(s[1])}")
    return "\n".join(out) + "\n"


def map_to_sparse(f: AffineMap, source: SimplicialComplex, target: SimplicialComplex) -> str:
    """Bonding map as a sparse rational matrix (rows: source vertices)."""
    row = {v: i for i, v in enumerate(source.vertices)}
    col = {v: j for j, v in enumerate(target.vertices)}
    out = [f"# bonding map {f.source} -> {f.target}", f"shape {len(row)} {len(col)}"]
    for v in source.vertices:
        for u, w in sorted(f.images[v].items(), key=lambda kv: col[kv[0]]):
            out.append(f"{row[v]} {col[u]} {w}")
    return "\n".join(out) + "\n"


def read_sparse(text: str) -> tuple[tuple[int, int], dict[tuple[int, int], Fraction]]:
    shape = (0, 0)
    entries = {}
    for line in text.splitlines():
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "shape":
            shape = (int(parts[1]), int(parts[2]))
        else:
            entries[(int(parts[0]), int(parts[1]))] = Fraction(parts[2])
    return shape, entries


# manifest


class Manifest:
    """Records each artifact written into a run directory with its sha256.

    ``parents`` chains to the manifests of earlier stages by content hash.
    """

    def __init__(self, out: str | os.PathLike, command: str, config: dict[str, Any]):
        self.out = Path(out)
        self.command = command
        self.config = config
        self.artifacts: dict[str, str] = {}
        self.parents: dict[str, str] = {}
        self.results: dict[str, Any] = {}

    def write(self, name: str, content: str | bytes) -> Path:
        data = content.encode() if isinstance(content, str) else content
        path = self.out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        self.artifacts[name] = sha256_bytes(data)
        return path

    def chain(self, manifests: Iterable[str | os.PathLike]) -> None:
        for m in manifests:
            p = Path(m)
            if p.exists():
                self.parents[p.name if p.parent == self.out else str(p)] = sha256_bytes(p.read_bytes())

    def to_dict(self) -> dict[str, Any]:
        return {
            "command": self.command,
            "config": self.config,
            "artifacts": dict(sorted(self.artifacts.items())),
            "parents": dict(sorted(self.parents.items())),
            "results": self.results,
        }

    def save(self, name: str = MANIFEST) -> Path:
        path = self.out / name
        path.write_text(dumps(self.to_dict()))
        return path


def verify_manifest(path: str | os.PathLike) -> list[str]:
    """Names of artifacts whose content no longer matches the manifest."""
    p = Path(path)
    data = json.loads(p.read_text())
    bad = []
    for name, digest in data["artifacts"].items():
        f = p.parent / name
        if not f.exists() or sha256_bytes(f.read_bytes()) != digest:
            bad.append(name)
    return bad

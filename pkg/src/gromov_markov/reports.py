"""Report objects returned by the verification procedures."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


@dataclass
class Report:
    """Outcome of a check: a verdict, optional witness and statistics.

    ``checks`` holds named sub-verdicts for reports that bundle several
    conditions.  ``passed`` is the conjunction the caller should act on.
    """

    name: str
    passed: bool = True
    witness: Any = None
    stats: dict[str, Any] = field(default_factory=dict)
    checks: dict[str, bool] = field(default_factory=dict)
    witnesses: dict[str, Any] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def add(self, key: str, ok: bool, witness: Any = None) -> bool:
        self.checks[key] = bool(ok)
        if not ok and witness is not None:
            self.witnesses.setdefault(key, witness)
        self.passed = all(self.checks.values())
        return ok

    def merge(self, other: "Report") -> None:
        """Fold ``other``'s checks in under its name."""
        for key, ok in other.checks.items():
            self.add(f"{other.name}:{key}", ok, other.witnesses.get(key))
        if not other.checks:
            self.add(other.name, other.passed, other.witness)
        self.stats[other.name] = other.stats
        self.notes.extend(other.notes)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"name": self.name, "passed": self.passed}
        if self.checks:
            out["checks"] = dict(self.checks)
        if self.witness is not None:
            out["witness"] = self.witness
        if self.witnesses:
            out["witnesses"] = dict(self.witnesses)
        if self.stats:
            out["stats"] = dict(self.stats)
        if self.notes:
            out["notes"] = list(self.notes)
        return out

    def summary(self) -> str:
        state = "PASS" if self.passed else "FAIL"
        parts = [f"{self.name}: {state}"]
        for k, v in self.checks.items():
            parts.append(f"  {k}: {'pass' if v else 'FAIL'}")
        return "\n".join(parts)

    def __bool__(self) -> bool:
        return self.passed

"""Command reports with a stable JSON form."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any


def _plain(x: Any) -> Any:
    """Convert to JSON-native values: tuples become lists, numpy scalars become Python ones."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if hasattr(x, "item") and not isinstance(x, (str, bytes)):
        return x.item()
    return x


@dataclass
class Check:
    name: str
    passed: bool
    value: float | None = None
    tol: float | None = None

    def __post_init__(self):
        self.passed = bool(self.passed)
        if self.value is not None:
            self.value = float(self.value)
        if self.tol is not None:
            self.tol = float(self.tol)


@dataclass
class Report:
    command: list
    checks: list = field(default_factory=list)
    residuals: dict = field(default_factory=dict)
    blocks: list = field(default_factory=list)
    probabilities: dict = field(default_factory=dict)
    seed: int | None = None
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        self.command = [str(c) for c in self.command]
        self.checks = [c if isinstance(c, Check) else Check(**c) for c in self.checks]
        self.residuals = {str(k): float(v) for k, v in self.residuals.items()}
        self.blocks = _plain(self.blocks)
        self.probabilities = {str(k): float(v) for k, v in self.probabilities.items()}
        self.details = _plain(self.details)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str, passed: bool, value: float | None = None, tol: float | None = None) -> bool:
        self.checks.append(Check(name, passed, value, tol))
        return bool(passed)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, obj: dict) -> "Report":
        obj = dict(obj)
        obj.pop("passed", None)
        return cls(**obj)

    @classmethod
    def from_json(cls, text: str) -> "Report":
        return cls.from_dict(json.loads(text))

    def render(self) -> str:
        lines = [" ".join(self.command)]
        for c in self.checks:
            extra = ""
            if c.value is not None:
                extra = f"  value={c.value:.6g}"
                if c.tol is not None:
                    extra += f" tol={c.tol:g}"
            lines.append(f"  [{'PASS' if c.passed else 'FAIL'}] {c.name}{extra}")
        for k, v in self.residuals.items():
            lines.append(f"  {k}: {v:.3e}")
        if self.blocks:
            lines.append(f"  blocks: {self.blocks}")
        if self.probabilities:
            lines.append("  probabilities:")
            for k, v in self.probabilities.items():
                lines.append(f"    {k or '()'}: {v:.10f}")
        for k, v in self.details.items():
            lines.append(f"  {k}: {v}")
        if self.seed is not None:
            lines.append(f"  seed: {self.seed}")
        lines.append("PASS" if self.passed else "FAIL")
        return "\n".join(lines)


def outcome_key(outcome: tuple) -> str:
    return ",".join(str(k) for k in outcome)


def compare_reports(a: dict, b: dict, tol: float = 1e-9, path: str = "") -> list[str]:
    """Structural equality with numeric tolerance; returns the list of differences."""
    diffs = []
    if isinstance(a, dict) and isinstance(b, dict):
        if set(a) != set(b):
            diffs.append(f"{path}: keys {sorted(a)} != {sorted(b)}")
        for k in set(a) & set(b):
            diffs += compare_reports(a[k], b[k], tol, f"{path}.{k}")
    elif isinstance(a, list) and isinstance(b, list):
        if len(a) != len(b):
            diffs.append(f"{path}: length {len(a)} != {len(b)}")
        for i, (x, y) in enumerate(zip(a, b)):
            diffs += compare_reports(x, y, tol, f"{path}[{i}]")
    elif isinstance(a, bool) or isinstance(b, bool):
        if a is not b:
            diffs.append(f"{path}: {a!r} != {b!r}")
    elif isinstance(a, (int, float)) and isinstance(b, (int, float)):
        if not math.isclose(a, b, rel_tol=0, abs_tol=tol):
            diffs.append(f"{path}: {a!r} != {b!r}")
    elif a != b:
        diffs.append(f"{path}: {a!r} != {b!r}")
    return diffs

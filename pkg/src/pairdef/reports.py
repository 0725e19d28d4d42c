"""Check reports shared by validators, solvers and the command line."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

PASS = "pass"
FAIL = "fail"
VACUOUS = "vacuous"
OVERFLOW = "band overflow"


@dataclass(frozen=True)
class CheckLine:
    """One named check: residual against a tolerance, or a vacuous/overflow flag."""

    name: str
    status: str
    residual: float | None = None
    tol: float | None = None
    detail: str = ""

    @classmethod
    def measure(cls, name, residual, tol, detail=""):
        residual = float(residual)
        ok = math.isfinite(residual) and residual < tol
        return cls(name, PASS if ok else FAIL, residual, float(tol), detail)

    def to_json(self):
        out = {"name": self.name, "status": self.status}
        if self.residual is not None:
            out["residual"] = self.residual
        if self.tol is not None:
            out["tol"] = self.tol
        if self.detail:
            out["detail"] = self.detail
        return out


@dataclass
class Report:
    """Ordered collection of :class:`CheckLine` plus free-form info fields."""

    title: str
    lines: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def add(self, line: CheckLine):
        self.lines.append(line)
        return line

    def extend(self, other: "Report", prefix=""):
        for line in other.lines:
            self.lines.append(CheckLine(prefix + line.name, line.status, line.residual,
                                        line.tol, line.detail))

    @property
    def passed(self):
        return all(line.status != FAIL for line in self.lines)

    def failures(self):
        return [line for line in self.lines if line.status == FAIL]

    def line(self, name):
        for ln in self.lines:
            if ln.name == name:
                return ln
        raise KeyError(name)

    def max_residual(self, prefix=""):
        vals = [ln.residual for ln in self.lines
                if ln.name.startswith(prefix) and ln.residual is not None and ln.status != OVERFLOW]
        return max(vals, default=0.0)

    def to_json(self):
        return {"title": self.title, "passed": self.passed,
                "lines": [ln.to_json() for ln in self.lines], "info": to_jsonable(self.info)}

    def to_text(self):
        width = max((len(ln.name) for ln in self.lines), default=10)
        out = [f"== {self.title} ({'PASS' if self.passed else 'FAIL'})"]
        for ln in self.lines:
            res = "" if ln.residual is None else f"{ln.residual:.3e}"
            tol = "" if ln.tol is None else f"< {ln.tol:.1e}"
            row = f"  {ln.name:<{width}}  {ln.status:<13} {res:>10} {tol}"
            if ln.detail:
                row += f"  {ln.detail}"
            out.append(row.rstrip())
        for key, val in self.info.items():
            out.append(f"  {key}: {_text_value(val)}")
        return "\n".join(out)


def _text_value(val):
    if isinstance(val, (dict, list, tuple)):
        return json.dumps(to_jsonable(val), sort_keys=True, ensure_ascii=False)
    return str(val)


def to_jsonable(obj):
    """Convert numpy and complex values to plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if hasattr(obj, "to_json"):
        return obj.to_json()
    return obj


def dumps(obj):
    """Deterministic JSON text."""
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2)

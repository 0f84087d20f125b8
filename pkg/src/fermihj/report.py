"""Deterministic JSON / text reports."""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from . import __version__

TOOL = "fermi-hj"
DEFAULT_TOL = 1e-9
EXACT_TOL = 1e-12
TOL_ENV = "FERMI_HJ_TOL"


def default_tolerance() -> float:
    raw = os.environ.get(TOL_ENV)
    if raw is None:
        return DEFAULT_TOL
    tol = float(raw)
    if not tol > 0:
        raise ValueError(f"{TOL_ENV} must be positive, got {raw!r}")
    return tol


@dataclass
class RunConfig:
    command: str
    model: str
    params: dict[str, float] = field(default_factory=dict)
    grid: tuple[float, float, int] = (0.0, 10.0, 2001)
    convention: str = "left"
    el_sign: int = -1
    tolerance: float = DEFAULT_TOL
    format: str = "json"
    output: str | None = None
    closed_form: str | None = None

    def __post_init__(self):
        t0, t1, n = self.grid
        if n < 2:
            raise ValueError("grid needs at least 2 steps")
        if not t1 > t0:
            raise ValueError("grid end must be after its start")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")

    def to_json(self) -> dict:
        d = asdict(self)
        d["grid"] = {"t0": self.grid[0], "t1": self.grid[1], "steps": self.grid[2]}
        d.pop("output")
        return d


@dataclass
class Check:
    name: str
    residuals: dict[str, float]
    tolerance: float

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values(), default=0.0)

    @property
    def ok(self) -> bool:
        return self.max_residual <= self.tolerance

    def to_json(self) -> dict:
        return {"max_residual": self.max_residual, "tolerance": self.tolerance, "ok": self.ok,
                "residuals": self.residuals}


def clean(x: Any) -> Any:
    """JSON-safe copy: complex as {re, im}, numpy scalars unwrapped, tuples as lists."""
    if isinstance(x, dict):
        return {str(k): clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return [clean(v) for v in x.tolist()]
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        z = complex(x)
        if z.imag == 0:
            return clean(z.real)
        return {"re": clean(z.real), "im": clean(z.imag)}
    if isinstance(x, (float, np.floating)):
        v = float(x)
        if math.isnan(v) or math.isinf(v):
            return str(v)
        return v
    return x


def build_payload(stage: str, results: dict, checks: list[Check], config: RunConfig) -> dict:
    failures = [
        {"check": c.name, "equation": eq, "residual": r, "tolerance": c.tolerance}
        for c in checks for eq, r in sorted(c.residuals.items()) if r > c.tolerance
    ]
    return {
        "tool": {"name": TOOL, "version": __version__},
        "config": config.to_json(),
        "stage": stage,
        "results": results,
        "checks": {c.name: c.to_json() for c in checks},
        "max_residual": max((c.max_residual for c in checks), default=0.0),
        "failures": failures,
        "ok": not failures,
    }


def to_json_bytes(payload: dict) -> bytes:
    return (json.dumps(clean(payload), sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode()


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return f"{v:.3e}" if v and (abs(v) < 1e-3 or abs(v) >= 1e6) else repr(v)
    if isinstance(v, dict) and set(v) == {"re", "im"}:
        return f"{v['re']}{v['im']:+}i"
    return str(v)


def _text_lines(x: Any, indent: int = 0) -> list[str]:
    pad = "  " * indent
    out = []
    if isinstance(x, dict):
        for k in sorted(x):
            v = x[k]
            if isinstance(v, (dict, list)) and v and not (isinstance(v, dict) and set(v) == {"re", "im"}):
                out.append(f"{pad}{k}:")
                out.extend(_text_lines(v, indent + 1))
            else:
                out.append(f"{pad}{k}: {_fmt(v)}")
    elif isinstance(x, list):
        for v in x:
            if isinstance(v, (dict, list)):
                out.append(f"{pad}-")
                out.extend(_text_lines(v, indent + 1))
            else:
                out.append(f"{pad}- {_fmt(v)}")
    else:
        out.append(f"{pad}{_fmt(x)}")
    return out


def to_text_bytes(payload: dict) -> bytes:
    p = clean(payload)
    head = [f"{p['tool']['name']} {p['tool']['version']}  stage: {p['stage']}",
            f"model: {p['config']['model']}"]
    body = _text_lines(p["results"])
    checks = []
    for name in sorted(p["checks"]):
        c = p["checks"][name]
        mark = "ok  " if c["ok"] else "FAIL"
        checks.append(f"[{mark}] {name}: max residual {_fmt(c['max_residual'])} (tol {_fmt(c['tolerance'])})")
    for f in p["failures"]:
        checks.append(f"  failed: {f['check']} / {f['equation']}: {_fmt(f['residual'])}")
    status = "status: ok" if p["ok"] else "status: FAILED"
    return ("\n".join(head + ["", "results:"] + ["  " + s for s in body] + ["", "checks:"] + checks + [status]) + "\n").encode()


def emit_report(stage: str, results: dict, checks: list[Check], config: RunConfig) -> bytes:
    payload = build_payload(stage, results, checks, config)
    if config.format == "text":
        return to_text_bytes(payload)
    return to_json_bytes(payload)

"""Bound values, curves over the codebook size, and their CSV form."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

UPPER, LOWER, EXACT, ESTIMATE = "upper", "lower", "exact", "estimate"
CSV_HEADER = ("M", "bound", "direction", "value", "raw_value", "params_json")


def clip01(v: float) -> float:
    if math.isnan(v):
        return v
    return min(1.0, max(0.0, v))


@dataclass(frozen=True)
class BoundPoint:
    """One bound evaluation.  ``raw_value`` is the unclipped expression."""

    M: int
    value: float
    raw_value: float
    theorem: str
    direction: str
    params: dict = field(default_factory=dict)

    @classmethod
    def make(cls, M, raw, theorem, direction, params=None) -> "BoundPoint":
        return cls(int(M), clip01(float(raw)), float(raw), theorem, direction, dict(params or {}))


@dataclass(frozen=True)
class BoundCurve:
    tag: str
    direction: str
    points: tuple = ()

    def values(self) -> list[float]:
        return [pt.value for pt in self.points]

    def Ms(self) -> list[int]:
        return [pt.M for pt in self.points]


def fmt_float(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return format(v, ".17g")


def _jsonable(v):
    if isinstance(v, float):
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "item"):
        return _jsonable(v.item())
    if hasattr(v, "tolist"):
        return _jsonable(v.tolist())
    return v


def params_json(params: dict) -> str:
    return json.dumps(_jsonable(params), sort_keys=True, separators=(",", ":"))


def curves_to_csv(curves: Iterable[BoundCurve]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for curve in sorted(curves, key=lambda c: c.tag):
        for pt in sorted(curve.points, key=lambda p: p.M):
            w.writerow([pt.M, curve.tag, curve.direction, fmt_float(pt.value),
                        fmt_float(pt.raw_value), params_json(pt.params)])
    return buf.getvalue()


def emit_csv(curves: Iterable[BoundCurve], path) -> None:
    """Write curves ordered by tag then ``M``; same curves give the same bytes."""
    text = curves_to_csv(curves)
    with open(Path(path), "w", encoding="utf-8", newline="") as fh:
        fh.write(text)

"""Deterministic JSON and CSV report writing.

Reports hold no timestamps, host data or worker counts, so identical
(config, seed) pairs give identical bytes.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

PROVENANCES = ("exact", "quadrature", "mc")


def _clean(x):
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if hasattr(x, "item") and not isinstance(x, (str, bytes)):
        return _clean(x.item())
    return x


def check(name: str, statistic: float, threshold, passed: bool, provenance: str, ci=None, **detail) -> dict:
    """One check record; ``ci`` is ``(low, high)`` for Monte-Carlo statistics."""
    if provenance not in PROVENANCES:
        raise ValueError(f"unknown provenance {provenance!r}")
    if provenance == "mc" and ci is None:
        raise ValueError(f"check {name!r}: Monte-Carlo statistics need a confidence interval")
    rec = {
        "name": name,
        "statistic": float(statistic),
        "ci": None if ci is None else [float(ci[0]), float(ci[1])],
        "threshold": threshold,
        "verdict": "pass" if passed else "fail",
        "provenance": provenance,
    }
    if detail:
        rec["detail"] = detail
    return _clean(rec)


@dataclass
class Table:
    name: str
    header: list
    rows: list = field(default_factory=list)

    def write(self, directory: str, prefix: str = "") -> str:
        path = os.path.join(directory, f"{prefix}{self.name}.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header)
            for row in self.rows:
                w.writerow(["" if v is None else repr(float(v)) if isinstance(v, float) else v for v in row])
        return path


@dataclass
class Result:
    """Outcome of one experiment before serialization."""

    checks: list = field(default_factory=list)
    tables: list = field(default_factory=list)
    error: dict | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(c["verdict"] == "pass" for c in self.checks)


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path: str, report: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(report))

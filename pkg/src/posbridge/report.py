"""Diagnostic reports and their CSV/JSON serialisation."""

from __future__ import annotations

import csv
import json
import math
import platform
from dataclasses import asdict, dataclass, field
from importlib import metadata

import numpy as np


def version_stamp() -> dict:
    """Code version stamp; no wall-clock time so reports stay reproducible."""
    try:
        v = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        v = "unknown"
    return {
        "package": "posbridge",
        "version": v,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else str(f)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


def dump_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2)


@dataclass
class Row:
    check_name: str
    n: float
    observed: float
    target: float
    gap: float


@dataclass
class DiagnosticReport:
    """A flat table of ``(check_name, n, observed, target, gap)`` rows with
    per-check verdicts."""

    name: str
    rows: list[Row] = field(default_factory=list)
    verdicts: dict[str, bool] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def add(self, check: str, n, observed: float, target: float, gap: float | None = None) -> None:
        if gap is None:
            gap = abs(observed - target)
        self.rows.append(Row(check, n, float(observed), float(target), float(gap)))

    def checks(self) -> list[str]:
        seen: list[str] = []
        for r in self.rows:
            if r.check_name not in seen:
                seen.append(r.check_name)
        return seen

    def series(self, check: str) -> tuple[np.ndarray, np.ndarray]:
        rs = [r for r in self.rows if r.check_name == check]
        return np.array([r.n for r in rs]), np.array([r.observed for r in rs])

    def gaps(self, check: str) -> np.ndarray:
        return np.array([r.gap for r in self.rows if r.check_name == check])

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def merge(self, other: "DiagnosticReport") -> None:
        self.rows.extend(other.rows)
        self.verdicts.update(other.verdicts)
        self.notes.extend(other.notes)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["check_name", "n", "observed", "target", "gap"])
            for r in self.rows:
                w.writerow([r.check_name, r.n, repr(r.observed), repr(r.target), repr(r.gap)])

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "verdicts": self.verdicts,
            "notes": self.notes,
            "config": self.config,
            "stamp": version_stamp(),
            "rows": [asdict(r) for r in self.rows],
        }

    def to_json(self, path) -> None:
        dump_json(self.to_dict(), path)

"""Report emission: report.json, long-format CSV tables, meta.json and
optional PNG figures.

report.json is deterministic for a fixed configuration: keys are sorted,
non-finite floats become null and nothing time-dependent goes in it.  The
wall-clock timestamp lives in meta.json.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__


def jsonable(obj):
    """Plain JSON types with inf/nan mapped to None."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "to_dict"):
        return jsonable(obj.to_dict())
    return str(obj)


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def config_hash(config: dict) -> str:
    body = json.dumps(jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(body.encode()).hexdigest()


@dataclass
class Curve:
    """One plottable series; ``kind`` picks the axes ("loglog" or "linear")."""

    name: str
    x: list
    y: list
    xlabel: str = "r"
    ylabel: str = "value"
    kind: str = "loglog"
    reference: list | None = None


@dataclass
class Report:
    scenario: str
    config: dict
    results: dict = field(default_factory=dict)
    assertions: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    curves: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.assertions.values())

    def check(self, name: str, ok) -> bool:
        self.assertions[name] = bool(ok)
        return bool(ok)

    def body(self) -> dict:
        return {
            "scenario": self.scenario,
            "config": self.config,
            "passed": self.passed,
            "assertions": self.assertions,
            "results": self.results,
        }


def _write_csv(path: Path, rows: list):
    columns = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(row.get(k)) for k in columns})


def _cell(v):
    v = jsonable(v)
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, dict)):
        return json.dumps(v, sort_keys=True)
    return v


def curve_rows(curves):
    rows = []
    for c in curves:
        for i, (x, y) in enumerate(zip(c.x, c.y)):
            row = {"series": c.name, "x": x, "y": y}
            if c.reference is not None:
                row["reference"] = c.reference[i]
            rows.append(row)
    return rows


def write_report(report: Report, out_dir, plots: bool = False) -> Path:
    out = Path(out_dir)
    (out / "tables").mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(dumps(report.body()), encoding="utf-8")
    tables = dict(report.tables)
    if report.curves:
        tables["curves"] = curve_rows(report.curves)
    for name, rows in sorted(tables.items()):
        if rows:
            _write_csv(out / "tables" / f"{name}.csv", rows)
    meta = {
        "version": __version__,
        "scenario": report.scenario,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config_sha256": config_hash(report.config),
        "tables": sorted(f"tables/{k}.csv" for k, v in tables.items() if v),
    }
    if plots and report.curves:
        from .plots import render_curves

        meta["figures"] = render_curves(report.curves, out / "figures")
    (out / "meta.json").write_text(dumps(meta), encoding="utf-8")
    return out

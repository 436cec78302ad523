"""Reading and writing run artifacts: diagnostics CSV, support CSV, JSON, manifest."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .core import DiagnosticRecord, PrimitiveField

DIAGNOSTIC_COLUMNS = ("t", "M", "P", "E", "Ek", "Ei", "G", "F", "S", "Kmax", "rho_max",
                      "dudx_max", "dt")
# source integrals and boundary fluxes follow the standard columns
EXTRA_COLUMNS = tuple(f.name for f in fields(DiagnosticRecord) if f.name not in DIAGNOSTIC_COLUMNS)


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def write_diagnostics(path, records) -> None:
    cols = DIAGNOSTIC_COLUMNS + EXTRA_COLUMNS
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for rec in records:
            w.writerow([_fmt(getattr(rec, c)) for c in cols])


def read_diagnostics(path) -> list[DiagnosticRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    missing = [c for c in DIAGNOSTIC_COLUMNS if rows and c not in rows[0]]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")
    known = {f.name for f in fields(DiagnosticRecord)}
    return [DiagnosticRecord(**{k: float(v) for k, v in row.items() if k in known})
            for row in rows]


def write_support(path, support) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "R"])
        for t, r in support:
            w.writerow([_fmt(t), _fmt(r)])


def read_support(path) -> list[tuple[float, float]]:
    with open(path, newline="") as fh:
        return [(float(r["t"]), float(r["R"])) for r in csv.DictReader(fh)]


def write_snapshot(path, x, pf: PrimitiveField, gamma: float) -> None:
    """Cell values with header ``x,rho,u,p,K`` at full double precision."""
    K = pf.K(gamma)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "rho", "u", "p", "K"])
        for row in zip(x, pf.rho, pf.u, pf.p, K):
            w.writerow([_fmt(v) for v in row])


def read_snapshot(path):
    """Return ``(x, PrimitiveField)`` from a snapshot CSV."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], PrimitiveField(data[:, 1], data[:, 2], data[:, 3])


def _clean(obj):
    # JSON has no NaN or infinity; map them to null
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, (np.floating, np.integer)):
        return _clean(obj.item())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


@dataclass
class RunManifest:
    """Provenance of one output directory.

    Everything except the two wall-clock stamps is a function of the
    scenario file and the code version.
    """

    scenario_hash: str
    version: str
    command: str
    start_time: str = ""
    end_time: str = ""
    files: list = field(default_factory=list)
    exit_status: int = 0

    def to_json(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_json(cls, d: dict) -> "RunManifest":
        return cls(**{f.name: d[f.name] for f in fields(cls) if f.name in d})

    def write(self, directory) -> Path:
        path = Path(directory) / "manifest.json"
        write_json(path, self.to_json())
        return path


def list_outputs(directory) -> list[str]:
    """Sorted names of every file in ``directory`` other than the manifest."""
    return sorted(p.name for p in Path(directory).iterdir()
                  if p.is_file() and p.name != "manifest.json")

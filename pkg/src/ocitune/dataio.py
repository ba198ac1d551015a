"""File formats: data CSV, identification reports, Monte Carlo tables, and
run manifests.

Floating-point values are serialized with 17 significant digits so every
round trip is exact at double precision.
"""

from __future__ import annotations

import csv
import json
import time
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError
from .experiment import IdentificationResult, McSummary
from .rational import RationalFunction
from .signals import DataBatch
from .transfer import TransferMatrix

__all__ = [
    "write_batch_csv",
    "read_batch_csv",
    "write_report",
    "read_report",
    "controller_from_report",
    "refmodel_from_report",
    "write_boxplot_csv",
    "write_runs_csv",
    "RunManifest",
]

DATA_SCHEMA = "ocitune data v1"
BOXPLOT_SCHEMA = "ocitune boxplot v1"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_batch_csv(path, batch: DataBatch) -> None:
    path = Path(path)
    n = batch.n
    cols = (["t"] + [f"r{i+1}" for i in range(n)] + [f"u{i+1}" for i in range(n)]
            + [f"y{i+1}" for i in range(n)])
    with path.open("w", newline="") as fh:
        fh.write(f"# {DATA_SCHEMA}\n")
        writer = csv.writer(fh)
        writer.writerow(cols)
        for t in range(batch.length):
            row = [str(t + 1)]
            row += [_fmt(batch.r[i, t]) for i in range(n)]
            row += [_fmt(batch.u[i, t]) for i in range(n)]
            row += [_fmt(batch.y[i, t]) for i in range(n)]
            writer.writerow(row)


def read_batch_csv(path) -> DataBatch:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"data file not found: {path}")
    with path.open() as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    if header[0] != "t" or (len(header) - 1) % 3 != 0:
        raise ConfigError("data CSV must have columns t, r*, u*, y*")
    n = (len(header) - 1) // 3
    rows = [[float(v) for v in row] for row in reader if row]
    data = np.asarray(rows, dtype=float)
    if data.size == 0:
        raise ConfigError("data CSV contains no samples")
    r = data[:, 1:1 + n].T
    u = data[:, 1 + n:1 + 2 * n].T
    y = data[:, 1 + 2 * n:1 + 3 * n].T
    return DataBatch(r=r, u=u, y=y, meta={"source": str(path)})


def _entry_dict(rf: RationalFunction) -> dict:
    return {"num": [float(c) for c in rf.num.coeffs],
            "den": [float(c) for c in rf.den.coeffs]}


def write_report(path, result: IdentificationResult, structure, spec,
                 extra: dict | None = None) -> None:
    doc = {
        "cost_vnf": float(result.cost),
        "nmp_zeros": [float(np.real(z)) if abs(np.imag(z)) < 1e-9 else
                      [float(np.real(z)), float(np.imag(z))]
                      for z in result.nmp_zeros],
        "zhat": None if result.zhat is None else float(result.zhat),
        "jmr": None if result.jmr is None else float(result.jmr),
        "internally_stable": result.internally_stable,
        "parameters": {
            "P": {name: float(v) for name, v in
                  zip(structure.slot_names(), result.theta.p)},
            "eta": {name: float(v) for name, v in
                    zip(spec.slot_names(), result.theta.eta)},
        },
        "controller": {
            "denominator": [float(c) for c in structure.den.coeffs],
            "entries": [[_entry_dict(result.controller[i, j])
                         for j in range(structure.n)] for i in range(structure.n)],
        },
        "reference_model": {
            "entries": [[_entry_dict(result.refmodel[i, j])
                         for j in range(spec.n)] for i in range(spec.n)],
        },
        "optimizer": {
            "iterations": result.optim.iterations,
            "termination": result.optim.termination,
            "gradient_norm": float(result.optim.grad_norm),
            "rejected_steps": result.optim.n_rejected,
            "start_index": result.optim.start_index,
            "cost_trace": [float(c) for c in result.optim.cost_trace],
        },
    }
    if extra:
        doc.update(extra)
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False))


def read_report(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"report file not found: {path}")
    doc = yaml.safe_load(path.read_text())
    if not isinstance(doc, dict):
        raise ConfigError("report must be a YAML mapping")
    return doc


def _grid_from_entries(entries) -> TransferMatrix:
    rows = []
    for row in entries:
        rows.append([RationalFunction(e["num"], e["den"], reduce=False) for e in row])
    return TransferMatrix(rows)


def controller_from_report(doc: dict) -> TransferMatrix:
    try:
        return _grid_from_entries(doc["controller"]["entries"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"report lacks controller entries: {exc}") from exc


def refmodel_from_report(doc: dict) -> TransferMatrix:
    try:
        return _grid_from_entries(doc["reference_model"]["entries"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"report lacks reference-model entries: {exc}") from exc


def write_boxplot_csv(path, summary: McSummary) -> None:
    with Path(path).open("w", newline="") as fh:
        fh.write(f"# {BOXPLOT_SCHEMA}\n")
        writer = csv.writer(fh)
        writer.writerow(["metric", "count", "q1", "median", "q3",
                         "lo_whisker", "hi_whisker", "outliers"])
        for name, stats in (("jmr", summary.jmr), ("zhat", summary.zhat)):
            writer.writerow([name, stats.count, _fmt(stats.q1), _fmt(stats.median),
                             _fmt(stats.q3), _fmt(stats.lo_whisker),
                             _fmt(stats.hi_whisker),
                             ";".join(_fmt(v) for v in stats.outliers)])


def write_runs_csv(path, summary: McSummary) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run", "seed", "cost", "jmr", "zhat", "stable", "failed",
                         "iterations", "termination"])
        for rec in summary.records:
            writer.writerow([rec["run"], rec["seed"], _fmt(rec["cost"]),
                             _fmt(rec["jmr"]), _fmt(rec["zhat"]),
                             int(rec["stable"]), int(rec["failed"]),
                             rec["iterations"], rec["termination"]])


class RunManifest:
    """Record of one CLI invocation: config snapshot, seeds, and artifacts."""

    def __init__(self, command: str, config_path, config_hash: str,
                 config_snapshot: dict, seed, version: str):
        self.doc = {
            "tool": "ocitune",
            "version": version,
            "command": command,
            "config_path": str(config_path),
            "config_sha256": config_hash,
            "config": config_snapshot,
            "seed": seed,
            "artifacts": [],
            "duration_s": None,
        }
        self._t0 = time.monotonic()

    def add_artifact(self, path) -> None:
        self.doc["artifacts"].append(str(path))

    def write(self, path) -> None:
        self.doc["duration_s"] = round(time.monotonic() - self._t0, 3)
        Path(path).write_text(json.dumps(self.doc, indent=2, sort_keys=False) + "\n")

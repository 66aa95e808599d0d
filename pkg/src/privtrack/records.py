"""Trace and report containers plus their CSV/JSON persistence.

Per-iteration trace tables round-trip exactly: floats are written with 17
significant digits, which reproduces the binary value on read.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

TRACE_COLUMNS = ("k", "residual", "consensus_err", "tracker_err", "sigma_x", "sigma_y")


@dataclass(eq=False)
class Trace:
    """Per-iteration records of one run plus its exact noise bookkeeping."""

    k: np.ndarray
    residual: np.ndarray
    consensus_err: np.ndarray
    tracker_err: np.ndarray
    sigma_x: np.ndarray
    sigma_y: np.ndarray
    final_x: np.ndarray  # (n, d)
    noise_sums: np.ndarray  # (n, d) accumulated tracker noise
    x_inf: np.ndarray  # (d,) realized fixed point
    x_inf_uncertainty: float
    conservation_max: float
    noise_checksum: str
    seed: int
    trial_index: int
    config: dict = field(default_factory=dict)

    def records(self) -> dict[str, np.ndarray]:
        return {
            "k": self.k,
            "residual": self.residual,
            "consensus_err": self.consensus_err,
            "tracker_err": self.tracker_err,
            "sigma_x": self.sigma_x,
            "sigma_y": self.sigma_y,
        }

    def final_residual(self) -> float:
        return float(self.residual[-1]) if self.residual.size else float("nan")


@dataclass
class SweepReport:
    """Accuracy of the realized fixed point along one parameter axis."""

    axis: str
    values: list[float]
    rows: list[dict]
    config: dict = field(default_factory=dict)


def _fmt(value) -> str:
    return f"{value:.17g}"


def write_trace_csv(path, records: dict[str, np.ndarray]) -> None:
    """Write a per-iteration table with the standard column layout."""
    path = Path(path)
    length = len(records["k"])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for i in range(length):
            row = [str(int(records["k"][i]))]
            row += [_fmt(float(records[c][i])) for c in TRACE_COLUMNS[1:]]
            writer.writerow(row)


def read_trace_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != TRACE_COLUMNS:
            raise ValueError(f"unexpected trace header {header}")
        rows = list(reader)
    out: dict[str, np.ndarray] = {"k": np.array([int(r[0]) for r in rows], dtype=int)}
    for j, name in enumerate(TRACE_COLUMNS[1:], start=1):
        out[name] = np.array([float(r[j]) for r in rows])
    return out


def jsonable(obj):
    """Recursively convert numpy containers to plain JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and (obj != obj or obj in (float("inf"), float("-inf"))):
        return repr(obj)
    return obj


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(jsonable(payload), indent=2) + "\n")

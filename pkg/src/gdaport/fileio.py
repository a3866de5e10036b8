"""CSV and manifest emission: header row, 12 significant digits, LF endings."""

from __future__ import annotations

import csv
import json
import time
from pathlib import Path
from typing import Mapping

import numpy as np

from .market import StrategyPath


def emit_csv(path, columns: Mapping) -> Path:
    """Write named columns as RFC-4180-style CSV with 12 significant digits."""
    path = Path(path)
    names = list(columns.keys())
    arrays = [np.atleast_1d(np.asarray(columns[n])) for n in names]
    n_rows = arrays[0].shape[0]
    if any(a.shape[0] != n_rows for a in arrays):
        raise ValueError("all columns must have the same length")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for i in range(n_rows):
            writer.writerow(_cell(a[i]) for a in arrays)
    return path


def _cell(value) -> str:
    if isinstance(value, (np.floating, float)):
        return format(float(value), ".12g")
    if isinstance(value, (np.integer, int)):
        return str(int(value))
    return str(value)


def read_csv_columns(path) -> dict:
    """Read a CSV written by emit_csv back into named float arrays."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    data = np.array([[float(cell) for cell in row] for row in rows])
    if data.size == 0:
        data = data.reshape(0, len(header))
    return {name: data[:, j] for j, name in enumerate(header)}


def write_strategy_path(path_file, strategy: StrategyPath) -> Path:
    return emit_csv(path_file, strategy.node_arrays())


def read_strategy_path(path_file) -> StrategyPath:
    cols = read_csv_columns(path_file)
    d = sum(1 for name in cols if name.startswith("a_"))
    a = np.column_stack([cols[f"a_{j + 1}"] for j in range(d)])
    pi = np.column_stack([cols[f"pi_{j + 1}"] for j in range(d)])
    return StrategyPath(
        grid=cols["t"],
        a=a,
        pi=pi,
        v=cols["v"],
        y=cols["y"],
        m=cols["m"],
        residual=cols.get("residual"),
    )


class RunManifest:
    """Collects every knob that shaped a run, for the sidecar JSON."""

    def __init__(self, command: str, parameters: Mapping):
        self.command = command
        self.parameters = dict(parameters)
        self.outputs: list[str] = []
        self._t0 = time.perf_counter()

    def add_output(self, path) -> None:
        self.outputs.append(str(path))

    def write(self, directory) -> Path:
        from . import __version__

        payload = {
            "command": self.command,
            "parameters": self.parameters,
            "outputs": self.outputs,
            "library_version": __version__,
            "wall_time_s": round(time.perf_counter() - self._t0, 6),
        }
        out = Path(directory) / "manifest.json"
        with open(out, "w", newline="") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return out

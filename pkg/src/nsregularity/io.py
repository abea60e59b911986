"""Snapshot files, norm-series CSV and JSON reports.

A snapshot is a JSON header::

    {"schema_version": 1, "n": 64, "box_length": 6.283..., "time": 0.5,
     "formulation": "velocity", "component_files": ["u_x.bin", "u_y.bin", "u_z.bin"]}

next to three raw files of n^3 little-endian float64 values in x-fastest order.
Component paths are resolved relative to the header's directory.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .fields import Grid3, VectorField3
from .solver import Trajectory

SCHEMA_VERSION = 1
_DTYPE = np.dtype("<f8")


def write_snapshot(path, v: VectorField3, time: float = 0.0, formulation: str = "velocity") -> Path:
    """Write ``v`` as a header at ``path`` plus ``<stem>_{x,y,z}.bin`` beside it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = [f"{path.stem}_{c}.bin" for c in "xyz"]
    for comp, name in zip(v.data, names):
        # C-order over (z, y, x) == x-fastest
        np.ascontiguousarray(comp.transpose(2, 1, 0)).astype(_DTYPE).tofile(path.parent / name)
    header = {
        "schema_version": SCHEMA_VERSION,
        "n": v.grid.n,
        "box_length": v.grid.box_length,
        "time": float(time),
        "formulation": formulation,
        "component_files": names,
    }
    path.write_text(json.dumps(header, indent=2))
    return path


def read_snapshot(path) -> tuple[VectorField3, dict]:
    path = Path(path)
    header = json.loads(path.read_text())
    for key in ("n", "box_length", "time", "formulation", "component_files"):
        if key not in header:
            raise ValueError(f"snapshot header {path} lacks {key!r}")
    if header["formulation"] not in ("velocity", "vorticity"):
        raise ValueError(f"bad formulation {header['formulation']!r} in {path}")
    grid = Grid3(int(header["n"]), float(header["box_length"]))
    n = grid.n
    comps = []
    for name in header["component_files"]:
        raw = np.fromfile(path.parent / name, dtype=_DTYPE)
        if raw.size != n**3:
            raise ValueError(f"{name}: expected {n**3} values, found {raw.size}")
        comps.append(raw.reshape(n, n, n).transpose(2, 1, 0))
    if len(comps) != 3:
        raise ValueError("a snapshot needs exactly three component files")
    return VectorField3(grid, np.stack(comps)), header


def write_norm_csv(path, traj: Trajectory) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "sup_norm", "energy", "enstrophy"])
        for row in traj.norm_series:
            w.writerow([repr(float(x)) for x in row])


def read_norm_csv(path) -> np.ndarray:
    """Rows of (time, sup_norm, energy, enstrophy)."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([[float(r["time"]), float(r["sup_norm"]), float(r["energy"]), float(r["enstrophy"])] for r in rows])


def write_json(path, payload: dict) -> None:
    data = {"schema_version": SCHEMA_VERSION, **payload}
    Path(path).write_text(json.dumps(data, indent=2, default=_jsonable))


def dumps(payload: dict) -> str:
    return json.dumps({"schema_version": SCHEMA_VERSION, **payload}, default=_jsonable)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")

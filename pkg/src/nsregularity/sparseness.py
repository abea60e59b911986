"""Weak linear sparseness of super-level sets along 1D segments.

A set S is linearly delta-sparse around x0 at scale r when some unit direction
d makes the occupied fraction |S cap (x0 - r d, x0 + r d)| / 2r at most delta.
Here S = {|v| > M} and the 1D measure is approximated with midpoint sampling.
"""
from __future__ import annotations

import csv
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .fields import InterpolationMode, Segment, VectorField3, interpolator, sample_magnitude_on_segment, segment_offsets
from .harmonic import SlitSet

DirectionSet = Literal["fibonacci", "axis26"]


def fibonacci_directions(n: int) -> np.ndarray:
    """``n`` quasi-uniform unit vectors on the upper hemisphere (golden-angle spiral).

    A segment is unchanged when d is replaced by -d, so the hemisphere suffices.
    """
    i = np.arange(n) + 0.5
    z = 1.0 - i / n
    rad = np.sqrt(1.0 - z**2)
    phi = i * np.pi * (3.0 - np.sqrt(5.0))
    d = np.stack([rad * np.cos(phi), rad * np.sin(phi), z], axis=1)
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def axis_directions() -> np.ndarray:
    """The 26 normalized vectors with entries in {-1, 0, 1}, in lexicographic order."""
    vecs = [v for v in itertools.product((-1, 0, 1), repeat=3) if any(v)]
    d = np.array(vecs, dtype=float)
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def direction_set(kind: DirectionSet, n: int) -> np.ndarray:
    if kind == "fibonacci":
        return fibonacci_directions(n)
    if kind == "axis26":
        return axis_directions()
    raise ValueError(f"unknown direction set {kind!r}")


# --- single segments -------------------------------------------------------------

def segment_occupation_fraction(
    v: VectorField3, M: float, seg: Segment, n_samples: int = 4096, mode: InterpolationMode = "trilinear"
) -> float:
    """Fraction of midpoint samples on the segment where |v| > M."""
    if not M > 0:
        raise ValueError("threshold M must be positive")
    mags = sample_magnitude_on_segment(v, seg, n_samples, mode)
    return float(np.count_nonzero(mags > M) / n_samples)


def trace_complement_slits(
    v: VectorField3, M: float, seg: Segment, n_samples: int = 4096, mode: InterpolationMode = "trilinear"
) -> SlitSet:
    """Sub-threshold part of the segment, rescaled from [-r, r] to [-1, 1].

    Each sample stands for its cell of width 2/n_samples; maximal runs of
    samples with |v| <= M become closed slits.
    """
    mags = sample_magnitude_on_segment(v, seg, n_samples, mode)
    low = np.concatenate([[False], mags <= M, [False]])
    edges = np.flatnonzero(np.diff(low.astype(np.int8)))
    starts, stops = edges[0::2], edges[1::2]
    cell = 2.0 / n_samples
    return SlitSet(tuple((-1.0 + a * cell, -1.0 + b * cell) for a, b in zip(starts, stops)))


# --- point queries ------------------------------------------------------------------

@dataclass
class SparsenessQuery:
    threshold: float
    x0: tuple[float, float, float]
    delta: float
    scales: list[float]
    n_directions: int = 32
    n_samples: int = 4096
    direction_set: DirectionSet = "fibonacci"
    interpolation: InterpolationMode = "trilinear"

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if not self.scales:
            raise ValueError("scales must be nonempty")
        if any(b < a for a, b in zip(self.scales, self.scales[1:])) or self.scales[0] <= 0:
            raise ValueError("scales must be positive and sorted ascending")
        if self.n_directions < 6:
            raise ValueError("n_directions must be >= 6")
        if self.n_samples < 64:
            raise ValueError("n_samples must be >= 64")


@dataclass
class SparsenessResult:
    sparse: bool
    best_direction: np.ndarray
    best_scale: float
    fraction: float
    per_direction_fractions: np.ndarray | None = None


def _fraction_table(interp, x0, M, directions, scales, n_samples) -> np.ndarray:
    """Occupied fraction for every (direction, scale) pair, shape (n_dir, n_scales)."""
    offsets = np.stack([segment_offsets(r, n_samples) for r in scales])
    return interp.count_table(x0, directions, offsets, M) / n_samples


def _best(table: np.ndarray) -> tuple[int, int]:
    # argmin on the flattened (direction, scale) table: first minimum wins,
    # i.e. smallest direction index, then smallest scale
    flat = int(np.argmin(table))
    return divmod(flat, table.shape[1])


def is_sparse_at(v: VectorField3, query: SparsenessQuery, interp=None) -> SparsenessResult:
    """Search directions and scales for the smallest occupied fraction around ``query.x0``."""
    dirs = direction_set(query.direction_set, query.n_directions)
    L = v.grid.box_length
    if query.scales[-1] > L / 2:
        raise ValueError("scales must not exceed half the box length")
    if interp is None:
        interp = interpolator(v, query.interpolation)
    table = _fraction_table(interp, query.x0, query.threshold, dirs, query.scales, query.n_samples)
    i, j = _best(table)
    frac = float(table[i, j])
    return SparsenessResult(frac <= query.delta, dirs[i], float(query.scales[j]), frac, table)


# --- field scans ----------------------------------------------------------------------

@dataclass
class ScanControls:
    n_directions: int = 32
    n_samples: int = 4096
    direction_set: DirectionSet = "fibonacci"
    interpolation: InterpolationMode = "trilinear"
    scan_outside: bool = False
    background_stride: int | None = None
    points: np.ndarray | None = None
    min_scale_cells: float = 4.0
    n_jobs: int = 1
    keep_tables: bool = False
    stop_on_failure: bool = False

    def __post_init__(self):
        if self.n_directions < 6:
            raise ValueError("n_directions must be >= 6")
        if self.n_samples < 64:
            raise ValueError("n_samples must be >= 64")


def dyadic_scales(r_max: float, spacing: float, box_length: float, min_cells: float = 4.0) -> list[float]:
    """r_max, r_max/2, ... down to ``min_cells`` grid spacings, ascending; r_max is capped at L/2."""
    r = min(r_max, box_length / 2)
    scales = [r]
    while scales[-1] / 2 >= min_cells * spacing:
        scales.append(scales[-1] / 2)
    return sorted(scales)


@dataclass
class SparsenessReport:
    points: np.ndarray
    searched: np.ndarray
    fractions: np.ndarray
    sparse: np.ndarray
    best_direction: np.ndarray
    best_scale: np.ndarray
    scales: list[float]
    threshold: float | np.ndarray
    delta: float | np.ndarray
    tables: list[np.ndarray] | None = field(default=None, repr=False)
    truncated: bool = False

    @property
    def all_sparse(self) -> bool:
        return bool(np.all(self.sparse))

    @property
    def worst_index(self) -> int | None:
        if not np.any(self.searched):
            return None
        f = np.where(self.searched, self.fractions, -np.inf)
        return int(np.argmax(f))

    @property
    def worst_fraction(self) -> float:
        i = self.worst_index
        return 0.0 if i is None else float(self.fractions[i])

    def histogram(self, bins: int = 10) -> dict:
        f = self.fractions[self.searched]
        counts, edges = np.histogram(f, bins=bins, range=(0.0, 1.0))
        return {"edges": edges.tolist(), "counts": counts.tolist()}

    def to_dict(self) -> dict:
        i = self.worst_index
        return {
            "all_sparse": self.all_sparse,
            "n_points": int(len(self.points)),
            "n_searched": int(self.searched.sum()),
            "truncated": self.truncated,
            "worst_fraction": self.worst_fraction,
            "worst_point": None if i is None else self.points[i].tolist(),
            "worst_direction": None if i is None else self.best_direction[i].tolist(),
            "worst_scale": None if i is None else float(self.best_scale[i]),
            "scales": [float(s) for s in self.scales],
            "histogram": self.histogram(),
        }

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "z", "dx", "dy", "dz", "best_scale", "fraction", "sparse", "searched"])
            for p, d, s, f, ok, se in zip(
                self.points, self.best_direction, self.best_scale, self.fractions, self.sparse, self.searched
            ):
                w.writerow([*map(float, p), *map(float, d), float(s), float(f), int(ok), int(se)])


def default_points(v: VectorField3, threshold, stride: int | None = None) -> np.ndarray:
    """Grid points inside the super-level set plus a coarse background lattice (physical coords)."""
    grid = v.grid
    mag = v.magnitude()
    inside = mag > threshold
    if stride is None:
        stride = max(1, grid.n // 8)
    lattice = np.zeros(grid.shape, dtype=bool)
    lattice[::stride, ::stride, ::stride] = True
    idx = np.argwhere(inside | lattice)
    return idx * grid.spacing


def _per_point(value, idx: np.ndarray, grid_shape) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(len(idx), float(arr))
    if arr.shape != grid_shape:
        raise ValueError(f"per-point arrays must have the grid shape {grid_shape}")
    return arr[tuple(idx.T)]


def scan_field(
    v: VectorField3,
    threshold,
    delta,
    r_max: float,
    controls: ScanControls | None = None,
    scales: list[float] | None = None,
) -> SparsenessReport:
    """Check weak linear sparseness of {|v| > threshold} at every point of a point set.

    ``threshold`` and ``delta`` are scalars or arrays with the grid shape (per
    grid point values; the default point set is then built pointwise).  Points
    where |v(x0)| <= threshold hold trivially and are not searched unless
    ``controls.scan_outside`` is set.
    """
    if not r_max > 0:
        raise ValueError("r_max must be positive")
    c = controls or ScanControls()
    grid = v.grid
    if scales is None:
        scales = dyadic_scales(r_max, grid.spacing, grid.box_length, c.min_scale_cells)
    scales = sorted(float(s) for s in scales)
    if scales[-1] > grid.box_length / 2 or scales[0] <= 0:
        raise ValueError("scales must lie in (0, L/2]")
    dirs = direction_set(c.direction_set, c.n_directions)

    if c.points is not None:
        pts = np.atleast_2d(np.asarray(c.points, dtype=float))
        idx = np.rint(pts / grid.spacing).astype(int) % grid.n
    else:
        pts = default_points(v, threshold, c.background_stride)
        idx = np.rint(pts / grid.spacing).astype(int)
    thr = _per_point(threshold, idx, grid.shape)
    dlt = _per_point(delta, idx, grid.shape)
    if np.any(thr <= 0):
        raise ValueError("threshold must be positive")
    if np.any((dlt <= 0) | (dlt >= 1)):
        raise ValueError("delta must lie in (0, 1)")

    interp = interpolator(v, c.interpolation)
    if c.points is not None:
        at_point = np.sqrt(np.sum(interp(pts) ** 2, axis=0))
    else:
        at_point = v.magnitude()[tuple(idx.T)]
    searched = (at_point > thr) | c.scan_outside

    m = len(pts)
    fractions = np.full(m, np.nan)
    best_dir = np.zeros((m, 3))
    best_dir[:, 2] = 1.0
    best_scale = np.full(m, scales[0])
    tables: list | None = [None] * m if c.keep_tables else None

    def work(i: int):
        return i, _fraction_table(interp, pts[i], thr[i], dirs, scales, c.n_samples)

    todo = np.flatnonzero(searched)
    truncated = False
    if c.stop_on_failure:
        results = []
        for i in todo:
            results.append(work(i))
            a, b = _best(results[-1][1])
            if results[-1][1][a, b] > dlt[i]:
                # unscanned points are reported as not searched
                searched[todo[len(results):]] = False
                truncated = len(results) < len(todo)
                break
    elif c.n_jobs > 1:
        with ThreadPoolExecutor(c.n_jobs) as pool:
            results = list(pool.map(work, todo))
    else:
        results = map(work, todo)
    for i, table in results:
        a, b = _best(table)
        fractions[i] = table[a, b]
        best_dir[i] = dirs[a]
        best_scale[i] = scales[b]
        if tables is not None:
            tables[i] = table
    sparse = np.where(searched, fractions <= dlt, True)
    return SparsenessReport(
        points=pts,
        searched=searched,
        fractions=fractions,
        sparse=sparse,
        best_direction=best_dir,
        best_scale=best_scale,
        scales=scales,
        threshold=threshold,
        delta=delta,
        tables=tables,
        truncated=truncated,
    )

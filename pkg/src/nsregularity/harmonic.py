"""Harmonic measure of slit sets K in [-1, 1] with respect to the unit disk.

Contents: the closed-form extremal value for the symmetric two-slit set, the
derived sparseness exponent and exponent bound, the two-constants estimate,
and two independent numerical estimators (walk-on-spheres Monte Carlo and a
finite-difference Laplace solve).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np


# --- slit sets ------------------------------------------------------------------

@dataclass(frozen=True)
class SlitSet:
    """Finite union of closed subintervals of [-1, 1]; sorted, disjoint after merging."""

    intervals: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        ivs = sorted((float(a), float(b)) for a, b in self.intervals)
        for a, b in ivs:
            if not -1.0 <= a <= b <= 1.0:
                raise ValueError(f"invalid slit [{a}, {b}]: need -1 <= a <= b <= 1")
        merged: list[list[float]] = []
        for a, b in ivs:
            if merged and a <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        object.__setattr__(self, "intervals", tuple((a, b) for a, b in merged))

    @classmethod
    def symmetric(cls, lam: float) -> "SlitSet":
        """The extremal set [-1, -1 + lam] U [1 - lam, 1]."""
        if not 0 < lam < 1:
            raise ValueError(f"lambda must lie in (0, 1), got {lam}")
        return cls(((-1.0, -1.0 + lam), (1.0 - lam, 1.0)))

    @property
    def measure(self) -> float:
        return float(sum(b - a for a, b in self.intervals))

    @property
    def is_empty(self) -> bool:
        return not self.intervals

    def union(self, other: "SlitSet") -> "SlitSet":
        return SlitSet(self.intervals + other.intervals)

    def contains(self, x: float) -> bool:
        return any(a <= x <= b for a, b in self.intervals)

    def distance(self, x, y):
        """Euclidean distance from (x, y) to K (infinite for empty K)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if not self.intervals:
            return np.full(np.broadcast(x, y).shape, np.inf)
        dx = np.full(x.shape, np.inf)
        for a, b in self.intervals:
            np.minimum(dx, np.abs(x - np.clip(x, a, b)), out=dx)
        return np.hypot(dx, y)

    def to_list(self) -> list[list[float]]:
        return [[a, b] for a, b in self.intervals]


def random_slit_set(lam: float, rng: np.random.Generator, max_pieces: int = 8, clearance: float = 1e-3) -> SlitSet:
    """Random K of measure 2*lam: 1..max_pieces pieces, Dirichlet lengths, uniform gaps.

    Draws are rejected until the origin is at distance > ``clearance`` from K.
    """
    if not 0 < lam < 1:
        raise ValueError("lambda must lie in (0, 1)")
    while True:
        m = int(rng.integers(1, max_pieces + 1))
        lengths = 2 * lam * rng.dirichlet(np.ones(m))
        gaps = (2 - 2 * lam) * rng.dirichlet(np.ones(m + 1))
        ivs = []
        pos = -1.0
        for length, gap in zip(lengths, gaps[:-1]):
            a = pos + gap
            ivs.append((a, min(a + length, 1.0)))
            pos = a + length
        K = SlitSet(tuple(ivs))
        if K.distance(0.0, 0.0) > clearance:
            return K


# --- closed forms ----------------------------------------------------------------

def solynin_bound(lam: float) -> float:
    """Harmonic measure at 0 of the symmetric set K_lam: (2/pi) arcsin((1-(1-lam)^2)/(1+(1-lam)^2))."""
    if not 0 < lam < 1:
        raise ValueError(f"lambda must lie in (0, 1), got {lam}")
    q = (1.0 - lam) ** 2
    return 2.0 / math.pi * math.asin((1.0 - q) / (1.0 + q))


def sparseness_exponent(delta: float) -> float:
    """h(delta) = (2/pi) arcsin((1 - delta^2)/(1 + delta^2)), i.e. the bound at lam = 1 - delta."""
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return solynin_bound(1.0 - delta)


def min_alpha(h: float) -> float:
    """Smallest admissible exponent alpha = (1 - h)/h."""
    if not 0 < h < 1:
        raise ValueError(f"h must lie in (0, 1), got {h}")
    return (1.0 - h) / h


def two_constants_bound(m: float, M: float, theta: float) -> float:
    """m**theta * M**(1 - theta), the bound on |f| from |f| <= m on K and |f| <= M overall."""
    if not 0 <= m <= M:
        raise ValueError(f"need 0 <= m <= M, got m={m}, M={M}")
    if not 0 <= theta <= 1:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    return m**theta * M ** (1.0 - theta)


# --- walk on spheres ------------------------------------------------------------

class DegenerateStartError(ValueError):
    pass


@dataclass(frozen=True)
class MCResult:
    estimate: float
    stderr: float
    walks: int
    hits: int
    capped: int
    mean_steps: float


_CHUNK = 8192


def _wos_chunk(K: SlitSet, z: complex, count: int, eps: float, rng: np.random.Generator, max_steps: int):
    x = np.full(count, z.real)
    y = np.full(count, z.imag)
    alive = np.arange(count)
    hit = np.zeros(count, dtype=bool)
    steps = np.zeros(count, dtype=np.int64)
    for _ in range(max_steps):
        if alive.size == 0:
            break
        xa, ya = x[alive], y[alive]
        d_k = K.distance(xa, ya)
        d_c = 1.0 - np.hypot(xa, ya)
        hk = d_k <= eps
        done = hk | (d_c <= eps)
        hit[alive[hk]] = True
        keep = ~done
        alive = alive[keep]
        radius = np.minimum(d_k[keep], d_c[keep])
        angle = rng.uniform(0.0, 2 * np.pi, size=alive.size)
        x[alive] = xa[keep] + radius * np.cos(angle)
        y[alive] = ya[keep] + radius * np.sin(angle)
        steps[alive] += 1
    return int(hit.sum()), int(alive.size), int(steps.sum())


def harmonic_measure_mc(
    K: SlitSet,
    z: complex = 0j,
    walks: int = 100_000,
    eps: float = 1e-4,
    seed: int = 0,
    max_steps: int = 1_000_000,
    n_jobs: int = 1,
    max_capped_fraction: float = 1e-3,
) -> MCResult:
    """Walk-on-spheres estimate of the harmonic measure of K at z in the unit disk.

    Walkers jump to a uniform point on the largest circle avoiding both the
    unit circle and K; they are absorbed as hits within ``eps`` of K and as
    escapes within ``eps`` of the unit circle.  Walks are processed in fixed
    chunks seeded by ``(seed, chunk index)``, so the result does not depend on
    ``n_jobs``.  Walks still running after ``max_steps`` count as escapes.
    """
    z = complex(z)
    if walks < 1:
        raise ValueError("walks must be >= 1")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if abs(z) >= 1:
        raise ValueError("z must lie in the open unit disk")
    d_k0 = float(K.distance(z.real, z.imag))
    d_c0 = 1.0 - abs(z)
    if d_k0 <= eps and d_c0 <= eps:
        raise DegenerateStartError("degenerate start: z is within eps of both K and the unit circle")
    if d_k0 <= eps:
        return MCResult(1.0, 0.0, walks, walks, 0, 0.0)

    sizes = [min(_CHUNK, walks - i) for i in range(0, walks, _CHUNK)]

    def run(i: int):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        return _wos_chunk(K, z, sizes[i], eps, rng, max_steps)

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(i) for i in range(len(sizes))]
    hits = sum(p[0] for p in parts)
    capped = sum(p[1] for p in parts)
    steps = sum(p[2] for p in parts)
    if capped > max_capped_fraction * walks:
        raise RuntimeError(f"{capped} of {walks} walks hit the step cap of {max_steps}")
    p = hits / walks
    return MCResult(p, math.sqrt(p * (1 - p) / walks), walks, hits, capped, steps / walks)


# --- finite differences -----------------------------------------------------------

class ConvergenceError(RuntimeError):
    pass


@numba.njit(cache=True)
def _sor_sweeps(u, fixed, omega, n_sweeps):
    n = u.shape[0]
    for _ in range(n_sweeps):
        for color in range(2):
            for i in range(1, n - 1):
                start = 1 + (i + color) % 2
                for j in range(start, n - 1, 2):
                    if not fixed[i, j]:
                        avg = 0.25 * (u[i - 1, j] + u[i + 1, j] + u[i, j - 1] + u[i, j + 1])
                        u[i, j] += omega * (avg - u[i, j])


@numba.njit(cache=True)
def _residual(u, fixed):
    n = u.shape[0]
    res = 0.0
    for i in range(1, n - 1):
        for j in range(1, n - 1):
            if not fixed[i, j]:
                r = abs(0.25 * (u[i - 1, j] + u[i + 1, j] + u[i, j - 1] + u[i, j + 1]) - u[i, j])
                if r > res:
                    res = r
    return res


@dataclass(frozen=True)
class FDResult:
    estimate: float
    residual: float
    sweeps: int


def harmonic_measure_fd(
    K: SlitSet,
    z: complex = 0j,
    grid_n: int = 1024,
    tol: float = 1e-10,
    max_sweeps: int | None = None,
    return_details: bool = False,
):
    """Finite-difference harmonic measure of K at z.

    Laplace's equation is solved on the uniform grid of ``grid_n`` intervals
    over [-1, 1]^2 with red-black SOR.  Nodes on or outside the unit circle are
    held at 0; nodes on the y = 0 gridline whose cell meets K are held at 1.
    Iteration stops when the largest nodal residual drops below ``tol``.
    """
    if grid_n < 256:
        raise ValueError("grid_n must be >= 256")
    z = complex(z)
    if abs(z) >= 1:
        raise ValueError("z must lie in the open unit disk")
    grid_n += grid_n % 2  # y = 0 must be a gridline
    h = 2.0 / grid_n
    coords = np.linspace(-1.0, 1.0, grid_n + 1)
    X, Y = np.meshgrid(coords, coords, indexing="ij")
    u = np.zeros_like(X)
    fixed = X**2 + Y**2 >= 1.0
    j0 = grid_n // 2
    on_k = np.asarray(K.distance(coords, 0.0)) <= h / 2 if not K.is_empty else np.zeros(grid_n + 1, bool)
    on_k &= ~fixed[:, j0]
    fixed[:, j0] |= on_k
    u[on_k, j0] = 1.0

    omega = 2.0 / (1.0 + math.sin(math.pi / grid_n))
    if max_sweeps is None:
        max_sweeps = 40 * grid_n
    sweeps, block = 0, 64
    res = _residual(u, fixed)
    while res > tol and sweeps < max_sweeps:
        _sor_sweeps(u, fixed, omega, block)
        sweeps += block
        res = _residual(u, fixed)
    if res > tol:
        raise ConvergenceError(f"SOR did not converge: residual {res:.3e} after {sweeps} sweeps")

    fx = (z.real + 1.0) / h
    fy = (z.imag + 1.0) / h
    i = min(int(fx), grid_n - 1)
    j = min(int(fy), grid_n - 1)
    tx, ty = fx - i, fy - j
    val = (
        (1 - tx) * (1 - ty) * u[i, j]
        + tx * (1 - ty) * u[i + 1, j]
        + (1 - tx) * ty * u[i, j + 1]
        + tx * ty * u[i + 1, j + 1]
    )
    if return_details:
        return FDResult(float(val), float(res), sweeps)
    return float(val)

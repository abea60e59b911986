"""Periodic 3D vector fields with spectral calculus.

Fields live on the torus [0, L)^3 sampled on an n^3 grid.  Arrays are indexed
``[component, ix, iy, iz]``; the spectral representation uses the real-to-complex
layout of ``scipy.fft.rfftn`` over the three spatial axes (z is the halved axis).
Spectral coefficients are normalized so that ``v(x) = sum_k vhat(k) exp(i k.x)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numba
import numpy as np
import scipy.fft as sfft

InterpolationMode = Literal["trilinear", "refined"]


class GridMismatchError(ValueError):
    """Raised when two fields on different grids are combined."""


@dataclass(frozen=True)
class Grid3:
    """Uniform periodic grid with ``n`` points per axis and period ``box_length``."""

    n: int
    box_length: float = 2 * np.pi

    def __post_init__(self):
        n = int(self.n)
        if n < 8 or n & (n - 1):
            raise ValueError(f"grid n must be a power of two >= 8, got {self.n}")
        if not self.box_length > 0:
            raise ValueError(f"box_length must be positive, got {self.box_length}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "box_length", float(self.box_length))

    @property
    def spacing(self) -> float:
        return self.box_length / self.n

    @property
    def k0(self) -> float:
        """Fundamental wavenumber 2*pi/L."""
        return 2 * np.pi / self.box_length

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def spectral_shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n // 2 + 1)

    @property
    def volume(self) -> float:
        return self.box_length**3

    def coordinates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        x = np.arange(self.n) * self.spacing
        return np.meshgrid(x, x, x, indexing="ij")

    def integer_wavenumbers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Integer wave indices broadcastable to the spectral shape."""
        kf = np.fft.fftfreq(self.n, 1.0 / self.n)
        kh = np.arange(self.n // 2 + 1, dtype=float)
        return kf[:, None, None], kf[None, :, None], kh[None, None, :]

    def wavevectors(self, derivative: bool = False) -> tuple[np.ndarray, ...]:
        """Physical wavevector components.

        With ``derivative=True`` the Nyquist entries are zeroed, which is the
        usual convention for odd-order spectral derivatives.
        """
        kx, ky, kz = (k * self.k0 for k in self.integer_wavenumbers())
        if derivative:
            h = self.n // 2
            kx = np.where(np.abs(kx / self.k0) == h, 0.0, kx)
            ky = np.where(np.abs(ky / self.k0) == h, 0.0, ky)
            kz = np.where(np.abs(kz / self.k0) == h, 0.0, kz)
        return kx, ky, kz

    def k_squared(self) -> np.ndarray:
        kx, ky, kz = self.wavevectors()
        return kx**2 + ky**2 + kz**2

    def dealias_mask(self) -> np.ndarray:
        """Two-thirds rule: keep modes with every |k_i| <= n/3."""
        ix, iy, iz = self.integer_wavenumbers()
        cut = self.n / 3.0
        return (np.abs(ix) <= cut) & (np.abs(iy) <= cut) & (np.abs(iz) <= cut)

    def hermitian_weights(self) -> np.ndarray:
        """Multiplicity of each rfft coefficient in the full spectrum."""
        w = np.full(self.n // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return np.broadcast_to(w[None, None, :], self.spectral_shape)


def forward(data: np.ndarray) -> np.ndarray:
    """Physical -> normalized spectral coefficients over the last three axes."""
    n = data.shape[-1]
    return sfft.rfftn(data, axes=(-3, -2, -1)) / n**3


def inverse(coeffs: np.ndarray, n: int) -> np.ndarray:
    return sfft.irfftn(coeffs * n**3, s=(n, n, n), axes=(-3, -2, -1))


class VectorField3:
    """Immutable three-component field on a :class:`Grid3`.

    The physical array has shape ``(3, n, n, n)``.  The spectral representation
    is computed lazily and cached.
    """

    __slots__ = ("grid", "_data", "_spectral")

    def __init__(self, grid: Grid3, data, spectral: np.ndarray | None = None):
        arr = np.array(data, dtype=np.float64, copy=True)
        if arr.shape != (3, *grid.shape):
            raise ValueError(f"expected shape {(3, *grid.shape)}, got {arr.shape}")
        arr.setflags(write=False)
        self.grid = grid
        self._data = arr
        if spectral is not None:
            spectral = np.array(spectral, dtype=np.complex128, copy=True)
            spectral.setflags(write=False)
        self._spectral = spectral

    @classmethod
    def from_spectral(cls, grid: Grid3, coeffs: np.ndarray) -> "VectorField3":
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        data = inverse(coeffs, grid.n)
        # re-derive so the cached spectrum is exactly consistent with the real data
        return cls(grid, data)

    @classmethod
    def zeros(cls, grid: Grid3) -> "VectorField3":
        return cls(grid, np.zeros((3, *grid.shape)))

    @classmethod
    def from_components(cls, grid: Grid3, fx, fy, fz) -> "VectorField3":
        shape = grid.shape
        return cls(grid, np.stack([np.broadcast_to(f, shape) for f in (fx, fy, fz)]))

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def spectral(self) -> np.ndarray:
        if self._spectral is None:
            s = forward(self._data)
            s.setflags(write=False)
            self._spectral = s
        return self._spectral

    def magnitude(self) -> np.ndarray:
        return np.sqrt(np.sum(self._data**2, axis=0))

    def __add__(self, other: "VectorField3") -> "VectorField3":
        _check_same_grid(self, other)
        return VectorField3(self.grid, self._data + other._data)

    def __sub__(self, other: "VectorField3") -> "VectorField3":
        _check_same_grid(self, other)
        return VectorField3(self.grid, self._data - other._data)

    def __mul__(self, scalar: float) -> "VectorField3":
        return VectorField3(self.grid, self._data * float(scalar))

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"VectorField3(n={self.grid.n}, L={self.grid.box_length:g})"


def _check_same_grid(*fields: VectorField3) -> None:
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise GridMismatchError(f"grid mismatch: {g} vs {f.grid}")


@dataclass(frozen=True)
class Segment:
    """Open segment (x0 - r d, x0 + r d)."""

    x0: tuple[float, float, float]
    d: tuple[float, float, float]
    r: float
    box_length: float = 2 * np.pi

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float).reshape(3)
        d = np.asarray(self.d, dtype=float).reshape(3)
        if abs(np.linalg.norm(d) - 1.0) > 1e-12:
            raise ValueError(f"direction must be a unit vector, |d| = {np.linalg.norm(d)!r}")
        if not 0 < self.r <= self.box_length / 2:
            raise ValueError(f"half-length r must lie in (0, L/2], got {self.r}")
        object.__setattr__(self, "x0", tuple(x0))
        object.__setattr__(self, "d", tuple(d))

    def points(self, n_samples: int) -> np.ndarray:
        """Midpoints of ``n_samples`` equal cells covering the segment, shape (n, 3)."""
        s = segment_offsets(self.r, n_samples)
        return np.asarray(self.x0)[None, :] + s[:, None] * np.asarray(self.d)[None, :]


def segment_offsets(r: float, n_samples: int) -> np.ndarray:
    j = np.arange(n_samples)
    return -r + (j + 0.5) * (2.0 * r / n_samples)


# --- spectral calculus -------------------------------------------------------

def _curl_hat(grid: Grid3, vh: np.ndarray) -> np.ndarray:
    kx, ky, kz = grid.wavevectors(derivative=True)
    out = np.empty_like(vh)
    out[0] = 1j * (ky * vh[2] - kz * vh[1])
    out[1] = 1j * (kz * vh[0] - kx * vh[2])
    out[2] = 1j * (kx * vh[1] - ky * vh[0])
    return out


def _divergence_hat(grid: Grid3, vh: np.ndarray) -> np.ndarray:
    kx, ky, kz = grid.wavevectors(derivative=True)
    return 1j * (kx * vh[0] + ky * vh[1] + kz * vh[2])


def _project_hat(grid: Grid3, vh: np.ndarray) -> np.ndarray:
    kx, ky, kz = grid.wavevectors(derivative=True)
    k2 = kx**2 + ky**2 + kz**2
    inv = np.divide(1.0, k2, out=np.zeros_like(k2), where=k2 > 0)
    kdotv = (kx * vh[0] + ky * vh[1] + kz * vh[2]) * inv
    out = np.empty_like(vh)
    out[0] = vh[0] - kx * kdotv
    out[1] = vh[1] - ky * kdotv
    out[2] = vh[2] - kz * kdotv
    return out


def _biot_savart_hat(grid: Grid3, wh: np.ndarray) -> np.ndarray:
    kx, ky, kz = grid.wavevectors(derivative=True)
    k2 = kx**2 + ky**2 + kz**2
    inv = np.divide(1.0, k2, out=np.zeros_like(k2), where=k2 > 0)
    out = np.empty_like(wh)
    out[0] = 1j * (ky * wh[2] - kz * wh[1]) * inv
    out[1] = 1j * (kz * wh[0] - kx * wh[2]) * inv
    out[2] = 1j * (kx * wh[1] - ky * wh[0]) * inv
    return out


def curl(v: VectorField3) -> VectorField3:
    return VectorField3.from_spectral(v.grid, _curl_hat(v.grid, v.spectral))


def divergence(v: VectorField3) -> np.ndarray:
    return inverse(_divergence_hat(v.grid, v.spectral), v.grid.n)


def divergence_norm(v: VectorField3) -> float:
    """Grid maximum of |div v|, computed spectrally."""
    return float(np.max(np.abs(divergence(v))))


def leray_project(v: VectorField3) -> VectorField3:
    """Divergence-free part of ``v``; the mean (k = 0) mode is kept."""
    return VectorField3.from_spectral(v.grid, _project_hat(v.grid, v.spectral))


def biot_savart(w: VectorField3, tol: float = 1e-8) -> VectorField3:
    """Mean-zero, divergence-free velocity whose curl is ``w``.

    ``w`` must have zero mean and be divergence-free up to ``tol`` (relative to
    ``max(1, sup|w|)``).
    """
    wh = w.spectral
    scale = max(1.0, sup_norm(w))
    if np.max(np.abs(wh[:, 0, 0, 0])) > tol * scale:
        raise ValueError("nonzero mean vorticity")
    div = divergence_norm(w)
    if div > tol * scale * w.grid.k0 * w.grid.n:
        raise ValueError(f"vorticity is not divergence-free (max |div| = {div:.3e})")
    return VectorField3.from_spectral(w.grid, _biot_savart_hat(w.grid, wh))


def sup_norm(v: VectorField3) -> float:
    """Grid maximum of the Euclidean magnitude (a lower bound on the L-infinity norm)."""
    return float(np.sqrt(np.max(np.sum(v.data**2, axis=0))))


def l2_norm_squared(v: VectorField3) -> float:
    """Integral of |v|^2 over the box, from physical data."""
    return float(np.sum(v.data**2) * v.grid.spacing**3)


def spectral_l2_norm_squared(v: VectorField3) -> float:
    """Integral of |v|^2 over the box, from spectral coefficients (Parseval)."""
    w = v.grid.hermitian_weights()
    return float(np.sum(w * np.abs(v.spectral) ** 2) * v.grid.volume)


def energy(v: VectorField3) -> float:
    """Kinetic energy 0.5 * integral |u|^2."""
    return 0.5 * l2_norm_squared(v)


def enstrophy(u: VectorField3) -> float:
    """Integral of |curl u|^2."""
    return l2_norm_squared(curl(u))


def pressure(u: VectorField3) -> np.ndarray:
    """Mean-zero pressure solving -lap p = div((u.grad)u); diagnostic only."""
    grid = u.grid
    kx, ky, kz = grid.wavevectors(derivative=True)
    ks = (kx, ky, kz)
    uh = u.spectral
    grads = [[inverse(1j * ks[j] * uh[i], grid.n) for j in range(3)] for i in range(3)]
    adv = np.stack([sum(u.data[j] * grads[i][j] for j in range(3)) for i in range(3)])
    src = _divergence_hat(grid, forward(adv))
    k2 = grid.k_squared()
    ph = np.divide(src, k2, out=np.zeros_like(src), where=k2 > 0)
    return inverse(ph, grid.n)


# --- off-grid evaluation -----------------------------------------------------

@numba.njit(cache=True)
def _trilinear(data, spacing, px, py, pz, out):
    """Periodic trilinear interpolation of each component of ``data`` at one point."""
    n = data.shape[1]
    gx = px / spacing
    gy = py / spacing
    gz = pz / spacing
    fx = np.floor(gx)
    fy = np.floor(gy)
    fz = np.floor(gz)
    tx = gx - fx
    ty = gy - fy
    tz = gz - fz
    i0 = int(fx) % n
    j0 = int(fy) % n
    k0 = int(fz) % n
    i1 = (i0 + 1) % n
    j1 = (j0 + 1) % n
    k1 = (k0 + 1) % n
    for c in range(data.shape[0]):
        a = data[c]
        c00 = a[i0, j0, k0] * (1 - tx) + a[i1, j0, k0] * tx
        c10 = a[i0, j1, k0] * (1 - tx) + a[i1, j1, k0] * tx
        c01 = a[i0, j0, k1] * (1 - tx) + a[i1, j0, k1] * tx
        c11 = a[i0, j1, k1] * (1 - tx) + a[i1, j1, k1] * tx
        c0 = c00 * (1 - ty) + c10 * ty
        c1 = c01 * (1 - ty) + c11 * ty
        out[c] = c0 * (1 - tz) + c1 * tz


@numba.njit(cache=True)
def _interp_points(data, spacing, points):
    m = points.shape[0]
    out = np.empty((data.shape[0], m))
    buf = np.empty(data.shape[0])
    for p in range(m):
        _trilinear(data, spacing, points[p, 0], points[p, 1], points[p, 2], buf)
        for c in range(data.shape[0]):
            out[c, p] = buf[c]
    return out


@numba.njit(cache=True)
def _segment_magnitudes(data, spacing, x0, d, offsets, out):
    buf = np.empty(data.shape[0])
    for j in range(offsets.shape[0]):
        s = offsets[j]
        _trilinear(data, spacing, x0[0] + s * d[0], x0[1] + s * d[1], x0[2] + s * d[2], buf)
        acc = 0.0
        for c in range(data.shape[0]):
            acc += buf[c] * buf[c]
        out[j] = np.sqrt(acc)


@numba.njit(cache=True)
def _count_table(data, spacing, x0, directions, offsets, threshold):
    """Number of samples with magnitude above ``threshold`` per (direction, scale)."""
    nd = directions.shape[0]
    ns, m = offsets.shape
    counts = np.zeros((nd, ns), dtype=np.int64)
    mags = np.empty(m)
    for i in range(nd):
        for j in range(ns):
            _segment_magnitudes(data, spacing, x0, directions[i], offsets[j], mags)
            c = 0
            for q in range(m):
                if mags[q] > threshold:
                    c += 1
            counts[i, j] = c
    return counts


@dataclass
class _Interpolant:
    data: np.ndarray
    spacing: float

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        """Trilinear, periodic evaluation of every component at ``points`` (m, 3)."""
        pts = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
        return _interp_points(self.data, self.spacing, pts)

    def segment_magnitudes(self, x0, d, offsets) -> np.ndarray:
        out = np.empty(len(offsets))
        _segment_magnitudes(
            self.data, self.spacing, np.asarray(x0, dtype=float), np.asarray(d, dtype=float),
            np.ascontiguousarray(offsets, dtype=float), out,
        )
        return out

    def count_table(self, x0, directions, offsets, threshold) -> np.ndarray:
        return _count_table(
            self.data, self.spacing, np.asarray(x0, dtype=float),
            np.ascontiguousarray(directions, dtype=float), np.ascontiguousarray(offsets, dtype=float),
            float(threshold),
        )


def refine_spectrally(v: VectorField3, factor: int = 2) -> np.ndarray:
    """Physical samples of ``v`` on a grid ``factor`` times finer (zero-padded spectrum)."""
    n = v.grid.n
    m = factor * n
    vh = v.spectral
    big = np.zeros((3, m, m, m // 2 + 1), dtype=complex)
    h = n // 2
    lo = slice(0, h)
    hi_src = slice(h + 1, n)
    hi_dst = slice(m - (n - h - 1), m)
    zs = slice(0, h)  # drop the Nyquist plane, it is not representable symmetrically
    for sx_src, sx_dst in ((lo, lo), (hi_src, hi_dst)):
        for sy_src, sy_dst in ((lo, lo), (hi_src, hi_dst)):
            big[:, sx_dst, sy_dst, zs] = vh[:, sx_src, sy_src, zs]
    return sfft.irfftn(big * m**3, s=(m, m, m), axes=(1, 2, 3))


def interpolator(v: VectorField3, mode: InterpolationMode = "trilinear") -> _Interpolant:
    if mode == "trilinear":
        return _Interpolant(v.data, v.grid.spacing)
    if mode == "refined":
        return _Interpolant(refine_spectrally(v, 2), v.grid.spacing / 2)
    raise ValueError(f"unknown interpolation mode {mode!r}")


def sample_magnitude_on_segment(
    v: VectorField3,
    seg: Segment,
    n_samples: int,
    mode: InterpolationMode = "trilinear",
    interp: _Interpolant | None = None,
) -> np.ndarray:
    """|v| at ``n_samples`` equispaced cell midpoints of the segment (periodic wrap)."""
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    if interp is None:
        interp = interpolator(v, mode)
    return interp.segment_magnitudes(seg.x0, seg.d, segment_offsets(seg.r, n_samples))

"""Benchmark and synthetic fields: Taylor-Green, shear mode, vortex filaments, planted spectra."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .fields import Grid3, VectorField3, forward, leray_project


class FilamentOverlapWarning(UserWarning):
    """Two filament cores are closer than a few core radii."""


def taylor_green(grid: Grid3, amplitude: float = 1.0) -> VectorField3:
    """u = A (sin x cos y cos z, -cos x sin y cos z, 0), with x scaled by 2*pi/L."""
    if not amplitude > 0:
        raise ValueError("amplitude must be positive")
    x, y, z = (c * grid.k0 for c in grid.coordinates())
    return VectorField3.from_components(
        grid,
        amplitude * np.sin(x) * np.cos(y) * np.cos(z),
        -amplitude * np.cos(x) * np.sin(y) * np.cos(z),
        0.0,
    )


def taylor_green_vorticity(grid: Grid3, amplitude: float = 1.0) -> VectorField3:
    """Closed-form curl of :func:`taylor_green`."""
    k = grid.k0
    x, y, z = (c * k for c in grid.coordinates())
    a = amplitude * k
    return VectorField3.from_components(
        grid,
        -a * np.cos(x) * np.sin(y) * np.sin(z),
        -a * np.sin(x) * np.cos(y) * np.sin(z),
        2 * a * np.sin(x) * np.sin(y) * np.cos(z),
    )


def shear_mode(grid: Grid3, amplitude: float = 1.0, kappa: int = 1) -> VectorField3:
    """u = (A sin(kappa y), 0, 0); an exact solution decaying as exp(-kappa^2 t)."""
    if not 1 <= kappa <= grid.n / 3:
        raise ValueError(f"kappa must lie in [1, n/3], got {kappa}")
    _, y, _ = grid.coordinates()
    return VectorField3.from_components(grid, amplitude * np.sin(kappa * grid.k0 * y), 0.0, 0.0)


def shear_mode_exact(grid: Grid3, amplitude: float, kappa: int, t: float, viscosity: float = 1.0) -> VectorField3:
    decay = np.exp(-viscosity * (kappa * grid.k0) ** 2 * t)
    return shear_mode(grid, amplitude * decay, kappa)


# --- vortex filaments ----------------------------------------------------------

@dataclass(frozen=True)
class FilamentSpec:
    """A straight vortex tube along a coordinate axis, or a vortex ring in a coordinate plane.

    ``center`` is a point on the line (line) or the ring centre (circle); ``axis``
    is the line direction or the ring normal.  ``length=None`` gives a line that
    wraps through the box.
    """

    core_radius: float
    circulation: float = 1.0
    axis: int = 2
    center: tuple[float, float, float] = (np.pi, np.pi, np.pi)
    kind: Literal["line", "circle"] = "line"
    ring_radius: float = 1.0
    length: float | None = None
    profile: Literal["gaussian", "tophat"] = "gaussian"
    edge_width: float | None = None

    @property
    def peak(self) -> float:
        """Peak vorticity magnitude implied by the circulation."""
        a = self.core_radius
        if self.profile == "gaussian":
            return self.circulation / (2 * np.pi * a**2)
        return self.circulation / (np.pi * a**2)

    @classmethod
    def with_peak(cls, peak: float, core_radius: float, **kw) -> "FilamentSpec":
        profile = kw.get("profile", "gaussian")
        area = 2 * np.pi * core_radius**2 if profile == "gaussian" else np.pi * core_radius**2
        return cls(core_radius=core_radius, circulation=peak * area, **kw)

    def validate(self, grid: Grid3) -> None:
        L = grid.box_length
        if not 0 < self.core_radius < L / 4:
            raise ValueError(f"core_radius must lie in (0, L/4), got {self.core_radius}")
        if self.axis not in (0, 1, 2):
            raise ValueError("axis must be 0, 1 or 2")
        if self.kind == "circle" and not self.core_radius < self.ring_radius < L / 2 - self.core_radius:
            raise ValueError("ring does not fit the periodic box")
        if self.length is not None and not 0 < self.length <= L:
            raise ValueError("filament length must lie in (0, L]")

    def _profile(self, dist: np.ndarray) -> np.ndarray:
        a = self.core_radius
        if self.profile == "gaussian":
            return np.exp(-(dist**2) / (2 * a**2))
        w = self.edge_width if self.edge_width is not None else a / 8
        return 0.5 * (1.0 - np.tanh((dist - a) / w))


def _wrap(dx: np.ndarray, L: float) -> np.ndarray:
    return dx - L * np.round(dx / L)


def _filament_vorticity(grid: Grid3, spec: FilamentSpec) -> np.ndarray:
    L = grid.box_length
    coords = grid.coordinates()
    rel = [_wrap(c - c0, L) for c, c0 in zip(coords, spec.center)]
    ax = spec.axis
    perp = [i for i in range(3) if i != ax]
    out = np.zeros((3, *grid.shape))
    if spec.kind == "line":
        dist = np.hypot(rel[perp[0]], rel[perp[1]])
        mag = spec.peak * spec._profile(dist)
        if spec.length is not None:
            # smooth taper over one core radius at both ends
            s = np.abs(rel[ax])
            mag = mag * 0.5 * (1.0 - np.tanh((s - spec.length / 2) / spec.core_radius))
        out[ax] = mag
        return out
    p, q = rel[perp[0]], rel[perp[1]]
    rho = np.hypot(p, q)
    dist = np.hypot(rho - spec.ring_radius, rel[ax])
    mag = spec.peak * spec._profile(dist)
    safe = np.where(rho > 0, rho, 1.0)
    # azimuthal unit vector in the (p, q) plane
    out[perp[0]] = -q / safe * mag
    out[perp[1]] = p / safe * mag
    return out


def vortex_filament_field(grid: Grid3, specs: list[FilamentSpec]) -> VectorField3:
    """Vorticity of a superposition of filaments, projected and made mean-zero.

    Emits :class:`FilamentOverlapWarning` when two parallel line filaments are
    closer than six core radii.
    """
    data = np.zeros((3, *grid.shape))
    for spec in specs:
        spec.validate(grid)
        data += _filament_vorticity(grid, spec)
    for i, a in enumerate(specs):
        for b in specs[i + 1:]:
            if a.kind == b.kind == "line" and a.axis == b.axis:
                sep = np.array([_wrap(x - y, grid.box_length) for x, y in zip(a.center, b.center)])
                sep[a.axis] = 0.0
                if np.linalg.norm(sep) < 3 * (a.core_radius + b.core_radius):
                    warnings.warn("filament cores overlap", FilamentOverlapWarning, stacklevel=2)
    coeffs = forward(data)
    coeffs[:, 0, 0, 0] = 0.0
    return leray_project(VectorField3.from_spectral(grid, coeffs))


# --- planted spectra -------------------------------------------------------------

def synthetic_spectrum_field(grid: Grid3, rho: float, seed: int = 0, amplitude: float = 1.0) -> VectorField3:
    """Random-phase divergence-free field with |vhat(k)| = A exp(-rho |k|) for every k != 0.

    Each coefficient is a unit complex vector orthogonal to k, so every mode
    (not just the shell maximum) carries the planted amplitude.  Nyquist modes
    are left empty.
    """
    if not rho > 0:
        raise ValueError("rho must be positive")
    n = grid.n
    rng = np.random.default_rng(seed)
    f = np.fft.fftfreq(n, 1.0 / n)
    ix, iy, iz = np.meshgrid(f, f, f, indexing="ij")
    kvec = np.stack([ix, iy, iz]) * grid.k0
    kmag = np.sqrt(np.sum(kvec**2, axis=0))

    rand = rng.normal(size=(3, n, n, n))
    safe = np.where(kmag > 0, kmag, 1.0)
    khat = kvec / safe
    e1 = rand - khat * np.sum(rand * khat, axis=0)
    e1 /= np.linalg.norm(e1, axis=0)
    e2 = np.cross(khat, e1, axis=0)
    phase = rng.uniform(0, 2 * np.pi, size=(n, n, n))
    # complex combination of two orthonormal real vectors has unit norm
    unit = (e1 + 1j * e2) / np.sqrt(2) * np.exp(1j * phase)
    coeffs = amplitude * np.exp(-rho * kmag) * unit

    # Hermitian symmetrization: keep a canonical half and mirror it
    neg = (-np.arange(n)) % n
    mirrored = np.conj(coeffs[:, neg][:, :, neg][:, :, :, neg])
    canonical = (iz > 0) | ((iz == 0) & (iy > 0)) | ((iz == 0) & (iy == 0) & (ix > 0))
    coeffs = np.where(canonical, coeffs, mirrored)
    nyq = (np.abs(ix) == n // 2) | (np.abs(iy) == n // 2) | (np.abs(iz) == n // 2)
    coeffs[:, nyq] = 0.0
    coeffs[:, 0, 0, 0] = 0.0
    data = np.real(np.fft.ifftn(coeffs * n**3, axes=(1, 2, 3)))
    return VectorField3(grid, data)

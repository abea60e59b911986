"""A priori analyticity windows and empirical analyticity radii.

The window constructors encode the local-in-time analytic smoothing in L^inf:
starting from data of size ``N`` the solution exists for ``T = 1/(c0^2 N^2)``
(velocity) or ``T = 1/(d0^2 N)`` (vorticity) and is analytic in a complex
strip of half-width ``sqrt(t)/c0`` at time ``t``.  The criterion looks at times
``s`` in ``[t + T/4, t + T]`` where the strip is at least ``sqrt(T/4)/c0``
wide; that width is the largest admissible sparseness scale.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .fields import VectorField3


@dataclass(frozen=True)
class AnalyticityConstants:
    """The absolute constants of the velocity (c0) and vorticity (d0) analyticity estimates."""

    c0: float = 2.0
    d0: float = 2.0

    def __post_init__(self):
        if not self.c0 > 1:
            raise ValueError(f"c0 must exceed 1, got {self.c0}")
        if not self.d0 > 1:
            raise ValueError(f"d0 must exceed 1, got {self.d0}")


@dataclass(frozen=True)
class TimeWindow:
    t: float
    T_span: float
    s_lo: float
    s_hi: float
    rho: float

    @property
    def r_max(self) -> float:
        return self.rho

    def candidates(self, n_s: int) -> np.ndarray:
        """``n_s`` equispaced candidate times in ``[s_lo, s_hi]``."""
        if n_s == 1:
            return np.array([self.s_lo])
        return np.linspace(self.s_lo, self.s_hi, n_s)


def _window(t: float, span: float, const: float) -> TimeWindow:
    rho = np.sqrt(span / 4.0) / const
    return TimeWindow(t=t, T_span=span, s_lo=t + span / 4.0, s_hi=t + span, rho=rho)


def analyticity_window_velocity(norm_inf: float, constants: AnalyticityConstants, t: float = 0.0) -> TimeWindow:
    if not norm_inf > 0:
        raise ValueError(f"norm must be positive, got {norm_inf}")
    c0 = constants.c0
    span = 1.0 / (c0**2 * norm_inf**2)
    w = _window(t, span, c0)
    # sqrt(span/4)/c0 reduces to this closed form; use it to avoid sqrt roundoff
    return TimeWindow(w.t, w.T_span, w.s_lo, w.s_hi, 1.0 / (2.0 * c0**2 * norm_inf))


def analyticity_window_vorticity(norm_inf: float, constants: AnalyticityConstants, t: float = 0.0) -> TimeWindow:
    if not norm_inf > 0:
        raise ValueError(f"norm must be positive, got {norm_inf}")
    d0 = constants.d0
    span = 1.0 / (d0**2 * norm_inf)
    w = _window(t, span, d0)
    return TimeWindow(w.t, w.T_span, w.s_lo, w.s_hi, 1.0 / (2.0 * d0**2 * np.sqrt(norm_inf)))


def analyticity_window(
    norm_inf: float, constants: AnalyticityConstants, formulation: str = "velocity", t: float = 0.0
) -> TimeWindow:
    if formulation == "velocity":
        return analyticity_window_velocity(norm_inf, constants, t)
    if formulation == "vorticity":
        return analyticity_window_vorticity(norm_inf, constants, t)
    raise ValueError(f"unknown formulation {formulation!r}")


def existence_span(norm_inf: float, constants: AnalyticityConstants, formulation: str = "velocity") -> float:
    """Guaranteed existence time from data of size ``norm_inf``; infinite for zero data."""
    if norm_inf <= 0:
        return np.inf
    return analyticity_window(norm_inf, constants, formulation).T_span


# --- empirical radius ------------------------------------------------------------

class InsufficientSpectrumError(ValueError):
    pass


@dataclass
class SpectrumFit:
    radius: float
    shell_k: np.ndarray
    shell_max: np.ndarray
    used: np.ndarray
    intercept: float = np.nan

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "shell_max", "used"])
            for k, m, u in zip(self.shell_k, self.shell_max, self.used):
                w.writerow([repr(float(k)), repr(float(m)), int(u)])


def shell_maxima(v: VectorField3) -> tuple[np.ndarray, np.ndarray]:
    """Per integer shell: the largest |vhat(k)| and the |k| where it occurs.

    Shell m holds integer wavevectors with m - 1/2 <= |k|/k0 < m + 1/2.
    """
    grid = v.grid
    ix, iy, iz = grid.integer_wavenumbers()
    kint = np.sqrt(ix**2 + iy**2 + iz**2)
    amp = np.sqrt(np.sum(np.abs(v.spectral) ** 2, axis=0))
    shell = np.rint(kint).astype(int).ravel()
    kint = np.broadcast_to(kint, amp.shape).ravel()
    amp = amp.ravel()
    n_shells = shell.max() + 1
    order = np.lexsort((-amp, shell))
    sorted_shell = shell[order]
    first = np.minimum(np.searchsorted(sorted_shell, np.arange(n_shells)), len(order) - 1)
    best = order[first]
    present = sorted_shell[first] == np.arange(n_shells)
    return np.where(present, kint[best], np.nan) * grid.k0, np.where(present, amp[best], 0.0)


def estimate_radius_from_spectrum(
    v: VectorField3,
    fit_range: tuple[float, float] | None = None,
    rel_floor: float = 1e-13,
    return_fit: bool = False,
):
    """Decay rate of the shell-maximum Fourier amplitude, fitted as ``exp(-rho |k|)``.

    ``fit_range`` is a physical wavenumber interval (default ``[n/8, n/3]``
    times ``2*pi/L``).  Shells whose maximum falls below ``rel_floor`` times
    the largest coefficient count as empty.  Returns ``inf`` when every shell
    in range is empty (band-limited field).
    """
    grid = v.grid
    if fit_range is None:
        fit_range = (grid.n / 8 * grid.k0, grid.n / 3 * grid.k0)
    k_lo, k_hi = fit_range
    kk, amp = shell_maxima(v)
    shells = np.arange(len(kk)) * grid.k0
    in_range = (shells >= k_lo - 1e-12) & (shells <= k_hi + 1e-12)
    top = amp.max() if amp.size else 0.0
    filled = amp > rel_floor * top if top > 0 else np.zeros_like(amp, dtype=bool)
    used = in_range & filled
    if not np.any(used):
        radius = np.inf
        fit = SpectrumFit(radius, kk, amp, used)
        return fit if return_fit else radius
    if used.sum() < 4 or used.sum() < in_range.sum():
        raise InsufficientSpectrumError(
            f"insufficient spectral content: {int(used.sum())} of {int(in_range.sum())} shells in range are filled"
        )
    slope, intercept = np.polyfit(kk[used], np.log(amp[used]), 1)
    fit = SpectrumFit(float(-slope), kk, amp, used, float(intercept))
    return fit if return_fit else fit.radius

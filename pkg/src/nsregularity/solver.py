"""Pseudo-spectral integration of the 3D Navier-Stokes equations on a periodic box.

Both the velocity form (Leray-projected, pressure never formed) and the vorticity
form are advanced with a Lawson (integrating-factor) RK4 scheme: diffusion is
integrated exactly through ``exp(-nu |k|^2 dt)`` and the nonlinear term with
classical RK4.  The nonlinearity is evaluated in rotational form, ``P(u x w)``
for velocity and ``curl(u x w)`` for vorticity.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .fields import (
    Grid3,
    VectorField3,
    _biot_savart_hat,
    _curl_hat,
    _divergence_hat,
    _project_hat,
    forward,
    inverse,
)

logger = logging.getLogger(__name__)

Formulation = Literal["velocity", "vorticity"]


class SolverBlowUp(RuntimeError):
    """Non-finite values appeared in the solution."""

    def __init__(self, t: float):
        super().__init__(f"solver blow-up at t={t:.6g}")
        self.time = t


@dataclass
class SolverControls:
    t_end: float
    dt: float | None = None
    cfl: float | None = None
    dealias: bool = True
    snapshot_times: Sequence[float] = ()
    formulation: Formulation = "velocity"
    viscosity: float = 1.0
    track_divergence: bool = False
    max_steps: int = 1_000_000

    def __post_init__(self):
        if self.dt is None and self.cfl is None:
            raise ValueError("one of dt or cfl must be given")
        if self.dt is not None and not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.dt is None and not 0 < self.cfl <= 1:
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not self.t_end > 0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        times = [float(t) for t in self.snapshot_times]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("snapshot_times must be sorted")
        if times and (times[0] < 0 or times[-1] > self.t_end):
            raise ValueError("snapshot_times must lie within [0, t_end]")
        self.snapshot_times = times
        if self.formulation not in ("velocity", "vorticity"):
            raise ValueError(f"formulation must be 'velocity' or 'vorticity', got {self.formulation!r}")
        if not self.viscosity > 0:
            raise ValueError(f"viscosity must be positive, got {self.viscosity}")


@dataclass
class Trajectory:
    formulation: Formulation
    snapshots: list[tuple[float, VectorField3]] = field(default_factory=list)
    norm_series: list[tuple[float, float, float, float]] = field(default_factory=list)
    divergence_series: list[float] = field(default_factory=list)
    diverged: bool = False
    blowup_time: float | None = None

    @property
    def times(self) -> np.ndarray:
        return np.array([row[0] for row in self.norm_series])

    @property
    def sup_norms(self) -> np.ndarray:
        return np.array([row[1] for row in self.norm_series])

    @property
    def energies(self) -> np.ndarray:
        return np.array([row[2] for row in self.norm_series])

    @property
    def enstrophies(self) -> np.ndarray:
        return np.array([row[3] for row in self.norm_series])

    def snapshot_near(self, t: float) -> tuple[float, VectorField3]:
        return min(self.snapshots, key=lambda s: abs(s[0] - t))


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.stack(
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    )


class _Rhs:
    """Nonlinear right-hand side in spectral space for one formulation."""

    def __init__(self, grid: Grid3, formulation: Formulation, dealias: bool):
        self.grid = grid
        self.formulation = formulation
        self.mask = grid.dealias_mask() if dealias else None

    def velocity_hat(self, sh: np.ndarray) -> np.ndarray:
        if self.formulation == "velocity":
            return sh
        return _biot_savart_hat(self.grid, sh)

    def __call__(self, sh: np.ndarray) -> np.ndarray:
        n = self.grid.n
        if self.formulation == "velocity":
            u = inverse(sh, n)
            w = inverse(_curl_hat(self.grid, sh), n)
        else:
            u = inverse(_biot_savart_hat(self.grid, sh), n)
            w = inverse(sh, n)
        ch = forward(_cross(u, w))
        if self.mask is not None:
            ch *= self.mask
        if self.formulation == "velocity":
            return _project_hat(self.grid, ch)
        return _curl_hat(self.grid, ch)


def _lawson_rk4(sh: np.ndarray, dt: float, rhs: _Rhs, k2: np.ndarray, nu: float) -> np.ndarray:
    e_half = np.exp(-nu * k2 * (dt / 2))
    e_full = e_half * e_half
    a = rhs(sh)
    b = rhs(e_half * (sh + 0.5 * dt * a))
    c = rhs(e_half * sh + 0.5 * dt * b)
    d = rhs(e_full * sh + dt * e_half * c)
    return e_full * sh + (dt / 6.0) * (e_full * a + 2.0 * e_half * (b + c) + d)


class Integrator:
    """Stateful time stepper that can advance to arbitrary target times.

    Each step length is ``controls.dt`` (or the CFL value), shortened so that
    target times are hit exactly.
    """

    def __init__(self, initial: VectorField3, controls: SolverControls, t0: float = 0.0):
        self.grid = initial.grid
        self.controls = controls
        self.rhs = _Rhs(self.grid, controls.formulation, controls.dealias)
        self.k2 = self.grid.k_squared()
        self.t = float(t0)
        self.state = np.array(initial.spectral)
        self.steps = 0

    @property
    def field(self) -> VectorField3:
        return VectorField3.from_spectral(self.grid, self.state)

    def velocity_sup(self) -> float:
        u = inverse(self.rhs.velocity_hat(self.state), self.grid.n)
        return float(np.sqrt(np.max(np.sum(u**2, axis=0))))

    def next_dt(self) -> float:
        c = self.controls
        if c.dt is not None:
            return c.dt
        return c.cfl * self.grid.spacing / max(1.0, self.velocity_sup())

    def step(self, dt: float) -> None:
        # overflow is reported as SolverBlowUp below, not as numpy warnings
        with np.errstate(over="ignore", invalid="ignore"):
            new = _lawson_rk4(self.state, dt, self.rhs, self.k2, self.controls.viscosity)
        if not np.all(np.isfinite(new)):
            raise SolverBlowUp(self.t + dt)
        self.state = new
        self.t += dt
        self.steps += 1

    def advance_to(self, t_target: float, on_step=None) -> None:
        # remaining intervals shorter than this are absorbed into the previous step
        slack = 1e-12 * max(1.0, abs(t_target))
        while self.t < t_target - slack:
            if self.steps >= self.controls.max_steps:
                raise RuntimeError(f"max_steps={self.controls.max_steps} exceeded at t={self.t:.6g}")
            dt = min(self.next_dt(), t_target - self.t)
            if t_target - (self.t + dt) < slack:
                dt = t_target - self.t
            self.step(dt)
            if on_step is not None:
                on_step(self)
        if abs(self.t - t_target) < slack:
            self.t = t_target

    def norms(self) -> tuple[float, float, float, float]:
        """(time, sup of the evolved field, energy, enstrophy) from spectral data."""
        grid = self.grid
        sh = self.state
        w = grid.hermitian_weights()
        uh = self.rhs.velocity_hat(sh)
        wh = sh if self.controls.formulation == "vorticity" else _curl_hat(grid, sh)
        energy = 0.5 * grid.volume * float(np.sum(w * np.abs(uh) ** 2))
        enstrophy = grid.volume * float(np.sum(w * np.abs(wh) ** 2))
        phys = inverse(sh, grid.n)
        sup = float(np.sqrt(np.max(np.sum(phys**2, axis=0))))
        return (self.t, sup, energy, enstrophy)

    def divergence_norm(self) -> float:
        return float(np.max(np.abs(inverse(_divergence_hat(self.grid, self.state), self.grid.n))))


def step_velocity(
    u: VectorField3, dt: float, dealias: bool = True, viscosity: float = 1.0, t: float = 0.0
) -> VectorField3:
    """Advance the velocity form by one Lawson-RK4 step of length ``dt``."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    rhs = _Rhs(u.grid, "velocity", dealias)
    with np.errstate(over="ignore", invalid="ignore"):
        new = _lawson_rk4(np.array(u.spectral), dt, rhs, u.grid.k_squared(), viscosity)
    if not np.all(np.isfinite(new)):
        raise SolverBlowUp(t + dt)
    return VectorField3.from_spectral(u.grid, new)


def step_vorticity(
    w: VectorField3, dt: float, dealias: bool = True, viscosity: float = 1.0, t: float = 0.0
) -> VectorField3:
    """Advance the vorticity form by one step; the velocity is rebuilt by Biot-Savart at every stage."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if np.max(np.abs(w.spectral[:, 0, 0, 0])) > 1e-12 * max(1.0, float(np.max(np.abs(w.data)))):
        raise ValueError("nonzero mean vorticity")
    rhs = _Rhs(w.grid, "vorticity", dealias)
    with np.errstate(over="ignore", invalid="ignore"):
        new = _lawson_rk4(np.array(w.spectral), dt, rhs, w.grid.k_squared(), viscosity)
    if not np.all(np.isfinite(new)):
        raise SolverBlowUp(t + dt)
    return VectorField3.from_spectral(w.grid, new)


def nonlinear_term(v: VectorField3, formulation: Formulation = "velocity", dealias: bool = True) -> VectorField3:
    """Projected nonlinear tendency of ``v`` (excluding diffusion)."""
    rhs = _Rhs(v.grid, formulation, dealias)
    return VectorField3.from_spectral(v.grid, rhs(np.array(v.spectral)))


def simulate(initial: VectorField3, controls: SolverControls) -> Trajectory:
    """Integrate from t = 0 to ``controls.t_end``.

    Norms are recorded at every accepted step.  Steps are shortened so every
    requested snapshot time is reached exactly.  A blow-up truncates the
    trajectory and sets ``diverged``.
    """
    integ = Integrator(initial, controls)
    traj = Trajectory(formulation=controls.formulation)

    def record(it: Integrator) -> None:
        traj.norm_series.append(it.norms())
        if controls.track_divergence:
            traj.divergence_series.append(it.divergence_norm())

    record(integ)
    targets = sorted(set(controls.snapshot_times) | {controls.t_end})
    if controls.snapshot_times and controls.snapshot_times[0] == 0.0:
        traj.snapshots.append((0.0, initial))
    try:
        for target in targets:
            if target <= integ.t and target != 0.0:
                continue
            integ.advance_to(target, on_step=record)
            if target in controls.snapshot_times and target > 0.0:
                traj.snapshots.append((integ.t, integ.field))
    except SolverBlowUp as exc:
        logger.warning("%s; trajectory truncated", exc)
        traj.diverged = True
        traj.blowup_time = exc.time
    return traj

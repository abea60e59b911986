"""Sparseness regularity criterion: case dispatch, pair evaluation and time chaining.

Given a trajectory near a candidate singular time ``T_star``:

* case (i): some recorded time t satisfies ``t + T_span(|u(t)|) >= T_star``;
  the local existence time alone reaches past ``T_star``.
* otherwise, starting from ``t0``, pick s in the window ``[t + T/4, t + T]``
  where the super-level set ``{|u(s)| > c0^-alpha |u(t)|}`` is weakly linearly
  delta-sparse at every tested point on scales up to ``1/(2 c0^2 |u(t)|)``.
  The expected consequence is ``|u(s)| <= |u(t)|``.  Repeat from ``t = s``
  until ``s + T_span(M0) > T_star``.

The vorticity form swaps in d0, ``T = 1/(d0^2 |w|)`` and ``r <= 1/(2 d0^2 |w|^(1/2))``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Literal, Protocol, Sequence

import numpy as np

from .analyticity import (
    AnalyticityConstants,
    TimeWindow,
    analyticity_window,
    estimate_radius_from_spectrum,
    existence_span,
)
from .fields import VectorField3, sup_norm
from .harmonic import min_alpha, sparseness_exponent
from .solver import Integrator, SolverBlowUp, SolverControls, Trajectory
from .sparseness import ScanControls, SparsenessReport, dyadic_scales, scan_field

logger = logging.getLogger(__name__)

Termination = Literal["case_i", "chain_past_Tstar", "hypotheses_failed", "trajectory_end"]


class WindowUncoveredError(RuntimeError):
    def __init__(self, s_lo: float, s_hi: float):
        super().__init__(f"window uncovered: no snapshot available in [{s_lo:.6g}, {s_hi:.6g}]")
        self.window = (s_lo, s_hi)


class TrajectoryDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class CriterionParameters:
    delta: float
    alpha: float | None = None
    constants: AnalyticityConstants = AnalyticityConstants()
    formulation: Literal["velocity", "vorticity"] = "velocity"
    h: float = field(init=False)

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.formulation not in ("velocity", "vorticity"):
            raise ValueError(f"unknown formulation {self.formulation!r}")
        h = sparseness_exponent(self.delta)
        object.__setattr__(self, "h", h)
        floor = min_alpha(h)
        if self.alpha is None:
            object.__setattr__(self, "alpha", floor)
        elif self.alpha < floor * (1 - 1e-12):
            raise ValueError(f"alpha must be >= (1-h)/h = {floor:.12g}, got {self.alpha}")

    @property
    def constant(self) -> float:
        return self.constants.c0 if self.formulation == "velocity" else self.constants.d0

    @property
    def threshold_factor(self) -> float:
        """c0^-alpha (or d0^-alpha): the super-level threshold relative to the norm at t."""
        return self.constant ** (-self.alpha)

    def solvency(self) -> float:
        """threshold_factor^h * c0^(1-h); at most 1 for admissible alpha."""
        return self.threshold_factor**self.h * self.constant ** (1 - self.h)

    def window(self, norm_t: float, t: float = 0.0) -> TimeWindow:
        return analyticity_window(norm_t, self.constants, self.formulation, t)

    def span(self, norm: float) -> float:
        return existence_span(norm, self.constants, self.formulation)

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "h": self.h,
            "alpha": self.alpha,
            "c0": self.constants.c0,
            "d0": self.constants.d0,
            "formulation": self.formulation,
            "threshold_factor": self.threshold_factor,
        }


# --- trajectory sources ----------------------------------------------------------------

class TrajectorySource(Protocol):
    formulation: str
    t_end: float
    diverged: bool

    def norm_series(self) -> tuple[np.ndarray, np.ndarray]: ...

    def norm_at(self, t: float) -> float: ...

    def snapshots_in_window(self, s_lo: float, s_hi: float, n_s: int) -> list[tuple[float, VectorField3]]: ...


class SimulationDriver:
    """Runs the solver on demand and serves snapshots at exact requested times.

    The norm series is produced by one pass to ``controls.t_end``; integrator
    checkpoints are kept every ``checkpoint_every`` steps so snapshots can be
    regenerated from the nearest earlier checkpoint.
    """

    def __init__(self, initial: VectorField3, controls: SolverControls, checkpoint_every: int = 8):
        self.initial = initial
        self.controls = controls
        self.formulation = controls.formulation
        self.t_end = controls.t_end
        self.checkpoint_every = checkpoint_every
        self.diverged = False
        self.blowup_time: float | None = None
        self._checkpoints: dict[float, np.ndarray] = {0.0: np.array(initial.spectral)}
        self._snapshots: dict[float, VectorField3] = {0.0: initial}
        self._series: tuple[np.ndarray, np.ndarray] | None = None

    def norm_series(self) -> tuple[np.ndarray, np.ndarray]:
        if self._series is None:
            integ = Integrator(self.initial, self.controls)
            rows = [integ.norms()[:2]]

            def on_step(it: Integrator) -> None:
                rows.append(it.norms()[:2])
                if it.steps % self.checkpoint_every == 0:
                    self._checkpoints[it.t] = it.state.copy()

            try:
                integ.advance_to(self.t_end, on_step=on_step)
            except SolverBlowUp as exc:
                self.diverged = True
                self.blowup_time = exc.time
            arr = np.array(rows)
            self._series = (arr[:, 0], arr[:, 1])
        return self._series

    def snapshot_at(self, t: float) -> VectorField3:
        if t > self.t_end + 1e-12 or (self.blowup_time is not None and t >= self.blowup_time):
            raise WindowUncoveredError(t, t)
        for ts, snap in self._snapshots.items():
            if abs(ts - t) <= 1e-12 * max(1.0, t):
                return snap
        start = max(ts for ts in self._checkpoints if ts <= t)
        integ = Integrator(VectorField3.zeros(self.initial.grid), self.controls, t0=start)
        integ.state = self._checkpoints[start].copy()
        try:
            integ.advance_to(t)
        except SolverBlowUp as exc:
            self.diverged = True
            self.blowup_time = exc.time
            raise WindowUncoveredError(t, t) from exc
        snap = integ.field
        self._checkpoints[t] = integ.state.copy()
        self._snapshots[t] = snap
        return snap

    def norm_at(self, t: float) -> float:
        return sup_norm(self.snapshot_at(t))

    def snapshots_in_window(self, s_lo: float, s_hi: float, n_s: int) -> list[tuple[float, VectorField3]]:
        times = np.linspace(s_lo, s_hi, n_s) if n_s > 1 else np.array([s_lo])
        out = []
        for s in times:
            if s > self.t_end + 1e-12:
                break
            try:
                out.append((float(s), self.snapshot_at(float(s))))
            except WindowUncoveredError:
                break
        if not out:
            raise WindowUncoveredError(s_lo, s_hi)
        return out


class StoredTrajectory:
    """A fixed set of snapshots (and optional norm series), e.g. read from disk."""

    def __init__(
        self,
        snapshots: Sequence[tuple[float, VectorField3]],
        formulation: str = "velocity",
        norm_series: tuple[Sequence[float], Sequence[float]] | None = None,
        diverged: bool = False,
    ):
        self.snaps = sorted(((float(t), f) for t, f in snapshots), key=lambda p: p[0])
        if not self.snaps:
            raise ValueError("at least one snapshot is required")
        self.formulation = formulation
        self.diverged = diverged
        if norm_series is None:
            norm_series = ([t for t, _ in self.snaps], [sup_norm(f) for _, f in self.snaps])
        self._series = (np.asarray(norm_series[0], float), np.asarray(norm_series[1], float))
        self.t_end = max(self.snaps[-1][0], float(self._series[0][-1]))

    @classmethod
    def from_trajectory(cls, traj: Trajectory) -> "StoredTrajectory":
        series = (traj.times, traj.sup_norms) if traj.norm_series else None
        return cls(traj.snapshots, traj.formulation, series, traj.diverged)

    def norm_series(self) -> tuple[np.ndarray, np.ndarray]:
        return self._series

    def norm_at(self, t: float) -> float:
        for ts, f in self.snaps:
            if abs(ts - t) <= 1e-9 * max(1.0, t):
                return sup_norm(f)
        times, norms = self._series
        i = int(np.argmin(np.abs(times - t)))
        if abs(times[i] - t) > 1e-9 * max(1.0, t):
            raise WindowUncoveredError(t, t)
        return float(norms[i])

    def snapshots_in_window(self, s_lo: float, s_hi: float, n_s: int) -> list[tuple[float, VectorField3]]:
        inside = [p for p in self.snaps if s_lo - 1e-12 <= p[0] <= s_hi + 1e-12]
        if not inside:
            raise WindowUncoveredError(s_lo, s_hi)
        if len(inside) <= n_s:
            return inside
        targets = np.linspace(s_lo, s_hi, n_s)
        times = np.array([p[0] for p in inside])
        picks = sorted({int(np.argmin(np.abs(times - x))) for x in targets})
        return [inside[i] for i in picks]


# --- verdicts ----------------------------------------------------------------------------

@dataclass
class CandidateScan:
    s: float
    all_sparse: bool
    worst_fraction: float
    r_max: float


@dataclass
class PairVerdict:
    t: float
    s: float
    window: TimeWindow | None
    r_max: float
    threshold: float
    hypotheses_hold: bool
    observed_norm_t: float
    observed_norm_s: float
    prediction_confirmed: bool | None
    report: SparsenessReport | None = field(default=None, repr=False)
    candidates: list[CandidateScan] = field(default_factory=list)
    vacuous: bool = False

    @property
    def inconsistent(self) -> bool:
        return self.hypotheses_hold and self.prediction_confirmed is False

    def to_dict(self) -> dict:
        w = self.window
        return {
            "t": self.t,
            "s": self.s,
            "window": None if w is None else [w.s_lo, w.s_hi],
            "T_span": None if w is None else w.T_span,
            "M": self.threshold,
            "r_max": None if math.isinf(self.r_max) else self.r_max,
            "worst_fraction": None if self.report is None else self.report.worst_fraction,
            "hypotheses_hold": self.hypotheses_hold,
            "norm_t": self.observed_norm_t,
            "norm_s": self.observed_norm_s,
            "confirmed": self.prediction_confirmed,
            "vacuous": self.vacuous,
            "candidates": [
                {"s": c.s, "all_sparse": c.all_sparse, "worst_fraction": c.worst_fraction, "r_max": c.r_max}
                for c in self.candidates
            ],
        }


@dataclass
class ChainVerdict:
    params: CriterionParameters
    t0: float
    T_star: float
    pairs: list[PairVerdict]
    M0: float
    terminated_by: Termination
    regular_verdict: bool
    case_i_time: float | None = None

    @property
    def inconsistencies(self) -> list[int]:
        return [i for i, p in enumerate(self.pairs) if p.inconsistent]

    def to_dict(self) -> dict:
        return {
            "parameters": self.params.to_dict(),
            "t0": self.t0,
            "T_star": self.T_star,
            "M0": self.M0,
            "pairs": [p.to_dict() for p in self.pairs],
            "terminated_by": self.terminated_by,
            "case_i_time": self.case_i_time,
            "inconsistencies": self.inconsistencies,
            "regular_verdict": self.regular_verdict,
        }

    def summary(self) -> str:
        lines = [
            f"formulation={self.params.formulation} delta={self.params.delta:.6g} "
            f"h={self.params.h:.6g} alpha={self.params.alpha:.6g}",
            f"t0={self.t0:.6g} T*={self.T_star:.6g} M0={self.M0:.6g}",
        ]
        for p in self.pairs:
            lines.append(
                f"  t={p.t:.6g} s={p.s:.6g} M={p.threshold:.4g} r_max={p.r_max:.4g} "
                f"hypotheses={'yes' if p.hypotheses_hold else 'no'} "
                f"|.|(t)={p.observed_norm_t:.6g} |.|(s)={p.observed_norm_s:.6g} confirmed={p.prediction_confirmed}"
            )
        lines.append(f"terminated by {self.terminated_by}; regular verdict: {self.regular_verdict}")
        return "\n".join(lines)


# --- operations ------------------------------------------------------------------------

def _series(source) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(source, Trajectory):
        return source.times, source.sup_norms
    if hasattr(source, "norm_series") and callable(source.norm_series):
        return source.norm_series()
    times, norms = source
    return np.asarray(times, float), np.asarray(norms, float)


def case_i_check(source, T_star: float, params: CriterionParameters, until: float | None = None) -> float | None:
    """First recorded time t < T_star (and <= ``until``) with t + T_span(norm(t)) >= T_star, else None."""
    times, norms = _series(source)
    for t, n in zip(times, norms):
        if t >= T_star or (until is not None and t > until + 1e-12):
            break
        if t + params.span(n) >= T_star:
            return float(t)
    return None


@dataclass
class PairControls:
    n_s: int = 4
    scan: ScanControls = field(default_factory=ScanControls)
    empirical_radius: bool = False
    norm_slack: float = 1e-9


def evaluate_pair(
    source: TrajectorySource, t: float, params: CriterionParameters, controls: PairControls | None = None
) -> PairVerdict:
    """Check the sparseness hypotheses for the window of time ``t`` and compare norms at t and s."""
    c = controls or PairControls()
    norm_t = source.norm_at(t)
    if norm_t <= 0:
        return PairVerdict(t, t, None, math.inf, 0.0, True, norm_t, norm_t, True, vacuous=True)
    win = params.window(norm_t, t)
    M = params.threshold_factor * norm_t
    cands = source.snapshots_in_window(win.s_lo, win.s_hi, c.n_s)
    tried: list[CandidateScan] = []
    best: tuple[float, VectorField3, SparsenessReport, float] | None = None
    for s, snap in cands:
        r_max = win.rho
        if c.empirical_radius:
            r_max = min(estimate_radius_from_spectrum(snap), snap.grid.box_length / 2)
        scales = dyadic_scales(r_max, snap.grid.spacing, snap.grid.box_length, c.scan.min_scale_cells)
        rep = scan_field(snap, M, params.delta, r_max, c.scan, scales=scales)
        tried.append(CandidateScan(s, rep.all_sparse, rep.worst_fraction, r_max))
        if best is None or rep.worst_fraction < best[2].worst_fraction:
            best = (s, snap, rep, r_max)
        if rep.all_sparse:
            best = (s, snap, rep, r_max)
            break
    s, snap, rep, r_max = best
    norm_s = sup_norm(snap)
    hold = rep.all_sparse
    confirmed = (norm_s <= norm_t + c.norm_slack) if hold else None
    if hold and not confirmed:
        logger.warning("inconsistency: hypotheses hold at t=%g, s=%g but norm grew %g -> %g", t, s, norm_t, norm_s)
    return PairVerdict(t, s, win, r_max, M, hold, norm_t, norm_s, confirmed, rep, tried)


def chain_criterion(
    source: TrajectorySource,
    t0: float,
    T_star: float,
    params: CriterionParameters,
    controls: PairControls | None = None,
    case_i_mode: Literal["global", "causal", "off"] = "global",
    max_iterations: int = 10_000,
) -> ChainVerdict:
    """Run the case dispatch and the chain t_{i+1} = s_i of the regularity argument.

    ``case_i_mode="global"`` looks for a case (i) witness anywhere in the
    recorded norm series before T_star; ``"causal"`` only at times up to the
    current chain time (checked before every pair); ``"off"`` skips it.
    """
    if not 0 <= t0 < T_star:
        raise ValueError("t0 must lie in [0, T_star)")
    source.norm_series()
    if source.diverged:
        raise TrajectoryDiverged("trajectory diverged")

    def verdict(pairs, M0, how, witness=None):
        regular = how in ("case_i", "chain_past_Tstar") and not any(p.inconsistent for p in pairs)
        return ChainVerdict(params, t0, T_star, pairs, M0, how, regular, witness)

    if case_i_mode == "global":
        witness = case_i_check(source, T_star, params)
        if witness is not None:
            M0 = source.norm_at(t0) if t0 <= source.t_end else math.nan
            return verdict([], M0, "case_i", witness)

    M0 = source.norm_at(t0)
    span0 = params.span(M0)
    pairs: list[PairVerdict] = []
    t = t0
    for _ in range(max_iterations):
        if case_i_mode == "causal":
            witness = case_i_check(source, T_star, params, until=t)
            if witness is None and t + params.span(source.norm_at(t)) >= T_star:
                witness = t
            if witness is not None:
                return verdict(pairs, M0, "case_i", witness)
        norm_t = source.norm_at(t)
        if norm_t > 0 and t + params.span(norm_t) / 4 > source.t_end + 1e-12:
            return verdict(pairs, M0, "trajectory_end")
        pair = evaluate_pair(source, t, params, controls)
        pairs.append(pair)
        if pair.vacuous:
            return verdict(pairs, M0, "case_i", t)
        if not pair.hypotheses_hold:
            return verdict(pairs, M0, "hypotheses_failed")
        if pair.s + span0 > T_star:
            return verdict(pairs, M0, "chain_past_Tstar")
        if pair.s <= t:
            raise RuntimeError("chain did not advance")
        t = pair.s
    raise RuntimeError(f"chain exceeded {max_iterations} iterations")



class PinnedSource:
    """Synthetic trajectory with norms growing like ``K / sqrt(T_star - t)``.

    Every snapshot is a constant field of that magnitude, so the super-level
    set at any threshold below the norm fills the whole box.  The growth rate
    keeps ``t + T_span`` below ``T_star`` when ``(c0 K)^2 > 1``.
    """

    def __init__(self, grid, T_star: float, growth: float = 1.0, formulation: str = "velocity"):
        self.grid = grid
        self.T_star = T_star
        self.growth = growth
        self.formulation = formulation
        self.t_end = T_star * (1 - 1e-6)
        self.diverged = False

    def _norm(self, t: float) -> float:
        return self.growth / math.sqrt(self.T_star - t)

    def norm_series(self) -> tuple[np.ndarray, np.ndarray]:
        times = np.linspace(0.0, self.t_end, 257)
        return times, np.array([self._norm(t) for t in times])

    def norm_at(self, t: float) -> float:
        return self._norm(t)

    def field_at(self, t: float) -> VectorField3:
        data = np.zeros((3, *self.grid.shape))
        data[0] = self._norm(t)
        return VectorField3(self.grid, data)

    def snapshots_in_window(self, s_lo: float, s_hi: float, n_s: int) -> list[tuple[float, VectorField3]]:
        times = [s for s in (np.linspace(s_lo, s_hi, n_s) if n_s > 1 else [s_lo]) if s <= self.t_end]
        if not times:
            raise WindowUncoveredError(s_lo, s_hi)
        return [(float(s), self.field_at(float(s))) for s in times]

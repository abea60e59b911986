"""Navier-Stokes regularity diagnostics: a periodic pseudo-spectral solver,
analyticity windows, harmonic-measure tools, sparseness scans and a
chain-of-windows criterion checker."""
from .analyticity import (
    AnalyticityConstants,
    InsufficientSpectrumError,
    TimeWindow,
    analyticity_window,
    analyticity_window_velocity,
    analyticity_window_vorticity,
    estimate_radius_from_spectrum,
    existence_span,
)
from .criterion import (
    ChainVerdict,
    CriterionParameters,
    PairControls,
    PairVerdict,
    PinnedSource,
    SimulationDriver,
    StoredTrajectory,
    TrajectoryDiverged,
    WindowUncoveredError,
    case_i_check,
    chain_criterion,
    evaluate_pair,
)
from .fields import (
    Grid3,
    GridMismatchError,
    Segment,
    VectorField3,
    biot_savart,
    curl,
    divergence,
    divergence_norm,
    enstrophy,
    energy,
    leray_project,
    sample_magnitude_on_segment,
    sup_norm,
)
from .harmonic import (
    SlitSet,
    harmonic_measure_fd,
    harmonic_measure_mc,
    min_alpha,
    random_slit_set,
    solynin_bound,
    sparseness_exponent,
    two_constants_bound,
)
from .scenarios import (
    FilamentSpec,
    shear_mode,
    shear_mode_exact,
    synthetic_spectrum_field,
    taylor_green,
    vortex_filament_field,
)
from .solver import SolverBlowUp, SolverControls, Trajectory, simulate, step_velocity, step_vorticity
from .sparseness import ScanControls, SparsenessQuery, SparsenessReport, is_sparse_at, scan_field

__version__ = "0.1.0"

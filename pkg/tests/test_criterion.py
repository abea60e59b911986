"""Criterion parameters, pair evaluation and the chain driver."""
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsregularity import io
from nsregularity.analyticity import AnalyticityConstants
from nsregularity.criterion import (
    CriterionParameters,
    PairControls,
    PinnedSource,
    SimulationDriver,
    StoredTrajectory,
    TrajectoryDiverged,
    WindowUncoveredError,
    case_i_check,
    chain_criterion,
    evaluate_pair,
)
from nsregularity.fields import Grid3, VectorField3
from nsregularity.scenarios import shear_mode, shear_mode_exact, taylor_green
from nsregularity.solver import SolverControls
from nsregularity.sparseness import ScanControls

DELTA = 1 / math.sqrt(3)
FAST_SCAN = ScanControls(n_directions=8, n_samples=64)


def params(c0=2.0, **kw):
    return CriterionParameters(DELTA, constants=AnalyticityConstants(c0, 2.0), **kw)


def spike(grid, value, index=(5, 5, 5)):
    data = np.zeros((3, *grid.shape))
    data[0][index] = value
    return VectorField3(grid, data)


class TestParameters:
    def test_worked_values(self):
        p = params()
        assert p.h == pytest.approx(1 / 3, abs=1e-12)
        assert p.alpha == pytest.approx(2.0, abs=1e-12)
        assert p.threshold_factor == pytest.approx(0.25, abs=1e-12)
        assert p.solvency() == pytest.approx(1.0, abs=1e-12)

    @settings(max_examples=200)
    @given(st.floats(0.01, 0.99), st.floats(1.0001, 20.0), st.floats(0.0, 3.0))
    def test_solvency(self, delta, c0, extra):
        base = CriterionParameters(delta, constants=AnalyticityConstants(c0, 2.0))
        p = CriterionParameters(delta, alpha=base.alpha + extra, constants=AnalyticityConstants(c0, 2.0))
        assert p.solvency() <= 1 + 1e-12

    def test_rejects_small_alpha(self):
        with pytest.raises(ValueError, match="alpha"):
            CriterionParameters(DELTA, alpha=1.5)

    def test_rejects_bad_delta(self):
        with pytest.raises(ValueError, match="delta"):
            CriterionParameters(1.0)

    @settings(max_examples=200)
    @given(st.floats(1e-4, 1e4), st.floats(0.0, 10.0), st.floats(1.0001, 10.0))
    def test_window_oracle(self, norm, t, c0):
        w = params(c0).window(norm, t)
        # independent path: span from the existence time, radius from sqrt(t)/c0 at the left end
        span = (1.0 / (c0 * norm)) ** 2
        assert w.T_span == pytest.approx(span, rel=1e-14)
        assert w.s_lo == pytest.approx(t + 0.25 * span, rel=1e-14)
        assert w.s_hi == pytest.approx(t + span, rel=1e-14)
        assert w.r_max == pytest.approx(math.sqrt(0.25 * span) / c0, rel=1e-14)

    def test_vorticity_window(self):
        p = CriterionParameters(DELTA, formulation="vorticity")
        w = p.window(4.0)
        assert (w.T_span, w.r_max) == (1 / 16, 1 / 16)


class TestCaseI:
    def test_constant_norm(self):
        times = np.linspace(0, 0.2, 5)
        assert case_i_check((times, np.ones(5)), 0.2, params()) == 0.0

    def test_fast_growth(self):
        times = np.linspace(0, 0.99, 50)
        norms = 1 / np.sqrt(1 - times)
        assert case_i_check((times, norms), 1.0, params()) is None

    def test_short_horizon(self):
        assert case_i_check(([0.0, 0.1], [3.0, 3.0]), 1 / 36, params()) == 0.0

    def test_until(self):
        times = np.array([0.0, 0.5, 0.9])
        norms = np.array([10.0, 10.0, 0.1])
        assert case_i_check((times, norms), 1.0, params()) == 0.9
        assert case_i_check((times, norms), 1.0, params(), until=0.5) is None


class TestPairs:
    def test_zero_solution(self, grid16):
        src = StoredTrajectory([(0.0, VectorField3.zeros(grid16))])
        pair = evaluate_pair(src, 0.0, params())
        assert pair.vacuous and pair.hypotheses_hold and pair.prediction_confirmed

    def test_decaying_shear(self):
        g = Grid3(32)
        p = params()
        t = 0.0
        win = p.window(1.0, t)
        times = [t, *win.candidates(4)]
        src = StoredTrajectory([(s, shear_mode_exact(g, 1.0, 4, s)) for s in times])
        pair = evaluate_pair(src, t, p, PairControls(scan=FAST_SCAN))
        assert pair.hypotheses_hold
        assert pair.prediction_confirmed
        assert pair.observed_norm_s < pair.observed_norm_t
        # the level set {|sin| > e^{16 (s - t)} / 4} is empty once 16 (s - t) > ln 4
        assert 16 * (pair.s - t) > math.log(4)

    def test_constant_super_threshold(self, grid16):
        src = PinnedSource(grid16, 1.0)
        pair = evaluate_pair(src, 0.0, params(), PairControls(scan=FAST_SCAN))
        assert not pair.hypotheses_hold
        assert pair.prediction_confirmed is None
        assert len(pair.candidates) == 4
        assert all(c.worst_fraction == 1.0 for c in pair.candidates)

    def test_window_uncovered(self, grid16):
        src = StoredTrajectory([(0.0, taylor_green(grid16))])
        with pytest.raises(WindowUncoveredError, match="window uncovered"):
            evaluate_pair(src, 0.0, params())

    def test_inconsistency_is_reported(self, grid16):
        src = StoredTrajectory([(0.0, spike(grid16, 0.1)), (10.0, spike(grid16, 0.2))])
        pair = evaluate_pair(src, 0.0, params(), PairControls(scan=FAST_SCAN))
        assert pair.hypotheses_hold
        assert pair.prediction_confirmed is False
        assert pair.inconsistent


class TestChain:
    def test_decaying_taylor_green(self, grid16):
        driver = SimulationDriver(taylor_green(grid16), SolverControls(t_end=1.0, cfl=0.5))
        v = chain_criterion(driver, 0.05, 1.0, params(), PairControls(scan=FAST_SCAN))
        assert v.terminated_by == "case_i"
        assert v.regular_verdict
        assert v.case_i_time is not None and v.case_i_time < 1.0

    def test_pinned_source_fails(self, grid16):
        v = chain_criterion(PinnedSource(grid16, 1.0), 0.0, 1.0, params(), PairControls(scan=FAST_SCAN), "causal")
        assert v.terminated_by == "hypotheses_failed"
        assert len(v.pairs) == 1
        assert not v.regular_verdict

    def test_pinned_source_has_no_case_i(self, grid16):
        src = PinnedSource(grid16, 1.0)
        assert case_i_check(src, 1.0, params()) is None

    @pytest.mark.parametrize("mode", ["off", "causal"])
    def test_zero_data_single_vacuous_pair(self, grid16, mode):
        driver = SimulationDriver(VectorField3.zeros(grid16), SolverControls(t_end=1.0, dt=0.1))
        v = chain_criterion(driver, 0.0, 1.0, params(), case_i_mode=mode)
        assert v.regular_verdict
        if mode == "off":
            assert len(v.pairs) == 1 and v.pairs[0].vacuous

    def test_zero_data_global(self, grid16):
        driver = SimulationDriver(VectorField3.zeros(grid16), SolverControls(t_end=1.0, dt=0.1))
        v = chain_criterion(driver, 0.0, 1.0, params())
        assert v.regular_verdict and v.terminated_by == "case_i"

    def test_shear_chain_advances(self):
        g = Grid3(32)
        T_star, t0 = 0.6, 0.0
        driver = SimulationDriver(shear_mode(g, 1.0, 4), SolverControls(t_end=4.0, dt=1e-2))
        p = params()
        v = chain_criterion(driver, t0, T_star, p, PairControls(scan=FAST_SCAN), case_i_mode="off")
        assert v.terminated_by == "chain_past_Tstar"
        assert v.regular_verdict
        times = [pair.t for pair in v.pairs]
        assert all(b > a for a, b in zip(times, times[1:]))
        for pair in v.pairs:
            assert pair.s - pair.t >= p.span(pair.observed_norm_t) / 4 - 1e-12
            assert pair.prediction_confirmed
        span_min = min(p.span(pair.observed_norm_t) for pair in v.pairs)
        assert len(v.pairs) <= math.ceil((T_star - t0) / (span_min / 4))

    def test_inconsistency_blocks_regular_verdict(self, grid16):
        src = StoredTrajectory([(0.0, spike(grid16, 0.1)), (10.0, spike(grid16, 0.2))])
        v = chain_criterion(src, 0.0, 20.0, params(), PairControls(scan=FAST_SCAN), case_i_mode="off")
        assert v.terminated_by == "chain_past_Tstar"
        assert v.inconsistencies == [0]
        assert not v.regular_verdict

    def test_trajectory_end(self, grid16):
        src = StoredTrajectory([(0.0, taylor_green(grid16))], norm_series=([0.0, 0.01], [1.0, 1.0]))
        v = chain_criterion(src, 0.0, 5.0, params(), case_i_mode="off")
        assert v.terminated_by == "trajectory_end"
        assert not v.regular_verdict

    def test_diverged_source(self, grid16):
        driver = SimulationDriver(taylor_green(grid16, 1e4), SolverControls(t_end=1.0, dt=0.1))
        with pytest.raises(TrajectoryDiverged):
            chain_criterion(driver, 0.0, 1.0, params())

    def test_rejects_bad_times(self, grid16):
        src = StoredTrajectory([(0.0, taylor_green(grid16))])
        with pytest.raises(ValueError, match="t0"):
            chain_criterion(src, 1.0, 0.5, params())

    def test_verdict_serialization(self, grid16):
        v = chain_criterion(PinnedSource(grid16, 1.0), 0.0, 1.0, params(), PairControls(scan=FAST_SCAN), "causal")
        payload = json.loads(io.dumps(v.to_dict()))
        assert payload["terminated_by"] == "hypotheses_failed"
        assert payload["schema_version"] == io.SCHEMA_VERSION
        assert "hypotheses=no" in v.summary()


class TestDriver:
    def test_snapshot_matches_direct_run(self, grid16):
        from nsregularity.solver import simulate

        controls = SolverControls(t_end=0.2, dt=0.01)
        driver = SimulationDriver(taylor_green(grid16), controls)
        driver.norm_series()
        snap = driver.snapshot_at(0.137)
        direct = simulate(taylor_green(grid16), SolverControls(t_end=0.2, dt=0.01, snapshot_times=(0.137,)))
        assert np.max(np.abs(snap.data - direct.snapshots[0][1].data)) < 1e-12

    def test_window_snapshots(self, grid16):
        driver = SimulationDriver(taylor_green(grid16), SolverControls(t_end=0.5, dt=0.01))
        snaps = driver.snapshots_in_window(0.1, 0.4, 4)
        assert [s for s, _ in snaps] == pytest.approx([0.1, 0.2, 0.3, 0.4])
        with pytest.raises(WindowUncoveredError):
            driver.snapshots_in_window(0.6, 0.9, 2)

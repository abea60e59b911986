"""Segment traces, point queries and field scans."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsregularity.fields import Grid3, Segment, VectorField3, sample_magnitude_on_segment
from nsregularity.scenarios import FilamentSpec, vortex_filament_field
from nsregularity.sparseness import (
    ScanControls,
    SparsenessQuery,
    axis_directions,
    dyadic_scales,
    fibonacci_directions,
    is_sparse_at,
    scan_field,
    segment_occupation_fraction,
    trace_complement_slits,
)

from conftest import random_field, sin_y_field
from oracles import exhaustive_scan, hemisphere_directions, occupied_fraction


def radial_bump(grid, center, width):
    """Field (f, 0, 0) with f decreasing in the periodic distance to ``center``."""
    L = grid.box_length
    rel = [c - c0 for c, c0 in zip(grid.coordinates(), center)]
    rel = [x - L * np.round(x / L) for x in rel]
    dist2 = sum(x**2 for x in rel)
    return VectorField3.from_components(grid, np.exp(-dist2 / (2 * width**2)), 0.0, 0.0)


class TestDirections:
    def test_fibonacci_unit_upper_hemisphere(self):
        d = fibonacci_directions(50)
        assert np.allclose(np.linalg.norm(d, axis=1), 1.0, atol=1e-15)
        assert np.all(d[:, 2] > 0)

    def test_matches_oracle(self):
        assert np.allclose(fibonacci_directions(20), hemisphere_directions(20), atol=1e-15)

    def test_axis_set(self):
        d = axis_directions()
        assert d.shape == (26, 3)
        assert len({tuple(np.round(x, 12)) for x in d}) == 26


class TestSegmentTrace:
    def test_zero_field(self, grid16):
        seg = Segment((1.0, 1.0, 1.0), (1.0, 0.0, 0.0), 1.0)
        assert segment_occupation_fraction(VectorField3.zeros(grid16), 0.5, seg, 128) == 0.0
        slits = trace_complement_slits(VectorField3.zeros(grid16), 0.5, seg, 128)
        assert slits.intervals == ((-1.0, 1.0),)
        assert slits.measure == 2.0

    def test_sin_field(self):
        g = Grid3(64)
        seg = Segment((0.0, 0.0, 0.0), (0.0, 1.0, 0.0), np.pi / 2)
        n = 2048
        frac = segment_occupation_fraction(sin_y_field(g), 1 / math.sqrt(2), seg, n, mode="refined")
        assert frac == pytest.approx(0.5, abs=4 / n)
        # sub-threshold where |sin s| <= 1/sqrt(2): s in [-pi/4, pi/4] -> rescaled [-1/2, 1/2]
        slits = trace_complement_slits(sin_y_field(g), 1 / math.sqrt(2), seg, n, mode="refined")
        assert len(slits.intervals) == 1
        assert slits.intervals[0] == pytest.approx((-0.5, 0.5), abs=4 / n)

    def test_ball(self):
        g = Grid3(64)
        x0 = (np.pi, np.pi, np.pi)
        width, a, r = 0.6, 1.0, 2.0
        v = radial_bump(g, x0, width)
        M = math.exp(-(a**2) / (2 * width**2))
        seg = Segment(x0, (0.0, 0.6, 0.8), r)
        frac = segment_occupation_fraction(v, M, seg, 1024, mode="refined")
        assert frac == pytest.approx(a / r, abs=0.01)
        slits = trace_complement_slits(v, M, seg, 1024, mode="refined")
        assert len(slits.intervals) == 2
        (a1, b1), (a2, b2) = slits.intervals
        assert (a1, a2, b2) == (-1.0, pytest.approx(a / r, abs=0.02), 1.0)
        assert b1 == pytest.approx(-a / r, abs=0.02)

    def test_rejects_bad_threshold(self, grid16):
        with pytest.raises(ValueError):
            segment_occupation_fraction(VectorField3.zeros(grid16), 0.0, Segment((0, 0, 0), (1, 0, 0), 1.0))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.floats(0.2, 3.0), st.integers(64, 300))
    def test_duality_and_rescaling(self, seed, M, n):
        g = Grid3(16)
        v = random_field(g, seed)
        rng = np.random.default_rng(seed)
        d = rng.standard_normal(3)
        r = rng.uniform(0.2, 3.0)
        seg = Segment(tuple(rng.uniform(0, 6, 3)), tuple(d / np.linalg.norm(d)), r)
        frac = segment_occupation_fraction(v, M, seg, n)
        slits = trace_complement_slits(v, M, seg, n)
        assert slits.measure / 2 + frac == pytest.approx(1.0, abs=2 / n)
        # unscaled sub-threshold length divided by r
        mags = sample_magnitude_on_segment(v, seg, n)
        assert slits.measure == pytest.approx(np.count_nonzero(mags <= M) * (2 * r / n) / r, abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.floats(0.1, 2.0), st.floats(0.0, 2.0))
    def test_monotone_in_threshold(self, seed, M, dM):
        v = random_field(Grid3(16), seed)
        seg = Segment((1.0, 2.0, 3.0), (0.0, 0.0, 1.0), 2.5)
        assert segment_occupation_fraction(v, M + dM, seg, 256) <= segment_occupation_fraction(v, M, seg, 256)


class TestPointQuery:
    def test_zero_field(self, grid16):
        q = SparsenessQuery(0.5, (1.0, 1.0, 1.0), 0.5, [0.5, 1.0], n_directions=8, n_samples=64)
        res = is_sparse_at(VectorField3.zeros(grid16), q)
        assert res.sparse and res.fraction == 0.0
        assert np.allclose(res.best_direction, fibonacci_directions(8)[0])
        assert res.best_scale == 0.5

    def test_constant_field(self, grid16):
        v = VectorField3.from_components(grid16, 2.0, 0.0, 0.0)
        q = SparsenessQuery(1.0, (1.0, 1.0, 1.0), 0.9, [0.5, 1.0], n_directions=8, n_samples=64)
        res = is_sparse_at(v, q)
        assert not res.sparse
        assert np.all(res.per_direction_fractions == 1.0)

    def test_vortex_tube(self):
        g = Grid3(64)
        r = 2.0
        b = r / 4  # super-level radius
        a = b / math.sqrt(2 * math.log(4))  # gaussian level 1/4 at distance b
        w = vortex_filament_field(g, [FilamentSpec.with_peak(1.0, a)])
        M = 0.25 + w.data[2].max() - 1.0  # peak shifted by the removed mean
        q = SparsenessQuery(M, (np.pi, np.pi, np.pi), 1 / math.sqrt(3), [r], n_directions=32, n_samples=1024)
        res = is_sparse_at(w, q)
        assert res.sparse
        assert res.fraction == pytest.approx(0.25, abs=0.03)
        assert abs(res.best_direction[2]) < 0.5

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"threshold": 0.0},
            {"delta": 1.0},
            {"scales": []},
            {"scales": [1.0, 0.5]},
            {"n_directions": 3},
            {"n_samples": 10},
        ],
    )
    def test_validation(self, kwargs):
        base = {"threshold": 1.0, "x0": (0, 0, 0), "delta": 0.5, "scales": [1.0]}
        with pytest.raises(ValueError):
            SparsenessQuery(**{**base, **kwargs})

    def test_axis_permutation_permutes_table(self):
        g = Grid3(16)
        v = random_field(g, 42)
        x0 = np.array([1.3, 2.1, 4.4])
        perm = [2, 0, 1]
        pdata = np.transpose(v.data[perm], [0] + [p + 1 for p in perm])
        dirs = axis_directions()
        kw = dict(threshold=1.2, delta=0.5, scales=[0.8, 1.6], n_samples=64, direction_set="axis26")
        t1 = is_sparse_at(v, SparsenessQuery(x0=tuple(x0), **kw)).per_direction_fractions
        t2 = is_sparse_at(VectorField3(g, pdata), SparsenessQuery(x0=tuple(x0[perm]), **kw)).per_direction_fractions
        lookup = {tuple(np.round(d, 12)): i for i, d in enumerate(dirs)}
        for i, d in enumerate(dirs):
            j = lookup[tuple(np.round(d[perm], 12))]
            assert np.array_equal(t1[i], t2[j])


class TestScan:
    def test_zero_field(self, grid16):
        rep = scan_field(VectorField3.zeros(grid16), 0.5, 0.5, 1.0, ScanControls(n_directions=8, n_samples=64))
        assert rep.all_sparse and rep.worst_fraction == 0.0
        assert not rep.searched.any()

    def test_constant_field(self, grid16):
        v = VectorField3.from_components(grid16, 1.0, 1.0, 0.0)
        rep = scan_field(v, 1.0, 0.5, 1.0, ScanControls(n_directions=8, n_samples=64, background_stride=4))
        assert not rep.all_sparse
        assert rep.worst_fraction == 1.0

    def test_filament(self):
        g = Grid3(32)
        r = 2.0
        a = (r / 4) / math.sqrt(2 * math.log(4))
        w = vortex_filament_field(g, [FilamentSpec.with_peak(1.0, a)])
        rep = scan_field(w, 0.25, 1 / math.sqrt(3), r, ScanControls(n_directions=16, n_samples=256), scales=[r])
        assert rep.searched.sum() > 0
        assert rep.all_sparse
        assert rep.worst_fraction <= 0.30

    def test_matches_exhaustive_oracle(self, grid16):
        rng = np.random.default_rng(3)
        v = random_field(grid16, 8)
        pts = np.vstack([rng.uniform(0, 2 * np.pi, (6, 3)), np.argwhere(v.magnitude() > 2.0)[:4] * grid16.spacing])
        scales = [0.7, 1.4]
        c = ScanControls(n_directions=10, n_samples=64, points=pts)
        rep = scan_field(v, 1.5, 0.4, 1.4, c, scales=scales)
        ref = exhaustive_scan(v.data.tolist(), grid16.spacing, pts.tolist(), 1.5, 0.4, scales, 10, 64)
        for i, (searched, frac, sparse) in enumerate(ref):
            assert rep.searched[i] == searched
            assert rep.sparse[i] == sparse
            if searched:
                assert abs(rep.fractions[i] - frac) <= 1e-12

    def test_single_fraction_matches_oracle(self, grid16):
        v = random_field(grid16, 1)
        d = (0.6, 0.0, 0.8)
        seg = Segment((0.4, 5.0, 2.2), d, 2.0)
        ours = segment_occupation_fraction(v, 1.1, seg, 200)
        ref = occupied_fraction(v.data.tolist(), grid16.spacing, seg.x0, d, 2.0, 1.1, 200)
        assert ours == ref

    def test_per_point_threshold(self, grid16):
        v = random_field(grid16, 2)
        thr = np.full(grid16.shape, 1.5)
        c = ScanControls(n_directions=8, n_samples=64, background_stride=4)
        a = scan_field(v, thr, 0.5, 1.0, c)
        b = scan_field(v, 1.5, np.full(grid16.shape, 0.5), 1.0, c)
        assert np.array_equal(a.fractions, b.fractions, equal_nan=True)
        with pytest.raises(ValueError):
            scan_field(v, np.ones((4, 4, 4)), 0.5, 1.0, c)

    def test_threads_and_stop_on_failure(self, grid16):
        v = random_field(grid16, 4)
        c1 = ScanControls(n_directions=8, n_samples=64, background_stride=4)
        c2 = ScanControls(n_directions=8, n_samples=64, background_stride=4, n_jobs=3)
        a = scan_field(v, 1.0, 0.3, 1.0, c1)
        b = scan_field(v, 1.0, 0.3, 1.0, c2)
        assert np.array_equal(a.fractions, b.fractions, equal_nan=True)
        c3 = ScanControls(n_directions=8, n_samples=64, background_stride=4, stop_on_failure=True)
        s = scan_field(v, 1.0, 0.3, 1.0, c3)
        assert not s.all_sparse
        assert s.truncated and s.searched.sum() < a.searched.sum()

    def test_reports(self, grid16, tmp_path):
        v = random_field(grid16, 5)
        rep = scan_field(v, 1.0, 0.5, 1.0, ScanControls(n_directions=8, n_samples=64, background_stride=4))
        d = rep.to_dict()
        assert d["n_searched"] == int(rep.searched.sum())
        assert sum(d["histogram"]["counts"]) == d["n_searched"]
        rep.to_csv(tmp_path / "r.csv")
        assert len((tmp_path / "r.csv").read_text().splitlines()) == len(rep.points) + 1

    def test_rejects_bad_inputs(self, grid16):
        v = VectorField3.zeros(grid16)
        with pytest.raises(ValueError):
            scan_field(v, 1.0, 0.5, 0.0)
        with pytest.raises(ValueError):
            scan_field(v, 1.0, 0.5, 1.0, scales=[4.0])
        with pytest.raises(ValueError):
            scan_field(v, 1.0, 1.5, 1.0)


class TestScales:
    def test_dyadic(self):
        s = dyadic_scales(2.0, 0.1, 2 * np.pi, min_cells=4)
        assert s == [0.5, 1.0, 2.0]

    def test_capped_at_half_box(self):
        assert max(dyadic_scales(100.0, 0.1, 2 * np.pi)) == np.pi

    def test_tiny_radius_kept(self):
        assert dyadic_scales(0.01, 0.1, 2 * np.pi) == [0.01]

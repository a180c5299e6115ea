import math

import numpy as np
import pytest

from semsurf import analysis
from semsurf.errors import InputError
from semsurf.flow import TrackSet, TrackStep
from semsurf.sfm import SurfacePointCloud


def track(pid, positions, statuses=None):
    statuses = statuses or ["tracked"] * len(positions)
    steps = tuple(
        TrackStep(frame_index=len(positions) - 1 - i, x=x, y=y, status=s)
        for i, ((x, y), s) in enumerate(zip(positions, statuses))
    )
    return pid, steps


def make_cloud(ids, z, x=None, y=None):
    n = len(ids)
    z = np.asarray(z, dtype=float)
    return SurfacePointCloud(
        ids=tuple(ids),
        x_um=np.asarray(x if x is not None else np.arange(n), dtype=float),
        y_um=np.asarray(y if y is not None else np.arange(n), dtype=float),
        z_um=z - z.mean(),
        plane_normal=np.array([0.0, 0.0, 1.0]),
        plane_offset=0.0,
    )


class TestNetDisplacements:
    def test_static_point(self):
        ts = TrackSet(tracks=dict([track("a", [(10.0, 10.0), (10.0, 10.0)])]))
        recs, skipped = analysis.net_displacements(ts, 0.05)
        assert skipped == 0
        assert recs[0].dx_um == 0.0 and recs[0].dy_um == 0.0 and recs[0].dist_um == 0.0

    def test_hand_arithmetic(self):
        # final (100, 100), earliest (103, 87.2) at 0.05 um/px:
        # dx = -3 * 0.05 = -0.15, dy = 12.8 * 0.05 = 0.64,
        # dist = sqrt(0.15^2 + 0.64^2) = sqrt(0.4321) = 0.657343...
        ts = TrackSet(tracks=dict([track("a", [(100.0, 100.0), (103.0, 87.2)])]))
        recs, _ = analysis.net_displacements(ts, 0.05)
        assert recs[0].dx_um == pytest.approx(-0.15, abs=1e-12)
        assert recs[0].dy_um == pytest.approx(0.64, abs=1e-12)
        assert recs[0].dist_um == pytest.approx(0.6573431372, abs=1e-9)

    def test_sign_contract_left_and_down(self):
        # point moved left and down over the experiment: final x smaller,
        # final y larger than at the start
        ts = TrackSet(tracks=dict([track("a", [(90.0, 120.0), (100.0, 100.0)])]))
        recs, _ = analysis.net_displacements(ts, 1.0)
        assert recs[0].dx_um < 0
        assert recs[0].dy_um > 0

    def test_single_position_skipped_with_count(self):
        ts = TrackSet(
            tracks=dict(
                [
                    track("a", [(1.0, 1.0)]),
                    track("b", [(5.0, 5.0), (6.0, 6.0)]),
                ]
            )
        )
        recs, skipped = analysis.net_displacements(ts, 1.0)
        assert skipped == 1
        assert [r.id for r in recs] == ["b"]

    def test_suspect_propagates(self):
        ts = TrackSet(
            tracks=dict(
                [track("a", [(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)], ["tracked", "suspect", "tracked"])]
            )
        )
        recs, _ = analysis.net_displacements(ts, 1.0)
        assert recs[0].suspect

    def test_dist_dominates_components(self):
        rng = np.random.default_rng(0)
        tracks = {}
        for i in range(20):
            a = rng.uniform(0, 100, 2)
            b = rng.uniform(0, 100, 2)
            tracks.update([track(f"p{i}", [tuple(a), tuple(b)])])
        recs, _ = analysis.net_displacements(TrackSet(tracks=tracks), 0.05)
        for r in recs:
            assert r.dist_um >= max(abs(r.dx_um), abs(r.dy_um)) - 1e-12


class TestHistogram:
    def test_hand_counts(self):
        h = analysis.histogram([0.1, 0.1, 0.3], 0.2)
        assert h.edges == (0.0, 0.2, 0.4)
        assert h.counts == (2, 1)

    def test_edge_value_goes_up(self):
        h = analysis.histogram([0.2], 0.2)
        assert h.edges[0] == pytest.approx(0.2)
        assert h.counts == (1,)

    def test_mass_conservation_uniform(self):
        rng = np.random.default_rng(1)
        vals = rng.uniform(0, 1, 1000)
        h = analysis.histogram(vals, 0.1)
        assert sum(h.counts) == 1000
        assert len(h.counts) == 10

    def test_negative_values(self):
        h = analysis.histogram([-0.15, 0.05], 0.1)
        assert h.edges[0] == pytest.approx(-0.2)
        assert sum(h.counts) == 2

    def test_bad_width(self):
        with pytest.raises(InputError, match="bin_width"):
            analysis.histogram([1.0], 0.0)


class TestTwoMeansSplit:
    def test_hand_clustering(self):
        split = analysis.two_means_split([0.4, 0.5, 0.6, 1.4, 1.5, 1.6])
        assert split.lower_mean_um == pytest.approx(0.5, abs=1e-12)
        assert split.upper_mean_um == pytest.approx(1.5, abs=1e-12)
        assert (split.lower_count, split.upper_count) == (3, 3)

    def test_two_point_case(self):
        split = analysis.two_means_split([1.0, 2.0])
        assert split.lower_mean_um == 1.0
        assert split.upper_mean_um == 2.0
        assert split.threshold_um == pytest.approx(1.5)

    def test_identical_values(self):
        with pytest.raises(InputError, match="identical"):
            analysis.two_means_split([1.0, 1.0, 1.0])

    def test_permutation_invariance(self):
        rng = np.random.default_rng(2)
        vals = np.concatenate([rng.normal(0.5, 0.05, 20), rng.normal(1.5, 0.05, 25)])
        a = analysis.two_means_split(vals)
        b = analysis.two_means_split(vals[rng.permutation(len(vals))])
        assert (a.lower_count, a.upper_count) == (b.lower_count, b.upper_count)
        assert b.lower_mean_um == pytest.approx(a.lower_mean_um, rel=1e-12)
        assert b.upper_mean_um == pytest.approx(a.upper_mean_um, rel=1e-12)

    def test_positive_affine_equivariance(self):
        rng = np.random.default_rng(3)
        vals = np.concatenate([rng.normal(0.4, 0.05, 15), rng.normal(1.6, 0.1, 15)])
        a, b = 2.5, 0.7
        s1 = analysis.two_means_split(vals)
        s2 = analysis.two_means_split(a * vals + b)
        assert (s1.lower_count, s1.upper_count) == (s2.lower_count, s2.upper_count)
        assert s2.lower_mean_um == pytest.approx(a * s1.lower_mean_um + b, rel=1e-9)
        assert s2.upper_mean_um == pytest.approx(a * s1.upper_mean_um + b, rel=1e-9)


class TestCorrelation:
    def _records(self, dx, dy):
        return [
            analysis.DisplacementRecord(
                id=f"p{i}",
                dx_um=float(a),
                dy_um=float(b),
                dist_um=float(math.hypot(a, b)),
                suspect=False,
            )
            for i, (a, b) in enumerate(zip(dx, dy))
        ]

    def test_exact_linear_relation(self):
        rng = np.random.default_rng(4)
        dy = rng.uniform(0.2, 2.0, 30)
        dx = rng.normal(0, 0.05, 30)
        recs = self._records(dx, dy)
        cloud = make_cloud([f"p{i}" for i in range(30)], 0.3 * dy)
        corr = analysis.correlate_depth_lateral(cloud, recs)
        assert corr.r_z_dy == pytest.approx(1.0, abs=1e-12)

    def test_independent_axis_near_zero(self):
        rng = np.random.default_rng(5)
        n = 100
        dx = rng.normal(0, 1.0, n)
        dy = rng.uniform(0.5, 1.5, n)
        z = rng.normal(0, 0.1, n)  # independent of dx by construction
        recs = self._records(dx, dy)
        corr = analysis.correlate_depth_lateral(
            make_cloud([f"p{i}" for i in range(n)], z), recs
        )
        assert abs(corr.r_z_dx) < 0.2

    def test_disjoint_ids(self):
        recs = self._records([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        cloud = make_cloud(["q1", "q2", "q3"], [0.1, 0.2, -0.3])
        with pytest.raises(InputError, match="no joined points"):
            analysis.correlate_depth_lateral(cloud, recs)

    def test_too_few_joined(self):
        recs = self._records([1.0, 2.0], [1.0, 2.0])
        cloud = make_cloud(["p0", "p1"], [0.1, -0.1])
        with pytest.raises(InputError, match="fewer than 3"):
            analysis.correlate_depth_lateral(cloud, recs)

    def test_zero_variance(self):
        recs = self._records([1.0, 1.0, 1.0], [2.0, 2.0, 2.0])
        cloud = make_cloud(["p0", "p1", "p2"], [0.1, 0.0, -0.1])
        with pytest.raises(InputError, match="zero variance"):
            analysis.correlate_depth_lateral(cloud, recs)

    def test_pearson_affine_invariance(self):
        rng = np.random.default_rng(6)
        a = rng.normal(size=50)
        b = 0.3 * a + rng.normal(0, 0.5, 50)
        r1 = analysis._pearson(a, b)
        r2 = analysis._pearson(3.0 * a + 1.0, 0.5 * b - 2.0)
        assert r1 == pytest.approx(r2, abs=1e-12)


class TestDisplacementStats:
    def _records(self):
        return [
            analysis.DisplacementRecord("a", -0.1, 0.5, math.hypot(0.1, 0.5), False),
            analysis.DisplacementRecord("b", -0.2, 0.7, math.hypot(0.2, 0.7), True),
            analysis.DisplacementRecord("c", -0.3, 0.9, math.hypot(0.3, 0.9), False),
        ]

    def test_means_exact(self):
        stats = analysis.displacement_stats(self._records(), 0.1)
        assert stats.mean_dx_um == pytest.approx(-0.2, abs=1e-15)
        assert stats.mean_dy_um == pytest.approx(0.7, abs=1e-15)
        assert stats.n_points == 3 and stats.n_suspect == 1

    def test_histogram_mass(self):
        stats = analysis.displacement_stats(self._records(), 0.1)
        for hist in (stats.hist_dx, stats.hist_dy, stats.hist_dist):
            assert sum(hist.counts) == stats.n_points

    def test_exclude_suspect(self):
        stats = analysis.displacement_stats(self._records(), 0.1, include_suspect=False)
        assert stats.n_points == 2 and stats.n_suspect == 0
        assert stats.mean_dx_um == pytest.approx(-0.2, abs=1e-15)

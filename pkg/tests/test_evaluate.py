import math

import numpy as np
import pytest

from ebstar.attitude import SOURCE_EKF, SOURCE_GROUNDTRUTH, AttitudeEstimate
from ebstar.earth import UtcInstant
from ebstar.errors import InsufficientDataError
from ebstar.evaluate import ErrorSample, align_series, error_sample, error_series, summarize
from ebstar.geometry import (
    RAD_PER_ARCSEC,
    UnitQuaternion,
    attitude_from_radec_roll,
    quat_from_axis_angle,
    vec3,
)

T0 = UtcInstant(60616, 10800.0)


def est_at(seconds, q=None, source=SOURCE_EKF):
    return AttitudeEstimate(T0.add_seconds(seconds), q or UnitQuaternion.identity(), source)


def random_quat(rng):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return quat_from_axis_angle(axis, rng.uniform(0, math.pi))


class TestAlignSeries:
    def test_identical_grids(self):
        est = [est_at(k / 20.0) for k in range(100)]
        gt = [est_at(k / 20.0, source=SOURCE_GROUNDTRUTH) for k in range(100)]
        pairs = align_series(est, gt, max_dt=0.01)
        assert len(pairs) == 100
        for e, g in pairs:
            assert e.t.diff_seconds(g.t) == 0.0

    def test_cross_rate_grids(self):
        gt = [est_at(k / 20.0, source=SOURCE_GROUNDTRUTH) for k in range(201)]
        est = [est_at(k / 6.0) for k in range(60)]
        pairs = align_series(est, gt, max_dt=0.026)
        assert len(pairs) == 60
        for e, g in pairs:
            assert abs(e.t.diff_seconds(g.t)) <= 0.025 + 1e-9

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(51)
        est = [est_at(float(t)) for t in np.sort(rng.uniform(0, 50, 40))]
        gt = [est_at(float(t), source=SOURCE_GROUNDTRUTH) for t in np.sort(rng.uniform(0, 50, 70))]
        pairs = align_series(est, gt, max_dt=0.7)
        paired = {id(e): g for e, g in pairs}
        for e in est:
            dts = [abs(e.t.diff_seconds(g.t)) for g in gt]
            jmin = int(np.argmin(dts))
            if dts[jmin] <= 0.7:
                assert paired[id(e)].t.diff_seconds(gt[jmin].t) == 0.0
            else:
                assert id(e) not in paired

    def test_zero_pairs_is_error(self):
        est = [est_at(0.0)]
        gt = [est_at(100.0, source=SOURCE_GROUNDTRUTH)]
        with pytest.raises(InsufficientDataError):
            align_series(est, gt, max_dt=1.0)


class TestErrorSample:
    def test_identity(self):
        rng = np.random.default_rng(52)
        for _ in range(20):
            q = random_quat(rng)
            s = error_sample(q, q)
            assert abs(s.across) < 1e-6  # micro-arcsec float residue
            assert abs(s.about) < 1e-6
            assert s.ra_err == pytest.approx(0.0, abs=1e-6)
            assert s.dec_err == pytest.approx(0.0, abs=1e-6)

    def test_pure_roll_is_about(self):
        # The abstract's about value used as a constructed input.
        gt = attitude_from_radec_roll(11.0, 0.0, 0.0)
        est = gt * quat_from_axis_angle(vec3(0, 0, 1.0), 74.84 * RAD_PER_ARCSEC)
        s = error_sample(est, gt)
        assert s.about == pytest.approx(74.84, abs=1e-6)
        assert s.across == pytest.approx(0.0, abs=1e-9)
        assert s.roll_err == s.about

    def test_pure_tilt_is_across(self):
        gt = attitude_from_radec_roll(11.0, 0.0, 0.0)
        est = gt * quat_from_axis_angle(vec3(1.0, 0, 0), 18.47 * RAD_PER_ARCSEC)
        s = error_sample(est, gt)
        assert s.across == pytest.approx(18.47, abs=1e-6)
        assert abs(s.about) < 1e-6

    def test_dec_tilt_maps_to_dec_err(self):
        gt = attitude_from_radec_roll(11.0, 20.0, 0.0)
        est = attitude_from_radec_roll(11.0, 20.0 + 10.0 / 3600.0, 0.0)
        s = error_sample(est, gt)
        assert s.dec_err == pytest.approx(10.0, abs=1e-6)
        assert s.ra_err == pytest.approx(0.0, abs=1e-6)
        assert s.across == pytest.approx(10.0, abs=1e-3)

    def test_ra_err_scaled_by_cos_dec(self):
        dec = 60.0
        gt = attitude_from_radec_roll(11.0, dec, 0.0)
        est = attitude_from_radec_roll(11.0 + 10.0 / 3600.0, dec, 0.0)
        s = error_sample(est, gt)
        assert s.ra_err == pytest.approx(10.0 * math.cos(math.radians(dec)), abs=1e-6)
        # the on-sky across error matches the scaled RA error
        assert s.across == pytest.approx(abs(s.ra_err), abs=1e-3)

    def test_common_rotation_invariance(self):
        rng = np.random.default_rng(53)
        gt = attitude_from_radec_roll(30.0, 10.0, 45.0)
        est = gt * quat_from_axis_angle(vec3(1, 0, 0), 25.0 * RAD_PER_ARCSEC)
        base = error_sample(est, gt)
        for _ in range(10):
            r = random_quat(rng)
            s = error_sample(r * est, r * gt)
            assert s.across == pytest.approx(base.across, abs=1e-7)
            assert s.about == pytest.approx(base.about, abs=1e-7)


class TestSummarize:
    def sample(self, sec, ra=0.0, dec=0.0, roll=0.0, across=0.0, about=0.0):
        return ErrorSample(T0.add_seconds(sec), ra, dec, roll, across, about)

    def test_all_zero(self):
        rep = summarize([self.sample(k) for k in range(10)])
        assert rep.rmse_across == 0.0
        assert rep.rmse_about == 0.0
        assert rep.dec_drift_rate == pytest.approx(0.0)

    def test_constant_across(self):
        rep = summarize([self.sample(k, across=5.0) for k in range(10)])
        assert rep.rmse_across == pytest.approx(5.0)

    def test_exact_drift_recovered(self):
        # Fig.-4 drift value as a constructed slope: dec_err = 49.15 * t(h).
        samples = [self.sample(k * 60.0, dec=49.15 * (k * 60.0 / 3600.0)) for k in range(61)]
        rep = summarize(samples)
        assert rep.dec_drift_rate == pytest.approx(49.15, abs=1e-9)
        assert rep.dec_drift_residual_rms == pytest.approx(0.0, abs=1e-9)

    def test_rmse_matches_brute_force(self):
        rng = np.random.default_rng(54)
        samples = [
            self.sample(k, across=float(rng.uniform(0, 20)), about=float(rng.normal(0, 30)))
            for k in range(100)
        ]
        rep = summarize(samples)
        brute_across = math.sqrt(sum(s.across**2 for s in samples) / len(samples))
        brute_about = math.sqrt(sum(s.about**2 for s in samples) / len(samples))
        assert rep.rmse_across == pytest.approx(brute_across, abs=1e-12)
        assert rep.rmse_about == pytest.approx(brute_about, abs=1e-12)

    def test_single_sample_no_drift(self):
        rep = summarize([self.sample(0.0, across=3.0)])
        assert rep.rmse_across == pytest.approx(3.0)
        assert rep.dec_drift_rate is None

    def test_window_filter(self):
        samples = [self.sample(float(k), across=float(k)) for k in range(10)]
        rep = summarize(samples, window=(T0.add_seconds(5.0), T0.add_seconds(9.0)))
        assert rep.sample_count == 5

    def test_empty_error(self):
        with pytest.raises(InsufficientDataError):
            summarize([])

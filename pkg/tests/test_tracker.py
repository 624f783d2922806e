import math

import numpy as np
import pytest

from ebstar.attitude import SOURCE_EKF
from ebstar.camera import CameraModel, project_star, unproject_pixel
from ebstar.catalog import Catalog, Star
from ebstar.errors import InsufficientDataError, InvalidArgumentError, LostInSpaceError, OrderingError
from ebstar.evaluate import align_series, error_series, summarize
from ebstar.geometry import (
    RAD_PER_ARCSEC,
    UnitQuaternion,
    attitude_from_radec_roll,
    quat_exp,
    quat_from_axis_angle,
    radec_to_unit,
    rotate_vector,
    vec3,
)
from ebstar.simulator import Event
from ebstar.tracker import EkfState, TrackerConfig, ekf_init, ekf_predict, ekf_process_event, track_stream

CAM = CameraModel(focal_length=0.4, pixel_pitch=4.86e-6, width=1280, height=720)


def star_at_pixel(att, u, v, sid=1, mag=4.0):
    """A catalog star that projects exactly to (u, v) under ``att``."""
    d = rotate_vector(att, unproject_pixel(CAM, u, v))
    return Star(sid, d, mag)


class TestConfig:
    def test_rejects_nonpositive(self):
        with pytest.raises(InvalidArgumentError):
            TrackerConfig(gate_radius=0.0)

    def test_rejects_fast_output(self):
        with pytest.raises(InvalidArgumentError):
            TrackerConfig(output_rate=2000.0)


class TestInit:
    def test_initial_state_is_q0(self):
        att = attitude_from_radec_roll(50.0, 0.0)
        cat = Catalog([star_at_pixel(att, 640.0, 360.0)], 9.0)
        st = ekf_init(cat, CAM, att, TrackerConfig(), 0)
        assert st.q.angle_to(att) == 0.0
        assert np.all(st.w == 0.0)

    def test_empty_fov_is_lost_in_space(self):
        cat = Catalog([Star(1, radec_to_unit(200.0, 0.0), 4.0)], 9.0)
        att = attitude_from_radec_roll(50.0, 0.0)
        with pytest.raises(LostInSpaceError):
            ekf_init(cat, CAM, att, TrackerConfig(), 0)

    def test_prior_covariance_trace(self):
        att = attitude_from_radec_roll(50.0, 0.0)
        cat = Catalog([star_at_pixel(att, 640.0, 360.0)], 9.0)
        cfg = TrackerConfig()
        st = ekf_init(cat, CAM, att, cfg, 0)
        expected = 3 * cfg.prior_attitude_std**2 + 3 * cfg.prior_rate_std**2
        assert np.trace(st.P) == pytest.approx(expected, rel=1e-12)

    def test_track_table_seeded(self):
        att = attitude_from_radec_roll(50.0, 0.0)
        cat = Catalog([star_at_pixel(att, 640.0, 360.0), star_at_pixel(att, 100.0, 100.0, sid=2)], 9.0)
        st = ekf_init(cat, CAM, att, TrackerConfig(), 0)
        assert set(st.track_table) == {1, 2}


class TestPredict:
    def make_state(self):
        att = attitude_from_radec_roll(50.0, 0.0)
        cat = Catalog([star_at_pixel(att, 640.0, 360.0)], 9.0)
        return ekf_init(cat, CAM, att, TrackerConfig(), 0)

    def test_zero_dt_identity(self):
        st = self.make_state()
        q_before = st.q
        p_before = st.P.copy()
        ekf_predict(st, 0)
        assert st.q is q_before
        assert np.array_equal(st.P, p_before)

    def test_closed_form_rotation(self):
        # Rate of 15.04 deg/h about the ICRF pole for one hour; camera
        # frame aligned with ICRF so body rate equals inertial rate.
        cat = Catalog([Star(1, vec3(0.0, 0.0, 1.0), 4.0)], 9.0)
        st = ekf_init(cat, CAM, UnitQuaternion.identity(), TrackerConfig(), 0)
        rate = math.radians(15.04) / 3600.0
        st.w = np.array([0.0, 0.0, rate])
        ekf_predict(st, 3_600_000_000)
        expected = quat_exp(np.array([0.0, 0.0, math.radians(15.04)]))
        assert st.q.angle_to(expected) < 1e-9

    def test_covariance_grows(self):
        st = self.make_state()
        tr0 = np.trace(st.P)
        ekf_predict(st, 1_000_000)
        assert np.trace(st.P) > tr0

    def test_out_of_order_rejected(self):
        st = self.make_state()
        ekf_predict(st, 1_000_000)
        with pytest.raises(OrderingError):
            ekf_predict(st, 500_000)


class TestProcessEvent:
    def setup_single_star(self):
        att = attitude_from_radec_roll(50.0, 0.0)
        cat = Catalog([star_at_pixel(att, 640.0, 360.0)], 9.0)
        cfg = TrackerConfig(min_batch=8)
        st = ekf_init(cat, CAM, att, cfg, 0)
        return st, cat, att, cfg

    def test_zero_residual_leaves_attitude(self):
        st, cat, att, cfg = self.setup_single_star()
        for k in range(cfg.min_batch):
            ekf_process_event(st, Event(k + 1, 640, 360, 1), CAM, cat)
        # batch completed with zero residual: attitude unchanged, P reduced
        assert st.q.angle_to(att) < 1e-12
        assert st.track_table[1].n == 0

    def test_far_event_ignored(self):
        st, cat, att, cfg = self.setup_single_star()
        far = int(640 + 2 * cfg.gate_radius)
        ekf_process_event(st, Event(1, far, 360, 1), CAM, cat)
        assert st.q.angle_to(att) == 0.0
        assert st.track_table[1].n == 0

    def test_negative_polarity_only_advances_time(self):
        st, cat, att, cfg = self.setup_single_star()
        ekf_process_event(st, Event(5, 640, 360, -1), CAM, cat)
        assert st.track_table[1].n == 0
        assert st.t_us == 5

    def test_out_of_order_event_rejected(self):
        st, cat, att, cfg = self.setup_single_star()
        ekf_process_event(st, Event(10, 640, 360, 1), CAM, cat)
        with pytest.raises(OrderingError):
            ekf_process_event(st, Event(5, 640, 360, 1), CAM, cat)

    def test_tie_goes_to_brighter_star(self):
        # Bit-exact distance tie: two stars sharing a line of sight.
        att = attitude_from_radec_roll(50.0, 0.0)
        cat = Catalog(
            [star_at_pixel(att, 642.0, 360.0, sid=1, mag=6.0), star_at_pixel(att, 642.0, 360.0, sid=2, mag=3.0)],
            9.0,
        )
        st = ekf_init(cat, CAM, att, TrackerConfig(), 0)
        ekf_process_event(st, Event(1, 640, 360, 1), CAM, cat)
        assert st.track_table[2].n == 1
        assert st.track_table[1].n == 0

    def test_update_reduces_offset(self):
        # Measurements at a fixed pixel offset pull the attitude toward
        # the implied correction: residual after the batch is smaller.
        st, cat, att, cfg = self.setup_single_star()
        for k in range(cfg.min_batch):
            ekf_process_event(st, Event(k + 1, 644, 360, 1), CAM, cat)
        uv = project_star(CAM, st.q, cat.stars[0].dir)
        # predicted pixel moved toward the measured cluster at 644
        assert uv[0] > 640.0
        resid_after = 644.0 - uv[0]
        assert 0.0 <= resid_after < 4.0


class TestTrackStream:
    def test_estimate_count_60s(self, sim_two_minutes, dense_catalog, cam400, t0):
        ev, pps, truth = sim_two_minutes
        sel = ev[ev["t_us"] <= 60_000_000]
        pps60 = [a for a in pps if a.t_event_us <= 60_000_000]
        est = track_stream(sel, pps60, dense_catalog, cam400, TrackerConfig(), truth[0].q)
        assert abs(len(est) - 1200) <= 1

    def test_requires_two_anchors(self, sim_two_minutes, dense_catalog, cam400):
        ev, pps, truth = sim_two_minutes
        with pytest.raises(InsufficientDataError):
            track_stream(ev, pps[:1], dense_catalog, cam400, TrackerConfig(), truth[0].q)

    def test_empty_stream_pure_prediction(self, sim_two_minutes, dense_catalog, cam400):
        from ebstar.simulator import EVENT_DTYPE

        _, pps, truth = sim_two_minutes
        est = track_stream(
            np.zeros(0, dtype=EVENT_DTYPE), pps[:11], dense_catalog, cam400, TrackerConfig(), truth[0].q
        )
        assert len(est) == 201  # 10 s of pure prediction at 20 Hz
        for e in est:
            assert e.source == SOURCE_EKF
            assert e.q.angle_to(truth[0].q) < math.radians(0.1)

    def test_deterministic(self, sim_two_minutes, dense_catalog, cam400):
        ev, pps, truth = sim_two_minutes
        sel = ev[ev["t_us"] <= 20_000_000]
        pps_s = [a for a in pps if a.t_event_us <= 20_000_000]
        e1 = track_stream(sel, pps_s, dense_catalog, cam400, TrackerConfig(), truth[0].q)
        e2 = track_stream(sel, pps_s, dense_catalog, cam400, TrackerConfig(), truth[0].q)
        assert len(e1) == len(e2)
        for a, b in zip(e1, e2):
            assert a.t == b.t
            assert a.q.as_array().tobytes() == b.q.as_array().tobytes()

    def test_timestamps_increase_and_continuity(self, sim_two_minutes, dense_catalog, cam400, t0):
        ev, pps, truth = sim_two_minutes
        est = track_stream(ev, pps, dense_catalog, cam400, TrackerConfig(), truth[0].q)
        sidereal_step = math.radians(15.041 / 3600.0) * 0.05
        prev = None
        for e in est:
            if prev is not None:
                assert e.t.diff_seconds(prev.t) > 0
                if e.t.diff_seconds(t0) > 5.0:
                    assert prev.q.angle_to(e.q) < 10.0 * sidereal_step
            prev = e

    def test_converges_from_20_arcsec_offset(self, sim_two_minutes, dense_catalog, cam400, t0):
        ev, pps, truth = sim_two_minutes
        pert = quat_from_axis_angle(vec3(1, 1, 1) / math.sqrt(3), 20.0 * RAD_PER_ARCSEC)
        est = track_stream(ev, pps, dense_catalog, cam400, TrackerConfig(), truth[0].q * pert)
        pairs = align_series(est, truth, max_dt=0.026)
        late = [(e, g) for e, g in pairs if e.t.diff_seconds(t0) > 30.0]
        rep = summarize(error_series(late))
        assert rep.rmse_across < 2.52  # one pixel at the 400 mm optics

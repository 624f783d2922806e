"""Event-driven extended Kalman filter on SO(3) for camera attitude in ICRF.

Error-state (multiplicative) formulation with a 3+3 state: body-frame
attitude error and angular rate.  The nominal quaternion is the camera
attitude in ICRF; the rate lives in the body frame.  Measurements are
per-star centroids of batched positive events, compared to the gnomonic
projection of the catalog direction.

Negative-polarity events never contribute measurements; matched positive
events accumulate per-star running centroids, and each time a star's
batch reaches ``min_batch`` events one 2-pixel EKF update is applied and
the batch resets.  No magnitude-dependent centroid correction is applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .attitude import SOURCE_EKF, AttitudeEstimate
from .camera import CameraModel, project_star, project_stars
from .catalog import Catalog, stars_in_fov
from .errors import InsufficientDataError, InvalidArgumentError, LostInSpaceError, OrderingError
from .geometry import UnitQuaternion, quat_exp, rotate_vectors
from .simulator import EVENT_DTYPE, Event
from .timesync import PpsAnchor, build_time_map, to_utc


@dataclass(frozen=True)
class TrackerConfig:
    gate_radius: float = 12.0  # px
    process_noise_attitude: float = 1e-13  # rad^2 / s
    process_noise_rate: float = 1e-16  # rad^2 / s^3
    measurement_noise: float = 0.25  # px^2 per centroid axis
    output_rate: float = 20.0  # Hz
    min_batch: int = 8  # positive events per star update
    prior_attitude_std: float = 1.5e-4  # rad (~30 arcsec)
    prior_rate_std: float = 1e-4  # rad / s
    fov_refresh_s: float = 1.0  # cadence for re-querying stars in FOV

    def __post_init__(self):
        for name in (
            "gate_radius",
            "process_noise_attitude",
            "process_noise_rate",
            "measurement_noise",
            "output_rate",
            "prior_attitude_std",
            "prior_rate_std",
            "fov_refresh_s",
        ):
            if getattr(self, name) <= 0:
                raise InvalidArgumentError(f"{name} must be positive")
        if self.min_batch < 1:
            raise InvalidArgumentError("min_batch must be >= 1")
        if self.output_rate > 1000.0:
            raise InvalidArgumentError("output_rate must be <= 1000 Hz")


@dataclass
class StarTrack:
    """Per-star association state: running centroid of matched positives."""

    sum_u: float = 0.0
    sum_v: float = 0.0
    n: int = 0
    last_event_us: int = -1


@dataclass
class EkfState:
    q: UnitQuaternion
    w: np.ndarray  # rad/s, body frame
    P: np.ndarray  # 6x6 (attitude error, rate error)
    t_us: int
    cfg: TrackerConfig
    track_table: dict[int, StarTrack] = field(default_factory=dict)


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


def _rotation_matrix(rotvec: np.ndarray) -> np.ndarray:
    angle = float(np.linalg.norm(rotvec))
    if angle < 1e-12:
        return np.eye(3) + _skew(rotvec)
    axis = rotvec / angle
    k = _skew(axis)
    return np.eye(3) + math.sin(angle) * k + (1.0 - math.cos(angle)) * (k @ k)


def _transition(w: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Error-state transition and discrete process noise over dt seconds."""
    f = np.eye(6)
    f[:3, :3] = _rotation_matrix(-w * dt)
    f[:3, 3:] = np.eye(3) * dt
    return f, f


def _process_noise(cfg: TrackerConfig, dt: float) -> np.ndarray:
    qa = cfg.process_noise_attitude
    qr = cfg.process_noise_rate
    q = np.zeros((6, 6))
    q[:3, :3] = np.eye(3) * (qa * dt + qr * dt**3 / 3.0)
    q[:3, 3:] = np.eye(3) * (qr * dt**2 / 2.0)
    q[3:, :3] = q[:3, 3:]
    q[3:, 3:] = np.eye(3) * (qr * dt)
    return q


def _assert_psd(p: np.ndarray) -> np.ndarray:
    """Symmetrize, check eigenvalues >= -1e-12, floor tiny negatives at zero."""
    p = 0.5 * (p + p.T)
    eig, vec = np.linalg.eigh(p)
    if eig.min() < -1e-12:
        raise AssertionError(f"covariance lost positive semidefiniteness: min eig {eig.min()}")
    if eig.min() < 0.0:
        p = (vec * np.maximum(eig, 0.0)) @ vec.T
        p = 0.5 * (p + p.T)
    return p


def ekf_init(
    cat: Catalog, cam: CameraModel, q0: UnitQuaternion, cfg: TrackerConfig, t0_us: int
) -> EkfState:
    """State at q0 with zero rate and the configured prior covariance."""
    visible = stars_in_fov(cat, q0, cam)
    if not visible:
        raise LostInSpaceError("no catalog stars in the initial field of view")
    p = np.zeros((6, 6))
    p[:3, :3] = np.eye(3) * cfg.prior_attitude_std**2
    p[3:, 3:] = np.eye(3) * cfg.prior_rate_std**2
    state = EkfState(q=q0, w=np.zeros(3), P=p, t_us=int(t0_us), cfg=cfg)
    for star, _ in visible:
        state.track_table[star.id] = StarTrack()
    return state


def ekf_predict(state: EkfState, t_us: int) -> EkfState:
    """Propagate the nominal state and covariance to ``t_us``."""
    if t_us < state.t_us:
        raise OrderingError(f"prediction time {t_us} precedes state time {state.t_us}")
    dt = (t_us - state.t_us) * 1e-6
    if dt == 0.0:
        return state
    state.q = state.q * quat_exp(state.w * dt)
    f, _ = _transition(state.w, dt)
    state.P = f @ state.P @ f.T + _process_noise(state.cfg, dt)
    state.P = 0.5 * (state.P + state.P.T)
    state.t_us = t_us
    return state


def _measurement_jacobian(
    cam: CameraModel, state_q: UnitQuaternion, star_dir: np.ndarray
) -> tuple[np.ndarray, np.ndarray] | None:
    """Predicted pixel and 2x6 Jacobian for one star; None if behind camera."""
    d_cam = rotate_vectors(state_q.conjugate(), star_dir[None, :])[0]
    if d_cam[2] <= 0.0:
        return None
    s = cam.focal_length / cam.pixel_pitch
    dx, dy, dz = d_cam
    cx, cy = cam.principal_point
    uv = np.array([cx + s * dx / dz, cy + s * dy / dz])
    j_pix = (s / dz) * np.array([[1.0, 0.0, -dx / dz], [0.0, 1.0, -dy / dz]])
    h = np.zeros((2, 6))
    h[:, :3] = j_pix @ _skew(d_cam)
    return uv, h


def _apply_update(state: EkfState, cam: CameraModel, star_dir: np.ndarray, centroid_uv: np.ndarray):
    pred = _measurement_jacobian(cam, state.q, star_dir)
    if pred is None:
        return
    uv, h = pred
    r = centroid_uv - uv
    rmat = np.eye(2) * state.cfg.measurement_noise
    s_mat = h @ state.P @ h.T + rmat
    k = state.P @ h.T @ np.linalg.inv(s_mat)
    dx = k @ r
    state.q = state.q * quat_exp(dx[:3])
    state.w = state.w + dx[3:]
    ikh = np.eye(6) - k @ h
    state.P = ikh @ state.P @ ikh.T + k @ rmat @ k.T
    state.P = _assert_psd(state.P)


def ekf_process_event(state: EkfState, e: Event, cam: CameraModel, cat: Catalog) -> EkfState:
    """Predict to the event time, associate, and batch-update.

    The event is matched to the nearest predicted in-FOV star within the
    gate radius (ties go to the brighter star).  Positive matched events
    accumulate the star's running centroid; at ``min_batch`` events a
    measurement update is applied and the batch resets.  Everything else
    only advances time.
    """
    if e.t_us < state.t_us:
        raise OrderingError(f"event at {e.t_us} precedes state time {state.t_us}")
    ekf_predict(state, e.t_us)
    visible = stars_in_fov(cat, state.q, cam)
    if not visible:
        return state
    best = None
    for star, (u, v) in visible:
        d2 = (u - e.x) ** 2 + (v - e.y) ** 2
        key = (d2, star.mag, star.id)
        if best is None or key < best[0]:
            best = (key, star, u, v)
    (d2, _, _), star, _, _ = best
    if d2 > state.cfg.gate_radius**2 or e.polarity <= 0:
        return state
    track = state.track_table.setdefault(star.id, StarTrack())
    track.sum_u += e.x
    track.sum_v += e.y
    track.n += 1
    track.last_event_us = e.t_us
    if track.n >= state.cfg.min_batch:
        centroid = np.array([track.sum_u / track.n, track.sum_v / track.n])
        _apply_update(state, cam, star.dir, centroid)
        state.track_table[star.id] = StarTrack()
    return state


def track_stream(
    events: np.ndarray,
    pps: list[PpsAnchor],
    cat: Catalog,
    cam: CameraModel,
    cfg: TrackerConfig,
    q0: UnitQuaternion,
) -> list[AttitudeEstimate]:
    """Run the filter over a sorted event stream, emitting at output_rate.

    Estimate ticks sit on the device-clock grid anchored at the first PPS
    anchor; UTC timestamps come from the PPS time map.  Covariance is
    propagated between measurement and emission epochs rather than per
    event, which is algebraically the composed transition.
    """
    if len(pps) < 2:
        raise InsufficientDataError("track_stream needs at least 2 PPS anchors")
    tmap = build_time_map(list(pps))
    if events.dtype != EVENT_DTYPE:
        raise InvalidArgumentError("events must use the simulator event dtype")
    if events.size and np.any(np.diff(events["t_us"].astype(np.int64)) < 0):
        raise OrderingError("event stream must be sorted by t_us")

    anchor_us = pps[0].t_event_us
    tick_us = 1e6 / cfg.output_rate
    if events.size:
        begin_us = int(events["t_us"][0])
        end_us = int(events["t_us"][-1])
    else:
        begin_us = pps[0].t_event_us
        end_us = pps[-1].t_event_us

    state = ekf_init(cat, cam, q0, cfg, begin_us)

    k0 = math.ceil((begin_us - anchor_us) / tick_us - 1e-9)
    k1 = math.floor((end_us - anchor_us) / tick_us + 1e-9)
    ticks = np.array([int(round(anchor_us + k * tick_us)) for k in range(k0, k1 + 1)], dtype=np.int64)

    estimates: list[AttitudeEstimate] = []

    # Cached star predictions used for association.  The cache is rebuilt
    # on the fov_refresh cadence; within one emission window the predicted
    # pixels move well under a pixel, far inside the gate.
    pred_ids: np.ndarray = np.zeros(0, dtype=np.int64)
    pred_dirs: np.ndarray = np.zeros((0, 3))
    pred_uv: np.ndarray = np.zeros((0, 2))

    def q_at(t_us: int) -> UnitQuaternion:
        dt = (t_us - state.t_us) * 1e-6
        if dt == 0.0:
            return state.q
        return state.q * quat_exp(state.w * dt)

    def advance_full(t_us: int):
        dt = (t_us - state.t_us) * 1e-6
        if dt <= 0.0:
            return
        state.q = state.q * quat_exp(state.w * dt)
        f, _ = _transition(state.w, dt)
        state.P = f @ state.P @ f.T + _process_noise(cfg, dt)
        state.P = 0.5 * (state.P + state.P.T)
        state.t_us = t_us

    def refresh_fov(t_us: int):
        nonlocal pred_ids, pred_dirs, pred_uv
        vis = stars_in_fov(cat, q_at(t_us), cam, margin_px=cfg.gate_radius)
        pred_ids = np.array([s.id for s, _ in vis], dtype=np.int64)
        pred_dirs = np.array([s.dir for s, _ in vis]).reshape(-1, 3)
        pred_uv = np.array([uv for _, uv in vis]).reshape(-1, 2)
        live = set(int(i) for i in pred_ids)
        for sid in list(state.track_table):
            if sid not in live:
                del state.track_table[sid]
        for sid in pred_ids:
            state.track_table.setdefault(int(sid), StarTrack())

    refresh_fov(begin_us)
    next_refresh_us = begin_us + int(cfg.fov_refresh_s * 1e6)
    gate2 = cfg.gate_radius**2

    ev_t = events["t_us"].astype(np.int64)
    ev_x = events["x"].astype(np.float64)
    ev_y = events["y"].astype(np.float64)
    ev_pos = events["p"] > 0

    # Window boundaries: every emission tick plus the stream end.
    bounds = ticks.tolist() + ([end_us + 1] if (ticks.size == 0 or ticks[-1] <= end_us) else [])
    cut = np.searchsorted(ev_t, np.array(bounds, dtype=np.int64), side="left")

    def process_window(i0: int, i1: int):
        """Associate and batch-update all events with indices [i0, i1)."""
        nonlocal next_refresh_us
        if i1 <= i0:
            return
        w_start = int(ev_t[i0])
        if w_start >= next_refresh_us:
            refresh_fov(w_start)
            next_refresh_us += int(cfg.fov_refresh_s * 1e6)
        if pred_ids.size == 0:
            return
        sel = np.flatnonzero(ev_pos[i0:i1]) + i0
        if sel.size == 0:
            return
        ex = ev_x[sel]
        ey = ev_y[sel]
        d2 = (pred_uv[:, 0][None, :] - ex[:, None]) ** 2 + (pred_uv[:, 1][None, :] - ey[:, None]) ** 2
        j_star = np.argmin(d2, axis=1)
        ok = d2[np.arange(sel.size), j_star] <= gate2
        if not np.any(ok):
            return
        sel = sel[ok]
        ex = ex[ok]
        ey = ey[ok]
        j_star = j_star[ok]

        # Per-star batching with carry-over: collect batches that complete
        # inside this window and apply them in event order.
        completed: list[tuple[int, int, float, float]] = []  # (event idx, star row, cu, cv)
        for row in np.unique(j_star):
            sid = int(pred_ids[row])
            track = state.track_table.setdefault(sid, StarTrack())
            members = np.flatnonzero(j_star == row)
            mu = ex[members]
            mv = ey[members]
            n_have = track.n
            su = track.sum_u
            sv = track.sum_v
            pos = 0
            while members.size - pos >= cfg.min_batch - n_have:
                take = cfg.min_batch - n_have
                su += float(mu[pos : pos + take].sum())
                sv += float(mv[pos : pos + take].sum())
                complete_at = int(sel[members[pos + take - 1]])
                completed.append((complete_at, int(row), su / cfg.min_batch, sv / cfg.min_batch))
                pos += take
                n_have = 0
                su = sv = 0.0
            if pos < members.size:
                su += float(mu[pos:].sum())
                sv += float(mv[pos:].sum())
                n_have += members.size - pos
            track.n = n_have
            track.sum_u = su
            track.sum_v = sv
            track.last_event_us = int(sel[members[-1]])

        completed.sort(key=lambda c: c[0])
        for t_ev, row, cu, cv in completed:
            advance_full(t_ev)
            _apply_update(state, cam, pred_dirs[row], np.array([cu, cv]))

    prev = int(cut[0]) if len(bounds) else 0
    # Events before the first tick:
    process_window(0, prev)
    for b in range(len(ticks)):
        lo = prev
        hi = int(cut[b])
        process_window(lo, hi)
        prev = hi
        t_tick = int(ticks[b])
        advance_full(t_tick)
        estimates.append(
            AttitudeEstimate(to_utc(tmap, t_tick), state.q, SOURCE_EKF, cov=state.P[:3, :3].copy())
        )
    return estimates

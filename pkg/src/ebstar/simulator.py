"""Synthetic event streams of a star field seen by a static, Earth-fixed
pinhole event camera.

The renderer tracks per-pixel log intensity of the star field (isotropic
Gaussian PSFs over a constant unit background) on a fixed 1 ms internal
tick and emits an event each time the log level moves one contrast
threshold away from the level at the pixel's previous event.  Event times
are interpolated inside the tick.  Star image positions are interpolated
linearly inside each 1 s chunk, which at the supported star speeds keeps
the path error far below a hundredth of a pixel.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .attitude import SOURCE_SIM_TRUTH, AttitudeEstimate
from .camera import CameraModel, project_star, project_stars, unproject_pixel  # noqa: F401  (re-export)
from .catalog import Catalog, stars_in_fov
from .earth import EopTable, UtcInstant, earth_attitude
from .errors import InvalidArgumentError
from .geometry import (
    RAD_PER_ARCSEC,
    UnitQuaternion,
    quat_from_axis_angle,
    radec_to_unit,
    rotate_vector,
    unit_to_skycoord,
    vec3,
)
from .timesync import PpsAnchor

EVENT_DTYPE = np.dtype([("t_us", np.int64), ("x", np.int16), ("y", np.int16), ("p", np.int8)])

_TICK_S = 0.001
_CHUNK_S = 1.0
_TRUTH_HZ = 20.0


@dataclass(frozen=True)
class Event:
    """One pixel change: device-clock timestamp, pixel, polarity (+1/-1)."""

    t_us: int
    x: int
    y: int
    polarity: int


def events_to_array(events: list[Event]) -> np.ndarray:
    arr = np.zeros(len(events), dtype=EVENT_DTYPE)
    for i, e in enumerate(events):
        arr[i] = (e.t_us, e.x, e.y, e.polarity)
    return arr


@dataclass(frozen=True)
class SimConfig:
    contrast_threshold: float = 0.15  # log-intensity units
    psf_sigma: float = 0.8  # pixels
    refractory_us: float = 100.0
    noise_rate: float = 1e-4  # events / pixel / second
    mag_zero_flux: float = 2000.0  # flux at magnitude 0, in background units
    seed: int = 0
    drift_dec_rate: float = 0.0  # arcsec / hour of injected mount drift
    clock_skew_ppm: float = 0.0  # device clock runs (1 + ppm*1e-6) x true rate

    def __post_init__(self):
        if self.contrast_threshold <= 0:
            raise InvalidArgumentError("contrast_threshold must be positive")
        for name in ("psf_sigma", "refractory_us", "noise_rate", "mag_zero_flux"):
            if getattr(self, name) < 0:
                raise InvalidArgumentError(f"{name} must be nonnegative")


def image_plane_speed(f: float, s_deg_per_s: float, x: float) -> float:
    """Image-plane star speed in px/s for angular rate ``s`` (degrees/second).

    ``s`` is treated as the angle swept in one second, so the pinhole
    relation is evaluated as f * tan(s) / x.
    """
    if f <= 0 or x <= 0:
        raise InvalidArgumentError("focal length and pixel size must be positive")
    return f * math.tan(math.radians(s_deg_per_s)) / x


def focal_length_for_speed(p: float, s_deg_per_s: float, x: float) -> float:
    """Focal length in meters producing image speed ``p`` at angular rate ``s``."""
    if p < 0:
        raise InvalidArgumentError("pixel speed must be nonnegative")
    if s_deg_per_s <= 0 or x <= 0:
        raise InvalidArgumentError("angular rate and pixel size must be positive")
    return p * x / math.tan(math.radians(s_deg_per_s))


class StaticSiteTrajectory:
    """Camera attitude over time for a camera rigidly fixed to the Earth.

    C(t) = E(t) * (E(t0)^-1 * C(t0)), optionally composed with a slow
    rotation about the camera-fixed mount declination axis to model
    gravity-induced mount drift.
    """

    def __init__(
        self,
        cam0_attitude: UnitQuaternion,
        eop: EopTable,
        t0: UtcInstant,
        drift_dec_rate_arcsec_per_hour: float = 0.0,
    ):
        self.eop = eop
        self.t0 = t0
        self.q_mount = earth_attitude(eop, t0).conjugate() * cam0_attitude
        self._drift_rate_rad_s = drift_dec_rate_arcsec_per_hour * RAD_PER_ARCSEC / 3600.0
        if self._drift_rate_rad_s != 0.0:
            boresight = rotate_vector(cam0_attitude, vec3(0.0, 0.0, 1.0))
            c = unit_to_skycoord(boresight)
            ra = math.radians(c.ra)
            dec = math.radians(c.dec)
            north = np.array(
                [-math.cos(ra) * math.sin(dec), -math.sin(ra) * math.sin(dec), math.cos(dec)]
            )
            axis_icrf = np.cross(boresight, north)
            self._drift_axis_cam = rotate_vector(cam0_attitude.conjugate(), axis_icrf)
        else:
            self._drift_axis_cam = None

    def __call__(self, t: UtcInstant) -> UnitQuaternion:
        q = earth_attitude(self.eop, t) * self.q_mount
        if self._drift_axis_cam is not None:
            angle = self._drift_rate_rad_s * t.diff_seconds(self.t0)
            q = q * quat_from_axis_angle(self._drift_axis_cam, angle)
        return q


def static_site_trajectory(
    cam0_attitude: UnitQuaternion,
    eop: EopTable,
    t0: UtcInstant,
    drift_dec_rate_arcsec_per_hour: float = 0.0,
) -> StaticSiteTrajectory:
    return StaticSiteTrajectory(cam0_attitude, eop, t0, drift_dec_rate_arcsec_per_hour)


def attitude_of_radec(ra_deg: float, dec_deg: float, roll_deg: float = 0.0) -> UnitQuaternion:
    """Convenience re-export used by scenario configs."""
    from .geometry import attitude_from_radec_roll

    return attitude_from_radec_roll(ra_deg, dec_deg, roll_deg)


def _threshold_crossings(levels, t_edges, ref, last_t, theta, refractory_us, out_times, out_pols):
    """Walk one pixel's log-level series, appending crossing events.

    The series is split into monotone runs; inside a run the crossing
    levels are an arithmetic progression and their times come from linear
    interpolation.  Crossings that land inside the refractory window are
    dropped without advancing the reference level.  Returns the updated
    (ref, last_t).
    """
    d = np.diff(levels)
    s = np.sign(d)
    nz = np.flatnonzero(s)
    if nz.size == 0:
        return ref, last_t
    sf = s[nz]
    change = np.flatnonzero(sf[1:] != sf[:-1])
    run_starts = np.concatenate(([0], change + 1))
    run_ends = np.concatenate((change, [sf.size - 1]))
    for rs, re_ in zip(run_starts, run_ends):
        i0 = int(nz[rs])
        i1 = int(nz[re_]) + 1
        direction = sf[rs]
        l_seg = levels[i0 : i1 + 1]
        t_seg = t_edges[i0 : i1 + 1]
        if direction > 0:
            m = int(math.floor((l_seg[-1] - ref) / theta))
            if m >= 1:
                lv = ref + theta * np.arange(1, m + 1)
                lv = lv[lv <= l_seg[-1]]  # guard against floor() rounding past the peak
                times = np.interp(lv, l_seg, t_seg)
                for i in range(lv.size):
                    if times[i] - last_t >= refractory_us:
                        out_times.append(times[i])
                        out_pols.append(1)
                        ref = lv[i]
                        last_t = times[i]
        else:
            m = int(math.floor((ref - l_seg[-1]) / theta))
            if m >= 1:
                lv = ref - theta * np.arange(1, m + 1)
                lv = lv[lv >= l_seg[-1]]
                times = np.interp(-lv, -l_seg, t_seg)
                for i in range(lv.size):
                    if times[i] - last_t >= refractory_us:
                        out_times.append(times[i])
                        out_pols.append(-1)
                        ref = lv[i]
                        last_t = times[i]
    return ref, last_t


def generate_events(
    trajectory,
    cat: Catalog,
    cam: CameraModel,
    cfg: SimConfig,
    t0: UtcInstant,
    duration_s: float,
) -> tuple[np.ndarray, list[PpsAnchor], list[AttitudeEstimate]]:
    """Render the event stream, PPS anchors, and 20 Hz truth series.

    Deterministic for a fixed (config, seed): the star signal is purely
    geometric and the background noise comes from a seeded generator.
    """
    if duration_s <= 0:
        raise InvalidArgumentError("duration must be positive")
    rng = np.random.default_rng(cfg.seed)
    skew = 1.0 + cfg.clock_skew_ppm * 1e-6
    theta = cfg.contrast_threshold
    sigma = cfg.psf_sigma
    inv_two_sig2 = 1.0 / (2.0 * sigma * sigma)
    stamp_r = math.ceil(3.0 * sigma) + 1
    n_chunks = int(math.ceil(duration_s / _CHUNK_S))

    ref_level: dict[int, float] = {}
    last_event_t: dict[int, float] = {}

    chunk_t: list[np.ndarray] = []
    chunk_x: list[np.ndarray] = []
    chunk_y: list[np.ndarray] = []
    chunk_p: list[np.ndarray] = []
    saw_star = False

    att_next = trajectory(t0)
    for c in range(n_chunks):
        c0_s = c * _CHUNK_S
        c1_s = min((c + 1) * _CHUNK_S, duration_s)
        span_s = c1_s - c0_s
        if span_s <= 0:
            break
        n_ticks = max(1, int(round(span_s / _TICK_S)))
        att0 = att_next
        att_next = trajectory(t0.add_seconds(c1_s))
        att1 = att_next

        margin = stamp_r + 8.0
        cand: dict[int, np.ndarray] = {}
        for star, _ in stars_in_fov(cat, att0, cam, margin_px=margin):
            cand[star.id] = star.dir
        for star, _ in stars_in_fov(cat, att1, cam, margin_px=margin):
            cand.setdefault(star.id, star.dir)
        star_ids = sorted(cand)
        if star_ids:
            saw_star = True
        if not star_ids:
            continue

        dirs = np.array([cand[sid] for sid in star_ids])
        mags = np.array(
            [cat.mags[np.searchsorted(cat.ids, sid)] for sid in star_ids]
        )
        uv0, f0 = project_stars(cam, att0, dirs)
        uv1, f1 = project_stars(cam, att1, dirs)
        ok = f0 & f1
        if not np.any(ok):
            continue
        uv0, uv1 = uv0[ok], uv1[ok]
        amps = cfg.mag_zero_flux * 10.0 ** (-0.4 * mags[ok]) / (2.0 * math.pi * sigma * sigma)

        # Device-clock tick edges for this chunk (microseconds, float).
        dev0 = c0_s * 1e6 * skew
        tick_dev_us = (span_s / n_ticks) * 1e6 * skew
        t_edges = dev0 + np.arange(n_ticks + 1) * tick_dev_us
        tau = np.arange(n_ticks + 1) / n_ticks

        # Accumulate star intensity (in background units) per active pixel.
        # The Gaussian separates into row and column factors, so each star
        # costs (nx + ny) * nticks exponentials instead of nx * ny * nticks.
        pid_blocks: list[np.ndarray] = []
        contrib_blocks: list[np.ndarray] = []
        for s in range(uv0.shape[0]):
            u_t = uv0[s, 0] + (uv1[s, 0] - uv0[s, 0]) * tau
            v_t = uv0[s, 1] + (uv1[s, 1] - uv0[s, 1]) * tau
            x_lo = max(0, int(math.floor(min(u_t[0], u_t[-1]) - stamp_r)))
            x_hi = min(cam.width - 1, int(math.ceil(max(u_t[0], u_t[-1]) + stamp_r)))
            y_lo = max(0, int(math.floor(min(v_t[0], v_t[-1]) - stamp_r)))
            y_hi = min(cam.height - 1, int(math.ceil(max(v_t[0], v_t[-1]) + stamp_r)))
            if x_hi < x_lo or y_hi < y_lo:
                continue
            xs = np.arange(x_lo, x_hi + 1)
            ys = np.arange(y_lo, y_hi + 1)
            ex = np.exp(-((xs[:, None] - u_t[None, :]) ** 2) * inv_two_sig2) * amps[s]
            ey = np.exp(-((ys[:, None] - v_t[None, :]) ** 2) * inv_two_sig2)
            contrib_blocks.append((ey[:, None, :] * ex[None, :, :]).reshape(-1, n_ticks + 1))
            pid_blocks.append((ys[:, None] * cam.width + xs[None, :]).ravel().astype(np.int64))
        if not pid_blocks:
            continue
        pids_all = np.concatenate(pid_blocks)
        order_p = np.argsort(pids_all, kind="stable")
        sorted_pids = pids_all[order_p]
        group_starts = np.concatenate(([0], np.flatnonzero(np.diff(sorted_pids)) + 1))
        counts = np.diff(np.concatenate((group_starts, [sorted_pids.size])))
        contrib_sorted = np.vstack(contrib_blocks)[order_p]
        uniq = sorted_pids[group_starts]
        if counts.max() == 1:
            inten = contrib_sorted
        else:
            # Overlapping stamps are rare; sum just the duplicated rows.
            inten = contrib_sorted[group_starts].copy()
            for g in np.flatnonzero(counts > 1):
                s0 = group_starts[g]
                inten[g] = contrib_sorted[s0 : s0 + counts[g]].sum(axis=0)

        imax = inten.max(axis=1)
        imin = inten.min(axis=1)
        refs = np.array([ref_level.get(int(pid), 0.0) for pid in uniq])
        # log1p is monotone: compare intensities against the transformed
        # thresholds and take the log only on rows that can actually fire.
        need = (imax >= np.expm1(refs + theta)) | (imin <= np.expm1(refs - theta))

        for row in np.flatnonzero(need):
            pid = int(uniq[row])
            ref = refs[row]
            last_t = last_event_t.get(pid, -1e18)
            out_times: list[float] = []
            out_pols: list[int] = []
            ref, last_t = _threshold_crossings(
                np.log1p(inten[row]), t_edges, ref, last_t, theta, cfg.refractory_us, out_times, out_pols
            )
            ref_level[pid] = ref
            last_event_t[pid] = last_t
            if out_times:
                m = len(out_times)
                chunk_t.append(np.rint(np.array(out_times)).astype(np.int64))
                chunk_x.append(np.full(m, pid % cam.width, dtype=np.int16))
                chunk_y.append(np.full(m, pid // cam.width, dtype=np.int16))
                chunk_p.append(np.array(out_pols, dtype=np.int8))

    if not saw_star:
        warnings.warn("no catalog stars entered the field of view; events are noise only")

    # Background noise: Poisson count, uniform in time and pixel, random polarity.
    n_noise = 0
    if cfg.noise_rate > 0:
        mean = cfg.noise_rate * cam.width * cam.height * duration_s
        n_noise = int(rng.poisson(mean))
    if n_noise:
        noise_t = np.rint(rng.uniform(0.0, duration_s * 1e6 * skew, n_noise)).astype(np.int64)
        noise_x = rng.integers(0, cam.width, n_noise).astype(np.int16)
        noise_y = rng.integers(0, cam.height, n_noise).astype(np.int16)
        noise_p = (rng.integers(0, 2, n_noise) * 2 - 1).astype(np.int8)
        chunk_t.append(noise_t)
        chunk_x.append(noise_x)
        chunk_y.append(noise_y)
        chunk_p.append(noise_p)

    if chunk_t:
        t_all = np.concatenate(chunk_t)
        x_all = np.concatenate(chunk_x)
        y_all = np.concatenate(chunk_y)
        p_all = np.concatenate(chunk_p)
        order = np.lexsort((p_all, y_all, x_all, t_all))
        events = np.zeros(t_all.shape[0], dtype=EVENT_DTYPE)
        events["t_us"] = t_all[order]
        events["x"] = x_all[order]
        events["y"] = y_all[order]
        events["p"] = p_all[order]
    else:
        events = np.zeros(0, dtype=EVENT_DTYPE)

    # PPS anchors at every whole UTC second inside [t0, t0 + duration].
    pps: list[PpsAnchor] = []
    first_whole = math.ceil(t0.sec_of_day - 1e-9)
    offset = first_whole - t0.sec_of_day
    k = 0
    while offset + k <= duration_s + 1e-9:
        t_utc = t0.add_seconds(offset + k)
        dev_us = int(round((offset + k) * 1e6 * skew))
        pps.append(PpsAnchor(dev_us, t_utc))
        k += 1

    truth: list[AttitudeEstimate] = []
    n_truth = int(math.floor(duration_s * _TRUTH_HZ + 1e-9))
    for k in range(n_truth + 1):
        t = t0.add_seconds(k / _TRUTH_HZ)
        truth.append(AttitudeEstimate(t, trajectory(t), SOURCE_SIM_TRUTH))

    return events, pps, truth

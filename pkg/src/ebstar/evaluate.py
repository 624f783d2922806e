"""Pair estimate and ground-truth series and reduce attitude errors.

Error conventions, locked by tests:

* error quaternion is gt^-1 * est (error of the estimate relative to
  truth, expressed in the camera frame);
* ``across``/``about`` come from the swing/twist split of that error
  about the boresight (+z);
* RA error is scaled by cos(Dec) so all axes are on-sky arcseconds;
* ``roll_err`` equals ``about``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .attitude import AttitudeEstimate
from .earth import UtcInstant
from .errors import InsufficientDataError, InvalidArgumentError
from .geometry import (
    ARCSEC_PER_RAD,
    UnitQuaternion,
    rotate_vector,
    swing_twist_decompose,
    unit_to_skycoord,
    vec3,
)


@dataclass(frozen=True)
class ErrorSample:
    t: UtcInstant
    ra_err: float  # arcsec, cos(dec)-scaled
    dec_err: float  # arcsec
    roll_err: float  # arcsec
    across: float  # arcsec, >= 0
    about: float  # arcsec, signed


@dataclass(frozen=True)
class Report:
    rmse_across: float
    rmse_about: float
    mean_abs_ra: float
    mean_abs_dec: float
    mean_abs_roll: float
    max_abs_ra: float
    max_abs_dec: float
    max_abs_roll: float
    dec_drift_rate: float | None  # arcsec / hour
    dec_drift_residual_rms: float | None  # arcsec
    sample_count: int
    solve_success_rate: float | None = None

    def as_dict(self) -> dict:
        return {
            "rmse_across_as": self.rmse_across,
            "rmse_about_as": self.rmse_about,
            "mean_abs_ra_as": self.mean_abs_ra,
            "mean_abs_dec_as": self.mean_abs_dec,
            "mean_abs_roll_as": self.mean_abs_roll,
            "max_abs_ra_as": self.max_abs_ra,
            "max_abs_dec_as": self.max_abs_dec,
            "max_abs_roll_as": self.max_abs_roll,
            "dec_drift_rate_as_per_h": self.dec_drift_rate,
            "dec_drift_residual_rms_as": self.dec_drift_residual_rms,
            "sample_count": self.sample_count,
            "solve_success_rate": self.solve_success_rate,
        }


def align_series(
    est: list[AttitudeEstimate], gt: list[AttitudeEstimate], max_dt: float
) -> list[tuple[AttitudeEstimate, AttitudeEstimate]]:
    """Pair each estimate with the nearest-in-time ground truth within max_dt."""
    if not est or not gt:
        raise InsufficientDataError("empty series cannot be aligned")
    gt_mjd = np.array([g.t.mjd_day * 86400.0 + g.t.sec_of_day for g in gt])
    pairs = []
    for e in est:
        te = e.t.mjd_day * 86400.0 + e.t.sec_of_day
        i = int(np.searchsorted(gt_mjd, te))
        best = None
        for j in (i - 1, i):
            if 0 <= j < len(gt):
                dt = abs(te - gt_mjd[j])
                if best is None or dt < best[0]:
                    best = (dt, j)
        if best is not None and best[0] <= max_dt:
            pairs.append((e, gt[best[1]]))
    if not pairs:
        raise InsufficientDataError("no estimate/ground-truth pairs within max_dt")
    return pairs


def error_sample(
    est_q: UnitQuaternion, gt_q: UnitQuaternion, t: UtcInstant | None = None
) -> ErrorSample:
    """Attitude error of ``est_q`` relative to ``gt_q`` (boresight = +z)."""
    q_err = gt_q.conjugate() * est_q
    across_rad, about_rad = swing_twist_decompose(q_err, vec3(0.0, 0.0, 1.0))

    boresight = vec3(0.0, 0.0, 1.0)
    b_est = rotate_vector(est_q, boresight)
    b_gt = rotate_vector(gt_q, boresight)
    c_est = unit_to_skycoord(b_est)
    c_gt = unit_to_skycoord(b_gt)
    dra = (c_est.ra - c_gt.ra + 180.0) % 360.0 - 180.0
    ra_err = dra * math.cos(math.radians(c_gt.dec)) * 3600.0
    dec_err = (c_est.dec - c_gt.dec) * 3600.0

    return ErrorSample(
        t=t if t is not None else UtcInstant(0, 0.0),
        ra_err=ra_err,
        dec_err=dec_err,
        roll_err=about_rad * ARCSEC_PER_RAD,
        across=across_rad * ARCSEC_PER_RAD,
        about=about_rad * ARCSEC_PER_RAD,
    )


def error_series(
    pairs: list[tuple[AttitudeEstimate, AttitudeEstimate]]
) -> list[ErrorSample]:
    return [error_sample(e.q, g.q, t=e.t) for e, g in pairs]


def summarize(
    samples: list[ErrorSample],
    window: tuple[UtcInstant, UtcInstant] | None = None,
    solve_success_rate: float | None = None,
) -> Report:
    """RMSE over across/about plus a linear declination-drift fit."""
    if window is not None:
        lo, hi = window
        samples = [s for s in samples if lo <= s.t <= hi]
    if not samples:
        raise InsufficientDataError("no samples to summarize")
    across = np.array([s.across for s in samples])
    about = np.array([s.about for s in samples])
    ra = np.array([s.ra_err for s in samples])
    dec = np.array([s.dec_err for s in samples])
    roll = np.array([s.roll_err for s in samples])

    drift = None
    resid_rms = None
    if len(samples) >= 2:
        t0 = samples[0].t
        hours = np.array([s.t.diff_seconds(t0) / 3600.0 for s in samples])
        coef = np.polyfit(hours, dec, 1)
        drift = float(coef[0])
        resid = dec - np.polyval(coef, hours)
        resid_rms = float(np.sqrt(np.mean(resid**2)))

    return Report(
        rmse_across=float(np.sqrt(np.mean(across**2))),
        rmse_about=float(np.sqrt(np.mean(about**2))),
        mean_abs_ra=float(np.mean(np.abs(ra))),
        mean_abs_dec=float(np.mean(np.abs(dec))),
        mean_abs_roll=float(np.mean(np.abs(roll))),
        max_abs_ra=float(np.max(np.abs(ra))),
        max_abs_dec=float(np.max(np.abs(dec))),
        max_abs_roll=float(np.max(np.abs(roll))),
        dec_drift_rate=drift,
        dec_drift_residual_rms=resid_rms,
        sample_count=len(samples),
        solve_success_rate=solve_success_rate,
    )

"""Virtual-telescope ground truth from IERS-style Earth attitudes.

The camera-to-Earth mount transform is unknown but constant for a static
camera.  It is estimated once by back-transforming an anchoring camera
attitude through ICRF at t0, then composed onto the Earth attitude at
every query time.
"""

from __future__ import annotations

from dataclasses import dataclass

from .attitude import SOURCE_GROUNDTRUTH, AttitudeEstimate
from .earth import EopTable, UtcInstant, earth_attitude
from .geometry import UnitQuaternion


@dataclass(frozen=True)
class MountTransform:
    """Estimated camera frame in ITRF."""

    q_mount: UnitQuaternion


def virtual_telescope(earth0: UnitQuaternion, cam0: UnitQuaternion) -> MountTransform:
    """Anchor the mount transform: q_mount = earth0^-1 * cam0."""
    return MountTransform(earth0.conjugate() * cam0)


def gt_series(
    eop: EopTable, mount: MountTransform, times: list[UtcInstant]
) -> list[AttitudeEstimate]:
    """Ground-truth attitudes G(t) = earth_attitude(t) * q_mount at each time."""
    out = []
    for t in times:
        q = earth_attitude(eop, t) * mount.q_mount
        out.append(AttitudeEstimate(t, q, SOURCE_GROUNDTRUTH))
    return out

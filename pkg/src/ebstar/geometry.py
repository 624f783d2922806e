"""Rotation and spherical-coordinate math shared by every other module.

Conventions, chosen once and asserted by tests:

* Quaternions are Hamilton quaternions ordered ``(w, x, y, z)``.
* A ``UnitQuaternion`` is the attitude of a frame F expressed in ICRF:
  ``q.rotate(v_F)`` takes coordinates of a vector in F to coordinates in
  ICRF.  Composition ``q1 * q2`` therefore chains frames right-to-left,
  matching ``R1 @ R2`` for the equivalent rotation matrices.
* ``q`` and ``-q`` are the same rotation.  Sign is canonicalized
  (``w >= 0``, ties broken by the first nonzero component) only when
  serializing.
* Directions are plain numpy arrays of shape (3,) with unit norm.
* RA/Dec follow the usual right-handed ICRF axes: (ra=0, dec=0) is +x,
  RA increases toward +y, Dec toward +z.

Angle extraction uses atan2 throughout; acos loses precision exactly in
the small-angle regime this package lives in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDecompositionError, InvalidArgumentError

ARCSEC_PER_RAD = 648000.0 / math.pi
RAD_PER_ARCSEC = math.pi / 648000.0

_UNIT_TOL = 1e-9


def vec3(x: float, y: float, z: float) -> np.ndarray:
    """Build a 3-vector as a float64 array."""
    return np.array([x, y, z], dtype=float)


def unit(v: np.ndarray) -> np.ndarray:
    """Normalize ``v`` to unit length."""
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise InvalidArgumentError("cannot normalize a zero vector")
    return np.asarray(v, dtype=float) / n


def _require_unit(v: np.ndarray, name: str, tol: float = _UNIT_TOL) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise InvalidArgumentError(f"{name} must have shape (3,), got {v.shape}")
    if abs(float(np.linalg.norm(v)) - 1.0) > tol:
        raise InvalidArgumentError(f"{name} must be unit-norm (|v| = {np.linalg.norm(v)!r})")
    return v


@dataclass(frozen=True)
class UnitQuaternion:
    """Unit quaternion (w, x, y, z); attitude of a frame in ICRF."""

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        w, x, y, z = float(self.w), float(self.x), float(self.y), float(self.z)
        n = math.sqrt(w * w + x * x + y * y + z * z)
        if abs(n - 1.0) > 1e-9:
            raise InvalidArgumentError(f"quaternion norm {n!r} is not 1")
        # Renormalize so repeated compositions cannot drift past 1e-12;
        # store builtin floats regardless of the input scalar type.
        if n != 1.0:
            w, x, y, z = w / n, x / n, y / n, z / n
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)

    @staticmethod
    def identity() -> "UnitQuaternion":
        return UnitQuaternion(1.0, 0.0, 0.0, 0.0)

    @staticmethod
    def from_wxyz(arr) -> "UnitQuaternion":
        w, x, y, z = (float(c) for c in arr)
        n = math.sqrt(w * w + x * x + y * y + z * z)
        return UnitQuaternion(w / n, x / n, y / n, z / n)

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    def __mul__(self, other: "UnitQuaternion") -> "UnitQuaternion":
        w1, x1, y1, z1 = self.w, self.x, self.y, self.z
        w2, x2, y2, z2 = other.w, other.x, other.y, other.z
        return UnitQuaternion(
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        )

    def conjugate(self) -> "UnitQuaternion":
        return UnitQuaternion(self.w, -self.x, -self.y, -self.z)

    inverse = conjugate

    def rotate(self, v: np.ndarray) -> np.ndarray:
        """Rotate ``v`` (frame coordinates) into ICRF coordinates."""
        return rotate_vector(self, v)

    def to_matrix(self) -> np.ndarray:
        """Equivalent 3x3 rotation matrix R with R @ v == self.rotate(v)."""
        w, x, y, z = self.w, self.x, self.y, self.z
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )

    @staticmethod
    def from_matrix(m: np.ndarray) -> "UnitQuaternion":
        """Quaternion from a proper rotation matrix (Shepperd's method)."""
        m = np.asarray(m, dtype=float)
        t = np.trace(m)
        if t > 0:
            s = math.sqrt(t + 1.0) * 2
            w = 0.25 * s
            x = (m[2, 1] - m[1, 2]) / s
            y = (m[0, 2] - m[2, 0]) / s
            z = (m[1, 0] - m[0, 1]) / s
        elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
            s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
            w = (m[2, 1] - m[1, 2]) / s
            x = 0.25 * s
            y = (m[0, 1] + m[1, 0]) / s
            z = (m[0, 2] + m[2, 0]) / s
        elif m[1, 1] >= m[2, 2]:
            s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
            w = (m[0, 2] - m[2, 0]) / s
            x = (m[0, 1] + m[1, 0]) / s
            y = 0.25 * s
            z = (m[1, 2] + m[2, 1]) / s
        else:
            s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
            w = (m[1, 0] - m[0, 1]) / s
            x = (m[0, 2] + m[2, 0]) / s
            y = (m[1, 2] + m[2, 1]) / s
            z = 0.25 * s
        return UnitQuaternion.from_wxyz((w, x, y, z))

    def canonical(self) -> "UnitQuaternion":
        """Sign-canonical representative: w >= 0, ties broken by x, y, z."""
        for c in (self.w, self.x, self.y, self.z):
            if c > 0.0:
                return self
            if c < 0.0:
                return UnitQuaternion(-self.w, -self.x, -self.y, -self.z)
        return self

    def angle_to(self, other: "UnitQuaternion") -> float:
        """Rotation angle in radians between the two attitudes, in [0, pi]."""
        d = self.conjugate() * other
        s = math.sqrt(d.x * d.x + d.y * d.y + d.z * d.z)
        ang = 2.0 * math.atan2(s, abs(d.w))
        return ang


@dataclass(frozen=True)
class SkyCoord:
    """Right ascension / declination in degrees; ra in [0, 360), dec in [-90, 90]."""

    ra: float
    dec: float

    def __post_init__(self):
        if not -90.0 <= self.dec <= 90.0:
            raise InvalidArgumentError(f"dec {self.dec} outside [-90, 90]")
        object.__setattr__(self, "ra", self.ra % 360.0)


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> UnitQuaternion:
    """Rotation of ``angle`` radians about a unit ``axis``."""
    axis = _require_unit(axis, "axis")
    half = 0.5 * angle
    s = math.sin(half)
    return UnitQuaternion(math.cos(half), s * axis[0], s * axis[1], s * axis[2])


def quat_exp(rotvec: np.ndarray) -> UnitQuaternion:
    """Exponential map: rotation vector (axis * angle, radians) to quaternion."""
    rotvec = np.asarray(rotvec, dtype=float)
    angle = float(np.linalg.norm(rotvec))
    if angle < 1e-12:
        # First-order expansion; exact enough that norm stays within 1e-12 of 1.
        return UnitQuaternion.from_wxyz((1.0, 0.5 * rotvec[0], 0.5 * rotvec[1], 0.5 * rotvec[2]))
    s = math.sin(0.5 * angle) / angle
    return UnitQuaternion(math.cos(0.5 * angle), s * rotvec[0], s * rotvec[1], s * rotvec[2])


def quat_log(q: UnitQuaternion) -> np.ndarray:
    """Inverse of quat_exp; rotation vector with angle in [0, pi]."""
    qc = q.canonical()
    s = math.sqrt(qc.x * qc.x + qc.y * qc.y + qc.z * qc.z)
    if s < 1e-12:
        return 2.0 * np.array([qc.x, qc.y, qc.z])
    angle = 2.0 * math.atan2(s, qc.w)
    return (angle / s) * np.array([qc.x, qc.y, qc.z])


def rotate_vector(q: UnitQuaternion, v: np.ndarray) -> np.ndarray:
    """Apply the rotation ``q`` to ``v`` (Hamilton sandwich, expanded form)."""
    v = np.asarray(v, dtype=float)
    u = np.array([q.x, q.y, q.z])
    t = 2.0 * np.cross(u, v)
    return v + q.w * t + np.cross(u, t)


def rotate_vectors(q: UnitQuaternion, vs: np.ndarray) -> np.ndarray:
    """Rotate an (N, 3) stack of vectors by ``q``."""
    vs = np.asarray(vs, dtype=float)
    u = np.array([q.x, q.y, q.z])
    t = 2.0 * np.cross(u[None, :], vs)
    return vs + q.w * t + np.cross(u[None, :], t)


def swing_twist_decompose(q: UnitQuaternion, axis: np.ndarray) -> tuple[float, float]:
    """Split ``q`` into swing-then-twist about ``axis``; return (across, about).

    ``q = swing * twist`` with the twist axis parallel to ``axis``.  ``about``
    is the signed twist angle in (-pi, pi], positive sense given by ``axis``.
    ``across`` is the swing rotation angle in [0, pi].
    """
    axis = _require_unit(axis, "axis")
    proj = q.x * axis[0] + q.y * axis[1] + q.z * axis[2]
    tw = math.sqrt(q.w * q.w + proj * proj)
    if tw < 1e-12:
        # q is a half-turn about an axis perpendicular to `axis`.
        raise DegenerateDecompositionError("twist undefined: rotation is a half-turn perpendicular to the axis")
    twist = UnitQuaternion(q.w / tw, proj * axis[0] / tw, proj * axis[1] / tw, proj * axis[2] / tw)
    swing = q * twist.conjugate()

    about = 2.0 * math.atan2(proj / tw, q.w / tw)
    if about > math.pi:
        about -= 2.0 * math.pi
    elif about <= -math.pi:
        about += 2.0 * math.pi

    s = math.sqrt(swing.x * swing.x + swing.y * swing.y + swing.z * swing.z)
    across = 2.0 * math.atan2(s, abs(swing.w))
    return across, about


def skycoord_to_unit(c: SkyCoord) -> np.ndarray:
    """Unit direction vector for a SkyCoord."""
    ra = math.radians(c.ra)
    dec = math.radians(c.dec)
    cd = math.cos(dec)
    return np.array([cd * math.cos(ra), cd * math.sin(ra), math.sin(dec)])


def unit_to_skycoord(v: np.ndarray) -> SkyCoord:
    """Inverse of skycoord_to_unit; at the exact poles ra is 0 by convention."""
    v = _require_unit(v, "direction")
    dec = math.atan2(v[2], math.hypot(v[0], v[1]))
    if abs(v[0]) == 0.0 and abs(v[1]) == 0.0:
        ra = 0.0
    else:
        ra = math.atan2(v[1], v[0]) % (2.0 * math.pi)
    return SkyCoord(math.degrees(ra), math.degrees(dec))


def radec_to_unit(ra_deg: float, dec_deg: float) -> np.ndarray:
    return skycoord_to_unit(SkyCoord(ra_deg, dec_deg))


def angular_separation(a: np.ndarray, b: np.ndarray) -> float:
    """Angle in radians between two unit vectors, stable at small separations."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return math.atan2(float(np.linalg.norm(np.cross(a, b))), float(np.dot(a, b)))


def attitude_from_radec_roll(ra_deg: float, dec_deg: float, roll_deg: float = 0.0) -> UnitQuaternion:
    """Camera attitude whose boresight (+z) points at (ra, dec).

    At roll 0 the +x (image u) axis points along increasing RA (east) and
    +y (image v) along increasing Dec (north).  Roll rotates the image
    axes about the boresight, positive sense about +z.
    """
    b = radec_to_unit(ra_deg, dec_deg)
    ra = math.radians(ra_deg)
    dec = math.radians(dec_deg)
    east = np.array([-math.sin(ra), math.cos(ra), 0.0])
    north = np.array([-math.cos(ra) * math.sin(dec), -math.sin(ra) * math.sin(dec), math.cos(dec)])
    m = np.column_stack([east, north, b])
    q = UnitQuaternion.from_matrix(m)
    if roll_deg != 0.0:
        q = q * quat_from_axis_angle(vec3(0.0, 0.0, 1.0), math.radians(roll_deg))
    return q

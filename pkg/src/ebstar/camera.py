"""Pinhole camera model and gnomonic star projection.

Image coordinates follow the usual vision convention: the pixel with
index (x, y) is centered at continuous coordinates (x, y), so the sensor
spans [-0.5, width-0.5) x [-0.5, height-0.5).  The camera frame has +z
along the boresight, +x along +u, +y along +v.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError
from .geometry import ARCSEC_PER_RAD, UnitQuaternion, rotate_vector, rotate_vectors


@dataclass(frozen=True)
class CameraModel:
    focal_length: float  # meters
    pixel_pitch: float  # meters
    width: int
    height: int
    principal_point: tuple[float, float] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.focal_length <= 0 or self.pixel_pitch <= 0:
            raise InvalidArgumentError("focal_length and pixel_pitch must be positive")
        if self.width <= 0 or self.height <= 0:
            raise InvalidArgumentError("width and height must be positive")
        if self.principal_point is None:
            object.__setattr__(
                self, "principal_point", ((self.width - 1) / 2.0, (self.height - 1) / 2.0)
            )

    @property
    def pixel_scale_arcsec(self) -> float:
        """On-axis angular size of one pixel."""
        return math.atan(self.pixel_pitch / self.focal_length) * ARCSEC_PER_RAD

    @property
    def fov_deg(self) -> tuple[float, float]:
        """Full horizontal and vertical field of view in degrees."""
        half_w = math.atan(self.width * self.pixel_pitch / (2.0 * self.focal_length))
        half_h = math.atan(self.height * self.pixel_pitch / (2.0 * self.focal_length))
        return math.degrees(2.0 * half_w), math.degrees(2.0 * half_h)

    @property
    def diag_half_angle_rad(self) -> float:
        half_diag_m = 0.5 * self.pixel_pitch * math.hypot(self.width, self.height)
        return math.atan(half_diag_m / self.focal_length)


def project_dir_cam(cam: CameraModel, d_cam: np.ndarray) -> tuple[float, float] | None:
    """Gnomonic projection of a camera-frame unit direction; None if behind."""
    if d_cam[2] <= 0.0:
        return None
    s = cam.focal_length / (cam.pixel_pitch * d_cam[2])
    cx, cy = cam.principal_point
    return cx + s * d_cam[0], cy + s * d_cam[1]


def project_star(cam: CameraModel, attitude: UnitQuaternion, direction: np.ndarray) -> tuple[float, float] | None:
    """Project an ICRF unit direction through a camera at ``attitude``.

    Returns continuous image coordinates, or None as the behind-camera
    marker when the direction has a nonpositive boresight component.
    """
    d_cam = rotate_vector(attitude.conjugate(), direction)
    return project_dir_cam(cam, d_cam)


def project_stars(cam: CameraModel, attitude: UnitQuaternion, dirs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized projection of (N, 3) ICRF directions.

    Returns (uv array of shape (N, 2), in-front boolean mask).  Rows where
    the mask is False contain NaN.
    """
    d_cam = rotate_vectors(attitude.conjugate(), dirs)
    front = d_cam[:, 2] > 0.0
    uv = np.full((dirs.shape[0], 2), np.nan)
    s = cam.focal_length / (cam.pixel_pitch * d_cam[front, 2])
    cx, cy = cam.principal_point
    uv[front, 0] = cx + s * d_cam[front, 0]
    uv[front, 1] = cy + s * d_cam[front, 1]
    return uv, front


def unproject_pixel(cam: CameraModel, u: float, v: float) -> np.ndarray:
    """Camera-frame unit direction seen at image coordinates (u, v)."""
    cx, cy = cam.principal_point
    x = (u - cx) * cam.pixel_pitch / cam.focal_length
    y = (v - cy) * cam.pixel_pitch / cam.focal_length
    d = np.array([x, y, 1.0])
    return d / np.linalg.norm(d)


def in_frame(cam: CameraModel, uv: tuple[float, float] | None, margin_px: float = 0.0) -> bool:
    if uv is None:
        return False
    u, v = uv
    return -margin_px <= u < cam.width + margin_px and -margin_px <= v < cam.height + margin_px

"""Attitude estimate record shared by tracker, plate solver, and ground truth."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .earth import UtcInstant
from .geometry import UnitQuaternion

SOURCE_EKF = "ekf"
SOURCE_ASTROMETRY = "astrometry"
SOURCE_GROUNDTRUTH = "groundtruth"
SOURCE_SIM_TRUTH = "simulator-truth"

_VALID_SOURCES = {SOURCE_EKF, SOURCE_ASTROMETRY, SOURCE_GROUNDTRUTH, SOURCE_SIM_TRUTH}


@dataclass(frozen=True)
class AttitudeEstimate:
    t: UtcInstant
    q: UnitQuaternion
    source: str
    cov: np.ndarray | None = None  # 3x3 attitude covariance, rad^2

    def __post_init__(self):
        if self.source not in _VALID_SOURCES:
            raise ValueError(f"unknown estimate source {self.source!r}")

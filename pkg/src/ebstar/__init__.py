"""Event-based star tracker: simulation, tracking, plate solving, and
evaluation against Earth-rotation ground truth."""

__version__ = "0.1.0"

from .attitude import AttitudeEstimate
from .camera import CameraModel
from .catalog import Catalog, Star, load_catalog
from .earth import EopRecord, EopTable, UtcInstant
from .geometry import SkyCoord, UnitQuaternion

__all__ = [
    "AttitudeEstimate",
    "CameraModel",
    "Catalog",
    "EopRecord",
    "EopTable",
    "SkyCoord",
    "Star",
    "UnitQuaternion",
    "UtcInstant",
    "__version__",
]

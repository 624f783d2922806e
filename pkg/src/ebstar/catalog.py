"""Star catalog: loading, field-of-view queries, and the interstar-angle
triangle index behind the plate solver.

Catalog CSV format: header ``id,ra_deg,dec_deg,mag``, one star per row,
UTF-8, ra in [0, 360), dec in [-90, 90].
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .camera import CameraModel, in_frame, project_stars
from .errors import InsufficientDataError, InvalidArgumentError, ParseError
from .geometry import ARCSEC_PER_RAD, UnitQuaternion, radec_to_unit, rotate_vector, vec3

_GRID_STEP_DEG = 1.0


@dataclass(frozen=True)
class Star:
    id: int
    dir: np.ndarray  # ICRF unit vector
    mag: float


class Catalog:
    """Immutable star catalog with a lat/long bucket grid for cone queries."""

    def __init__(self, stars: list[Star], mag_limit: float):
        self.stars = sorted(stars, key=lambda s: s.id)
        self.mag_limit = mag_limit
        ids = [s.id for s in self.stars]
        if len(set(ids)) != len(ids):
            raise InvalidArgumentError("duplicate star ids in catalog")
        self.ids = np.array(ids, dtype=np.int64)
        self.dirs = (
            np.array([s.dir for s in self.stars], dtype=float)
            if self.stars
            else np.zeros((0, 3))
        )
        self.mags = np.array([s.mag for s in self.stars], dtype=float)
        self._build_grid()

    def __len__(self) -> int:
        return len(self.stars)

    def _build_grid(self):
        self._grid: dict[tuple[int, int], list[int]] = {}
        if not self.stars:
            return
        dec = np.degrees(np.arcsin(np.clip(self.dirs[:, 2], -1.0, 1.0)))
        ra = np.degrees(np.arctan2(self.dirs[:, 1], self.dirs[:, 0])) % 360.0
        self._dec_rows = int(math.ceil(180.0 / _GRID_STEP_DEG))
        self._ra_cols = int(math.ceil(360.0 / _GRID_STEP_DEG))
        iy = np.clip(((dec + 90.0) / _GRID_STEP_DEG).astype(int), 0, self._dec_rows - 1)
        ix = np.clip((ra / _GRID_STEP_DEG).astype(int), 0, self._ra_cols - 1)
        for i in range(len(self.stars)):
            self._grid.setdefault((int(iy[i]), int(ix[i])), []).append(i)

    def indices_near(self, direction: np.ndarray, radius_rad: float) -> np.ndarray:
        """Indices of stars within ``radius_rad`` of ``direction`` (exact)."""
        if not self.stars:
            return np.zeros(0, dtype=int)
        dec = math.degrees(math.asin(max(-1.0, min(1.0, direction[2]))))
        ra = math.degrees(math.atan2(direction[1], direction[0])) % 360.0
        r_deg = math.degrees(radius_rad)
        pad = _GRID_STEP_DEG
        y_lo = int((max(-90.0, dec - r_deg - pad) + 90.0) / _GRID_STEP_DEG)
        y_hi = int((min(89.999, dec + r_deg + pad) + 90.0) / _GRID_STEP_DEG)
        cand: list[int] = []
        for iy in range(max(0, y_lo), min(self._dec_rows - 1, y_hi) + 1):
            band_dec = -90.0 + (iy + 0.5) * _GRID_STEP_DEG
            cos_band = math.cos(math.radians(min(89.0, abs(band_dec))))
            ra_span = (r_deg + pad) / max(cos_band, 1e-6)
            if ra_span >= 180.0:
                cols = range(self._ra_cols)
            else:
                x_lo = int(math.floor((ra - ra_span) / _GRID_STEP_DEG))
                x_hi = int(math.floor((ra + ra_span) / _GRID_STEP_DEG))
                cols = [c % self._ra_cols for c in range(x_lo, x_hi + 1)]
            for ix in cols:
                cand.extend(self._grid.get((iy, ix), ()))
        if not cand:
            return np.zeros(0, dtype=int)
        idx = np.array(sorted(set(cand)), dtype=int)
        cos_r = math.cos(radius_rad)
        keep = self.dirs[idx] @ np.asarray(direction, dtype=float) >= cos_r
        return idx[keep]


def load_catalog(path, mag_limit: float) -> Catalog:
    """Load a catalog CSV, keeping stars with mag <= mag_limit."""
    stars: list[Star] = []
    seen: set[int] = set()
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip()
        if header != "id,ra_deg,dec_deg,mag":
            raise ParseError(f"bad catalog header {header!r}", path=str(path), line=1)
        for lineno, raw in enumerate(f, start=2):
            if not raw.strip():
                continue
            parts = raw.strip().split(",")
            if len(parts) != 4:
                raise ParseError(f"expected 4 fields, got {len(parts)}", path=str(path), line=lineno)
            try:
                sid = int(parts[0])
                ra = float(parts[1])
                dec = float(parts[2])
                mag = float(parts[3])
            except ValueError as e:
                raise ParseError(f"bad catalog row: {e}", path=str(path), line=lineno) from e
            if not 0.0 <= ra < 360.0 or not -90.0 <= dec <= 90.0:
                raise ParseError(f"ra/dec out of range: {ra}, {dec}", path=str(path), line=lineno)
            if sid in seen:
                raise ParseError(f"duplicate star id {sid}", path=str(path), line=lineno)
            seen.add(sid)
            if mag > mag_limit:
                continue
            stars.append(Star(sid, radec_to_unit(ra, dec), mag))
    return Catalog(stars, mag_limit)


def stars_in_fov(
    cat: Catalog,
    attitude: UnitQuaternion,
    cam: CameraModel,
    margin_px: float = 0.0,
) -> list[tuple[Star, tuple[float, float]]]:
    """Stars whose projection lands in frame, sorted by ascending magnitude.

    ``margin_px`` widens the frame bound on all sides (used by the
    simulator to catch stars about to enter).
    """
    if not cat.stars:
        return []
    boresight = rotate_vector(attitude, vec3(0.0, 0.0, 1.0))
    margin_rad = margin_px * math.atan(cam.pixel_pitch / cam.focal_length)
    idx = cat.indices_near(boresight, cam.diag_half_angle_rad + margin_rad + 1e-6)
    if idx.size == 0:
        return []
    uv, front = project_stars(cam, attitude, cat.dirs[idx])
    out = []
    for k in range(idx.size):
        if not front[k]:
            continue
        pos = (float(uv[k, 0]), float(uv[k, 1]))
        if in_frame(cam, pos, margin_px):
            out.append((cat.stars[int(idx[k])], pos))
    out.sort(key=lambda sp: (sp[0].mag, sp[0].id))
    return out


class TriangleIndex:
    """Quantized interstar-angle index over all close star triples.

    Keys are the two largest pairwise angles of a triple, quantized to
    ``quantization_arcsec``.  Lookups probe the key and its 8 neighbors,
    so a triple is retrievable from any angles within one quantum of the
    truth.  Triples store catalog row indices with a canonical vertex
    order (see ``_canonical_triple``).
    """

    def __init__(
        self,
        catalog: Catalog,
        keys: np.ndarray,
        triples: np.ndarray,
        angles: np.ndarray,
        max_separation_rad: float,
        quantization_arcsec: float,
    ):
        order = np.argsort(keys, kind="stable")
        self.catalog = catalog
        self.keys = keys[order]
        self.triples = triples[order]
        self.angles = angles[order]
        self.max_separation_rad = max_separation_rad
        self.quantization_arcsec = quantization_arcsec

    def __len__(self) -> int:
        return len(self.keys)

    def lookup(self, theta1_rad: float, theta2_rad: float) -> np.ndarray:
        """Row numbers of candidate triples for the two largest angles."""
        k1 = int(round(theta1_rad * ARCSEC_PER_RAD / self.quantization_arcsec))
        k2 = int(round(theta2_rad * ARCSEC_PER_RAD / self.quantization_arcsec))
        rows: list[np.ndarray] = []
        for a in (-1, 0, 1):
            for b in (-1, 0, 1):
                key = _pack_key(k1 + a, k2 + b)
                lo = int(np.searchsorted(self.keys, key, side="left"))
                hi = int(np.searchsorted(self.keys, key, side="right"))
                if hi > lo:
                    rows.append(np.arange(lo, hi))
        if not rows:
            return np.zeros(0, dtype=int)
        return np.concatenate(rows)


def _pack_key(k1: int, k2: int) -> np.int64:
    return np.int64(k1) * np.int64(1 << 20) + np.int64(k2)


def _canonical_triple(i: int, j: int, k: int, t_ij: float, t_ik: float, t_jk: float):
    """Order the vertices of a triple by the sides they join.

    Returns (v_a, v_b, v_c) and sorted angles (t1 >= t2 >= t3) where side
    t1 joins (v_a, v_b), t2 joins (v_a, v_c), t3 joins (v_b, v_c).
    """
    sides = sorted(
        [(t_jk, (j, k), i), (t_ik, (i, k), j), (t_ij, (i, j), k)],
        key=lambda s: -s[0],
    )
    t1, pair1, opp1 = sides[0]
    t2, pair2, opp2 = sides[1]
    t3 = sides[2][0]
    # v_a is the vertex shared by the two largest sides.
    shared = set(pair1) & set(pair2)
    v_a = shared.pop()
    v_b = pair1[0] if pair1[1] == v_a else pair1[1]
    v_c = pair2[0] if pair2[1] == v_a else pair2[1]
    return (v_a, v_b, v_c), (t1, t2, t3)


def build_triangle_index(
    cat: Catalog, max_separation_deg: float, quantization_arcsec: float
) -> TriangleIndex:
    """Index every star triple with all pairwise separations below the bound."""
    if len(cat) < 3:
        raise InsufficientDataError(f"triangle index needs >= 3 stars, got {len(cat)}")
    max_sep = math.radians(max_separation_deg)
    cos_max = math.cos(max_sep)
    n = len(cat)
    keys: list[int] = []
    triples: list[tuple[int, int, int]] = []
    angles: list[tuple[float, float, float]] = []
    for i in range(n):
        near = cat.indices_near(cat.dirs[i], max_sep)
        near = near[near > i]
        if near.size < 2:
            continue
        d_i = cat.dirs[i]
        d_near = cat.dirs[near]
        cos_to_i = d_near @ d_i
        gram = d_near @ d_near.T
        for a, b in itertools.combinations(range(near.size), 2):
            if gram[a, b] < cos_max:
                continue
            j, k = int(near[a]), int(near[b])
            t_ij = math.acos(min(1.0, max(-1.0, cos_to_i[a])))
            t_ik = math.acos(min(1.0, max(-1.0, cos_to_i[b])))
            t_jk = math.acos(min(1.0, max(-1.0, gram[a, b])))
            verts, (t1, t2, t3) = _canonical_triple(i, j, k, t_ij, t_ik, t_jk)
            k1 = int(round(t1 * ARCSEC_PER_RAD / quantization_arcsec))
            k2 = int(round(t2 * ARCSEC_PER_RAD / quantization_arcsec))
            keys.append(int(_pack_key(k1, k2)))
            triples.append(verts)
            angles.append((t1, t2, t3))
    return TriangleIndex(
        cat,
        np.array(keys, dtype=np.int64),
        np.array(triples, dtype=np.int32).reshape(-1, 3),
        np.array(angles, dtype=float).reshape(-1, 3),
        max_sep,
        quantization_arcsec,
    )

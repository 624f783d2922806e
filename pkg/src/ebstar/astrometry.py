"""Batch plate-solving baseline: accumulate positive events into frames,
centroid them, and solve lost-in-space against the triangle index.

Frames are consecutive non-overlapping windows (default 1/6 s) anchored
at the first event timestamp; the final partial window is dropped.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .attitude import SOURCE_ASTROMETRY, AttitudeEstimate
from .camera import CameraModel, project_stars, unproject_pixel
from .catalog import TriangleIndex, stars_in_fov
from .errors import InvalidArgumentError
from .geometry import UnitQuaternion, angular_separation
from .simulator import EVENT_DTYPE
from .timesync import TimeMap, to_utc

DEFAULT_WINDOW_US = 166667  # 1/6 second


@dataclass(frozen=True)
class BatchFrame:
    """Sparse grid of positive-event counts over one time window."""

    t_start_us: int
    t_end_us: int
    xs: np.ndarray  # int pixel columns of nonzero cells
    ys: np.ndarray  # int pixel rows
    counts: np.ndarray  # positive-event count per cell

    def to_dense(self, width: int, height: int) -> np.ndarray:
        grid = np.zeros((height, width), dtype=np.int32)
        grid[self.ys, self.xs] = self.counts
        return grid


@dataclass(frozen=True)
class Centroid:
    u: float
    v: float
    weight: int


@dataclass(frozen=True)
class PlateSolution:
    q: UnitQuaternion
    n_matched: int
    n_centroids: int
    mean_residual_px: float


@dataclass(frozen=True)
class NoSolution:
    reason: str


@dataclass(frozen=True)
class SolverConfig:
    min_weight: int = 5
    merge_radius_px: float = 3.0
    max_centroids: int = 12
    match_tol_px: float = 2.0
    min_match_frac: float = 0.6
    early_exit_frac: float = 0.85
    max_candidates: int = 2000

    def __post_init__(self):
        if not 0.0 < self.min_match_frac <= 1.0:
            raise InvalidArgumentError("min_match_frac must be in (0, 1]")


def accumulate_frames(events: np.ndarray, window_us: int = DEFAULT_WINDOW_US) -> list[BatchFrame]:
    """Bin positive events into consecutive fixed windows from the first event."""
    if events.dtype != EVENT_DTYPE:
        raise InvalidArgumentError("events must use the simulator event dtype")
    if events.size == 0:
        return []
    t = events["t_us"].astype(np.int64)
    t0 = int(t[0])
    span = int(t[-1]) - t0
    n_frames = span // window_us
    frames: list[BatchFrame] = []
    pos = events["p"] > 0
    for k in range(int(n_frames)):
        lo = t0 + k * window_us
        hi = lo + window_us
        sel = pos & (t >= lo) & (t < hi)
        if np.any(sel):
            pid = events["y"][sel].astype(np.int64) * 65536 + events["x"][sel].astype(np.int64)
            uniq, counts = np.unique(pid, return_counts=True)
            frames.append(
                BatchFrame(
                    lo,
                    hi,
                    xs=(uniq % 65536).astype(np.int32),
                    ys=(uniq // 65536).astype(np.int32),
                    counts=counts.astype(np.int32),
                )
            )
        else:
            frames.append(
                BatchFrame(lo, hi, np.zeros(0, np.int32), np.zeros(0, np.int32), np.zeros(0, np.int32))
            )
    return frames


def extract_centroids(
    frame: BatchFrame, min_weight: int = 5, radius: float = 3.0
) -> list[Centroid]:
    """Count-weighted centroids of 8-connected components of nonzero pixels.

    Components whose centroids sit within ``radius`` pixels of each other
    are merged (a star split by a quiet lane is one star); merged blobs
    below ``min_weight`` total events are dropped.  Result is sorted by
    descending weight.
    """
    n = frame.xs.size
    if n == 0:
        return []
    index = {(int(x), int(y)): i for i, (x, y) in enumerate(zip(frame.xs, frame.ys))}
    parent = list(range(n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a: int, b: int):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    for (x, y), i in index.items():
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                if dx == 0 and dy == 0:
                    continue
                j = index.get((x + dx, y + dy))
                if j is not None:
                    union(i, j)

    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)

    blobs = []
    for members in groups.values():
        idx = np.array(members)
        w = frame.counts[idx].astype(float)
        total = float(w.sum())
        u = float((frame.xs[idx] * w).sum() / total)
        v = float((frame.ys[idx] * w).sum() / total)
        blobs.append([u, v, total])

    # Merge blobs closer than `radius` (centroid distance), iterating to a fixpoint.
    merged = True
    while merged and len(blobs) > 1:
        merged = False
        for i, j in itertools.combinations(range(len(blobs)), 2):
            du = blobs[i][0] - blobs[j][0]
            dv = blobs[i][1] - blobs[j][1]
            if du * du + dv * dv <= radius * radius:
                wi, wj = blobs[i][2], blobs[j][2]
                blobs[i] = [
                    (blobs[i][0] * wi + blobs[j][0] * wj) / (wi + wj),
                    (blobs[i][1] * wi + blobs[j][1] * wj) / (wi + wj),
                    wi + wj,
                ]
                del blobs[j]
                merged = True
                break

    out = [Centroid(b[0], b[1], int(b[2])) for b in blobs if b[2] >= min_weight]
    out.sort(key=lambda c: (-c.weight, c.u, c.v))
    return out


def solve_wahba(
    body_dirs: np.ndarray, ref_dirs: np.ndarray, weights: np.ndarray | None = None
) -> UnitQuaternion:
    """Optimal body-to-reference rotation (Davenport q-method).

    Maximizes sum of w_i * (q.rotate(b_i) . r_i); returns the attitude of
    the body frame in the reference frame.
    """
    if weights is None:
        weights = np.ones(body_dirs.shape[0])
    b = (weights[:, None] * ref_dirs).T @ body_dirs  # 3x3 attitude profile
    s = b + b.T
    sigma = float(np.trace(b))
    z = np.array([b[2, 1] - b[1, 2], b[0, 2] - b[2, 0], b[1, 0] - b[0, 1]])
    k = np.zeros((4, 4))
    k[0, 0] = sigma
    k[0, 1:] = z
    k[1:, 0] = z
    k[1:, 1:] = s - sigma * np.eye(3)
    eigvals, eigvecs = np.linalg.eigh(k)
    q = eigvecs[:, -1]
    return UnitQuaternion.from_wxyz(q)


def _centroid_dirs(cam: CameraModel, centroids: list[Centroid]) -> np.ndarray:
    return np.array([unproject_pixel(cam, c.u, c.v) for c in centroids])


def _verify(
    q: UnitQuaternion,
    centroids: list[Centroid],
    index: TriangleIndex,
    cam: CameraModel,
    cfg: SolverConfig,
):
    """Match all centroids against the projected catalog at attitude q.

    Returns (match pairs, mean residual) or None if below the match
    fraction.  Pairs are (centroid index, catalog row) by nearest
    projection within the tolerance.
    """
    vis = stars_in_fov(index.catalog, q, cam, margin_px=2.0)
    if not vis:
        return None
    uv = np.array([p for _, p in vis])
    rows = [index.catalog.ids.searchsorted(s.id) for s, _ in vis]
    pairs = []
    resid = []
    for ci, c in enumerate(centroids):
        d2 = (uv[:, 0] - c.u) ** 2 + (uv[:, 1] - c.v) ** 2
        j = int(np.argmin(d2))
        if d2[j] <= cfg.match_tol_px**2:
            pairs.append((ci, int(rows[j])))
            resid.append(math.sqrt(d2[j]))
    if len(pairs) < max(3, math.ceil(cfg.min_match_frac * len(centroids))):
        return None
    return pairs, float(np.mean(resid))


def plate_solve(
    centroids: list[Centroid],
    index: TriangleIndex,
    cam: CameraModel,
    cfg: SolverConfig = SolverConfig(),
) -> "PlateSolution | NoSolution":
    """Lost-in-space solve of one frame's centroids.

    Candidate triangles from the brightest centroids are matched against
    the quantized interstar-angle index; candidate identities are
    verified by reprojecting the whole catalog field and the attitude is
    refined with all matched pairs.
    """
    if cam.diag_half_angle_rad * 2.0 > index.max_separation_rad:
        raise InvalidArgumentError("camera diagonal FOV exceeds the triangle index bound")
    if len(centroids) < 3:
        return NoSolution("insufficient-stars")
    cands = sorted(centroids, key=lambda c: (-c.weight, c.u, c.v))[: cfg.max_centroids]
    dirs = _centroid_dirs(cam, cands)

    best = None
    checked = 0
    for i, j, k in itertools.combinations(range(len(cands)), 3):
        t_ij = angular_separation(dirs[i], dirs[j])
        t_ik = angular_separation(dirs[i], dirs[k])
        t_jk = angular_separation(dirs[j], dirs[k])
        sides = sorted(
            [(t_jk, (j, k)), (t_ik, (i, k)), (t_ij, (i, j))], key=lambda s: -s[0]
        )
        (t1, pair1), (t2, pair2), (t3, _) = sides
        shared = set(pair1) & set(pair2)
        v_a = shared.pop()
        v_b = pair1[0] if pair1[1] == v_a else pair1[1]
        v_c = pair2[0] if pair2[1] == v_a else pair2[1]
        obs_order = (v_a, v_b, v_c)
        rows = index.lookup(t1, t2)
        tol = 2.0 * index.quantization_arcsec / 206264.806 + 1e-9
        for r in rows:
            cat_rows = index.triples[r]
            cat_angles = index.angles[r]
            if abs(cat_angles[0] - t1) > tol or abs(cat_angles[1] - t2) > tol or abs(
                cat_angles[2] - t3
            ) > tol:
                continue
            checked += 1
            if checked > cfg.max_candidates:
                break
            body = np.array([dirs[v] for v in obs_order])
            ref = index.catalog.dirs[cat_rows]
            q = solve_wahba(body, ref)
            ver = _verify(q, cands, index, cam, cfg)
            if ver is None:
                continue
            pairs, _ = ver
            body_all = np.array([dirs[ci] for ci, _ in pairs])
            ref_all = index.catalog.dirs[[cr for _, cr in pairs]]
            q_ref = solve_wahba(body_all, ref_all)
            ver2 = _verify(q_ref, cands, index, cam, cfg)
            if ver2 is None:
                continue
            pairs2, resid2 = ver2
            score = (len(pairs2), -resid2)
            if best is None or score > best[0]:
                best = (score, q_ref, len(pairs2), resid2)
            if len(pairs2) >= cfg.early_exit_frac * len(cands):
                break
        else:
            continue
        break

    if best is None:
        return NoSolution("verification-failed")
    _, q_best, n_match, resid = best
    return PlateSolution(q_best, n_match, len(cands), resid)


def solve_stream(
    events: np.ndarray,
    tmap: TimeMap,
    index: TriangleIndex,
    cam: CameraModel,
    cfg: SolverConfig = SolverConfig(),
    window_us: int = DEFAULT_WINDOW_US,
) -> tuple[list[AttitudeEstimate], list[tuple[int, str]]]:
    """Solve every frame of a stream; failures land in the sidecar list.

    Returns (estimates, failures) where failures carry the frame start
    time (device us) and a reason code.
    """
    estimates = []
    failures = []
    for frame in accumulate_frames(events, window_us):
        centroids = extract_centroids(frame, cfg.min_weight, cfg.merge_radius_px)
        t_mid_us = (frame.t_start_us + frame.t_end_us) // 2
        result = plate_solve(centroids, index, cam, cfg)
        if isinstance(result, NoSolution):
            failures.append((frame.t_start_us, result.reason))
            continue
        sol: PlateSolution = result
        estimates.append(AttitudeEstimate(to_utc(tmap, t_mid_us), sol.q, SOURCE_ASTROMETRY))
    return estimates, failures

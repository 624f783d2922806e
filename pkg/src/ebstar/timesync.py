"""Device-clock to UTC mapping from pulse-per-second anchors.

Each anchor pairs a device timestamp (microseconds) with the UTC instant
of the pulse.  The map is piecewise linear between adjacent anchors,
which absorbs slow clock drift; outside the anchor span it extrapolates
with the nearest segment's slope.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

from .earth import UtcInstant
from .errors import ClockSkewError, InsufficientDataError, OrderingError, ParseError

# Sanity bound on d(UTC)/d(device) per segment.
_SLOPE_MIN = 0.9
_SLOPE_MAX = 1.1


@dataclass(frozen=True)
class PpsAnchor:
    t_event_us: int
    t_utc: UtcInstant


@dataclass(frozen=True)
class TimeMap:
    anchors: tuple[PpsAnchor, ...]


def build_time_map(anchors: list[PpsAnchor]) -> TimeMap:
    """Validate anchors and build the piecewise-linear map."""
    if len(anchors) < 2:
        raise InsufficientDataError(f"need at least 2 PPS anchors, got {len(anchors)}")
    for a, b in zip(anchors, anchors[1:]):
        if b.t_event_us <= a.t_event_us:
            raise OrderingError("PPS anchors must be strictly increasing in device time")
        dt_utc = b.t_utc.diff_seconds(a.t_utc)
        if dt_utc <= 0.0:
            raise OrderingError("PPS anchors must be strictly increasing in UTC")
        slope = dt_utc * 1e6 / (b.t_event_us - a.t_event_us)
        if not _SLOPE_MIN <= slope <= _SLOPE_MAX:
            raise ClockSkewError(f"segment slope {slope} outside [{_SLOPE_MIN}, {_SLOPE_MAX}]")
    return TimeMap(tuple(anchors))


def _segment(tmap: TimeMap, t_event_us: float) -> tuple[PpsAnchor, PpsAnchor]:
    xs = [a.t_event_us for a in tmap.anchors]
    i = bisect.bisect_right(xs, t_event_us) - 1
    i = max(0, min(i, len(xs) - 2))
    return tmap.anchors[i], tmap.anchors[i + 1]


def to_utc(tmap: TimeMap, t_event_us: float) -> UtcInstant:
    """Map a device timestamp to UTC; exact at anchors, linear between them."""
    a, b = _segment(tmap, t_event_us)
    if t_event_us == a.t_event_us:
        return a.t_utc
    slope_s_per_us = b.t_utc.diff_seconds(a.t_utc) / (b.t_event_us - a.t_event_us)
    return a.t_utc.add_seconds((t_event_us - a.t_event_us) * slope_s_per_us)


def from_utc(tmap: TimeMap, t: UtcInstant) -> float:
    """Inverse of to_utc (device microseconds); same segment geometry."""
    idx = 0
    for i in range(len(tmap.anchors) - 1):
        if t.diff_seconds(tmap.anchors[i + 1].t_utc) < 0:
            break
        idx = min(i + 1, len(tmap.anchors) - 2)
    a, b = tmap.anchors[idx], tmap.anchors[idx + 1]
    slope_us_per_s = (b.t_event_us - a.t_event_us) / b.t_utc.diff_seconds(a.t_utc)
    return a.t_event_us + t.diff_seconds(a.t_utc) * slope_us_per_s


def load_pps_anchors(trigger_csv, utc_csv) -> list[PpsAnchor]:
    """Pair a device trigger log with a UTC log, by row index after sorting.

    Trigger CSV header: ``t_event_us``; UTC log header: ``utc_iso8601``.
    Row counts must match.  Falling-edge records, if the hardware logs
    them, must be filtered out before this point.
    """
    with open(trigger_csv, "r", encoding="utf-8") as f:
        header = f.readline().strip()
        if header != "t_event_us":
            raise ParseError(f"bad trigger CSV header {header!r}", path=str(trigger_csv), line=1)
        try:
            trig = [int(line.strip()) for line in f if line.strip()]
        except ValueError as e:
            raise ParseError(f"bad trigger timestamp: {e}", path=str(trigger_csv)) from e
    with open(utc_csv, "r", encoding="utf-8") as f:
        header = f.readline().strip()
        if header != "utc_iso8601":
            raise ParseError(f"bad UTC log header {header!r}", path=str(utc_csv), line=1)
        utcs = [UtcInstant.from_iso(line.strip()) for line in f if line.strip()]
    if len(trig) != len(utcs):
        raise ParseError(
            f"trigger/UTC row count mismatch: {len(trig)} vs {len(utcs)}", path=str(trigger_csv)
        )
    trig.sort()
    utcs.sort()
    return [PpsAnchor(t, u) for t, u in zip(trig, utcs)]

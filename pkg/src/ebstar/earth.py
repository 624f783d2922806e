"""Earth orientation: EOP ingestion and the ITRF-in-ICRF attitude.

The Earth model is deliberately compact: polar-motion rotation, spin by
the Earth Rotation Angle (a linear function of UT1), and the interpolated
celestial-pole offsets (dX, dY).  The full precession-nutation series is
out of scope; everything downstream is anchored relatively, so what
matters is that simulator and ground truth share one self-consistent
model.  UT1 enters only through the ERA argument.

Every day is treated as 86400 s; data windows must not straddle a leap
second.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone

import numpy as np

from .errors import InvalidArgumentError, OrderingError, OutOfRangeError, ParseError
from .geometry import UnitQuaternion, quat_from_axis_angle, vec3

# date(1858, 11, 17).toordinal(); MJD epoch.
_MJD_EPOCH_ORDINAL = 678576

# ERA(Tu) = 2*pi * frac(ERA_AT_J2000_TURNS + ERA_TURNS_PER_DAY * Tu),
# Tu = days of UT1 since JD 2451545.0 UT1 (== MJD 51544.5).
ERA_AT_J2000_TURNS = 0.7790572732640
ERA_TURNS_PER_DAY = 1.00273781191135448

_MAS_TO_RAD = math.pi / 648000.0 / 1000.0
_ARCSEC_TO_RAD = math.pi / 648000.0


@dataclass(frozen=True, order=True)
class UtcInstant:
    """A UTC time as integer MJD day plus seconds of day in [0, 86400)."""

    mjd_day: int
    sec_of_day: float

    def __post_init__(self):
        if not 0.0 <= self.sec_of_day < 86400.0:
            raise InvalidArgumentError(f"sec_of_day {self.sec_of_day} outside [0, 86400)")

    @staticmethod
    def from_mjd(mjd: float) -> "UtcInstant":
        day = math.floor(mjd)
        return UtcInstant(int(day), (mjd - day) * 86400.0)

    @staticmethod
    def from_iso(text: str) -> "UtcInstant":
        t = text.strip()
        if t.endswith("Z"):
            t = t[:-1] + "+00:00"
        try:
            dt = datetime.fromisoformat(t)
        except ValueError as e:
            raise ParseError(f"bad ISO-8601 timestamp {text!r}: {e}") from e
        if dt.tzinfo is not None:
            dt = dt.astimezone(timezone.utc).replace(tzinfo=None)
        day = dt.date().toordinal() - _MJD_EPOCH_ORDINAL
        sec = dt.hour * 3600 + dt.minute * 60 + dt.second + dt.microsecond * 1e-6
        return UtcInstant(day, sec)

    def to_iso(self) -> str:
        d = date.fromordinal(self.mjd_day + _MJD_EPOCH_ORDINAL)
        us = round(self.sec_of_day * 1e6)
        dt = datetime(d.year, d.month, d.day) + timedelta(microseconds=us)
        return dt.strftime("%Y-%m-%dT%H:%M:%S.%f") + "Z"

    def mjd(self) -> float:
        return self.mjd_day + self.sec_of_day / 86400.0

    def add_seconds(self, s: float) -> "UtcInstant":
        total = self.sec_of_day + s
        days, sec = divmod(total, 86400.0)
        return UtcInstant(self.mjd_day + int(days), sec)

    def diff_seconds(self, other: "UtcInstant") -> float:
        """self - other in seconds; exact for intervals below ~1e7 s."""
        return (self.mjd_day - other.mjd_day) * 86400.0 + (self.sec_of_day - other.sec_of_day)


@dataclass(frozen=True)
class EopRecord:
    """One day of Earth orientation parameters."""

    mjd_utc: float
    pm_x: float  # arcsec
    pm_y: float  # arcsec
    ut1_utc: float  # seconds
    dx: float = 0.0  # milliarcsec
    dy: float = 0.0  # milliarcsec

    def __post_init__(self):
        if abs(self.ut1_utc) >= 1.0:
            raise InvalidArgumentError(f"|UT1-UTC| = {abs(self.ut1_utc)} s; must be < 1 s")
        if abs(self.pm_x) >= 2.0 or abs(self.pm_y) >= 2.0:
            raise InvalidArgumentError("polar motion must be < 2 arcsec in magnitude")


@dataclass
class EopTable:
    """EOP records sorted strictly ascending by MJD."""

    records: list[EopRecord]
    skipped_lines: int = 0
    _mjd: np.ndarray = field(init=False, repr=False)
    _cols: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.records:
            raise ParseError("EOP table has no records")
        mjd = np.array([r.mjd_utc for r in self.records])
        if np.any(np.diff(mjd) <= 0):
            raise OrderingError("EOP records must be strictly ascending in mjd_utc")
        self._mjd = mjd
        self._cols = np.array([[r.pm_x, r.pm_y, r.ut1_utc, r.dx, r.dy] for r in self.records])

    @property
    def first_mjd(self) -> float:
        return float(self._mjd[0])

    @property
    def last_mjd(self) -> float:
        return float(self._mjd[-1])


# finals2000A fixed-width layout, 1-indexed inclusive column ranges per the
# published IERS readme.  Stored 0-indexed half-open here.
_FINALS_COLUMNS = {
    "mjd": (7, 15),
    "pm_flag": (16, 17),
    "pm_x": (18, 27),
    "pm_y": (37, 46),
    "ut1_flag": (57, 58),
    "ut1_utc": (58, 68),
    "nut_flag": (95, 96),
    "dx": (97, 106),
    "dy": (116, 125),
}


def _field(line: str, name: str) -> str:
    lo, hi = _FINALS_COLUMNS[name]
    return line[lo:hi].strip()


def parse_finals2000A(path) -> EopTable:
    """Parse an IERS finals2000A fixed-width file.

    Lines without a UT1-UTC value (unpublished predictions, truncated
    lines) are skipped and counted on the returned table.
    """
    records = []
    skipped = 0
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if len(line) < 68:
                skipped += 1
                continue
            mjd_s = _field(line, "mjd")
            pm_x_s = _field(line, "pm_x")
            pm_y_s = _field(line, "pm_y")
            ut1_s = _field(line, "ut1_utc")
            if not ut1_s or not pm_x_s or not pm_y_s:
                skipped += 1
                continue
            try:
                dx_s = _field(line, "dx") if len(line) >= 106 else ""
                dy_s = _field(line, "dy") if len(line) >= 125 else ""
                rec = EopRecord(
                    mjd_utc=float(mjd_s),
                    pm_x=float(pm_x_s),
                    pm_y=float(pm_y_s),
                    ut1_utc=float(ut1_s),
                    dx=float(dx_s) if dx_s else 0.0,
                    dy=float(dy_s) if dy_s else 0.0,
                )
            except (ValueError, InvalidArgumentError) as e:
                raise ParseError(f"bad finals2000A line: {e}", path=str(path), line=lineno) from e
            records.append(rec)
    if not records:
        raise ParseError("no parseable EOP lines", path=str(path))
    return EopTable(records, skipped_lines=skipped)


def format_finals2000A_line(rec: EopRecord) -> str:
    """Render a record in the finals2000A layout (IERS flags, no Bulletin B block)."""
    d = date.fromordinal(int(rec.mjd_utc) + _MJD_EPOCH_ORDINAL)
    line = [" "] * 134
    def put(lo: int, text: str):
        for i, ch in enumerate(text):
            line[lo + i] = ch
    put(0, f"{d.year % 100:2d}{d.month:2d}{d.day:2d}")
    put(7, f"{rec.mjd_utc:8.2f}")
    put(16, "I")
    put(18, f"{rec.pm_x:9.6f}")
    put(27, f"{0.0001:9.6f}")
    put(37, f"{rec.pm_y:9.6f}")
    put(46, f"{0.0001:9.6f}")
    put(57, "I")
    put(58, f"{rec.ut1_utc:10.7f}")
    put(68, f"{0.00001:10.7f}")
    put(79, f"{0.0:7.4f}")
    put(86, f"{0.05:7.4f}")
    put(95, "I")
    put(97, f"{rec.dx:9.3f}")
    put(106, f"{0.1:9.3f}")
    put(116, f"{rec.dy:9.3f}")
    put(125, f"{0.1:9.3f}")
    return "".join(line)


def parse_eop_csv(path) -> EopTable:
    """Parse the canonical EOP CSV (see write_eop_csv for the format)."""
    expected = "mjd_utc,pm_x_arcsec,pm_y_arcsec,ut1_utc_s,dx_mas,dy_mas"
    records = []
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip()
        if header != expected:
            raise ParseError(f"bad EOP CSV header {header!r}", path=str(path), line=1)
        for lineno, raw in enumerate(f, start=2):
            if not raw.strip():
                continue
            parts = raw.strip().split(",")
            if len(parts) != 6:
                raise ParseError(f"expected 6 fields, got {len(parts)}", path=str(path), line=lineno)
            try:
                vals = [float(p) for p in parts]
                rec = EopRecord(vals[0], vals[1], vals[2], vals[3], vals[4], vals[5])
            except (ValueError, InvalidArgumentError) as e:
                raise ParseError(f"bad EOP row: {e}", path=str(path), line=lineno) from e
            records.append(rec)
    if not records:
        raise ParseError("no EOP rows", path=str(path))
    return EopTable(records)


def write_eop_csv(path, table: EopTable) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("mjd_utc,pm_x_arcsec,pm_y_arcsec,ut1_utc_s,dx_mas,dy_mas\n")
        for r in table.records:
            f.write(f"{r.mjd_utc:.6f},{r.pm_x:.6f},{r.pm_y:.6f},{r.ut1_utc:.7f},{r.dx:.3f},{r.dy:.3f}\n")


def eop_at(table: EopTable, t: UtcInstant) -> EopRecord:
    """Linearly interpolate the table at ``t``; exact at the nodes."""
    tf = t.mjd()
    mjd = table._mjd
    if tf < mjd[0] or tf > mjd[-1]:
        raise OutOfRangeError(f"t = MJD {tf} outside EOP span [{mjd[0]}, {mjd[-1]}]")
    i = int(np.searchsorted(mjd, tf, side="right")) - 1
    if i == len(mjd) - 1:
        i -= 1
    u = (tf - mjd[i]) / (mjd[i + 1] - mjd[i])
    if u == 0.0:
        return table.records[i]
    c = (1.0 - u) * table._cols[i] + u * table._cols[i + 1]
    return EopRecord(tf, float(c[0]), float(c[1]), float(c[2]), float(c[3]), float(c[4]))


def era(t: UtcInstant, ut1_utc: float = 0.0) -> float:
    """Earth Rotation Angle in radians, in [0, 2*pi).

    Computed with the integer/fractional day split so that microsecond-level
    time steps survive the mod-1 reduction.
    """
    d_int = t.mjd_day - 51544  # whole days from MJD 51544.5 is d_int - 0.5
    f = t.sec_of_day / 86400.0 - 0.5 + ut1_utc / 86400.0
    turns = math.fmod(ERA_TURNS_PER_DAY * d_int, 1.0) + math.fmod(
        ERA_AT_J2000_TURNS + ERA_TURNS_PER_DAY * f, 1.0
    )
    turns = math.fmod(turns, 1.0)
    if turns < 0.0:
        turns += 1.0
    return 2.0 * math.pi * turns


def earth_attitude(table: EopTable, t: UtcInstant) -> UnitQuaternion:
    """Attitude of ITRF in ICRF at ``t``: polar motion, ERA spin, dX/dY offset."""
    rec = eop_at(table, t)
    theta = era(t, rec.ut1_utc)
    q_spin = quat_from_axis_angle(vec3(0.0, 0.0, 1.0), theta)

    # W(t) = R2(x_p) R1(y_p) as a coordinate transform; equivalently active
    # rotations by -x_p about y then -y_p about x.
    q_pm = quat_from_axis_angle(vec3(0.0, 1.0, 0.0), -rec.pm_x * _ARCSEC_TO_RAD) * quat_from_axis_angle(
        vec3(1.0, 0.0, 0.0), -rec.pm_y * _ARCSEC_TO_RAD
    )

    q = q_spin * q_pm
    dx = rec.dx * _MAS_TO_RAD
    dy = rec.dy * _MAS_TO_RAD
    n = math.hypot(dx, dy)
    if n > 0.0:
        # Small-offset celestial pole correction: I + [[0,0,X],[0,0,Y],[-X,-Y,0]].
        q = quat_from_axis_angle(vec3(-dy / n, dx / n, 0.0), n) * q
    return q

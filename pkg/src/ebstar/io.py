"""File formats: events, attitudes, PPS logs, error samples, reports.

All writers are atomic (temp file + rename in the target directory) so a
failed run never leaves a partial file behind.  Quaternions are always
serialized (w, x, y, z) with canonical sign.
"""

from __future__ import annotations

import os
import tempfile
from contextlib import contextmanager

import numpy as np
import pandas as pd

from .attitude import AttitudeEstimate
from .earth import UtcInstant
from .errors import ParseError
from .evaluate import ErrorSample, Report
from .geometry import UnitQuaternion
from .simulator import EVENT_DTYPE
from .timesync import PpsAnchor


@contextmanager
def atomic_write(path, mode: str = "w"):
    """Write to a temp file in the destination directory, rename on success."""
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=os.path.basename(path) + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as f:
            yield f
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_events_csv(path, events: np.ndarray) -> None:
    with atomic_write(path) as f:
        f.write("t_us,x,y,p\n")
        if events.size:
            df = pd.DataFrame(
                {"t_us": events["t_us"], "x": events["x"], "y": events["y"], "p": events["p"]}
            )
            df.to_csv(f, header=False, index=False)


def read_events_csv(path) -> np.ndarray:
    df = pd.read_csv(path)
    if list(df.columns) != ["t_us", "x", "y", "p"]:
        raise ParseError(f"bad event CSV header {list(df.columns)}", path=str(path))
    out = np.zeros(len(df), dtype=EVENT_DTYPE)
    out["t_us"] = df["t_us"].to_numpy(np.int64)
    out["x"] = df["x"].to_numpy(np.int16)
    out["y"] = df["y"].to_numpy(np.int16)
    out["p"] = df["p"].to_numpy(np.int8)
    return out


def write_attitudes_csv(path, estimates: list[AttitudeEstimate]) -> None:
    with atomic_write(path) as f:
        f.write("utc_iso8601,qw,qx,qy,qz,source\n")
        for e in estimates:
            q = e.q.canonical()
            f.write(f"{e.t.to_iso()},{q.w!r},{q.x!r},{q.y!r},{q.z!r},{e.source}\n")


def read_attitudes_csv(path) -> list[AttitudeEstimate]:
    out = []
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip()
        if header != "utc_iso8601,qw,qx,qy,qz,source":
            raise ParseError(f"bad attitude CSV header {header!r}", path=str(path), line=1)
        for lineno, raw in enumerate(f, start=2):
            if not raw.strip():
                continue
            parts = raw.strip().split(",")
            if len(parts) != 6:
                raise ParseError(f"expected 6 fields, got {len(parts)}", path=str(path), line=lineno)
            try:
                t = UtcInstant.from_iso(parts[0])
                q = UnitQuaternion.from_wxyz([float(p) for p in parts[1:5]])
            except (ValueError, ParseError) as e:
                raise ParseError(f"bad attitude row: {e}", path=str(path), line=lineno) from e
            out.append(AttitudeEstimate(t, q, parts[5]))
    return out


def write_pps_csvs(trigger_path, utc_path, anchors: list[PpsAnchor]) -> None:
    with atomic_write(trigger_path) as f:
        f.write("t_event_us\n")
        for a in anchors:
            f.write(f"{a.t_event_us}\n")
    with atomic_write(utc_path) as f:
        f.write("utc_iso8601\n")
        for a in anchors:
            f.write(f"{a.t_utc.to_iso()}\n")


def write_errors_csv(path, samples: list[ErrorSample]) -> None:
    with atomic_write(path) as f:
        f.write("utc_iso8601,ra_err_as,dec_err_as,roll_err_as,across_as,about_as\n")
        for s in samples:
            f.write(
                f"{s.t.to_iso()},{s.ra_err!r},{s.dec_err!r},{s.roll_err!r},{s.across!r},{s.about!r}\n"
            )


def write_report(txt_path, csv_path, report: Report) -> None:
    d = report.as_dict()
    with atomic_write(txt_path) as f:
        for k, v in d.items():
            f.write(f"{k}={'' if v is None else v!r}\n".replace("'", ""))
    with atomic_write(csv_path) as f:
        f.write(",".join(d.keys()) + "\n")
        f.write(",".join("" if v is None else repr(v) for v in d.values()) + "\n")


def write_solve_failures_csv(path, failures: list[tuple[int, str]]) -> None:
    with atomic_write(path) as f:
        f.write("t_start_us,reason\n")
        for t_us, reason in failures:
            f.write(f"{t_us},{reason}\n")

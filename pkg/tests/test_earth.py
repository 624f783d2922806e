import math
import os

import numpy as np
import pytest

from ebstar.earth import (
    ERA_TURNS_PER_DAY,
    EopRecord,
    EopTable,
    UtcInstant,
    earth_attitude,
    eop_at,
    era,
    format_finals2000A_line,
    parse_eop_csv,
    parse_finals2000A,
    write_eop_csv,
)
from ebstar.errors import InvalidArgumentError, OrderingError, OutOfRangeError, ParseError
from ebstar.geometry import ARCSEC_PER_RAD, angular_separation, rotate_vector, vec3

DATA = os.path.join(os.path.dirname(__file__), "..", "data")


def zero_eop_table(mjd0=60610.0, days=14):
    return EopTable([EopRecord(mjd0 + k, 0.0, 0.0, 0.0) for k in range(days)])


class TestUtcInstant:
    def test_iso_round_trip(self):
        t = UtcInstant.from_iso("2024-11-02T03:14:15.123456Z")
        assert t.to_iso() == "2024-11-02T03:14:15.123456Z"
        assert t.mjd_day == 60616

    def test_add_and_diff(self):
        t = UtcInstant(60616, 86399.5)
        t2 = t.add_seconds(1.0)
        assert t2.mjd_day == 60617
        assert t2.sec_of_day == pytest.approx(0.5)
        assert t2.diff_seconds(t) == pytest.approx(1.0)

    def test_diff_exact_over_days(self):
        a = UtcInstant(60616, 0.25)
        b = UtcInstant(60620, 0.75)
        assert b.diff_seconds(a) == 4 * 86400.0 + 0.5

    def test_ordering(self):
        assert UtcInstant(60616, 10.0) < UtcInstant(60616, 11.0) < UtcInstant(60617, 0.0)

    def test_bad_seconds(self):
        with pytest.raises(InvalidArgumentError):
            UtcInstant(60616, 86400.0)


class TestEopParsing:
    def test_formatter_round_trip(self, tmp_path):
        rec = EopRecord(60616.0, 0.123456, -0.065432, -0.1234567, 0.25, -0.4)
        line = format_finals2000A_line(rec)
        p = tmp_path / "finals.txt"
        p.write_text(line + "\n")
        table = parse_finals2000A(p)
        got = table.records[0]
        assert got.mjd_utc == rec.mjd_utc
        assert got.pm_x == rec.pm_x
        assert got.pm_y == rec.pm_y
        assert got.ut1_utc == rec.ut1_utc
        assert got.dx == rec.dx
        assert got.dy == rec.dy

    def test_committed_fixture_hand_read(self):
        # Oracle: slice the first fixture line with the published column
        # offsets (1-indexed: MJD 8-15, PM-x 19-27, PM-y 38-46,
        # UT1-UTC 59-68, dX 98-106, dY 117-125) and compare to the parser.
        path = os.path.join(DATA, "finals2000A_excerpt.txt")
        with open(path) as f:
            line = f.readline().rstrip("\n")
        expected = {
            "mjd": float(line[7:15]),
            "pm_x": float(line[18:27]),
            "pm_y": float(line[37:46]),
            "ut1": float(line[58:68]),
            "dx": float(line[97:106]),
            "dy": float(line[116:125]),
        }
        assert expected["mjd"] == 60610.0
        assert expected["pm_x"] == 0.2412
        assert expected["pm_y"] == 0.3503
        assert expected["ut1"] == 0.045123
        assert expected["dx"] == 0.201
        assert expected["dy"] == -0.153
        rec = parse_finals2000A(path).records[0]
        assert (rec.mjd_utc, rec.pm_x, rec.pm_y, rec.ut1_utc, rec.dx, rec.dy) == (
            expected["mjd"],
            expected["pm_x"],
            expected["pm_y"],
            expected["ut1"],
            expected["dx"],
            expected["dy"],
        )

    def test_truncated_line_skipped_and_counted(self, tmp_path):
        good = format_finals2000A_line(EopRecord(60616.0, 0.1, 0.2, 0.0))
        p = tmp_path / "finals.txt"
        p.write_text(good + "\n" + good[:40] + "\n")
        table = parse_finals2000A(p)
        assert len(table.records) == 1
        assert table.skipped_lines == 1

    def test_all_lines_bad_is_error(self, tmp_path):
        p = tmp_path / "finals.txt"
        p.write_text("garbage\n")
        with pytest.raises(ParseError):
            parse_finals2000A(p)

    def test_csv_two_rows(self, tmp_path):
        p = tmp_path / "eop.csv"
        p.write_text(
            "mjd_utc,pm_x_arcsec,pm_y_arcsec,ut1_utc_s,dx_mas,dy_mas\n"
            "60610.0,0.1,0.2,0.05,0.0,0.0\n"
            "60611.0,0.11,0.21,0.049,0.0,0.0\n"
        )
        table = parse_eop_csv(p)
        assert len(table.records) == 2

    def test_csv_unsorted_rejected(self, tmp_path):
        p = tmp_path / "eop.csv"
        p.write_text(
            "mjd_utc,pm_x_arcsec,pm_y_arcsec,ut1_utc_s,dx_mas,dy_mas\n"
            "60611.0,0.1,0.2,0.05,0.0,0.0\n"
            "60610.0,0.11,0.21,0.049,0.0,0.0\n"
        )
        with pytest.raises(OrderingError):
            parse_eop_csv(p)

    def test_cross_format_identical(self, tmp_path):
        # A CSV exported from a parsed finals2000A fixture parses to the
        # same table.
        src = os.path.join(DATA, "finals2000A_excerpt.txt")
        t1 = parse_finals2000A(src)
        p = tmp_path / "eop.csv"
        write_eop_csv(p, t1)
        t2 = parse_eop_csv(p)
        assert len(t1.records) == len(t2.records)
        for a, b in zip(t1.records, t2.records):
            assert (a.mjd_utc, a.pm_x, a.pm_y, a.ut1_utc, a.dx, a.dy) == (
                b.mjd_utc,
                b.pm_x,
                b.pm_y,
                b.ut1_utc,
                b.dx,
                b.dy,
            )

    def test_invariant_violation_rejected(self):
        with pytest.raises(InvalidArgumentError):
            EopRecord(60610.0, 0.1, 0.2, 1.5)
        with pytest.raises(InvalidArgumentError):
            EopRecord(60610.0, 2.5, 0.2, 0.0)


class TestEopAt:
    def table(self):
        return EopTable(
            [
                EopRecord(60610.0, 0.10, 0.30, 0.050, 0.2, -0.1),
                EopRecord(60611.0, 0.12, 0.28, 0.048, 0.3, -0.2),
                EopRecord(60612.0, 0.16, 0.27, 0.045, 0.1, -0.3),
            ]
        )

    def test_node_exact(self):
        t = self.table()
        rec = eop_at(t, UtcInstant(60611, 0.0))
        assert rec is t.records[1]

    def test_midpoint_mean(self):
        rec = eop_at(self.table(), UtcInstant(60610, 43200.0))
        assert rec.pm_x == pytest.approx(0.11)
        assert rec.pm_y == pytest.approx(0.29)
        assert rec.ut1_utc == pytest.approx(0.049)

    def test_random_against_independent_interpolation(self):
        table = self.table()
        mjds = [r.mjd_utc for r in table.records]
        rng = np.random.default_rng(5)
        for _ in range(100):
            mjd = rng.uniform(mjds[0], mjds[-1])
            t = UtcInstant.from_mjd(mjd)
            rec = eop_at(table, t)
            # Independent two-point interpolation oracle.
            i = max(0, min(len(mjds) - 2, int(np.searchsorted(mjds, t.mjd(), "right")) - 1))
            a, b = table.records[i], table.records[i + 1]
            u = (t.mjd() - a.mjd_utc) / (b.mjd_utc - a.mjd_utc)
            for name in ("pm_x", "pm_y", "ut1_utc", "dx", "dy"):
                expect = getattr(a, name) * (1 - u) + getattr(b, name) * u
                assert getattr(rec, name) == pytest.approx(expect, abs=1e-12)

    def test_out_of_range(self):
        with pytest.raises(OutOfRangeError):
            eop_at(self.table(), UtcInstant(60609, 100.0))


class TestEra:
    def test_j2000_value(self):
        t = UtcInstant(51544, 43200.0)
        assert era(t) == pytest.approx(2 * math.pi * 0.7790572732640, abs=1e-12)

    def test_one_day_linearity(self):
        t0 = UtcInstant(51544, 43200.0)
        t1 = UtcInstant(51545, 43200.0)
        d = (era(t1) - era(t0)) % (2 * math.pi)
        assert d == pytest.approx(2 * math.pi * 0.00273781191135448, abs=1e-10)

    def test_rate_finite_difference(self):
        # Oracle: the defining formula's analytic rate.
        expected = 2 * math.pi * ERA_TURNS_PER_DAY  # rad / day
        assert math.degrees(expected) == pytest.approx(360.9856, abs=1e-4)
        rng = np.random.default_rng(9)
        for _ in range(20):
            mjd = rng.uniform(60610.0, 60620.0)
            dt_day = rng.uniform(0.01, 0.4)
            t1 = UtcInstant.from_mjd(mjd)
            t2 = UtcInstant.from_mjd(mjd + dt_day)
            dt_day_exact = t2.diff_seconds(t1) / 86400.0
            d = era(t2) - era(t1)
            while d < 0:
                d += 2 * math.pi
            rate = d / dt_day_exact
            assert abs(rate - expected) / expected < 1e-9

    def test_ut1_offset_shifts_angle(self):
        t = UtcInstant(60616, 0.0)
        d = era(t, 0.1) - era(t, 0.0)
        expected = 2 * math.pi * ERA_TURNS_PER_DAY * 0.1 / 86400.0
        assert d == pytest.approx(expected, abs=1e-12)


class TestEarthAttitude:
    def test_identity_at_era_zero_with_zero_eop(self):
        table = zero_eop_table()
        # Solve frac(c0 + c1 * Tu) = 0 for a Tu inside the table span.
        k = math.ceil(0.7790572732640 + ERA_TURNS_PER_DAY * (60612.5 - 51544.5))
        tu = (k - 0.7790572732640) / ERA_TURNS_PER_DAY
        t = UtcInstant.from_mjd(51544.5 + tu)
        assert era(t) == pytest.approx(0.0, abs=1e-8) or era(t) == pytest.approx(
            2 * math.pi, abs=1e-8
        )
        q = earth_attitude(table, t)
        assert q.angle_to(q.identity()) < 1e-8

    def test_one_hour_sweep(self):
        table = zero_eop_table()
        t0 = UtcInstant(60612, 7200.0)
        t1 = t0.add_seconds(3600.0)
        x = vec3(1.0, 0.0, 0.0)
        sep = angular_separation(
            rotate_vector(earth_attitude(table, t0), x), rotate_vector(earth_attitude(table, t1), x)
        )
        assert math.degrees(sep) == pytest.approx(15.041, abs=0.001)

    def test_polar_motion_tilts_pole(self):
        base = zero_eop_table()
        tilted = EopTable([EopRecord(60610.0 + k, 0.1, 0.0, 0.0) for k in range(14)])
        t = UtcInstant(60612, 3600.0)
        z = vec3(0.0, 0.0, 1.0)
        b0 = rotate_vector(earth_attitude(base, t), z)
        b1 = rotate_vector(earth_attitude(tilted, t), z)
        tilt_as = angular_separation(b0, b1) * ARCSEC_PER_RAD
        assert tilt_as == pytest.approx(0.1, rel=1e-6)

    def test_rate_invariant_with_real_eops(self):
        table = parse_finals2000A(os.path.join(DATA, "finals2000A_excerpt.txt"))
        t0 = UtcInstant(60612, 0.0)
        rates = []
        for k in range(12):
            a = t0.add_seconds(k * 300.0)
            b = t0.add_seconds((k + 1) * 300.0)
            ang = earth_attitude(table, a).angle_to(earth_attitude(table, b))
            rates.append(math.degrees(ang) / (300.0 / 86400.0))
        for r in rates:
            assert abs(r - 360.9856) / 360.9856 < 1e-4

    def test_deterministic(self):
        table = parse_finals2000A(os.path.join(DATA, "finals2000A_excerpt.txt"))
        t = UtcInstant(60613, 12345.678901)
        q1 = earth_attitude(table, t)
        q2 = earth_attitude(table, t)
        assert q1.as_array().tobytes() == q2.as_array().tobytes()

    def test_continuity(self):
        table = parse_finals2000A(os.path.join(DATA, "finals2000A_excerpt.txt"))
        t0 = UtcInstant(60612, 43000.0)
        rate_rad_s = 2 * math.pi * ERA_TURNS_PER_DAY / 86400.0
        prev = earth_attitude(table, t0)
        for k in range(1, 60):
            t = t0.add_seconds(k * 1.0)
            q = earth_attitude(table, t)
            assert prev.angle_to(q) < 1.1 * rate_rad_s * 1.0
            prev = q

#!/usr/bin/env python3
"""Regenerate the committed data fixtures under data/.

Everything here is synthetic but format-faithful and deterministic:

* sky_mag7.csv       -- full-sky catalog to magnitude 7 with a realistic
                        magnitude distribution (counts roughly triple per
                        magnitude), uniform directions.
* dense_field.csv    -- a dense star band (RA 10..28 deg, |Dec| <= 1.5 deg)
                        sized so the bundled narrow-FOV scenarios keep a
                        handful of trackable stars in frame for a full
                        hour-long sweep.
* finals2000A_excerpt.txt -- two weeks of daily EOP records in the IERS
                        finals2000A fixed-width layout (representative
                        values, not an IERS download).
* eop_excerpt.csv    -- the same table in the canonical EOP CSV format.

Run from the repository root:  python tools/make_fixtures.py
"""

import math
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from ebstar.earth import EopRecord, EopTable, format_finals2000A_line, parse_finals2000A, write_eop_csv

DATA = os.path.join(os.path.dirname(__file__), "..", "data")


def write_catalog(path, ids, ras, decs, mags):
    with open(path, "w", encoding="utf-8") as f:
        f.write("id,ra_deg,dec_deg,mag\n")
        for i, ra, dec, m in zip(ids, ras, decs, mags):
            f.write(f"{i},{ra:.6f},{dec:.6f},{m:.3f}\n")


def make_full_sky(seed=20241102, n=15000, mag_max=7.0):
    rng = np.random.default_rng(seed)
    u = rng.uniform(size=n)
    # N(<m) ~ 3^m: each magnitude has ~3x the stars of the one before.
    mags = np.clip(mag_max + np.log(u) / math.log(3.0), -1.5, mag_max)
    z = rng.uniform(-1.0, 1.0, size=n)
    ra = rng.uniform(0.0, 360.0, size=n)
    dec = np.degrees(np.arcsin(z))
    order = np.argsort(mags)
    ids = np.arange(1, n + 1)
    write_catalog(
        os.path.join(DATA, "sky_mag7.csv"), ids, ra[order], dec[order], mags[order]
    )


def make_dense_field(seed=7031):
    rng = np.random.default_rng(seed)
    ras, decs, mags = [], [], []
    # Guaranteed coverage: a jittered grid of bright stars along three rows.
    for row_dec in (-0.5, 0.0, 0.5):
        for k in range(73):
            ras.append(10.0 + 0.25 * k + rng.uniform(-0.1, 0.1))
            decs.append(row_dec + rng.uniform(-0.15, 0.15))
            mags.append(rng.uniform(4.5, 6.5))
    # Random scatter over the full band.
    n_scatter = 900
    ras.extend(rng.uniform(10.0, 28.0, n_scatter))
    decs.extend(rng.uniform(-1.5, 1.5, n_scatter))
    mags.extend(rng.uniform(5.0, 7.5, n_scatter))
    ids = [200000 + i for i in range(len(ras))]
    write_catalog(os.path.join(DATA, "dense_field.csv"), ids, ras, decs, mags)


def make_eop():
    records = []
    for k in range(14):
        records.append(
            EopRecord(
                mjd_utc=60610.0 + k,
                pm_x=0.2412 + 0.0021 * k,
                pm_y=0.3503 - 0.0009 * k,
                ut1_utc=0.0451230 - 0.0004321 * k,
                dx=0.201,
                dy=-0.153,
            )
        )
    table = EopTable(records)
    finals = os.path.join(DATA, "finals2000A_excerpt.txt")
    with open(finals, "w", encoding="utf-8") as f:
        for r in records:
            f.write(format_finals2000A_line(r) + "\n")
    parsed = parse_finals2000A(finals)
    write_eop_csv(os.path.join(DATA, "eop_excerpt.csv"), parsed)


if __name__ == "__main__":
    os.makedirs(DATA, exist_ok=True)
    make_full_sky()
    make_dense_field()
    make_eop()
    print("fixtures written to", os.path.abspath(DATA))

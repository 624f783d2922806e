"""Command-line entry point.

Subcommands wire the library into reproducible runs driven by one YAML
config: simulate, track, solve, groundtruth, evaluate, and pipeline (all
of them in order).  Every run writes a manifest with the config hash,
input digests, and tool version next to its outputs.

Exit codes: 0 success, 1 data/processing error, 2 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .astrometry import solve_stream
from .attitude import SOURCE_SIM_TRUTH
from .catalog import build_triangle_index, load_catalog
from .config import RunConfig, load_run_config
from .earth import UtcInstant, earth_attitude, parse_eop_csv, parse_finals2000A
from .errors import EbstarError
from .evaluate import align_series, error_series, summarize
from .geometry import RAD_PER_ARCSEC, UnitQuaternion, attitude_from_radec_roll, quat_from_axis_angle
from .groundtruth import gt_series, virtual_telescope
from .io import (
    atomic_write,
    read_attitudes_csv,
    read_events_csv,
    write_attitudes_csv,
    write_errors_csv,
    write_events_csv,
    write_pps_csvs,
    write_report,
    write_solve_failures_csv,
)
from .simulator import generate_events, static_site_trajectory
from .timesync import build_time_map, load_pps_anchors
from .tracker import track_stream

FILES = {
    "events": "events.csv",
    "pps_trigger": "pps_trigger.csv",
    "pps_utc": "pps_utc.csv",
    "truth": "truth.csv",
    "ekf": "ekf.csv",
    "astrometry": "astrometry.csv",
    "astrometry_failures": "astrometry_failures.csv",
    "gt": "gt.csv",
}


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _write_manifest(cfg: RunConfig, command: str, config_path: str, inputs: list, outputs: list):
    manifest = {
        "tool": "ebstar",
        "version": __version__,
        "command": command,
        "config_sha256": _sha256(config_path),
        "inputs": {os.path.basename(p): _sha256(p) for p in inputs if os.path.exists(p)},
        "outputs": [os.path.basename(p) for p in outputs],
        "created_utc": datetime.now(timezone.utc).isoformat(),
    }
    path = os.path.join(cfg.outdir, f"manifest_{command}.json")
    with atomic_write(path) as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def _load_eop(path):
    if path.endswith(".csv"):
        return parse_eop_csv(path)
    return parse_finals2000A(path)


def _out(cfg: RunConfig, name: str) -> str:
    return os.path.join(cfg.outdir, FILES[name])


def _trajectory(cfg: RunConfig, eop):
    t0 = UtcInstant.from_iso(cfg.t0_utc)
    att0 = attitude_from_radec_roll(cfg.boresight_ra_deg, cfg.boresight_dec_deg, cfg.roll_deg)
    return static_site_trajectory(att0, eop, t0, cfg.sim.drift_dec_rate), t0


def cmd_simulate(cfg: RunConfig, config_path: str) -> None:
    eop = _load_eop(cfg.eop_path)
    cat = load_catalog(cfg.catalog_path, cfg.mag_limit)
    traj, t0 = _trajectory(cfg, eop)
    events, pps, truth = generate_events(traj, cat, cfg.camera, cfg.sim, t0, cfg.duration_s)
    os.makedirs(cfg.outdir, exist_ok=True)
    write_events_csv(_out(cfg, "events"), events)
    write_pps_csvs(_out(cfg, "pps_trigger"), _out(cfg, "pps_utc"), pps)
    write_attitudes_csv(_out(cfg, "truth"), truth)
    _write_manifest(
        cfg,
        "simulate",
        config_path,
        [cfg.catalog_path, cfg.eop_path],
        [_out(cfg, "events"), _out(cfg, "pps_trigger"), _out(cfg, "pps_utc"), _out(cfg, "truth")],
    )
    print(f"simulate: {events.size} events, {len(pps)} pps anchors, {len(truth)} truth samples")


def _initial_attitude(cfg: RunConfig) -> UnitQuaternion:
    if cfg.init_source == "value":
        if not cfg.init_value_wxyz:
            raise EbstarError("tracker.init.source is 'value' but no value_wxyz given")
        q0 = UnitQuaternion.from_wxyz(cfg.init_value_wxyz)
    else:
        truth = read_attitudes_csv(_out(cfg, "truth"))
        if not truth:
            raise EbstarError("truth series is empty; cannot initialize tracker")
        q0 = truth[0].q
    if cfg.init_perturb_arcsec > 0.0:
        rng = np.random.default_rng(cfg.init_perturb_seed)
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        q0 = q0 * quat_from_axis_angle(axis, cfg.init_perturb_arcsec * RAD_PER_ARCSEC)
    return q0


def cmd_track(cfg: RunConfig, config_path: str) -> None:
    cat = load_catalog(cfg.catalog_path, cfg.mag_limit)
    events = read_events_csv(_out(cfg, "events"))
    pps = load_pps_anchors(_out(cfg, "pps_trigger"), _out(cfg, "pps_utc"))
    q0 = _initial_attitude(cfg)
    estimates = track_stream(events, pps, cat, cfg.camera, cfg.tracker, q0)
    write_attitudes_csv(_out(cfg, "ekf"), estimates)
    _write_manifest(
        cfg,
        "track",
        config_path,
        [cfg.catalog_path, _out(cfg, "events"), _out(cfg, "pps_trigger"), _out(cfg, "pps_utc")],
        [_out(cfg, "ekf")],
    )
    print(f"track: {len(estimates)} estimates at {cfg.tracker.output_rate:g} Hz")


def cmd_solve(cfg: RunConfig, config_path: str) -> None:
    cat = load_catalog(cfg.catalog_path, cfg.mag_limit)
    index = build_triangle_index(cat, cfg.triangle_max_separation_deg, cfg.quantization_arcsec)
    events = read_events_csv(_out(cfg, "events"))
    pps = load_pps_anchors(_out(cfg, "pps_trigger"), _out(cfg, "pps_utc"))
    tmap = build_time_map(pps)
    estimates, failures = solve_stream(events, tmap, index, cfg.camera, cfg.solver, cfg.window_us)
    write_attitudes_csv(_out(cfg, "astrometry"), estimates)
    write_solve_failures_csv(_out(cfg, "astrometry_failures"), failures)
    _write_manifest(
        cfg,
        "solve",
        config_path,
        [cfg.catalog_path, _out(cfg, "events")],
        [_out(cfg, "astrometry"), _out(cfg, "astrometry_failures")],
    )
    print(f"solve: {len(estimates)} solutions, {len(failures)} failures")


def cmd_groundtruth(cfg: RunConfig, config_path: str) -> None:
    eop = _load_eop(cfg.eop_path)
    est = read_attitudes_csv(_out(cfg, "ekf"))
    if not est:
        raise EbstarError("no tracker estimates; run `track` first")
    if cfg.gt_anchor == "truth":
        anchor_series = [a for a in read_attitudes_csv(_out(cfg, "truth")) if a.source == SOURCE_SIM_TRUTH]
        if not anchor_series:
            raise EbstarError("truth anchor requested but truth.csv is missing or empty")
        anchor = anchor_series[0]
    else:
        idx = 0 if cfg.gt_anchor == "first-estimate" else int(cfg.gt_anchor)
        anchor = est[idx]
    mount = virtual_telescope(earth_attitude(eop, anchor.t), anchor.q)
    series = gt_series(eop, mount, [a.t for a in est])
    write_attitudes_csv(_out(cfg, "gt"), series)
    _write_manifest(
        cfg, "groundtruth", config_path, [cfg.eop_path, _out(cfg, "ekf")], [_out(cfg, "gt")]
    )
    print(f"groundtruth: {len(series)} samples anchored at {anchor.t.to_iso()}")


def cmd_evaluate(cfg: RunConfig, config_path: str) -> None:
    gt = read_attitudes_csv(_out(cfg, "gt"))
    outputs = []
    for source in ("ekf", "astrometry"):
        path = _out(cfg, source)
        if not os.path.exists(path):
            continue
        est = read_attitudes_csv(path)
        if not est:
            continue
        pairs = align_series(est, gt, cfg.eval_max_dt_s)
        samples = error_series(pairs)
        rate = None
        if source == "astrometry":
            fail_path = _out(cfg, "astrometry_failures")
            n_fail = 0
            if os.path.exists(fail_path):
                with open(fail_path) as f:
                    n_fail = max(0, sum(1 for _ in f) - 1)
            total = len(est) + n_fail
            rate = len(est) / total if total else None
        rep = summarize(samples, solve_success_rate=rate)
        err_path = os.path.join(cfg.outdir, f"errors_{source}.csv")
        rep_txt = os.path.join(cfg.outdir, f"report_{source}.txt")
        rep_csv = os.path.join(cfg.outdir, f"report_{source}.csv")
        write_errors_csv(err_path, samples)
        write_report(rep_txt, rep_csv, rep)
        outputs += [err_path, rep_txt, rep_csv]
        print(
            f"evaluate[{source}]: rmse_across={rep.rmse_across:.3f} as, "
            f"rmse_about={rep.rmse_about:.3f} as, n={rep.sample_count}"
        )
    if not outputs:
        raise EbstarError("nothing to evaluate: no estimate series found")
    _write_manifest(cfg, "evaluate", config_path, [_out(cfg, "gt")], outputs)


def cmd_pipeline(cfg: RunConfig, config_path: str) -> None:
    cmd_simulate(cfg, config_path)
    cmd_track(cfg, config_path)
    cmd_solve(cfg, config_path)
    cmd_groundtruth(cfg, config_path)
    cmd_evaluate(cfg, config_path)


COMMANDS = {
    "simulate": cmd_simulate,
    "track": cmd_track,
    "solve": cmd_solve,
    "groundtruth": cmd_groundtruth,
    "evaluate": cmd_evaluate,
    "pipeline": cmd_pipeline,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ebstar",
        description="Event-based star tracker simulation and evaluation runs",
    )
    parser.add_argument("--version", action="version", version=f"ebstar {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} stage")
        p.add_argument("--config", required=True, help="path to the YAML run configuration")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 2
    try:
        cfg = load_run_config(args.config)
        os.makedirs(cfg.outdir, exist_ok=True)
        COMMANDS[args.command](cfg, args.config)
    except EbstarError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

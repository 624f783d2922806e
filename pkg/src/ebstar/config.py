"""Declarative run configuration.

One YAML file describes a full run: camera, catalog, EOP source, scenario
(pointing, start time, duration), simulator, tracker, plate solver,
ground-truth anchoring, and evaluation settings.  Every field has a
default; unknown keys anywhere are rejected; relative paths are resolved
against the config file's directory.  See scenarios/ for commented
examples.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import yaml

from .astrometry import SolverConfig
from .camera import CameraModel
from .errors import ConfigError
from .simulator import SimConfig
from .tracker import TrackerConfig

_DEFAULTS = {
    "camera": {
        "focal_length_m": 0.4,
        "pixel_pitch_m": 4.86e-6,
        "width": 1280,
        "height": 720,
        "principal_point": None,
    },
    "catalog": {
        "path": "../data/dense_field.csv",
        "mag_limit": 7.0,
    },
    "eop": {
        "path": "../data/finals2000A_excerpt.txt",
    },
    "run": {
        "t0_utc": "2024-11-02T03:00:00Z",
        "duration_s": 60.0,
        "boresight_ra_deg": 11.0,
        "boresight_dec_deg": 0.0,
        "roll_deg": 0.0,
        "outdir": "out",
    },
    "sim": {
        "contrast_threshold": 0.15,
        "psf_sigma_px": 0.8,
        "refractory_us": 100.0,
        "noise_rate_hz_per_px": 1e-4,
        "mag_zero_flux": 2000.0,
        "seed": 0,
        "drift_dec_rate_as_per_h": 0.0,
        "clock_skew_ppm": 0.0,
    },
    "tracker": {
        "gate_radius_px": 12.0,
        "process_noise_attitude": 1e-13,
        "process_noise_rate": 1e-16,
        "measurement_noise_px2": 0.25,
        "output_rate_hz": 20.0,
        "min_batch": 8,
        "init": {
            "source": "truth",  # "truth" or "value"
            "value_wxyz": None,
            "perturb_arcsec": 0.0,
            "perturb_seed": 1,
        },
    },
    "astrometry": {
        "window_us": 166667,
        "min_weight": 5,
        "merge_radius_px": 3.0,
        "max_centroids": 12,
        "quantization_arcsec": 10.0,
        "match_tol_px": 2.0,
        "min_match_frac": 0.6,
        "triangle_max_separation_deg": 1.1,
    },
    "groundtruth": {
        "anchor": "first-estimate",  # "first-estimate", "truth", or an integer index
    },
    "evaluate": {
        "max_dt_s": 0.026,
    },
}


def _merge(defaults: dict, user: dict, path: str) -> dict:
    out = {}
    for key, dval in defaults.items():
        if isinstance(dval, dict) and key in user and not isinstance(user[key], dict) and user[key] is not None:
            raise ConfigError(f"{path}{key}: expected a mapping")
        if key in user and isinstance(dval, dict):
            out[key] = _merge(dval, user[key] or {}, f"{path}{key}.")
        elif key in user:
            out[key] = user[key]
        else:
            out[key] = dval if not isinstance(dval, dict) else _merge(dval, {}, f"{path}{key}.")
    unknown = set(user) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(path + k for k in unknown))}")
    return out


@dataclass
class RunConfig:
    camera: CameraModel
    catalog_path: str
    mag_limit: float
    eop_path: str
    t0_utc: str
    duration_s: float
    boresight_ra_deg: float
    boresight_dec_deg: float
    roll_deg: float
    outdir: str
    sim: SimConfig
    tracker: TrackerConfig
    init_source: str
    init_value_wxyz: list | None
    init_perturb_arcsec: float
    init_perturb_seed: int
    solver: SolverConfig
    window_us: int
    triangle_max_separation_deg: float
    quantization_arcsec: float
    gt_anchor: str | int
    eval_max_dt_s: float
    config_dir: str = "."


def load_run_config(path) -> RunConfig:
    path = os.fspath(path)
    with open(path, "r", encoding="utf-8") as f:
        try:
            user = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"cannot parse {path}: {e}") from e
    if not isinstance(user, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    cfg = _merge(_DEFAULTS, user, "")
    base = os.path.dirname(os.path.abspath(path))

    def resolve(p: str) -> str:
        return p if os.path.isabs(p) else os.path.normpath(os.path.join(base, p))

    cam_d = cfg["camera"]
    pp = cam_d["principal_point"]
    camera = CameraModel(
        focal_length=float(cam_d["focal_length_m"]),
        pixel_pitch=float(cam_d["pixel_pitch_m"]),
        width=int(cam_d["width"]),
        height=int(cam_d["height"]),
        principal_point=tuple(pp) if pp is not None else None,
    )
    sim_d = cfg["sim"]
    sim = SimConfig(
        contrast_threshold=float(sim_d["contrast_threshold"]),
        psf_sigma=float(sim_d["psf_sigma_px"]),
        refractory_us=float(sim_d["refractory_us"]),
        noise_rate=float(sim_d["noise_rate_hz_per_px"]),
        mag_zero_flux=float(sim_d["mag_zero_flux"]),
        seed=int(sim_d["seed"]),
        drift_dec_rate=float(sim_d["drift_dec_rate_as_per_h"]),
        clock_skew_ppm=float(sim_d["clock_skew_ppm"]),
    )
    trk_d = cfg["tracker"]
    tracker = TrackerConfig(
        gate_radius=float(trk_d["gate_radius_px"]),
        process_noise_attitude=float(trk_d["process_noise_attitude"]),
        process_noise_rate=float(trk_d["process_noise_rate"]),
        measurement_noise=float(trk_d["measurement_noise_px2"]),
        output_rate=float(trk_d["output_rate_hz"]),
        min_batch=int(trk_d["min_batch"]),
    )
    init_d = trk_d["init"]
    if init_d["source"] not in ("truth", "value"):
        raise ConfigError(f"tracker.init.source must be 'truth' or 'value', got {init_d['source']!r}")
    ast_d = cfg["astrometry"]
    solver = SolverConfig(
        min_weight=int(ast_d["min_weight"]),
        merge_radius_px=float(ast_d["merge_radius_px"]),
        max_centroids=int(ast_d["max_centroids"]),
        match_tol_px=float(ast_d["match_tol_px"]),
        min_match_frac=float(ast_d["min_match_frac"]),
    )
    anchor = cfg["groundtruth"]["anchor"]
    if not (anchor in ("first-estimate", "truth") or isinstance(anchor, int)):
        raise ConfigError(f"groundtruth.anchor must be 'first-estimate', 'truth', or an index, got {anchor!r}")

    return RunConfig(
        camera=camera,
        catalog_path=resolve(cfg["catalog"]["path"]),
        mag_limit=float(cfg["catalog"]["mag_limit"]),
        eop_path=resolve(cfg["eop"]["path"]),
        t0_utc=str(cfg["run"]["t0_utc"]),
        duration_s=float(cfg["run"]["duration_s"]),
        boresight_ra_deg=float(cfg["run"]["boresight_ra_deg"]),
        boresight_dec_deg=float(cfg["run"]["boresight_dec_deg"]),
        roll_deg=float(cfg["run"]["roll_deg"]),
        outdir=resolve(str(cfg["run"]["outdir"])),
        sim=sim,
        tracker=tracker,
        init_source=str(init_d["source"]),
        init_value_wxyz=init_d["value_wxyz"],
        init_perturb_arcsec=float(init_d["perturb_arcsec"]),
        init_perturb_seed=int(init_d["perturb_seed"]),
        solver=solver,
        window_us=int(ast_d["window_us"]),
        triangle_max_separation_deg=float(ast_d["triangle_max_separation_deg"]),
        quantization_arcsec=float(ast_d["quantization_arcsec"]),
        gt_anchor=anchor,
        eval_max_dt_s=float(cfg["evaluate"]["max_dt_s"]),
        config_dir=base,
    )

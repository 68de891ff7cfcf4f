"""Run configuration: a JSON document whose sections mirror the training recipe.

Unknown keys are rejected so typos surface as configuration errors.
"""
from __future__ import annotations

import copy
import json
from pathlib import Path


class ConfigError(ValueError):
    """Invalid or inconsistent configuration (exit code 2)."""


class MissingDependencyError(RuntimeError):
    """A required input or prior-stage artifact is absent (exit code 3)."""


class NumericError(RuntimeError):
    """NaN or Inf encountered (exit code 4)."""


# Full-scale training recipe, kept for reference; the toy defaults below are scaled down.
FULL_SCALE_RECIPE = {
    "sno": {"layers": 4, "batch_size": 2, "epochs": 100, "lr": 5e-4, "scheduler": "cosine"},
    "aeno": {"layers": "6+6", "batch_size": 8, "epochs": 200, "lr": 5e-4, "scheduler": "cosine"},
    "flow": {"batch_size": 64, "epochs": 300, "lr": 2e-4, "scheduler": "cosine"},
}
FULL_SCALE_LATENT_SHAPE = (1, 32, 16, 16)

DEFAULTS = {
    "seed": 0,
    "out": "run",
    "data": {
        "n_train": 64,
        "n_test": 12,
        "grid": [32, 16, 24],
        "dx": 1.0,
        "dt": 0.25,
        "refine": 4,
        "f0": 0.35,
        "source_width": 1.5,
        "background_velocity": 4.0,
    },
    "subspace": {"cutoff_fraction": 0.375, "spatial_factor": 2, "temporal_factor": 2},
    "aeno": {
        "width": 16, "encoder_layers": 4, "decoder_layers": 4, "latent_shape": [1, 8, 4, 4],
        "instance_norm": True,
        "train": {"epochs": 60, "batch_size": 4, "lr": 2e-3, "lr_min": 0.0, "weight_decay": 0.0},
    },
    "sno": {
        "width": 16, "layers": 4, "modes": [8, 6, 8], "instance_norm": True,
        "train": {"epochs": 10, "batch_size": 4, "lr": 1e-3, "lr_min": 0.0, "weight_decay": 0.0},
    },
    "flow": {
        "width": 32, "layers": 4, "time_features": 16, "precondition": True,
        "standardize_latents": False, "source_sigma": 4.0,
        "train": {"epochs": 800, "batch_size": 8, "lr": 2e-3, "lr_min": 0.0, "weight_decay": 0.0},
        "steps": 50, "t_clip": 1e-3,
    },
    "sample": {"n_per_condition": 16, "enforce_bandlimit": False, "grid": None},
    "evaluate": {
        "max_lag_s": 6.0,
        "fas_bins_hz": [0.25, 0.75],
        "profiles": [[[0, 8], [31, 8]], [[0, 0], [31, 15]]],
        "sweep": {"m_min": 4.4, "m_max": 7.0, "step": 0.2, "n": 8},
        "anchors": [4.4, 6.0, 7.0],
    },
    "calibrate": {"events_per_anchor": 4, "ensemble": 8},
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        where = f"{path}.{k}" if path else k
        if k not in base:
            raise ConfigError(f"unknown configuration key '{where}'")
        if isinstance(base[k], dict) and base[k] and isinstance(v, dict):
            out[k] = _merge(base[k], v, where)
        else:
            out[k] = v
    return out


def _validate(cfg: dict) -> None:
    d = cfg["data"]
    if d["n_train"] < 1 or d["n_test"] < 0:
        raise ConfigError("n_train must be positive and n_test non-negative")
    if d["n_test"] % len(cfg["evaluate"]["anchors"]):
        raise ConfigError("n_test must split evenly across the magnitude classes")
    s = cfg["subspace"]
    if not 0 < s["cutoff_fraction"] <= 1:
        raise ConfigError("cutoff_fraction must lie in (0, 1]")
    nx, ny, nt = d["grid"]
    if nx % s["spatial_factor"] or ny % s["spatial_factor"] or nt % s["temporal_factor"]:
        raise ConfigError("coarsening factors must divide the grid")
    for stage in ("aeno", "sno", "flow"):
        t = cfg[stage]["train"]
        if t["epochs"] < 1 or t["batch_size"] < 1 or t["lr"] <= 0 or t["lr_min"] > t["lr"]:
            raise ConfigError(f"invalid training settings for {stage}")
    f = cfg["flow"]
    if f["steps"] < 1 or not 0 < f["t_clip"] < 0.5:
        raise ConfigError("flow steps must be >= 1 and t_clip in (0, 0.5)")
    if f["source_sigma"] < 0:
        raise ConfigError("flow source_sigma must be non-negative")
    if not isinstance(cfg["seed"], int):
        raise ConfigError("seed must be an integer")


def load_config(path=None, **overrides) -> dict:
    """Defaults, then the JSON file at ``path``, then non-None keyword overrides."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            user = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config file must hold a JSON object")
        cfg = _merge(cfg, user)
    cfg = _merge(cfg, {k: v for k, v in overrides.items() if v is not None})
    _validate(cfg)
    return cfg


def coarse_grid(cfg: dict) -> tuple:
    nx, ny, nt = cfg["data"]["grid"]
    s = cfg["subspace"]
    return (nx // s["spatial_factor"], ny // s["spatial_factor"], nt // s["temporal_factor"])

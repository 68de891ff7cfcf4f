"""Toy dataset generation and on-disk layout.

``<out>/data/manifest.json`` lists every event with its condition, class
label and payload stems; each event stores the preprocessed fine field ``u``
and the preprocessed coarse low-pass field ``u_f``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..fields import WaveField
from ..subspace import SubspaceConfig, make_pair
from ..toydata import EventSpec, Medium, Rupture, SimConfig, design_events, preprocess, simulate
from .config import MissingDependencyError


def sim_config(cfg: dict) -> SimConfig:
    d = cfg["data"]
    nx, ny, nt = d["grid"]
    return SimConfig(nx=nx, ny=ny, nt=nt, dx=d["dx"], dt=d["dt"], refine=d["refine"], f0=d["f0"],
                     source_width=d["source_width"])


def medium(cfg: dict, sim: SimConfig) -> Medium:
    return Medium.default(sim, background=cfg["data"]["background_velocity"])


def subspace_config(cfg: dict) -> SubspaceConfig:
    s = cfg["subspace"]
    return SubspaceConfig(s["cutoff_fraction"], s["spatial_factor"], s["temporal_factor"])


def event_record(spec: EventSpec, split: str, index: int) -> dict:
    rec = {
        "id": f"{split}{index:03d}",
        "condition": [round(spec.x, 9), round(spec.y, 9), spec.magnitude],
        "class": f"M{spec.magnitude:.1f}",
        "rupture": None,
        "u": f"{split}/{split}{index:03d}_u",
        "u_f": f"{split}/{split}{index:03d}_uf",
    }
    if spec.rupture is not None:
        r = spec.rupture
        rec["rupture"] = {"start": [round(v, 9) for v in r.start], "end": [round(v, 9) for v in r.end],
                          "speed": round(r.speed, 9), "segments": r.segments}
    return rec


def spec_from_record(rec: dict) -> EventSpec:
    x, y, m = rec["condition"]
    rup = None
    if rec.get("rupture"):
        r = rec["rupture"]
        rup = Rupture(tuple(r["start"]), tuple(r["end"]), r["speed"], r["segments"])
    return EventSpec(x, y, m, rup)


def simulate_pair(spec: EventSpec, med: Medium, sim: SimConfig, sub: SubspaceConfig) -> tuple[WaveField, WaveField]:
    """Preprocessed ``(u_f, u)``; each is normalized by its own standard deviation."""
    u = simulate(spec, med, sim)
    u_f, u = make_pair(u, sub)
    return preprocess(u_f), preprocess(u)


def generate(cfg: dict, root: Path) -> dict:
    sim = sim_config(cfg)
    med = medium(cfg, sim)
    sub = subspace_config(cfg)
    d = cfg["data"]
    train, test = design_events(d["n_train"], d["n_test"], cfg["seed"])
    manifest = {
        "seed": cfg["seed"],
        "data": d,
        "subspace": cfg["subspace"],
        "grid": {"fine": list(d["grid"]), "dx": d["dx"], "dt": d["dt"]},
        "roles": ["scalar", "norm"],
        "splits": {},
    }
    for split, specs in (("train", train), ("test", test)):
        (root / split).mkdir(parents=True, exist_ok=True)
        records = []
        for i, spec in enumerate(specs):
            rec = event_record(spec, split, i)
            u_f, u = simulate_pair(spec, med, sim, sub)
            u.save(root / rec["u"])
            u_f.save(root / rec["u_f"])
            records.append(rec)
        manifest["splits"][split] = records
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest


@dataclass
class Split:
    records: list
    u: np.ndarray        # [N, 2, *fine]
    u_f: np.ndarray      # [N, 2, *coarse]
    fields: list         # fine WaveFields, for metadata

    @property
    def conditions(self) -> np.ndarray:
        return np.array([r["condition"] for r in self.records], dtype=np.float64)


def load_manifest(root: Path) -> dict:
    path = Path(root) / "manifest.json"
    if not path.exists():
        raise MissingDependencyError(f"dataset manifest not found at {path}; run gen-data first")
    return json.loads(path.read_text())


def load_split(root: Path, split: str) -> Split:
    manifest = load_manifest(root)
    records = manifest["splits"][split]
    fine = [WaveField.load(Path(root) / r["u"]) for r in records]
    coarse = [WaveField.load(Path(root) / r["u_f"]) for r in records]
    if not records:
        return Split(records, np.zeros((0,)), np.zeros((0,)), [])
    return Split(records, np.stack([f.values for f in fine]), np.stack([c.values for c in coarse]), fine)

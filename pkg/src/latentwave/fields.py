"""Sampled spatiotemporal fields ``[channels, Nx, Ny, Nt]`` and their on-disk form."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .tensorcore.serialize import load_tensor, save_tensor

HORIZONTAL_1 = "h1"
HORIZONTAL_2 = "h2"
VERTICAL = "v"
SCALAR = "scalar"
NORM = "norm"
ROLES = (HORIZONTAL_1, HORIZONTAL_2, VERTICAL, SCALAR, NORM)


@dataclass
class WaveField:
    values: np.ndarray
    dx: float = 1.0
    dy: float = 1.0
    dt: float = 1.0
    roles: list = field(default_factory=lambda: [SCALAR])

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 4:
            raise ValueError(f"wavefield must be [C, Nx, Ny, Nt], got {self.values.shape}")
        if len(self.roles) != self.values.shape[0]:
            raise ValueError("one role per channel required")
        bad = set(self.roles) - set(ROLES)
        if bad:
            raise ValueError(f"unknown channel roles {sorted(bad)}")

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def grid(self) -> tuple:
        return self.values.shape[1:]

    @property
    def duration(self) -> float:
        return self.values.shape[-1] * self.dt

    @property
    def physical_index(self) -> list[int]:
        return [i for i, r in enumerate(self.roles) if r != NORM]

    @property
    def norm_index(self) -> int | None:
        return self.roles.index(NORM) if NORM in self.roles else None

    def physical(self) -> np.ndarray:
        return self.values[self.physical_index]

    def with_values(self, values, **changes) -> "WaveField":
        return replace(self, values=np.asarray(values, dtype=np.float64), roles=list(changes.pop("roles", self.roles)), **changes)

    def copy(self) -> "WaveField":
        return self.with_values(self.values.copy())

    def meta(self) -> dict:
        return {"dx": self.dx, "dy": self.dy, "dt": self.dt, "roles": list(self.roles),
                "shape": list(self.values.shape)}

    def save(self, stem) -> None:
        stem = Path(stem)
        save_tensor(stem.with_suffix(".bin"), self.values)
        stem.with_suffix(".json").write_text(json.dumps(self.meta(), sort_keys=True) + "\n")

    @classmethod
    def load(cls, stem) -> "WaveField":
        stem = Path(stem)
        meta = json.loads(stem.with_suffix(".json").read_text())
        return cls(load_tensor(stem.with_suffix(".bin")), meta["dx"], meta["dy"], meta["dt"], meta["roles"])

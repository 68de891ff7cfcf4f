"""2D acoustic finite-difference simulator used as the ground-truth factory.

Solves ``p_tt + sigma p_t = c^2 lap(p) + s`` with second-order leapfrog on a
grid ``refine`` times finer than the output grid, wrapped in a quadratic
sponge.  Receivers sit on the output grid; traces are zero-phase Butterworth
filtered and decimated in time to the output rate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .. import kernels
from ..fields import SCALAR, WaveField


@dataclass(frozen=True)
class SimConfig:
    nx: int = 32
    ny: int = 16
    nt: int = 24
    dx: float = 1.0          # km
    dt: float = 0.25         # s
    refine: int = 4
    sponge: int = 24         # internal cells
    sponge_strength: float = 3.0
    f0: float = 0.35         # Ricker peak frequency, Hz
    source_width: float = 1.5  # Gaussian footprint std, km; 0 for a single cell
    t_pre: float = 1.0       # record start before the source peak, s
    m_ref: float = 4.4
    filter_hz: float = 1.0
    filter_order: int = 6
    substeps: int | None = None

    @property
    def h(self) -> float:
        return self.dx / self.refine

    @property
    def t_peak(self) -> float:
        # on the output sampling grid so the record window starts on a sample
        return math.ceil(1.2 / self.f0 / self.dt) * self.dt

    @property
    def interior(self) -> tuple[int, int]:
        return self.nx * self.refine, self.ny * self.refine

    @property
    def sim_shape(self) -> tuple[int, int]:
        ix, iy = self.interior
        return ix + 2 * self.sponge, iy + 2 * self.sponge


@dataclass
class Medium:
    """Velocity on the internal grid (km/s) plus the sponge damping profile."""

    velocity: np.ndarray
    damping: np.ndarray

    def __post_init__(self):
        if np.any(self.velocity <= 0):
            raise ValueError("velocity must be strictly positive")

    @classmethod
    def from_interior(cls, interior_velocity: np.ndarray, cfg: SimConfig) -> "Medium":
        w = cfg.sponge
        vel = np.pad(interior_velocity, w, mode="edge")
        nx, ny = vel.shape
        dist_x = np.maximum(w - np.arange(nx), np.arange(nx) - (nx - 1 - w)).clip(0) / max(w, 1)
        dist_y = np.maximum(w - np.arange(ny), np.arange(ny) - (ny - 1 - w)).clip(0) / max(w, 1)
        d = np.maximum(dist_x[:, None], dist_y[None, :])
        sigma = cfg.sponge_strength * vel.max() / (w * cfg.h) * d ** 2 if w else np.zeros_like(vel)
        return cls(vel, sigma)

    @classmethod
    def homogeneous(cls, cfg: SimConfig, velocity: float = 4.0) -> "Medium":
        return cls.from_interior(np.full(cfg.interior, velocity), cfg)

    @classmethod
    def default(cls, cfg: SimConfig, background: float = 4.0, center=(20.0, 6.0),
                radii=(6.0, 3.5)) -> "Medium":
        """Constant background with one elliptical basin at half speed."""
        ix, iy = cfg.interior
        x = (np.arange(ix) + 0.5) * cfg.h - 0.5 * cfg.h
        y = (np.arange(iy) + 0.5) * cfg.h - 0.5 * cfg.h
        X, Y = np.meshgrid(x, y, indexing="ij")
        r2 = ((X - center[0]) / radii[0]) ** 2 + ((Y - center[1]) / radii[1]) ** 2
        # smooth edge over ~1 km keeps the interface resolved on the output grid
        basin = 0.5 * (1.0 - np.tanh((np.sqrt(r2) - 1.0) * radii[0]))
        return cls.from_interior(background * (1.0 - 0.5 * basin), cfg)


@dataclass
class Rupture:
    """Line rupture from ``start`` to ``end`` (km), split into ``segments`` sub-sources."""

    start: tuple
    end: tuple
    speed: float
    segments: int

    def __post_init__(self):
        if self.segments < 1:
            raise ValueError("rupture needs at least one segment")


@dataclass
class EventSpec:
    x: float
    y: float
    magnitude: float
    rupture: Rupture | None = None
    amplitude_scale: float = 1.0
    meta: dict = field(default_factory=dict)

    @property
    def condition(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.magnitude)


def ricker(t: np.ndarray, f0: float) -> np.ndarray:
    a = (math.pi * f0 * t) ** 2
    return (1.0 - 2.0 * a) * np.exp(-a)


def magnitude_amplitude(m: float, m_ref: float) -> float:
    return 10.0 ** (0.5 * (m - m_ref))


def substeps(cfg: SimConfig, medium: Medium) -> int:
    if cfg.substeps is not None:
        return cfg.substeps
    need = math.ceil(cfg.dt * medium.velocity.max() * math.sqrt(2.0) / cfg.h - 1e-12)
    return max(cfg.refine, need)


def check_cfl(cfg: SimConfig, medium: Medium, nsub: int) -> float:
    number = medium.velocity.max() * (cfg.dt / nsub) / cfg.h
    if number > 1.0 / math.sqrt(2.0) + 1e-12:
        raise ValueError(f"CFL number {number:.3f} exceeds 1/sqrt(2)")
    return number


def _grid_index(x: float, y: float, cfg: SimConfig) -> tuple[int, int]:
    ix = int(round(x / cfg.h)) + cfg.sponge
    iy = int(round(y / cfg.h)) + cfg.sponge
    nx_in, ny_in = cfg.interior
    if not (cfg.sponge <= ix < cfg.sponge + nx_in and cfg.sponge <= iy < cfg.sponge + ny_in):
        raise ValueError(f"source ({x:.2f}, {y:.2f}) lies outside the interior (in the sponge)")
    return ix, iy


def source_footprint(x: float, y: float, cfg: SimConfig):
    """Cells and weights (summing to one) of a Gaussian source centred at ``(x, y)``."""
    ix, iy = _grid_index(x, y, cfg)
    if cfg.source_width <= 0:
        return np.array([ix]), np.array([iy]), np.array([1.0])
    s = cfg.source_width / cfg.h
    r = int(math.ceil(3 * s))
    nx, ny = cfg.sim_shape
    gx = np.arange(max(ix - r, 1), min(ix + r + 1, nx - 1))
    gy = np.arange(max(iy - r, 1), min(iy + r + 1, ny - 1))
    cx = x / cfg.h + cfg.sponge
    cy = y / cfg.h + cfg.sponge
    w = np.exp(-0.5 * (((gx[:, None] - cx) / s) ** 2 + ((gy[None, :] - cy) / s) ** 2))
    keep = w > 1e-6 * w.max()
    GX, GY = np.meshgrid(gx, gy, indexing="ij")
    w = w[keep]
    return GX[keep], GY[keep], w / w.sum()


def source_points(spec: EventSpec, cfg: SimConfig) -> list[tuple[float, float, float, float]]:
    """``(x, y, delay, weight)`` per sub-source; weights sum to the event amplitude."""
    amp = spec.amplitude_scale * magnitude_amplitude(spec.magnitude, cfg.m_ref)
    if spec.rupture is None:
        return [(spec.x, spec.y, 0.0, amp)]
    r = spec.rupture
    p0, p1 = np.asarray(r.start, float), np.asarray(r.end, float)
    pts = []
    for s in range(r.segments):
        c = p0 + (s + 0.5) / r.segments * (p1 - p0)
        delay = float(np.hypot(*(c - (spec.x, spec.y)))) / r.speed if r.speed > 0 else 0.0
        pts.append((float(c[0]), float(c[1]), delay, amp / r.segments))
    return pts


def run(spec: EventSpec, medium: Medium, cfg: SimConfig, with_energy: bool = False):
    """Simulate one event; returns the raw (unfiltered) receiver traces at the internal rate."""
    nsub = substeps(cfg, medium)
    check_cfl(cfg, medium, nsub)
    dt_sim = cfg.dt / nsub
    t_start = cfg.t_peak - cfg.t_pre
    n_out_steps = int(round((t_start + cfg.nt * cfg.dt) / dt_sim)) + nsub
    t = (np.arange(n_out_steps) + 1) * dt_sim  # field time after each step

    pts = source_points(spec, cfg)
    inj_ix, inj_iy, inj_src, inj_w, waves = [], [], [], [], []
    for k, (x, y, delay, weight) in enumerate(pts):
        gx, gy, w = source_footprint(x, y, cfg)
        inj_ix.append(gx)
        inj_iy.append(gy)
        inj_src.append(np.full(len(w), k))
        inj_w.append(w)
        # load dt^2 * s / h^2, evaluated at the step's start time
        waves.append(weight * ricker(t - dt_sim - cfg.t_peak - delay, cfg.f0) * dt_sim ** 2 / cfg.h ** 2)
    inj = (np.concatenate(inj_ix), np.concatenate(inj_iy), np.concatenate(inj_src), np.concatenate(inj_w))
    coef = (medium.velocity * dt_sim / cfg.h) ** 2
    damp = medium.damping * dt_sim / 2.0
    rec_ix = cfg.sponge + cfg.refine * np.arange(cfg.nx)
    rec_iy = cfg.sponge + cfg.refine * np.arange(cfg.ny)
    if with_energy:
        nx, ny = cfg.sim_shape
        rec_ix_all, rec_iy_all = np.arange(nx), np.arange(ny)
        full = kernels.leapfrog_record(coef, damp, *inj, np.array(waves), rec_ix_all, rec_iy_all)
        traces = full[:, rec_ix][:, :, rec_iy]
        w = cfg.sponge
        energy = (full[:, w:-w or None, w:-w or None] ** 2).sum(axis=(1, 2))
        return t, traces, nsub, energy
    traces = kernels.leapfrog_record(coef, damp, *inj, np.array(waves), rec_ix, rec_iy)
    return t, traces, nsub


def decimate(t: np.ndarray, traces: np.ndarray, nsub: int, cfg: SimConfig, filtered: bool = True) -> np.ndarray:
    """Filter and resample internal-rate traces ``[steps, nx, ny]`` to ``[nx, ny, nt]``."""
    data = traces
    if filtered:
        fs = nsub / cfg.dt
        sos = signal.butter(cfg.filter_order, cfg.filter_hz, btype="low", fs=fs, output="sos")
        data = signal.sosfiltfilt(sos, traces, axis=0)
    t_start = cfg.t_peak - cfg.t_pre
    first = int(round(t_start / (cfg.dt / nsub))) - 1
    idx = first + nsub * np.arange(cfg.nt)
    return np.moveaxis(data[idx], 0, -1)


def simulate_point_source(spec: EventSpec, medium: Medium, cfg: SimConfig, filtered: bool = True) -> WaveField:
    if spec.rupture is not None:
        spec = EventSpec(spec.x, spec.y, spec.magnitude, None, spec.amplitude_scale, dict(spec.meta))
    return _simulate(spec, medium, cfg, filtered)


def simulate_finite_rupture(spec: EventSpec, medium: Medium, cfg: SimConfig, filtered: bool = True) -> WaveField:
    """Superpose delayed sub-source responses along the rupture (one linear solve)."""
    if spec.rupture is None:
        raise ValueError("finite rupture requires a rupture description")
    return _simulate(spec, medium, cfg, filtered)


def simulate(spec: EventSpec, medium: Medium, cfg: SimConfig, filtered: bool = True) -> WaveField:
    return _simulate(spec, medium, cfg, filtered)


def _simulate(spec, medium, cfg, filtered) -> WaveField:
    t, traces, nsub = run(spec, medium, cfg)
    values = decimate(t, traces, nsub, cfg, filtered)[None]
    return WaveField(values, cfg.dx, cfg.dx, cfg.dt, [SCALAR])

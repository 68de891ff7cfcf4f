"""Ground-motion evaluation metrics.

Amplitude, PGV, Fourier amplitude spectra, lagged normalized
cross-correlation, log spectral residuals, ensemble geometric statistics,
1-D Wasserstein distances and magnitude-interpolated condition pools.
All functions read physical channels only; a norm channel is ignored.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from . import kernels
from .fields import HORIZONTAL_1, HORIZONTAL_2, WaveField

SPECTRUM_FLOOR = 1e-30


def _physical(u: WaveField) -> np.ndarray:
    idx = u.physical_index
    if not idx:
        raise ValueError("field has no physical channels")
    return u.values[idx]


def amplitude(u: WaveField) -> np.ndarray:
    """Pointwise Euclidean norm over physical channels, ``[Nx, Ny, Nt]``."""
    return np.sqrt(np.sum(_physical(u) ** 2, axis=0))


def pgv(u: WaveField) -> np.ndarray:
    return amplitude(u).max(axis=-1)


def fas_freqs(nt: int, dt: float) -> np.ndarray:
    return np.arange(nt // 2 + 1) / (nt * dt)


def amplitude_spectrum(trace: np.ndarray, dt: float) -> np.ndarray:
    """``dt * |rfft|`` along the last axis."""
    return dt * np.abs(np.fft.rfft(trace, axis=-1))


def power_mean(a1: np.ndarray, a2: np.ndarray) -> np.ndarray:
    return np.sqrt(0.5 * (np.asarray(a1) ** 2 + np.asarray(a2) ** 2))


def fas(u: WaveField, pair: tuple[int, int] | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Fourier amplitude spectrum per location, ``([Nx, Ny, F], freqs)``.

    With two horizontal channels (given by ``pair`` or by their roles) the
    power mean of both is returned; a single physical channel returns its
    own spectrum.
    """
    freqs = fas_freqs(u.grid[-1], u.dt)
    if pair is None and HORIZONTAL_1 in u.roles and HORIZONTAL_2 in u.roles:
        pair = (u.roles.index(HORIZONTAL_1), u.roles.index(HORIZONTAL_2))
    if pair is not None:
        a1 = amplitude_spectrum(u.values[pair[0]], u.dt)
        a2 = amplitude_spectrum(u.values[pair[1]], u.dt)
        return power_mean(a1, a2), freqs
    phys = _physical(u)
    if phys.shape[0] != 1:
        raise ValueError("several physical channels but no horizontal pair to combine")
    return amplitude_spectrum(phys[0], u.dt), freqs


# ---------------------------------------------------------------------------
# normalized cross-correlation


def max_lag_samples(max_lag_s: float, dt: float, nt: int) -> int:
    if max_lag_s < 0:
        raise ValueError("max_lag_s must be non-negative")
    return min(int(math.floor(max_lag_s / dt + 0.5)), nt - 1)


@dataclass
class NccMap:
    rho: np.ndarray       # peak coefficient per location
    lag: np.ndarray       # lag of the peak, seconds
    reference: tuple
    max_lag: float


def _peak(rho: np.ndarray, K: int) -> tuple[np.ndarray, np.ndarray]:
    """Argmax over lags with ties going to the smallest |k|, then to negative k."""
    ks = np.arange(-K, K + 1)
    order = np.lexsort((ks, np.abs(ks)))
    best = np.argmax(rho[:, order], axis=1)
    k_star = ks[order][best]
    return rho[np.arange(rho.shape[0]), k_star + K], k_star


def ncc(u: WaveField, ref_location: tuple[int, int], max_lag_s: float) -> NccMap:
    phys = _physical(u)
    c, nx, ny, nt = phys.shape
    i, j = ref_location
    if not (0 <= i < nx and 0 <= j < ny):
        raise ValueError(f"reference {ref_location} outside the {nx}x{ny} grid")
    ref = phys[:, i, j, :]
    if not np.any(ref):
        raise ValueError("reference trace has zero energy")
    K = max_lag_samples(max_lag_s, u.dt, nt)
    traces = np.moveaxis(phys, 0, 2).reshape(nx * ny, c, nt)
    rho = kernels.ncc_scan(traces, ref, K)
    peak, k_star = _peak(rho, K)
    return NccMap(peak.reshape(nx, ny), (k_star * u.dt).reshape(nx, ny), (i, j), float(max_lag_s))


# ---------------------------------------------------------------------------
# spectral residuals and ensemble statistics


@dataclass
class ResidualField:
    values: np.ndarray    # [Nx, Ny, F], natural-log units
    event_id: str
    ensemble_size: int
    floored: int = 0

    def summary(self) -> dict:
        flat = self.values.reshape(-1, self.values.shape[-1])
        return {
            "mean": flat.mean(axis=0),
            "median": np.median(flat, axis=0),
            "p16": np.percentile(flat, 16, axis=0),
            "p84": np.percentile(flat, 84, axis=0),
        }


def _safe_log(a: np.ndarray) -> tuple[np.ndarray, int]:
    a = np.asarray(a, dtype=np.float64)
    low = a < SPECTRUM_FLOOR
    return np.log(np.where(low, SPECTRUM_FLOOR, a)), int(low.sum())


def residual(data_fas: np.ndarray, syn_fas: Sequence[np.ndarray], event_id: str = "") -> ResidualField:
    """``ln A_data - mean_i ln A_syn_i`` per location and frequency."""
    syn = list(syn_fas)
    if not syn:
        raise ValueError("synthetic ensemble is empty")
    ld, nd = _safe_log(data_fas)
    ls, ns = _safe_log(np.stack(syn))
    return ResidualField(ld - ls.mean(axis=0), event_id, len(syn), nd + ns)


def geo_stats(ensemble: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Geometric mean and geometric standard deviation across the first axis."""
    logs, _ = _safe_log(np.stack(list(ensemble)))
    return np.exp(logs.mean(axis=0)), np.exp(logs.std(axis=0))


def wasserstein1(a: Sequence[float], b: Sequence[float]) -> float:
    a, b = np.asarray(a, dtype=np.float64).ravel(), np.asarray(b, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    return float(stats.wasserstein_distance(a, b))


def fd_histogram(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Counts and edges with Freedman-Diaconis binning."""
    values = np.asarray(values, dtype=np.float64).ravel()
    edges = np.histogram_bin_edges(values, bins="fd")
    counts, edges = np.histogram(values, bins=edges)
    return counts, edges


def profile(u: WaveField, start: tuple, end: tuple, n: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Amplitude along a segment (grid-index endpoints), nearest-point sampled.

    Returns ``(distance, amplitude[n, Nt])`` with distance in length units.
    """
    (x0, y0), (x1, y1) = start, end
    if n is None:
        n = int(max(abs(x1 - x0), abs(y1 - y0))) + 1
    s = np.linspace(0.0, 1.0, n)
    ix = np.rint(x0 + s * (x1 - x0)).astype(int).clip(0, u.grid[0] - 1)
    iy = np.rint(y0 + s * (y1 - y0)).astype(int).clip(0, u.grid[1] - 1)
    amp = amplitude(u)[ix, iy]
    dist = np.hypot((ix - ix[0]) * u.dx, (iy - iy[0]) * u.dy)
    return dist, amp


# ---------------------------------------------------------------------------
# magnitude interpolation


def interp_alpha(m: float, anchors: Sequence[float] = (4.4, 6.0, 7.0)) -> tuple[int, float]:
    """Index of the lower bracketing anchor and the mixing weight toward the upper one."""
    anchors = list(anchors)
    if len(anchors) < 2 or any(b <= a for a, b in zip(anchors, anchors[1:])):
        raise ValueError("need at least two strictly increasing anchors")
    if not anchors[0] <= m <= anchors[-1]:
        raise ValueError(f"magnitude {m} outside anchor range [{anchors[0]}, {anchors[-1]}]")
    for i in range(len(anchors) - 1):
        if m <= anchors[i + 1]:
            return i, (m - anchors[i]) / (anchors[i + 1] - anchors[i])
    raise AssertionError("unreachable")


def interp_conditions(m_target: float, pool_low: Sequence, pool_high: Sequence, n: int, seed: int,
                      anchors: tuple[float, float] = (4.4, 6.0), shuffle: bool = True) -> list:
    """Mix hypocentres from two neighbouring pools and relabel them with ``m_target``.

    Pool entries are ``(x, y, ...)`` tuples or objects exposing ``hypocenter``;
    ``round(alpha * n)`` come from the high pool, the rest from the low pool.
    Picks are prefixes of fixed per-seed permutations (or of the pools as
    given when ``shuffle`` is false), so the chosen sets are nested as
    ``m_target`` moves between the anchors.
    """
    from .operators import Condition

    if not pool_low or not pool_high:
        raise ValueError("condition pools must be non-empty")
    _, alpha = interp_alpha(m_target, anchors)
    n_high = int(round(alpha * n))
    n_low = n - n_high
    if n_high > len(pool_high) or n_low > len(pool_low):
        raise ValueError(f"pools too small for {n_low} low / {n_high} high draws")
    rng = np.random.default_rng(seed)
    order = rng.permutation if shuffle else np.arange
    pick_low = order(len(pool_low))[:n_low]
    pick_high = order(len(pool_high))[:n_high]

    def hypo(item):
        h = getattr(item, "hypocenter", None)
        return tuple(h) if h is not None else tuple(item[:2])

    out = [Condition(hypo(pool_low[i]), float(m_target)) for i in pick_low]
    out += [Condition(hypo(pool_high[i]), float(m_target)) for i in pick_high]
    return out


# ---------------------------------------------------------------------------
# export


def write_map_csv(path, maps: dict, dx: float = 1.0, dy: float = 1.0) -> None:
    """One row per grid point: ``x, y`` followed by one column per map."""
    names = sorted(maps)
    shape = np.shape(maps[names[0]])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y"] + names)
        for i in range(shape[0]):
            for j in range(shape[1]):
                w.writerow([f"{i * dx:.6g}", f"{j * dy:.6g}"] + [f"{float(maps[k][i, j]):.9g}" for k in names])


def write_rows_csv(path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(header))
        for r in rows:
            w.writerow([f"{v:.9g}" if isinstance(v, float) else v for v in r])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(f"{float(obj):.9g}")
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True))

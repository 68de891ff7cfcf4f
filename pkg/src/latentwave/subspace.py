"""Low-frequency subspace: temporal low-pass projection, coarsening and (u_f, u) pairs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import WaveField
from .specops import spectral_resample
from .tensorcore import Tensor
from .tensorcore.fft import fft_along, ifft_along

# 0.75 Hz cutoff over a 2 Hz Nyquist (4 Hz sampling)
DEFAULT_CUTOFF_FRACTION = 0.375


@dataclass(frozen=True)
class SubspaceConfig:
    cutoff_fraction: float = DEFAULT_CUTOFF_FRACTION
    spatial_factor: int = 2
    temporal_factor: int = 2

    def __post_init__(self):
        if not 0.0 < self.cutoff_fraction <= 1.0:
            raise ValueError("cutoff_fraction must lie in (0, 1]")
        if self.spatial_factor < 1 or self.temporal_factor < 1:
            raise ValueError("coarsening factors must be positive")


def lowpass_mask(nt: int, cutoff_fraction: float, taper_bins: int = 0) -> np.ndarray:
    """Gain per FFT bin (numpy bin order) for a cutoff given as a Nyquist fraction.

    With ``taper_bins == 0`` the gain is 0/1 and the filter is an exact
    projection.  A positive ``taper_bins`` rolls the gain off with a raised
    cosine over that many bins just inside the cutoff; the result is then
    smoother but no longer idempotent.
    """
    if not 0.0 < cutoff_fraction <= 1.0:
        raise ValueError("cutoff_fraction must lie in (0, 1]")
    k = np.abs(np.fft.fftfreq(nt) * nt)
    ratio = k / (nt / 2.0)
    gain = (ratio <= cutoff_fraction + 1e-12).astype(np.float64)
    if taper_bins > 0:
        kc = cutoff_fraction * nt / 2.0
        edge = (k > kc - taper_bins) & (k <= kc + 1e-12)
        gain[edge] = 0.5 * (1.0 + np.cos(np.pi * (k[edge] - (kc - taper_bins)) / taper_bins))
    return gain


def lowpass_values(values: np.ndarray, cutoff_fraction: float, taper_bins: int = 0) -> np.ndarray:
    nt = values.shape[-1]
    gain = lowpass_mask(nt, cutoff_fraction, taper_bins)
    return ifft_along(fft_along(values, [-1]) * gain, [-1]).real


def lowpass(u: WaveField, cutoff_fraction: float = DEFAULT_CUTOFF_FRACTION, taper_bins: int = 0) -> WaveField:
    """Temporal low-pass projection; the grid is unchanged."""
    return u.with_values(lowpass_values(u.values, cutoff_fraction, taper_bins))


def coarsen(u: WaveField, cfg: SubspaceConfig) -> WaveField:
    """Strided subsampling by the configured factors."""
    sx = sy = cfg.spatial_factor
    st = cfg.temporal_factor
    _, nx, ny, nt = u.shape
    for n, f, name in ((nx, sx, "x"), (ny, sy, "y"), (nt, st, "t")):
        if n % f:
            raise ValueError(f"factor {f} does not divide {name}-extent {n}")
    return u.with_values(u.values[:, ::sx, ::sy, ::st].copy(), dx=u.dx * sx, dy=u.dy * sy, dt=u.dt * st)


def make_pair(u: WaveField, cfg: SubspaceConfig) -> tuple[WaveField, WaveField]:
    """Return ``(u_f, u)`` with ``u_f`` the coarse low-passed field."""
    u_f = coarsen(lowpass(u, cfg.cutoff_fraction), cfg)
    return u_f, u.copy()


def spectral_upsample(values: np.ndarray, grid) -> np.ndarray:
    """Band-limited interpolation of ``[C, *grid_in]`` values onto ``grid``."""
    return spectral_resample(Tensor(values), tuple(grid)).data

"""Frequency-dependent spectral bias correction.

A bias curve is the mean log residual between data and synthetic spectra at
one anchor magnitude.  Curves are interpolated linearly in magnitude and
applied as a real, phase-preserving gain on each trace's spectrum.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .fields import WaveField
from .metrics import SPECTRUM_FLOOR, fas, fas_freqs, interp_alpha, residual


@dataclass
class BiasCurve:
    anchor_magnitude: float
    frequencies: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.frequencies.shape != self.bias.shape or self.bias.ndim != 1:
            raise ValueError("bias and frequency axis must be 1-D and of equal length")
        if not np.all(np.isfinite(self.bias)):
            raise ValueError("bias curve contains non-finite values")

    @classmethod
    def zeros(cls, anchor_magnitude: float, nt: int, dt: float) -> "BiasCurve":
        f = fas_freqs(nt, dt)
        return cls(anchor_magnitude, f, np.zeros_like(f))

    def to_json(self) -> dict:
        return {"anchor_magnitude": float(self.anchor_magnitude),
                "frequencies": self.frequencies.tolist(), "bias": self.bias.tolist()}

    @classmethod
    def from_json(cls, d: dict) -> "BiasCurve":
        return cls(float(d["anchor_magnitude"]), d["frequencies"], d["bias"])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2))

    @classmethod
    def load(cls, path) -> "BiasCurve":
        return cls.from_json(json.loads(Path(path).read_text()))


def residual_rows(data: WaveField, ensemble: Sequence[WaveField]) -> np.ndarray:
    """Log residuals as ``[locations, F]``, NaN where any spectrum hit the floor.

    A floored bin carries no amplitude a gain could scale, so it is left out
    of bias estimates and closure checks instead of dragging their means.
    """
    a_data, _ = fas(data)
    a_syn = np.stack([fas(s)[0] for s in ensemble])
    ok = (a_data >= SPECTRUM_FLOOR) & np.all(a_syn >= SPECTRUM_FLOOR, axis=0)
    res = np.where(ok, residual(a_data, a_syn).values, np.nan)
    return res.reshape(-1, res.shape[-1])


def mean_rows(rows: np.ndarray) -> np.ndarray:
    """Per-frequency mean over valid rows; 0 where no row is valid."""
    count = np.sum(~np.isnan(rows), axis=0)
    return np.where(count > 0, np.nansum(rows, axis=0) / np.maximum(count, 1), 0.0)


def event_bias(data: WaveField, ensemble: Sequence[WaveField]) -> np.ndarray:
    """Spatial mean residual of one event, per frequency (diagnostic)."""
    return mean_rows(residual_rows(data, ensemble))


def estimate_bias(events: Sequence[tuple[WaveField, Sequence[WaveField]]], anchor_m: float) -> BiasCurve:
    """Mean log residual over all locations and events at one anchor magnitude."""
    events = list(events)
    if not events:
        raise ValueError("no events to estimate a bias curve from")
    rows = []
    for data, ensemble in events:
        if not ensemble:
            raise ValueError("every event needs a non-empty synthetic ensemble")
        rows.append(residual_rows(data, ensemble))
    freqs = fas_freqs(events[0][0].grid[-1], events[0][0].dt)
    return BiasCurve(anchor_m, freqs, mean_rows(np.concatenate(rows)))


def interp_bias(m: float, anchors: Sequence[BiasCurve]) -> BiasCurve:
    anchors = sorted(anchors, key=lambda c: c.anchor_magnitude)
    if not anchors:
        raise ValueError("no anchor curves")
    for c in anchors[1:]:
        if not np.allclose(c.frequencies, anchors[0].frequencies, rtol=0, atol=1e-12):
            raise ValueError("anchor curves disagree on the frequency axis")
    if len(anchors) == 1:
        if m != anchors[0].anchor_magnitude:
            raise ValueError(f"magnitude {m} outside anchor range")
        return anchors[0]
    i, alpha = interp_alpha(m, [c.anchor_magnitude for c in anchors])
    lo, hi = anchors[i], anchors[i + 1]
    if alpha == 0.0:
        bias = lo.bias.copy()
    elif alpha == 1.0:
        bias = hi.bias.copy()
    else:
        bias = (1.0 - alpha) * lo.bias + alpha * hi.bias
    return BiasCurve(m, lo.frequencies, bias)


def apply_calibration(u: WaveField, curve: BiasCurve) -> WaveField:
    """Scale every bin of every physical trace by ``exp(bias(f))``; phases untouched."""
    nt = u.grid[-1]
    freqs = fas_freqs(nt, u.dt)
    if curve.frequencies.shape != freqs.shape or not np.allclose(curve.frequencies, freqs, rtol=1e-9, atol=1e-12):
        raise ValueError("bias curve frequency axis does not match the field's time axis")
    values = u.values.copy()
    idx = u.physical_index
    gain = np.exp(curve.bias)
    spec = np.fft.rfft(values[idx], axis=-1) * gain
    values[idx] = np.fft.irfft(spec, n=nt, axis=-1)
    return u.with_values(values)


def bias_file(directory, magnitude: float) -> Path:
    return Path(directory) / f"bias_M{magnitude:.2f}.json"


def load_anchor_curves(directory, magnitudes: Sequence[float]) -> list[BiasCurve]:
    curves = []
    for m in magnitudes:
        path = bias_file(directory, m)
        if not path.exists():
            raise FileNotFoundError(f"missing bias curve for anchor magnitude {m} ({path})")
        curves.append(BiasCurve.load(path))
    return curves

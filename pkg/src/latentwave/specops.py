"""Fourier-operator building blocks: spectral convolution, rFNO blocks, instance norm.

All layers act on batched tensors shaped ``[batch, channels, *grid]``.  The
last grid axis is treated as the real-FFT axis; the remaining grid axes keep
modes symmetrically (``|k| < m``), so every layer emits exactly real output.
Nyquist bins are never retained, which keeps a layer's action on a
band-limited input identical across grid resolutions.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .tensorcore import Tensor, make_op
from .tensorcore import autodiff as ops

INSTANCE_NORM_EPS = 1e-5


# ---------------------------------------------------------------------------
# mode bookkeeping

def _effective_modes(modes: Sequence[int], in_grid: Sequence[int], out_grid: Sequence[int]) -> list[int]:
    return [max(1, min(m, (ni + 1) // 2, (no + 1) // 2)) for m, ni, no in zip(modes, in_grid, out_grid)]


def _signed_modes(m: int, full: bool) -> np.ndarray:
    if not full:
        return np.arange(m)
    return np.concatenate([np.arange(m), np.arange(-(m - 1), 0)])


def _weight_positions(m_eff: int, m: int, full: bool) -> np.ndarray:
    """Positions in a stored weight axis of the retained signed modes."""
    if not full:
        return np.arange(m_eff)
    return np.concatenate([np.arange(m_eff), np.arange(2 * m - 1 - (m_eff - 1), 2 * m - 1)])


def _spec_index(ks: list[np.ndarray], grid: Sequence[int], lead: int) -> tuple:
    """Open-mesh index into an rfftn spectrum for the signed mode lists ``ks``."""
    pos = [k % n if i < len(grid) - 1 else k for i, (k, n) in enumerate(zip(ks, grid))]
    return (slice(None),) * lead + np.ix_(*pos)


def _last_axis_weight(ks_last: np.ndarray) -> np.ndarray:
    # bins 0 < k < n/2 appear twice in a Hermitian spectrum
    return np.where(ks_last == 0, 1.0, 2.0)


def _rfftn(x: np.ndarray, ndim: int) -> np.ndarray:
    return np.fft.rfftn(x, axes=tuple(range(-ndim, 0)))


def _irfftn(x: np.ndarray, grid: Sequence[int]) -> np.ndarray:
    ndim = len(grid)
    return np.fft.irfftn(x, s=tuple(grid), axes=tuple(range(-ndim, 0)))


def _spectrum_shape(lead: tuple, grid: Sequence[int]) -> tuple:
    return tuple(lead) + tuple(grid[:-1]) + (grid[-1] // 2 + 1,)


# ---------------------------------------------------------------------------
# spectral resampling

def spectral_resample(u: Tensor, out_grid: Sequence[int]) -> Tensor:
    """Band-limited interpolation or truncation of ``u`` onto ``out_grid``."""
    out_grid = tuple(int(n) for n in out_grid)
    in_grid = u.shape[-len(out_grid):]
    if tuple(in_grid) == out_grid:
        return u
    d = len(out_grid)
    lead = u.shape[:-d]
    m = _effective_modes([10**9] * d, in_grid, out_grid)
    ks = [_signed_modes(mi, i < d - 1) for i, mi in enumerate(m)]
    idx_in = _spec_index(ks, in_grid, len(lead))
    idx_out = _spec_index(ks, out_grid, len(lead))
    n_in, n_out = int(np.prod(in_grid)), int(np.prod(out_grid))

    X = _rfftn(u.data, d)
    Y = np.zeros(_spectrum_shape(lead, out_grid), dtype=np.complex128)
    Y[idx_out] = X[idx_in]
    out = _irfftn(Y, out_grid) * (n_out / n_in)

    def vjp(g):
        G = _rfftn(g, d)
        Z = np.zeros(_spectrum_shape(lead, in_grid), dtype=np.complex128)
        Z[idx_in] = G[idx_out]
        return (_irfftn(Z, in_grid),)

    return make_op(out, (u,), vjp)


# ---------------------------------------------------------------------------
# spectral convolution

@dataclass
class SpectralConvParams:
    """Per-mode complex channel maps, stored as real and imaginary parts.

    Weight shape is ``[in_channels, out_channels, 2m_1-1, ..., 2m_{d-1}-1, m_d]``.
    """

    w_re: Tensor
    w_im: Tensor
    modes: tuple

    @property
    def in_channels(self) -> int:
        return self.w_re.shape[0]

    @property
    def out_channels(self) -> int:
        return self.w_re.shape[1]

    @classmethod
    def init(cls, rng: np.random.Generator, in_channels: int, out_channels: int,
             modes: Sequence[int], name: str = "spectral") -> "SpectralConvParams":
        modes = tuple(int(m) for m in modes)
        shape = (in_channels, out_channels) + tuple(2 * m - 1 for m in modes[:-1]) + (modes[-1],)
        scale = 1.0 / (in_channels * max(modes))
        return cls(Tensor(scale * rng.uniform(-1, 1, shape), True, f"{name}.w_re"),
                   Tensor(scale * rng.uniform(-1, 1, shape), True, f"{name}.w_im"),
                   modes)

    @classmethod
    def identity(cls, channels: int, modes: Sequence[int]) -> "SpectralConvParams":
        modes = tuple(int(m) for m in modes)
        shape = (channels, channels) + tuple(2 * m - 1 for m in modes[:-1]) + (modes[-1],)
        w = np.zeros(shape)
        for c in range(channels):
            w[c, c] = 1.0
        return cls(Tensor(w, True), Tensor(np.zeros(shape), True), modes)

    def tensors(self) -> list[Tensor]:
        return [self.w_re, self.w_im]


def spectral_conv(u: Tensor, p: SpectralConvParams, out_grid: Sequence[int] | None = None) -> Tensor:
    """FFT -> per-mode channel map on the retained low modes -> inverse FFT.

    ``u`` is ``[batch, C_in, *grid]``; the output lives on ``out_grid``
    (default: the input grid).
    """
    d = len(p.modes)
    if u.ndim != d + 2:
        raise ValueError(f"expected input of rank {d + 2}, got shape {u.shape}")
    if u.shape[1] != p.in_channels:
        raise ValueError(f"channel mismatch: input has {u.shape[1]}, weights expect {p.in_channels}")
    in_grid = tuple(u.shape[2:])
    out_grid = in_grid if out_grid is None else tuple(int(n) for n in out_grid)
    batch = u.shape[0]
    m_eff = _effective_modes(p.modes, in_grid, out_grid)
    full = [i < d - 1 for i in range(d)]
    ks = [_signed_modes(me, f) for me, f in zip(m_eff, full)]
    wpos = [_weight_positions(me, m, f) for me, m, f in zip(m_eff, p.modes, full)]
    widx = (slice(None), slice(None)) + np.ix_(*wpos)
    idx_in = _spec_index(ks, in_grid, 2)
    idx_out = _spec_index(ks, out_grid, 2)
    n_in, n_out = int(np.prod(in_grid)), int(np.prod(out_grid))
    wlast = _last_axis_weight(ks[-1])

    W = p.w_re.data[widx] + 1j * p.w_im.data[widx]
    Xs = _rfftn(u.data, d)[idx_in]
    mshape = Xs.shape[2:]
    # per-mode channel maps as one batched matmul: [M, B, Cin] @ [M, Cin, Cout]
    Xm = Xs.reshape(batch, p.in_channels, -1).transpose(2, 0, 1)
    Wm = W.reshape(p.in_channels, p.out_channels, -1).transpose(2, 0, 1)
    Ys = (Xm @ Wm).transpose(1, 2, 0).reshape((batch, p.out_channels) + mshape)
    Y = np.zeros(_spectrum_shape((batch, p.out_channels), out_grid), dtype=np.complex128)
    Y[idx_out] = Ys
    out = _irfftn(Y, out_grid) * (n_out / n_in)

    def vjp(g):
        G = _rfftn(g, d)[idx_out] * (wlast / n_in)
        Gm = G.reshape(batch, p.out_channels, -1).transpose(2, 0, 1)
        GX = (Gm @ np.conj(Wm).transpose(0, 2, 1)).transpose(1, 2, 0).reshape((batch, p.in_channels) + mshape)
        GW = (np.conj(Xm).transpose(0, 2, 1) @ Gm).transpose(1, 2, 0).reshape(W.shape)
        Z = np.zeros(_spectrum_shape((batch, p.in_channels), in_grid), dtype=np.complex128)
        Z[idx_in] = GX / wlast
        gu = _irfftn(Z, in_grid) * n_in
        gre = np.zeros_like(p.w_re.data)
        gim = np.zeros_like(p.w_im.data)
        gre[widx] = GW.real
        gim[widx] = GW.imag
        return gu, gre, gim

    return make_op(out, (u, p.w_re, p.w_im), vjp)


# ---------------------------------------------------------------------------
# pointwise layers

def channel_mix(u: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Pointwise linear map over the channel axis; ``weight`` is ``[C_in, C_out]``."""
    d = u.ndim - 2
    x, w = u.data, weight.data
    out = np.moveaxis(np.tensordot(x, w, axes=([1], [0])), -1, 1)
    grid_axes = [0] + list(range(2, d + 2))

    def vjp(g):
        gu = np.moveaxis(np.tensordot(g, w, axes=([1], [1])), -1, 1)
        gw = np.tensordot(x, g, axes=(grid_axes, grid_axes))
        return gu, gw

    out = make_op(out, (u, weight), vjp)
    if bias is not None:
        out = out + ops.reshape(bias, (1, -1) + (1,) * d)
    return out


def instance_norm(u: Tensor, epsilon: float = INSTANCE_NORM_EPS) -> Tensor:
    """Per-sample, per-channel standardization over the grid axes (no affine)."""
    if u.ndim < 3 or int(np.prod(u.shape[2:])) < 2:
        raise ValueError("instance_norm needs a grid with at least two points")
    axes = tuple(range(2, u.ndim))
    x = u.data
    mu = x.mean(axis=axes, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=axes, keepdims=True) + epsilon)
    y = xc * inv

    def vjp(g):
        gm = g.mean(axis=axes, keepdims=True)
        gym = (g * y).mean(axis=axes, keepdims=True)
        return (inv * (g - gm - y * gym),)

    return make_op(y, (u,), vjp)


def xavier(rng: np.random.Generator, fan_in: int, fan_out: int, name: str) -> Tensor:
    std = np.sqrt(2.0 / (fan_in + fan_out))
    return Tensor(std * rng.standard_normal((fan_in, fan_out)), True, name)


# ---------------------------------------------------------------------------
# residual FNO block

@dataclass
class RfnoBlockParams:
    spectral: SpectralConvParams
    bypass: Tensor
    residual: bool = True
    norm: bool = False

    def __post_init__(self):
        if self.bypass.shape != (self.spectral.in_channels, self.spectral.out_channels):
            raise ValueError("spectral and bypass disagree on channel counts")

    @classmethod
    def init(cls, rng, in_channels: int, out_channels: int, modes, residual: bool = True,
             norm: bool = False, name: str = "block") -> "RfnoBlockParams":
        return cls(SpectralConvParams.init(rng, in_channels, out_channels, modes, f"{name}.spectral"),
                   xavier(rng, in_channels, out_channels, f"{name}.bypass"), residual, norm)

    def tensors(self) -> list[Tensor]:
        return self.spectral.tensors() + [self.bypass]


def rfno_block(u: Tensor, p: RfnoBlockParams, out_grid: Sequence[int] | None = None) -> Tensor:
    """``gelu(K u + W u) (+ u)``; with ``norm`` the nonlinear branch is instance-normalized.

    When ``out_grid`` differs from the input grid the pointwise and residual
    paths are spectrally resampled onto it.
    """
    if p.residual and p.spectral.in_channels != p.spectral.out_channels:
        raise ValueError("residual connection requires equal in/out channels")
    in_grid = tuple(u.shape[2:])
    out_grid = in_grid if out_grid is None else tuple(out_grid)
    branch = spectral_conv(u, p.spectral, out_grid) + spectral_resample(channel_mix(u, p.bypass), out_grid)
    branch = ops.gelu(branch)
    if p.norm:
        branch = instance_norm(branch)
    if p.residual:
        branch = branch + spectral_resample(u, out_grid)
    return branch

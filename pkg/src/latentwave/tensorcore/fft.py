"""Discrete Fourier transforms: iterative radix-2 with a Bluestein fallback.

Conventions match numpy: the forward transform is unnormalized and the
inverse divides by the number of points, so ``ifft_along(fft_along(x))``
reproduces ``x``.
"""
from __future__ import annotations

from functools import lru_cache
from typing import Sequence

import numpy as np


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@lru_cache(maxsize=None)
def _bitrev(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


@lru_cache(maxsize=None)
def _twiddles(size: int, sign: int) -> np.ndarray:
    half = size // 2
    return np.exp(sign * 2j * np.pi * np.arange(half) / size)


def _radix2(x: np.ndarray, sign: int) -> np.ndarray:
    """Unnormalized DFT along the last axis; length must be a power of two."""
    n = x.shape[-1]
    lead = x.shape[:-1]
    y = x[..., _bitrev(n)]
    size = 2
    while size <= n:
        half = size // 2
        y = y.reshape(*lead, n // size, size)
        even = y[..., :half]
        odd = y[..., half:] * _twiddles(size, sign)
        y = np.concatenate([even + odd, even - odd], axis=-1)
        size *= 2
    return y.reshape(*lead, n)


@lru_cache(maxsize=None)
def _bluestein_tables(n: int, sign: int):
    k = np.arange(n)
    # k^2 mod 2n keeps the chirp phase accurate for large k
    chirp = np.exp(sign * 1j * np.pi * ((k * k) % (2 * n)) / n)
    m = 1 << (2 * n - 1).bit_length()
    b = np.zeros(m, dtype=np.complex128)
    b[:n] = np.conj(chirp)
    b[m - n + 1:] = np.conj(chirp[1:][::-1])
    return chirp, m, _radix2(b, -1)


def _bluestein(x: np.ndarray, sign: int) -> np.ndarray:
    n = x.shape[-1]
    chirp, m, b_hat = _bluestein_tables(n, sign)
    a = np.zeros(x.shape[:-1] + (m,), dtype=np.complex128)
    a[..., :n] = x * chirp
    conv = _radix2(_radix2(a, -1) * b_hat, 1) / m
    return conv[..., :n] * chirp


def _dft_last(x: np.ndarray, sign: int) -> np.ndarray:
    n = x.shape[-1]
    if n == 1:
        return x.copy()
    if _is_pow2(n):
        return _radix2(x, sign)
    return _bluestein(x, sign)


def _check_axes(shape: tuple, axes: Sequence[int]) -> tuple:
    out = []
    for ax in axes:
        if not -len(shape) <= ax < len(shape):
            raise IndexError(f"axis {ax} out of range for shape {shape}")
        ax = ax % len(shape)
        if shape[ax] == 0:
            raise ValueError(f"cannot transform zero-length axis {ax}")
        out.append(ax)
    return tuple(out)


def _transform(x, axes, sign: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.complex128)
    for ax in _check_axes(x.shape, axes):
        moved = np.moveaxis(x, ax, -1)
        x = np.moveaxis(_dft_last(np.ascontiguousarray(moved), sign), -1, ax)
    return x


def fft_along(x, axes: Sequence[int]) -> np.ndarray:
    """Forward DFT along each of ``axes`` (unnormalized)."""
    return _transform(x, axes, -1)


def ifft_along(x, axes: Sequence[int]) -> np.ndarray:
    """Inverse DFT along ``axes``, scaled by ``1/prod(extents)``."""
    x = np.asarray(x)
    axes = _check_axes(x.shape, axes)
    n = int(np.prod([x.shape[ax] for ax in axes])) if axes else 1
    return _transform(x, axes, 1) / n


def rfft_freqs(n: int, d: float) -> np.ndarray:
    """Frequencies of the one-sided spectrum bins, ``k / (n d)``."""
    return np.arange(n // 2 + 1) / (n * d)


def dft_direct(x, axis: int = -1) -> np.ndarray:
    """O(N^2) matrix DFT, kept as an independent reference."""
    x = np.moveaxis(np.asarray(x, dtype=np.complex128), axis, -1)
    n = x.shape[-1]
    k = np.arange(n)
    mat = np.exp(-2j * np.pi * np.outer(k, k) / n)
    return np.moveaxis(x @ mat.T, -1, axis)

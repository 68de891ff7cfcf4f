"""Rectified flow on latent codes: straight-line coupling, clean-prediction
loss, and the explicit Euler sampler.

The network predicts the clean endpoint ``z1_hat``; velocities follow from
``(z1_hat - z_t) / (1 - t)`` with the denominator clipped near ``t = 1``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .tensorcore import Tensor, box_muller
from .tensorcore import autodiff as ops


@dataclass(frozen=True)
class FlowConfig:
    steps: int = 50
    t_clip: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be at least 1")
        if not 0.0 < self.t_clip < 0.5:
            raise ValueError("t_clip must lie in (0, 0.5)")


def _check_t(t) -> None:
    t = np.asarray(t)
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise ValueError("t must lie in [0, 1]")


def _bcast(t, ndim: int):
    t = np.asarray(t, dtype=np.float64)
    if t.ndim == 0:
        return t
    return t.reshape(t.shape + (1,) * (ndim - t.ndim))


def sample_path(z0, z1, t):
    """``(1 - t) z0 + t z1``; ``t`` may be a scalar or one value per batch row."""
    _check_t(t)
    z0, z1 = np.asarray(z0, dtype=np.float64), np.asarray(z1, dtype=np.float64)
    if z0.shape != z1.shape:
        raise ValueError(f"shape mismatch {z0.shape} vs {z1.shape}")
    tb = _bcast(t, z0.ndim)
    return (1.0 - tb) * z0 + tb * z1


def target_velocity(z0, z1):
    z0, z1 = np.asarray(z0, dtype=np.float64), np.asarray(z1, dtype=np.float64)
    if z0.shape != z1.shape:
        raise ValueError(f"shape mismatch {z0.shape} vs {z1.shape}")
    return z1 - z0


def clean_to_velocity(z1_hat, z_t, t, t_clip: float = 1e-3):
    """``(z1_hat - z_t) / max(1 - t, t_clip)``; works on arrays and on Tensors."""
    _check_t(t)
    ndim = z_t.ndim
    denom = np.maximum(1.0 - _bcast(t, ndim), t_clip)
    if isinstance(z1_hat, Tensor) or isinstance(z_t, Tensor):
        return (z1_hat - z_t) * (1.0 / denom)
    return (np.asarray(z1_hat) - np.asarray(z_t)) / denom


@dataclass
class FlowDraws:
    """Noise and times for one loss evaluation, drawn up front so they can be frozen."""

    z0: np.ndarray
    t: np.ndarray

    @classmethod
    def draw(cls, rng: np.random.Generator, shape: tuple) -> "FlowDraws":
        z0 = box_muller(rng, shape)
        t = rng.random(shape[0])
        return cls(z0, t)


def fm_loss(z1: np.ndarray, cond: np.ndarray, predict: Callable, draws: FlowDraws,
            t_clip: float = 1e-3) -> Tensor:
    """Mean squared velocity error over a batch.

    ``predict(z_t, t, cond)`` returns the clean-endpoint prediction as a Tensor.
    """
    z1 = np.asarray(z1, dtype=np.float64)
    if z1.shape[0] == 0:
        raise ValueError("empty batch")
    z_t = sample_path(draws.z0, z1, draws.t)
    v_hat = clean_to_velocity(predict(Tensor(z_t), draws.t, cond), z_t, draws.t, t_clip)
    d = v_hat - target_velocity(draws.z0, z1)
    return ops.mean(d * d)


def euler_sample(predict: Callable, cond: np.ndarray, shape: tuple, cfg: FlowConfig,
                 z0: np.ndarray | None = None, rng: np.random.Generator | None = None) -> np.ndarray:
    """Integrate ``dz/dt = v`` from Gaussian noise with ``cfg.steps`` uniform Euler steps.

    ``shape`` includes the batch dimension; ``cond`` has one row per batch element.
    """
    if cfg.steps < 1:
        raise ValueError("steps must be at least 1")
    if z0 is None:
        if rng is None:
            raise ValueError("provide either z0 or an rng")
        z0 = box_muller(rng, shape)
    z = np.array(z0, dtype=np.float64)
    h = 1.0 / cfg.steps
    for k in range(cfg.steps):
        t = np.full(z.shape[0], k * h)
        z1_hat = predict(Tensor(z), t, cond)
        z1_hat = z1_hat.data if isinstance(z1_hat, Tensor) else np.asarray(z1_hat)
        z = z + h * clean_to_velocity(z1_hat, z, t, cfg.t_clip)
    return z

"""AdamW with decoupled weight decay, and the cosine-annealing schedule."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def cosine_lr(step: int, total_steps: int, lr_max: float, lr_min: float = 0.0) -> float:
    """Cosine annealing from ``lr_max`` at step 0 to ``lr_min`` at ``total_steps``."""
    if total_steps <= 0:
        raise ValueError("total_steps must be positive")
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    if lr_min > lr_max:
        raise ValueError("lr_min must not exceed lr_max")
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + math.cos(math.pi * step / total_steps))


def _array(p) -> np.ndarray:
    # ndarray.data is a memoryview, so only unwrap non-arrays
    return p if isinstance(p, np.ndarray) else p.data


@dataclass
class OptimizerState:
    """Per-parameter moment accumulators plus the shared step counter."""

    m: list
    v: list
    step: int = 0
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.0

    @classmethod
    def for_params(cls, params, **hyper) -> "OptimizerState":
        arrays = [_array(p) for p in params]
        return cls(m=[np.zeros_like(a) for a in arrays], v=[np.zeros_like(a) for a in arrays], **hyper)


def adamw_step(state: OptimizerState, params, grads, lr: float) -> None:
    """One AdamW update, applied in place to ``params`` (arrays or Tensors)."""
    if not (len(params) == len(grads) == len(state.m)):
        raise ValueError("params, grads and optimizer state differ in length")
    b1, b2 = state.betas
    state.step += 1
    t = state.step
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        arr = _array(p)
        g = np.asarray(g)
        if arr.shape != g.shape or m.shape != arr.shape:
            raise ValueError(f"shape mismatch: param {arr.shape}, grad {g.shape}, state {m.shape}")
        if state.weight_decay:
            arr *= 1.0 - lr * state.weight_decay
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        arr -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


@dataclass
class AdamW:
    """Small stateful wrapper pairing a parameter list with its OptimizerState."""

    params: list
    lr: float = 1e-3
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.0
    state: OptimizerState = field(init=False)

    def __post_init__(self):
        self.state = OptimizerState.for_params(
            self.params, betas=self.betas, eps=self.eps, weight_decay=self.weight_decay)

    def step(self, grads, lr: float | None = None) -> None:
        adamw_step(self.state, self.params, grads, self.lr if lr is None else lr)

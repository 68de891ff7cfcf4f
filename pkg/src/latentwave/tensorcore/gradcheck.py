"""Central finite-difference gradient checks."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .autodiff import Tape, Tensor


def numerical_gradient(f: Callable[[], Tensor], param: Tensor, eps: float = 1e-5) -> np.ndarray:
    grad = np.zeros_like(param.data)
    flat = param.data.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        fp = f().item()
        flat[i] = old - eps
        fm = f().item()
        flat[i] = old
        gflat[i] = (fp - fm) / (2 * eps)
    return grad


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-30)
    return float(np.linalg.norm(a - b) / denom)


def check_gradients(f: Callable[[], Tensor], params: Sequence[Tensor], eps: float = 1e-5) -> float:
    """Worst relative error between tape and finite-difference gradients."""
    with Tape() as tape:
        loss = f()
    analytic = tape.gradient(loss, params)
    worst = 0.0
    for p, ga in zip(params, analytic):
        worst = max(worst, relative_error(ga, numerical_gradient(f, p, eps)))
    return worst

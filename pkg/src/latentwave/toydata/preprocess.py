"""Per-event amplitude normalization with an appended log10(std) channel."""
from __future__ import annotations

import numpy as np

from ..fields import NORM, WaveField


def preprocess(u: WaveField) -> WaveField:
    if NORM in u.roles:
        raise ValueError("field is already normalized")
    sigma = float(np.std(u.values))
    if not sigma > 0.0:
        raise ValueError("degenerate event: zero standard deviation")
    norm = np.full((1,) + u.grid, np.log10(sigma))
    return u.with_values(np.concatenate([u.values / sigma, norm]), roles=list(u.roles) + [NORM])


def norm_scale(u: WaveField) -> float:
    """Physical scale ``10**norm`` carried by a normalized field."""
    i = u.norm_index
    if i is None:
        raise ValueError("field has no norm channel")
    return float(10.0 ** np.mean(u.values[i]))


def restore(u: WaveField) -> WaveField:
    """Physical-unit field: physical channels times ``10**norm``, norm channel dropped."""
    scale = norm_scale(u)
    idx = u.physical_index
    return u.with_values(u.values[idx] * scale, roles=[u.roles[i] for i in idx])

"""Event design: Latin-hypercube hypocenters, magnitude classes and fault ruptures."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .simulate import EventSpec, Rupture


def lhs_unit(n: int, dims: int, seed: int) -> np.ndarray:
    """``n`` Latin-hypercube points in ``[0, 1)^dims``."""
    if n <= 0:
        raise ValueError("n must be positive")
    return qmc.LatinHypercube(d=dims, seed=np.random.default_rng(seed)).random(n)


def lhs_conditions(n: int, ranges, seed: int, magnitude: float | None = None) -> list[EventSpec]:
    """Point-source events; ``ranges`` is ``[(xlo, xhi), (ylo, yhi)]`` or adds ``(mlo, mhi)``."""
    ranges = [tuple(map(float, r)) for r in ranges]
    unit = lhs_unit(n, len(ranges), seed)
    lo = np.array([r[0] for r in ranges])
    hi = np.array([r[1] for r in ranges])
    pts = lo + unit * (hi - lo)
    specs = []
    for row in pts:
        m = float(row[2]) if len(ranges) > 2 else float(magnitude if magnitude is not None else 4.4)
        specs.append(EventSpec(float(row[0]), float(row[1]), m))
    return specs


@dataclass(frozen=True)
class FaultConfig:
    start: tuple = (6.0, 3.0)
    end: tuple = (26.0, 13.0)
    background_speed: float = 4.0
    speed_range: tuple = (0.65, 0.95)
    segment_km: float = 1.0


@dataclass(frozen=True)
class MagnitudeClass:
    magnitude: float
    rupture_km: float  # 0 for point sources
    weight: float


# roughly 2:3 point sources to ruptures, ruptures split evenly
DEFAULT_CLASSES = (
    MagnitudeClass(4.4, 0.0, 0.4),
    MagnitudeClass(6.0, 6.0, 0.3),
    MagnitudeClass(7.0, 16.0, 0.3),
)


def rupture_events(n: int, magnitude: float, length: float, fault: FaultConfig, seed: int) -> list[EventSpec]:
    """Ruptures on the fault line; LHS over hypocenter position, nucleation point and speed."""
    unit = lhs_unit(n, 3, seed)
    p0, p1 = np.asarray(fault.start, float), np.asarray(fault.end, float)
    total = float(np.hypot(*(p1 - p0)))
    direction = (p1 - p0) / total
    length = min(length, total)
    specs = []
    for s_u, nuc_u, v_u in unit:
        s_h = s_u * total
        nucleation = 0.1 + 0.8 * nuc_u
        a = s_h - nucleation * length
        a = min(max(a, 0.0), total - length)
        b = a + length
        hypo = p0 + s_h * direction
        speed = fault.background_speed * (fault.speed_range[0] + v_u * (fault.speed_range[1] - fault.speed_range[0]))
        segs = max(1, int(round(length / fault.segment_km)))
        rup = Rupture(tuple(p0 + a * direction), tuple(p0 + b * direction), float(speed), segs)
        specs.append(EventSpec(float(hypo[0]), float(hypo[1]), magnitude, rup,
                               meta={"nucleation": float(nucleation), "rupture_speed": float(speed)}))
    return specs


def class_counts(n: int, classes=DEFAULT_CLASSES) -> list[int]:
    """Split ``n`` across classes by weight (largest remainder)."""
    w = np.array([c.weight for c in classes], float)
    raw = n * w / w.sum()
    counts = np.floor(raw).astype(int)
    for i in np.argsort(-(raw - counts), kind="stable")[: n - counts.sum()]:
        counts[i] += 1
    return counts.tolist()


def design_events(n_train: int, n_test: int, seed: int, interior=((2.0, 30.0), (2.0, 14.0)),
                  classes=DEFAULT_CLASSES, fault: FaultConfig = FaultConfig()):
    """Training and held-out events; the test split is stratified evenly by class."""
    if n_test % len(classes):
        raise ValueError("n_test must split evenly across magnitude classes")
    per_test = n_test // len(classes)
    train_counts = class_counts(n_train, classes)
    train, test = [], []
    rng = np.random.default_rng(seed)
    for ci, (cls, n_tr) in enumerate(zip(classes, train_counts)):
        total = n_tr + per_test
        sub_seed = int(rng.integers(2**31))
        if cls.rupture_km <= 0:
            specs = lhs_conditions(total, interior, sub_seed, magnitude=cls.magnitude)
        else:
            specs = rupture_events(total, cls.magnitude, cls.rupture_km, fault, sub_seed)
        order = np.random.default_rng(sub_seed + 1).permutation(total)
        for j in order[:per_test]:
            test.append(specs[j])
        for j in order[per_test:]:
            train.append(specs[j])
    return train, test

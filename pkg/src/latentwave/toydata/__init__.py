"""Desk-scale ground-truth wavefields: FD simulation, ruptures, sampling, normalization."""
from .events import FaultConfig, MagnitudeClass, DEFAULT_CLASSES, design_events, lhs_conditions, rupture_events
from .preprocess import norm_scale, preprocess, restore
from .simulate import (EventSpec, Medium, Rupture, SimConfig, simulate, simulate_finite_rupture,
                       simulate_point_source)

__all__ = [
    "FaultConfig", "MagnitudeClass", "DEFAULT_CLASSES", "design_events", "lhs_conditions",
    "rupture_events", "norm_scale", "preprocess", "restore", "EventSpec", "Medium", "Rupture",
    "SimConfig", "simulate", "simulate_finite_rupture", "simulate_point_source",
]

"""Shared fixtures and independent oracles used across the suite."""

from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest

from iabsim.engine import SimConfig
from iabsim.geometry import Position, Scenario


def los_by_sampling(scenario: Scenario, a: Position, b: Position, step: float = 0.1) -> bool:
    """Brute-force line-of-sight oracle: walk the 3-D segment in steps of at
    most ``step`` meters and test every sample for containment in a building
    lower than the roof. Independent of the analytic implementation."""
    length = a.distance_to(b)
    n = max(1, math.ceil(length / step))
    ts = np.linspace(0.0, 1.0, n + 1)
    xs = a.x + ts * (b.x - a.x)
    ys = a.y + ts * (b.y - a.y)
    zs = a.z + ts * (b.z - a.z)
    for building in scenario.buildings:
        inside = (
            (xs > building.min_x)
            & (xs < building.max_x)
            & (ys > building.min_y)
            & (ys < building.max_y)
            & (zs < building.height)
        )
        if inside.any():
            return False
    return True


@pytest.fixture
def tiny_config() -> SimConfig:
    """A fast, small but fully featured run configuration."""
    base = SimConfig()
    return dataclasses.replace(
        base,
        n_relays=2,
        n_ues=6,
        sim_duration_s=0.8,
        warmup_after_attach_s=0.1,
        seed=11,
        traffic=dataclasses.replace(base.traffic, rate_bps=20e6),
    )

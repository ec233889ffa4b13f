"""Named experiment presets."""

from __future__ import annotations

from dataclasses import replace

from .engine import SimConfig
from .errors import ConfigurationError

PAPER_MANHATTAN = "paper-manhattan"

# Grid of the reference experiment: relay counts crossed with source rates.
PAPER_RELAY_SWEEP = (0, 1, 2, 3, 4)
PAPER_RATE_SWEEP_BPS = (28e6, 224e6)
PAPER_N_RUNS = 50


def paper_manhattan(**overrides) -> SimConfig:
    """Manhattan-grid downlink scenario: 4x4 blocks of 50 m with 10 m streets,
    one wired donor at the center, up to four relays 85 m away on the
    cardinal ring, 40 outdoor UEs downloading UDP at a constant rate."""
    cfg = SimConfig()
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg


def by_name(name: str, **overrides) -> SimConfig:
    if name == PAPER_MANHATTAN:
        return paper_manhattan(**overrides)
    raise ConfigurationError(f"unknown preset {name!r}")

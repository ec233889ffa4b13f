"""Discrete-event simulator of mmWave cellular networks with integrated
access and backhaul: a scheduled tree of one wired donor plus wireless
relays, look-ahead backhaul-aware TDMA scheduling, tunnel-based multi-hop
forwarding, and seeded campaign replication."""

from .engine import GeometryConfig, RunResult, SimConfig, run_campaign, run_once
from .metrics import aggregate_runs, compute_metrics

__all__ = [
    "GeometryConfig",
    "RunResult",
    "SimConfig",
    "run_campaign",
    "run_once",
    "aggregate_runs",
    "compute_metrics",
]

__version__ = "0.1.0"

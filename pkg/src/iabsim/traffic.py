"""Downlink constant-bit-rate UDP-like traffic with core-network latency.

A flow emits fixed-size packets at a fixed inter-arrival time from a remote
server; every packet reaches the donor after the configured core latency.
Packet index k of a flow is created at ``start + k * interval``, which lets
the rest of the simulator reason about whole index ranges instead of
individual packets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigurationError


@dataclass(frozen=True)
class TrafficConfig:
    rate_bps: float = 224e6
    packet_size_bytes: int = 1400

    def __post_init__(self) -> None:
        if self.rate_bps <= 0:
            raise ConfigurationError("traffic rate must be positive")
        if self.packet_size_bytes <= 0:
            raise ConfigurationError("packet size must be positive")


@dataclass(frozen=True)
class CoreConfig:
    server_to_donor_latency_s: float = 0.011

    def __post_init__(self) -> None:
        if self.server_to_donor_latency_s < 0:
            raise ConfigurationError("core latency must be non-negative")


@dataclass(frozen=True)
class FlowConfig:
    ue_id: int
    rate_bps: float
    packet_size_bytes: int
    start_s: float
    stop_s: float

    def __post_init__(self) -> None:
        if self.rate_bps <= 0:
            raise ConfigurationError("flow rate must be positive")
        if self.stop_s < self.start_s:
            raise ConfigurationError("flow stops before it starts")


@dataclass(frozen=True)
class FlowSchedule:
    """Deterministic arrival schedule of one flow at the donor."""

    ue_id: int
    packet_size_bytes: int
    start_s: float
    interval_s: float
    n_packets: int
    core_latency_s: float

    def created_at(self, index: int) -> float:
        return self.start_s + index * self.interval_s

    def arrival_at(self, index: int) -> float:
        return self.created_at(index) + self.core_latency_s

    def created_sum(self, first: int, last: int) -> float:
        """Sum of creation times over packet indices [first, last)."""
        n = last - first
        return n * self.start_s + self.interval_s * (first + last - 1) * n / 2.0

    def arrived_count_by(self, t: float) -> int:
        """Packets whose donor arrival time is <= t."""
        if self.n_packets == 0:
            return 0
        q = (t - self.start_s - self.core_latency_s) / self.interval_s
        # Guard against float fuzz right at an arrival instant.
        k = math.floor(q + 1e-9)
        return max(0, min(self.n_packets, k + 1))


def generate_flow(flow: FlowConfig, core: CoreConfig) -> FlowSchedule:
    """Build the packet schedule: inter-arrival = size*8/rate, packets created
    strictly before the stop time, donor arrival delayed by the core latency."""
    interval = flow.packet_size_bytes * 8 / flow.rate_bps
    duration = flow.stop_s - flow.start_s
    n = max(0, math.ceil(duration / interval - 1e-9))
    return FlowSchedule(
        ue_id=flow.ue_id,
        packet_size_bytes=flow.packet_size_bytes,
        start_s=flow.start_s,
        interval_s=interval,
        n_packets=n,
        core_latency_s=core.server_to_donor_latency_s,
    )

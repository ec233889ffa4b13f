"""End-to-end metrics per UE group and aggregation across runs.

Groups follow the experiment's reporting: UEs served directly by the donor,
UEs served by relays, and everyone together. Latency is averaged over
delivered packets only; a group with no UEs (relay-served UEs in a 0-relay
run) is reported as absent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from scipy import stats

from .engine import RunResult

GROUP_DONOR = "donor_ues"
GROUP_IAB = "iab_ues"
GROUP_ALL = "all_ues"
GROUPS = (GROUP_DONOR, GROUP_IAB, GROUP_ALL)


@dataclass(frozen=True)
class GroupMetrics:
    group: str
    n_ues: int
    sum_throughput_mbps: float
    mean_latency_ms: float | None
    delivered_packets: int
    dropped_packets: int

    @property
    def present(self) -> bool:
        return self.n_ues > 0


@dataclass(frozen=True)
class CellSummary:
    """Across-run mean and 95% confidence half-width for one metric cell."""

    group: str
    n_runs: int
    throughput_mean_mbps: float
    throughput_ci_mbps: float
    latency_mean_ms: float | None
    latency_ci_ms: float | None


def compute_metrics(result: RunResult) -> dict[str, GroupMetrics]:
    """Per-group throughput and latency of one run over its measurement window."""
    w0, w1 = result.window
    duration = w1 - w0
    if duration <= 0:
        raise ValueError("measurement window is empty; lower the warm-up time")

    donor_id = 0
    out = {}
    members = {
        GROUP_DONOR: [f for f in result.flows if f.serving_gnb == donor_id],
        GROUP_IAB: [f for f in result.flows if f.serving_gnb != donor_id],
        GROUP_ALL: list(result.flows),
    }
    for group, flows in members.items():
        delivered = sum(f.win_delivered for f in flows)
        bytes_total = sum(f.win_bytes for f in flows)
        latency_sum = sum(f.win_latency_sum for f in flows)
        out[group] = GroupMetrics(
            group=group,
            n_ues=len(flows),
            sum_throughput_mbps=bytes_total * 8 / duration / 1e6,
            mean_latency_ms=(latency_sum / delivered * 1e3) if delivered else None,
            delivered_packets=delivered,
            dropped_packets=sum(f.dropped for f in flows),
        )
    return out


def _mean_ci(values: Sequence[float], confidence: float = 0.95) -> tuple[float, float]:
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return mean, 0.0
    sem = stats.sem(values)
    if sem == 0 or math.isnan(sem):
        return mean, 0.0
    half = float(sem * stats.t.ppf((1 + confidence) / 2.0, n - 1))
    return mean, half


def aggregate_runs(results: Sequence[RunResult]) -> dict[str, CellSummary]:
    """Student-t mean and 95% half-width per group over a set of runs."""
    if not results:
        raise ValueError("need at least one run")
    per_run = [compute_metrics(r) for r in results]
    out = {}
    for group in GROUPS:
        present = [m[group] for m in per_run if m[group].present]
        if not present:
            continue
        thr_mean, thr_ci = _mean_ci([m.sum_throughput_mbps for m in present])
        lat_values = [m.mean_latency_ms for m in present if m.mean_latency_ms is not None]
        if lat_values:
            lat_mean, lat_ci = _mean_ci(lat_values)
        else:
            lat_mean, lat_ci = None, None
        out[group] = CellSummary(
            group=group,
            n_runs=len(present),
            throughput_mean_mbps=thr_mean,
            throughput_ci_mbps=thr_ci,
            latency_mean_ms=lat_mean,
            latency_ci_ms=lat_ci,
        )
    return out

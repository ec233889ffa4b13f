#!/usr/bin/env python3
"""Run one congested simulation and print a per-group metric table plus a
short excerpt of the donor's resource allocations."""

import argparse
import dataclasses

from iabsim.engine import SimConfig, run_once
from iabsim.metrics import GROUPS, compute_metrics


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--relays", type=int, default=4)
    parser.add_argument("--rate", type=float, default=224e6, help="bit/s per UE")
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--duration", type=float, default=2.0, help="seconds")
    args = parser.parse_args()

    base = SimConfig()
    cfg = dataclasses.replace(
        base,
        n_relays=args.relays,
        seed=args.seed,
        sim_duration_s=args.duration,
        record_allocations=True,
        traffic=dataclasses.replace(base.traffic, rate_bps=args.rate),
    )
    result = run_once(cfg)

    print(f"relays={args.relays} rate={args.rate / 1e6:.0f} Mbit/s seed={args.seed}")
    print(f"look-ahead depths: {result.lookahead}")
    print(f"{'group':<12} {'UEs':>4} {'Mbit/s':>9} {'latency ms':>11} {'dropped':>9}")
    metrics = compute_metrics(result)
    for group in GROUPS:
        m = metrics[group]
        if not m.present:
            continue
        lat = f"{m.mean_latency_ms:.1f}" if m.mean_latency_ms is not None else "-"
        print(f"{group:<12} {m.n_ues:>4} {m.sum_throughput_mbps:>9.1f} {lat:>11} "
              f"{m.dropped_packets:>9}")

    donor_rows = [
        (tick, alloc)
        for tick, gnb, alloc in result.allocations
        if gnb == 0 and alloc.assignments
    ][:5]
    print("\nfirst donor allocations (computed_at -> subframe: flow grants)")
    for tick, alloc in donor_rows:
        grants = ", ".join(
            f"flow {a.flow_id}: sym {a.symbol_start}+{a.symbol_count}"
            for a in alloc.assignments
        )
        print(f"  {tick} -> {alloc.subframe_index}: {grants}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

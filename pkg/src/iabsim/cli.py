"""Command-line campaign runner: sweeps, CSV/JSON reporting, trend plots."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from pathlib import Path

from . import config as config_io
from . import presets
from .engine import RunResult, SimConfig, run_campaign
from .errors import ConfigurationError, SimulationError
from .metrics import GROUPS, CellSummary, aggregate_runs, compute_metrics

SUMMARY_HEADER = [
    "runs",
    "rate_mbps",
    "n_relays",
    "group",
    "sum_throughput_mbps",
    "mean_latency_ms",
    "ci_throughput",
    "ci_latency",
]

PER_RUN_HEADER = [
    "run_index",
    "seed",
    "rate_mbps",
    "n_relays",
    "group",
    "sum_throughput_mbps",
    "mean_latency_ms",
    "delivered_packets",
    "dropped_packets",
]


def _parse_rate(text: str) -> float:
    text = text.strip()
    scale = 1.0
    if text and text[-1] in "kKmMgG":
        scale = {"k": 1e3, "m": 1e6, "g": 1e9}[text[-1].lower()]
        text = text[:-1]
    try:
        return float(text) * scale
    except ValueError as exc:
        raise ConfigurationError(f"bad rate value {text!r}") from exc


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise ConfigurationError(f"bad integer list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iabsim",
        description="Wireless access+backhaul network simulator campaign runner",
    )
    parser.add_argument("--preset", help="named preset, e.g. paper-manhattan")
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--relays", help="relay counts to sweep, e.g. 0,1,2,3,4")
    parser.add_argument("--rate", help="source rates to sweep, e.g. 28M,224M")
    parser.add_argument("--runs", type=int, default=5, help="independent runs per cell")
    parser.add_argument("--seed", type=int, help="base seed (run i uses seed+i)")
    parser.add_argument("--sched", choices=["rr", "pf"], help="MAC scheduler")
    parser.add_argument("--out", default="iabsim-out", help="output directory")
    parser.add_argument(
        "--formats",
        default="csv,json",
        help="comma list of outputs: csv, json, plot",
    )
    return parser


def _fmt(value: float | None) -> str:
    return "" if value is None else f"{value:.6f}"


def _campaign(args) -> tuple[list[list], list[list], dict]:
    base = SimConfig()
    if args.preset:
        base = presets.by_name(args.preset)
    if args.config:
        base = config_io.load_config_file(args.config, base)
    if args.seed is not None:
        base = dataclasses.replace(base, seed=args.seed)
    if args.sched:
        base = dataclasses.replace(base, mac=dataclasses.replace(base.mac, scheduler_kind=args.sched))

    relay_sweep = (
        _parse_int_list(args.relays)
        if args.relays is not None
        else list(presets.PAPER_RELAY_SWEEP)
    )
    rate_sweep = (
        [_parse_rate(r) for r in args.rate.split(",") if r.strip()]
        if args.rate is not None
        else list(presets.PAPER_RATE_SWEEP_BPS)
    )
    if not relay_sweep or not rate_sweep:
        raise ConfigurationError("sweep lists must be non-empty")

    workers_env = os.environ.get("IABSIM_THREADS", "")
    max_workers = int(workers_env) if workers_env.strip() else 1

    summary_rows: list[list] = []
    per_run_rows: list[list] = []
    summary_cells: dict[tuple, dict[str, CellSummary]] = {}
    for rate in rate_sweep:
        for n_relays in relay_sweep:
            cfg = dataclasses.replace(
                base,
                n_relays=n_relays,
                traffic=dataclasses.replace(base.traffic, rate_bps=rate),
            )
            results = run_campaign(cfg, args.runs, max_workers=max_workers)
            summary_cells[(rate, n_relays)] = aggregate_runs(results)
            per_run_rows.extend(_per_run_rows(results, rate, n_relays))

    for rate in rate_sweep:
        for n_relays in relay_sweep:
            cells = summary_cells[(rate, n_relays)]
            for group in GROUPS:
                cell = cells.get(group)
                if cell is None:
                    continue
                summary_rows.append(
                    [
                        cell.n_runs,
                        f"{rate / 1e6:.6f}",
                        n_relays,
                        group,
                        _fmt(cell.throughput_mean_mbps),
                        _fmt(cell.latency_mean_ms),
                        _fmt(cell.throughput_ci_mbps),
                        _fmt(cell.latency_ci_ms),
                    ]
                )
    meta = {
        "runs": args.runs,
        "seed": base.seed,
        "scheduler": base.mac.scheduler_kind,
        "relays": relay_sweep,
        "rates_bps": rate_sweep,
    }
    return summary_rows, per_run_rows, meta


def _per_run_rows(results: list[RunResult], rate: float, n_relays: int) -> list[list]:
    rows = []
    for i, result in enumerate(results):
        groups = compute_metrics(result)
        for group in GROUPS:
            m = groups[group]
            if not m.present:
                continue
            rows.append(
                [
                    i,
                    result.seed,
                    f"{rate / 1e6:.6f}",
                    n_relays,
                    group,
                    _fmt(m.sum_throughput_mbps),
                    _fmt(m.mean_latency_ms),
                    m.delivered_packets,
                    m.dropped_packets,
                ]
            )
    return rows


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)


def _write_json(path: Path, summary_rows: list[list], meta: dict) -> None:
    payload = {
        "meta": meta,
        "cells": [dict(zip(SUMMARY_HEADER, row)) for row in summary_rows],
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_plots(out_dir: Path, summary_rows: list[list]) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    series: dict[tuple[str, float], list[tuple[int, float, float | None]]] = {}
    for row in summary_rows:
        _, rate_mbps, n_relays, group, thr, lat, _, _ = row
        key = (group, float(rate_mbps))
        lat_val = float(lat) if lat != "" else None
        series.setdefault(key, []).append((int(n_relays), float(thr), lat_val))

    written = []
    panels = [
        ("throughput", "Sum UDP throughput [Mbit/s]", 1),
        ("latency", "Average UDP latency [ms]", 2),
    ]
    for name, ylabel, idx in panels:
        fig, ax = plt.subplots(figsize=(7, 4.2))
        for (group, rate_mbps), points in sorted(series.items()):
            points = sorted(points)
            xs = [p[0] for p in points if p[idx] is not None]
            ys = [p[idx] for p in points if p[idx] is not None]
            if not xs:
                continue
            ax.plot(xs, ys, marker="o", label=f"{group}, R={rate_mbps:g} Mbit/s")
        ax.set_xlabel("Number of relays")
        ax.set_ylabel(ylabel)
        ax.grid(True, alpha=0.4)
        ax.legend(fontsize=7)
        fig.tight_layout()
        path = out_dir / f"{name}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        if args.config and not Path(args.config).is_file():
            raise ConfigurationError(f"config file not found: {args.config}")
        summary_rows, per_run_rows, meta = _campaign(args)
    except ConfigurationError as exc:
        print(f"iabsim: configuration error: {exc}", file=sys.stderr)
        return 2
    except SimulationError as exc:
        print(f"iabsim: simulation error: {exc}", file=sys.stderr)
        return 1

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    formats = {f.strip() for f in args.formats.split(",") if f.strip()}
    written = []
    if "csv" in formats:
        _write_csv(out_dir / "summary.csv", SUMMARY_HEADER, summary_rows)
        _write_csv(out_dir / "per_run.csv", PER_RUN_HEADER, per_run_rows)
        written += [out_dir / "summary.csv", out_dir / "per_run.csv"]
    if "json" in formats:
        _write_json(out_dir / "summary.json", summary_rows, meta)
        written.append(out_dir / "summary.json")
    if "plot" in formats:
        written += _write_plots(out_dir, summary_rows)
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

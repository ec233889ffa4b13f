#!/usr/bin/env python3
"""Reproduce the reference Manhattan-grid experiment grid.

Sweeps 0-4 relays at source rates of 28 and 224 Mbit/s with 50 independent
runs per cell (several hours single-core; set IABSIM_THREADS and/or lower
--runs for a quicker look) and writes CSV/JSON summaries plus trend plots.
"""

import sys

from iabsim.cli import main

if __name__ == "__main__":
    args = sys.argv[1:]
    if not any(a.startswith("--runs") for a in args):
        args += ["--runs", "50"]
    if not any(a.startswith("--out") for a in args):
        args += ["--out", "campaign-out"]
    if not any(a.startswith("--formats") for a in args):
        args += ["--formats", "csv,json,plot"]
    raise SystemExit(main(["--preset", "paper-manhattan", *args]))

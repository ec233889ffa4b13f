"""Per-gNB TDMA MAC scheduling with look-ahead and backhaul awareness.

Each gNB computes the allocation for a future subframe (its look-ahead depth
ahead of now), never placing access traffic on symbols its parent already
reserved for the backhaul, and never granting a single IAB child more than a
configured fraction of the subframe. Grants to IAB children are announced via
DCIs so the child can mask those symbols out of its own allocation.

Symbol occupancy is represented as a bitmask (bit i = symbol i), which makes
the non-overlap checks exact and cheap.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

from .errors import CausalityError, ConfigurationError

SCHEDULER_RR = "rr"
SCHEDULER_PF = "pf"

_dci_uid = itertools.count()


@dataclass(frozen=True)
class MacConfig:
    symbols_per_subframe: int = 24
    subframe_duration_s: float = 1e-3
    dci_delay_subframes: int = 1
    iab_cap_fraction: float = 0.5
    scheduler_kind: str = SCHEDULER_RR
    pf_window_subframes: int = 100

    def __post_init__(self) -> None:
        if self.symbols_per_subframe < 2:
            raise ConfigurationError("need at least 2 symbols per subframe")
        if self.dci_delay_subframes < 1:
            raise ConfigurationError("DCI delay must be at least 1 subframe")
        if not 0.0 < self.iab_cap_fraction <= 1.0:
            raise ConfigurationError("iab_cap_fraction must be in (0, 1]")
        if self.scheduler_kind not in (SCHEDULER_RR, SCHEDULER_PF):
            raise ConfigurationError(f"unknown scheduler {self.scheduler_kind!r}")

    @property
    def iab_cap_symbols(self) -> int:
        return math.floor(self.symbols_per_subframe * self.iab_cap_fraction)


class FlowInfo(NamedTuple):
    """Snapshot of one schedulable flow as reported to the MAC."""

    flow_id: int
    queued_bytes: int
    per_symbol_bits: int
    is_iab_child: bool


class RetxRequest(NamedTuple):
    """A failed transport block waiting for a retransmission grant."""

    retx_id: int
    flow_id: int
    n_symbols: int
    tb_bits: int
    is_iab_child: bool
    eligible_subframe: int


@dataclass(frozen=True)
class Assignment:
    symbol_start: int
    symbol_count: int
    flow_id: int
    tb_bits: int
    per_symbol_bits: int
    direction: str = "dl"
    retx_id: int | None = None


@dataclass
class SubframeAllocation:
    subframe_index: int
    assignments: list[Assignment]
    computed_at: int
    used_mask: int = 0


@dataclass(frozen=True)
class Dci:
    """Grant announcement sent to an IAB child ahead of the subframe."""

    uid: int
    subframe_index: int
    flow_id: int
    ranges: tuple[tuple[int, int], ...]  # (symbol_start, symbol_count)
    tb_bits: int
    per_symbol_bits: int
    created_at: int

    @property
    def mask(self) -> int:
        m = 0
        for start, count in self.ranges:
            m |= ((1 << count) - 1) << start
        return m


class BusyMaskStore:
    """Per-node record of symbols reserved by parent DCIs, per future subframe."""

    def __init__(self, dci_delay_subframes: int = 1):
        self.dci_delay = dci_delay_subframes
        self._masks: dict[int, int] = {}
        self._arrivals: dict[int, int] = {}  # earliest tick the mask may be read
        self._seen: set[int] = set()

    def ingest(self, dci: Dci, now_subframe: int) -> int:
        """Merge a parent DCI into the mask for its subframe. Idempotent."""
        if dci.subframe_index < now_subframe + 1:
            raise CausalityError(
                f"DCI for subframe {dci.subframe_index} received at {now_subframe}"
            )
        if dci.uid in self._seen:
            return self._masks.get(dci.subframe_index, 0)
        self._seen.add(dci.uid)
        mask = self._masks.get(dci.subframe_index, 0) | dci.mask
        self._masks[dci.subframe_index] = mask
        arrival = dci.created_at + self.dci_delay
        prev = self._arrivals.get(dci.subframe_index, arrival)
        self._arrivals[dci.subframe_index] = max(prev, arrival)
        return mask

    def mask_for(self, subframe: int, now_subframe: int | None = None) -> int:
        if now_subframe is not None:
            arrival = self._arrivals.get(subframe)
            if arrival is not None and arrival > now_subframe:
                raise CausalityError(
                    f"mask for subframe {subframe} read at {now_subframe}, "
                    f"DCI arrives only at {arrival}"
                )
        return self._masks.get(subframe, 0)

    def release(self, subframe: int) -> None:
        self._masks.pop(subframe, None)
        self._arrivals.pop(subframe, None)


@dataclass
class RrState:
    last_served: int | None = None


@dataclass
class PfState:
    window_subframes: int = 100
    avg_bits: dict[int, float] = field(default_factory=dict)


def _free_runs(busy_mask: int, n_symbols: int) -> list[list[int]]:
    """Maximal runs of free symbols as [start, count] pairs, in symbol order."""
    runs: list[list[int]] = []
    i = 0
    while i < n_symbols:
        if busy_mask >> i & 1:
            i += 1
            continue
        j = i
        while j < n_symbols and not (busy_mask >> j & 1):
            j += 1
        runs.append([i, j - i])
        i = j
    return runs


def _take_symbols(runs: list[list[int]], count: int) -> list[tuple[int, int]]:
    """Consume ``count`` symbols from the front of the free runs."""
    taken = []
    while count > 0 and runs:
        start, avail = runs[0]
        got = min(avail, count)
        taken.append((start, got))
        count -= got
        if got == avail:
            runs.pop(0)
        else:
            runs[0] = [start + got, avail - got]
    return taken


def _emit(
    allocation: SubframeAllocation,
    ranges: Sequence[tuple[int, int]],
    per_symbol_bits: int,
    flow_id: int,
    retx_id: int | None = None,
    tb_bits: int | None = None,
) -> int:
    total_syms = sum(c for _, c in ranges)
    bits = tb_bits if tb_bits is not None else total_syms * per_symbol_bits
    for start, count in ranges:
        allocation.assignments.append(
            Assignment(
                symbol_start=start,
                symbol_count=count,
                flow_id=flow_id,
                tb_bits=bits,
                per_symbol_bits=per_symbol_bits,
                retx_id=retx_id,
            )
        )
        allocation.used_mask |= ((1 << count) - 1) << start
    return total_syms


def _place_retx(
    allocation: SubframeAllocation,
    runs: list[list[int]],
    retx: Sequence[RetxRequest],
    granted_syms: dict[int, int],
    cap_symbols: int,
) -> list[int]:
    """Give pending retransmissions priority over new data. A request that
    does not fit (free space or IAB cap) is deferred, not split."""
    placed = []
    for req in retx:
        free_total = sum(c for _, c in runs)
        if req.n_symbols > free_total:
            continue
        if req.is_iab_child and granted_syms.get(req.flow_id, 0) + req.n_symbols > cap_symbols:
            continue
        ranges = _take_symbols(runs, req.n_symbols)
        _emit(
            allocation,
            ranges,
            req.tb_bits // max(req.n_symbols, 1),
            req.flow_id,
            retx_id=req.retx_id,
            tb_bits=req.tb_bits,
        )
        granted_syms[req.flow_id] = granted_syms.get(req.flow_id, 0) + req.n_symbols
        placed.append(req.retx_id)
    return placed


def _rotation(flows: Sequence[FlowInfo], last_served: int | None) -> list[FlowInfo]:
    ordered = sorted(flows, key=lambda f: f.flow_id)
    if last_served is None:
        return ordered
    pivot = 0
    for i, f in enumerate(ordered):
        if f.flow_id > last_served:
            pivot = i
            break
    else:
        pivot = 0
    return ordered[pivot:] + ordered[:pivot]


def _check_allocation(
    allocation: SubframeAllocation,
    busy_mask: int,
    cfg: MacConfig,
    iab_flow_ids: set[int],
) -> None:
    """Internal consistency checks run on every produced allocation."""
    seen = 0
    per_flow: dict[int, int] = {}
    for a in allocation.assignments:
        if a.symbol_start < 0 or a.symbol_start + a.symbol_count > cfg.symbols_per_subframe:
            raise CausalityError(f"assignment outside the subframe: {a}")
        m = ((1 << a.symbol_count) - 1) << a.symbol_start
        if m & seen:
            raise CausalityError(f"overlapping assignments at subframe {allocation.subframe_index}")
        if m & busy_mask:
            raise CausalityError(
                f"assignment overlaps backhaul-reserved symbols at subframe "
                f"{allocation.subframe_index}"
            )
        seen |= m
        per_flow[a.flow_id] = per_flow.get(a.flow_id, 0) + a.symbol_count
    for fid, syms in per_flow.items():
        if fid in iab_flow_ids and syms > cfg.iab_cap_symbols:
            raise CausalityError(
                f"IAB child {fid} granted {syms} symbols, cap is {cfg.iab_cap_symbols}"
            )


def schedule_rr(
    state: RrState,
    cfg: MacConfig,
    target_subframe: int,
    busy_mask: int,
    flows: Sequence[FlowInfo],
    retx: Sequence[RetxRequest] = (),
    computed_at: int | None = None,
) -> tuple[SubframeAllocation, list[Dci], list[int]]:
    """Round-robin allocation for one future subframe.

    Flows with queued bytes are served in id order starting after the flow
    served last, each sized to drain its reported queue at its per-symbol
    capacity, subject to the per-IAB-child cap and the busy mask. Returns the
    allocation, DCIs for IAB-child grants, and the retransmission ids placed.
    """
    allocation = SubframeAllocation(
        subframe_index=target_subframe,
        assignments=[],
        computed_at=target_subframe if computed_at is None else computed_at,
    )
    runs = _free_runs(busy_mask, cfg.symbols_per_subframe)
    granted: dict[int, int] = {}
    placed = _place_retx(allocation, runs, retx, granted, cfg.iab_cap_symbols)

    for flow in _rotation(flows, state.last_served):
        if not runs:
            break
        if flow.queued_bytes <= 0 or flow.per_symbol_bits <= 0:
            continue
        need = math.ceil(flow.queued_bytes * 8 / flow.per_symbol_bits)
        if flow.is_iab_child:
            need = min(need, cfg.iab_cap_symbols - granted.get(flow.flow_id, 0))
        if need <= 0:
            continue
        take = min(need, sum(c for _, c in runs))
        ranges = _take_symbols(runs, take)
        _emit(allocation, ranges, flow.per_symbol_bits, flow.flow_id)
        granted[flow.flow_id] = granted.get(flow.flow_id, 0) + take
        state.last_served = flow.flow_id

    iab_ids = {f.flow_id for f in flows if f.is_iab_child} | {
        r.flow_id for r in retx if r.is_iab_child
    }
    _check_allocation(allocation, busy_mask, cfg, iab_ids)
    dcis = make_dcis(allocation, flows, computed_at=allocation.computed_at)
    return allocation, dcis, placed


def schedule_pf(
    state: PfState,
    cfg: MacConfig,
    target_subframe: int,
    busy_mask: int,
    flows: Sequence[FlowInfo],
    retx: Sequence[RetxRequest] = (),
    computed_at: int | None = None,
) -> tuple[SubframeAllocation, list[Dci], list[int]]:
    """Proportional-fair allocation: symbols go one at a time to the flow with
    the highest (achievable rate / averaged served rate) metric, with the
    average updated by the window once the allocation is final."""
    allocation = SubframeAllocation(
        subframe_index=target_subframe,
        assignments=[],
        computed_at=target_subframe if computed_at is None else computed_at,
    )
    runs = _free_runs(busy_mask, cfg.symbols_per_subframe)
    granted_syms: dict[int, int] = {}
    placed = _place_retx(allocation, runs, retx, granted_syms, cfg.iab_cap_symbols)

    window = max(state.window_subframes, 1)
    decay = 1.0 - 1.0 / window
    active = {
        f.flow_id: f for f in flows if f.queued_bytes > 0 and f.per_symbol_bits > 0
    }
    remaining_bits = {fid: f.queued_bytes * 8 for fid, f in active.items()}
    granted_bits: dict[int, int] = {fid: 0 for fid in active}
    taken_ranges: dict[int, list[tuple[int, int]]] = {fid: [] for fid in active}

    free_total = sum(c for _, c in runs)
    while free_total > 0:
        best_fid = None
        best_metric = -1.0
        for fid in sorted(active):
            flow = active[fid]
            if granted_bits[fid] >= remaining_bits[fid]:
                continue
            if flow.is_iab_child and granted_syms.get(fid, 0) >= cfg.iab_cap_symbols:
                continue
            projected = decay * state.avg_bits.get(fid, 0.0) + granted_bits[fid] / window
            metric = flow.per_symbol_bits / max(projected, 1.0)
            if metric > best_metric:
                best_metric = metric
                best_fid = fid
        if best_fid is None:
            break
        ranges = _take_symbols(runs, 1)
        free_total -= 1
        taken_ranges[best_fid].extend(ranges)
        granted_bits[best_fid] += active[best_fid].per_symbol_bits
        granted_syms[best_fid] = granted_syms.get(best_fid, 0) + 1

    for fid in sorted(taken_ranges):
        ranges = taken_ranges[fid]
        if not ranges:
            continue
        # Coalesce adjacent symbols into maximal contiguous rows.
        ranges.sort()
        merged = [list(ranges[0])]
        for start, count in ranges[1:]:
            if start == merged[-1][0] + merged[-1][1]:
                merged[-1][1] += count
            else:
                merged.append([start, count])
        _emit(
            allocation,
            [tuple(r) for r in merged],
            active[fid].per_symbol_bits,
            fid,
        )

    # Averaged served rate update covers every flow the scheduler knows about.
    for f in flows:
        prev = state.avg_bits.get(f.flow_id, 0.0)
        state.avg_bits[f.flow_id] = decay * prev + granted_bits.get(f.flow_id, 0) / window

    iab_ids = {f.flow_id for f in flows if f.is_iab_child} | {
        r.flow_id for r in retx if r.is_iab_child
    }
    _check_allocation(allocation, busy_mask, cfg, iab_ids)
    dcis = make_dcis(allocation, flows, computed_at=allocation.computed_at)
    return allocation, dcis, placed


def make_dcis(
    allocation: SubframeAllocation,
    flows: Sequence[FlowInfo],
    computed_at: int,
) -> list[Dci]:
    """One DCI per IAB-child flow that received symbols in this allocation."""
    iab_ids = {f.flow_id for f in flows if f.is_iab_child}
    grouped: dict[int, list[Assignment]] = {}
    for a in allocation.assignments:
        if a.flow_id in iab_ids:
            grouped.setdefault(a.flow_id, []).append(a)
    dcis = []
    for fid in sorted(grouped):
        parts = grouped[fid]
        # All rows of one flow share the flow's single TB for the subframe.
        dcis.append(
            Dci(
                uid=next(_dci_uid),
                subframe_index=allocation.subframe_index,
                flow_id=fid,
                ranges=tuple((a.symbol_start, a.symbol_count) for a in parts),
                tb_bits=parts[0].tb_bits,
                per_symbol_bits=parts[0].per_symbol_bits,
                created_at=computed_at,
            )
        )
    return dcis


def verify_work_conservation(
    allocation: SubframeAllocation,
    cfg: MacConfig,
    busy_mask: int,
    flows: Sequence[FlowInfo],
) -> bool:
    """True iff no free non-busy symbol was left while some flow still had
    queued bytes it was allowed to use (i.e. it was neither drained nor at
    the IAB cap)."""
    full = (1 << cfg.symbols_per_subframe) - 1
    free_left = full & ~busy_mask & ~allocation.used_mask
    if free_left == 0:
        return True
    granted_syms: dict[int, int] = {}
    granted_bits: dict[int, int] = {}
    for a in allocation.assignments:
        granted_syms[a.flow_id] = granted_syms.get(a.flow_id, 0) + a.symbol_count
        granted_bits[a.flow_id] = granted_bits.get(a.flow_id, 0) + (
            a.symbol_count * a.per_symbol_bits
        )
    for f in flows:
        if f.queued_bytes <= 0 or f.per_symbol_bits <= 0:
            continue
        if f.is_iab_child and granted_syms.get(f.flow_id, 0) >= cfg.iab_cap_symbols:
            continue
        if granted_bits.get(f.flow_id, 0) < f.queued_bytes * 8:
            return False
    return True

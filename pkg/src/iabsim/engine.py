"""Discrete-event core: setup, subframe pipeline, seeded replication.

Each run is strictly single-threaded and deterministic for its seed. Per
subframe tick t the engine first applies everything that lands at t (flow
toggles, transport-block outcomes from t-1, bulk packet arrivals, reordering
timers, status reports), then lets every gNB in decreasing look-ahead order
compute its allocation for subframe t + lookahead and announce child grants
via DCIs, and finally executes the allocation each gNB computed for t itself.

Sparse events (flow toggles, timers, status reports) go through a priority
queue keyed by (tick, kind priority, sequence); dense per-block artifacts are
bucketed per destination tick, which keeps a ten-second congested run cheap.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field, replace
from enum import IntEnum

import numpy as np

from . import geometry, topology
from .channel import ChannelConfig, LinkState, build_link, draw_shadowing, tb_error_prob
from .errors import CausalityError, ConfigurationError, StructuralError
from .geometry import Placement, Position, Scenario
from .scheduler import (
    SCHEDULER_PF,
    BusyMaskStore,
    FlowInfo,
    MacConfig,
    PfState,
    RetxRequest,
    RrState,
    schedule_pf,
    schedule_rr,
    verify_work_conservation,
)
from .stack import (
    BEARER_ACCESS,
    BEARER_BACKHAUL,
    RlcBearer,
    StackConfig,
    TransportBlock,
    route_at_node,
)
from .traffic import CoreConfig, FlowConfig, FlowSchedule, TrafficConfig, generate_flow


class EventKind(IntEnum):
    """Priority order for events that share a tick."""

    FLOW_START = 0
    FLOW_STOP = 1
    PACKET_ARRIVAL = 2  # handled as a bulk sweep, kept for completeness
    HARQ_FEEDBACK = 3  # bucketed per tick
    TIMER_EXPIRY = 4
    STATUS_REPORT = 5
    SUBFRAME_TICK = 9


@dataclass(frozen=True)
class GeometryConfig:
    block_side_m: float = 50.0
    street_width_m: float = 10.0
    rows: int = 4
    cols: int = 4
    building_height_m: float = geometry.DEFAULT_BUILDING_HEIGHT_M
    donor_height_m: float = geometry.DEFAULT_DONOR_HEIGHT_M
    relay_height_m: float = geometry.DEFAULT_RELAY_HEIGHT_M
    ue_height_m: float = geometry.DEFAULT_UE_HEIGHT_M
    relay_distance_m: float = geometry.DEFAULT_RELAY_DISTANCE_M


@dataclass(frozen=True)
class SimConfig:
    geometry: GeometryConfig = GeometryConfig()
    channel: ChannelConfig = ChannelConfig()
    mac: MacConfig = MacConfig()
    stack: StackConfig = StackConfig()
    traffic: TrafficConfig = TrafficConfig()
    core: CoreConfig = CoreConfig()
    n_relays: int = 4
    n_ues: int = 40
    sim_duration_s: float = 10.0
    attach_delay_s: float = 0.1
    warmup_after_attach_s: float = 0.5
    drain_s: float = 0.0
    seed: int = 1
    attach_policy: str = topology.POLICY_BEST_HQF
    check_invariants: bool = True
    conservation_check_every: int = 0  # subframes; 0 disables mid-run sampling
    record_allocations: bool = False
    # Lab-style overrides (None selects the standard generated layout).
    relay_positions: tuple | None = None
    ue_positions: tuple | None = None
    forced_relay_parents: dict | None = None

    def __post_init__(self) -> None:
        if self.attach_delay_s < 0:
            raise ConfigurationError("attach_delay_s must be non-negative")
        if self.sim_duration_s <= self.attach_delay_s:
            raise ConfigurationError("sim_duration_s must exceed attach_delay_s")


@dataclass
class FlowResult:
    ue_id: int
    tunnel: int
    serving_gnb: int
    hops: int
    generated: int
    arrived: int
    delivered: int
    dropped: int
    win_delivered: int
    win_bytes: int
    win_latency_sum: float
    latency_min: float
    latency_max: float
    residual: int  # packets still inside bearers (or the core) at the end


@dataclass
class RunResult:
    seed: int
    n_relays: int
    rate_bps: float
    subframes: int
    window: tuple[float, float]
    flows: list[FlowResult]
    ue_parent: dict[int, int]
    relay_parent: dict[int, int]
    lookahead: dict[int, int]
    max_access_occupancy: int
    max_backhaul_occupancy: int
    tb_count: int
    tb_failures: int
    harq_exhausts: int
    status_reports: int
    duplicate_bytes: int
    checks_performed: int
    allocations: list = field(default_factory=list)


class _EventQueue:
    """Heap of sparse events ordered by (tick, kind priority, sequence)."""

    def __init__(self):
        self._heap: list[tuple[int, int, int, EventKind, object]] = []
        self._seq = itertools.count()
        self._last = (-1, -1, -1)

    def push(self, tick: int, kind: EventKind, payload) -> None:
        heapq.heappush(self._heap, (tick, int(kind), next(self._seq), kind, payload))

    def pop_due(self, tick: int, max_priority: int = 99):
        out = []
        while self._heap and self._heap[0][0] <= tick and self._heap[0][1] <= max_priority:
            item = heapq.heappop(self._heap)
            key = item[:3]
            if key < self._last:
                raise CausalityError("event queue went backwards in time")
            self._last = key
            out.append(item)
        return out


class _Flow:
    __slots__ = (
        "ue_id",
        "tunnel",
        "schedule",
        "serving_gnb",
        "hops",
        "path_bearers",
        "active",
        "arrived",
        "delivered",
        "dropped",
        "win_delivered",
        "win_bytes",
        "win_latency_sum",
        "latency_min",
        "latency_max",
    )

    def __init__(self, ue_id: int, tunnel: int, schedule: FlowSchedule, serving_gnb: int, hops: int):
        self.ue_id = ue_id
        self.tunnel = tunnel
        self.schedule = schedule
        self.serving_gnb = serving_gnb
        self.hops = hops
        self.path_bearers: list[RlcBearer] = []
        self.active = False
        self.arrived = 0
        self.delivered = 0
        self.dropped = 0
        self.win_delivered = 0
        self.win_bytes = 0
        self.win_latency_sum = 0.0
        self.latency_min = math.inf
        self.latency_max = 0.0


class _HarqProc:
    __slots__ = ("uid", "bearer", "tb", "transmission_count", "eligible", "is_iab")

    def __init__(self, uid: int, bearer: RlcBearer, tb: TransportBlock, count: int, eligible: int, is_iab: bool):
        self.uid = uid
        self.bearer = bearer
        self.tb = tb
        self.transmission_count = count
        self.eligible = eligible
        self.is_iab = is_iab


class _Gnb:
    __slots__ = (
        "node_id",
        "lookahead",
        "parent",
        "bearers",
        "bearer_by_id",
        "bearer_for_tunnel",
        "child_by_bearer",
        "busy",
        "rr",
        "pf",
        "pending",
        "retx",
        "procs",
    )

    def __init__(self, node_id: int, dci_delay: int, pf_window: int):
        self.node_id = node_id
        self.lookahead = 1
        self.parent: int | None = None
        self.bearers: list[RlcBearer] = []
        self.bearer_by_id: dict[int, RlcBearer] = {}
        self.bearer_for_tunnel: dict[int, RlcBearer] = {}
        self.child_by_bearer: dict[int, "_Gnb"] = {}
        self.busy = BusyMaskStore(dci_delay)
        self.rr = RrState()
        self.pf = PfState(window_subframes=pf_window)
        self.pending: dict[int, object] = {}
        self.retx: list[_HarqProc] = []
        self.procs: dict[int, _HarqProc] = {}


def _build_links_for_gnbs(
    config: SimConfig,
    scenario: Scenario,
    positions: dict[int, Position],
    gnb_ids: list[int],
    rng: np.random.Generator,
) -> dict[tuple[int, int], LinkState]:
    links = {}
    for i, a in enumerate(gnb_ids):
        for b in gnb_ids[i + 1 :]:
            los = geometry.is_los(scenario, positions[a], positions[b])
            shadow = draw_shadowing(config.channel, rng, los)
            links[(a, b)] = build_link(
                config.channel,
                a,
                b,
                positions[a].distance_to(positions[b]),
                los,
                shadow,
                rx_is_gnb=True,
                symbols_per_subframe=config.mac.symbols_per_subframe,
                subframe_duration_s=config.mac.subframe_duration_s,
            )
    return links


def _forced_tree(donor_id: int, relay_ids: list[int], parents: dict) -> topology.IabTree:
    tree = topology.IabTree(
        nodes={donor_id: topology.TopologyNode(donor_id, topology.ROLE_DONOR)},
        donor_id=donor_id,
    )
    for rid in sorted(relay_ids):
        tree.nodes[rid] = topology.TopologyNode(rid, topology.ROLE_IAB)
    for rid in sorted(relay_ids):
        parent = parents.get(rid, donor_id)
        if parent not in tree.nodes:
            raise ConfigurationError(f"forced parent {parent} of relay {rid} unknown")
        tree.nodes[rid].parent = parent
        tree.nodes[parent].children.append(rid)
    return tree


class _Sim:
    """State of one run; built by setup, driven by the tick loop."""

    def __init__(self, config: SimConfig):
        self.cfg = config
        self.sf = config.mac.subframe_duration_s
        ss = np.random.SeedSequence(config.seed)
        place_ss, shadow_ss, harq_ss = ss.spawn(3)
        self.rng_harq = np.random.default_rng(harq_ss)
        self._setup(np.random.default_rng(place_ss), np.random.default_rng(shadow_ss))

        self.events = _EventQueue()
        self.outcomes: dict[int, list] = {}
        self.tb_count = 0
        self.tb_failures = 0
        self.harq_exhausts = 0
        self.status_reports = 0
        self.checks_performed = 0
        self.alloc_log: list = []

        start_tick = int(math.floor(config.attach_delay_s / self.sf + 1e-9))
        stop_tick = int(
            math.ceil((config.attach_delay_s + config.sim_duration_s) / self.sf - 1e-9)
        )
        self.last_tick = stop_tick + int(math.ceil(config.drain_s / self.sf - 1e-9))
        for flow in self.flows:
            self.events.push(start_tick, EventKind.FLOW_START, flow)
            self.events.push(stop_tick, EventKind.FLOW_STOP, flow)
        self.window = (
            config.attach_delay_s + config.warmup_after_attach_s,
            config.attach_delay_s + config.sim_duration_s,
        )

    # -- setup ---------------------------------------------------------------

    def _setup(self, rng_place: np.random.Generator, rng_shadow: np.random.Generator):
        cfg = self.cfg
        geo = cfg.geometry
        scenario = geometry.build_manhattan_grid(
            geo.block_side_m, geo.street_width_m, geo.rows, geo.cols, geo.building_height_m
        )
        placement = geometry.place_nodes(
            scenario,
            cfg.n_relays,
            cfg.n_ues,
            rng_place,
            donor_height=geo.donor_height_m,
            relay_height=geo.relay_height_m,
            ue_height=geo.ue_height_m,
            relay_distance=geo.relay_distance_m,
        )
        if cfg.relay_positions is not None:
            relays = tuple(
                p if isinstance(p, Position) else Position(p[0], p[1], geo.relay_height_m)
                for p in cfg.relay_positions
            )
            if len(relays) != cfg.n_relays:
                raise ConfigurationError("relay_positions length must equal n_relays")
            placement = Placement(placement.donor, relays, placement.ues)
        if cfg.ue_positions is not None:
            ues = tuple(
                p if isinstance(p, Position) else Position(p[0], p[1], geo.ue_height_m)
                for p in cfg.ue_positions
            )
            if len(ues) != cfg.n_ues:
                raise ConfigurationError("ue_positions length must equal n_ues")
            placement = Placement(placement.donor, placement.relays, ues)

        donor_id = 0
        relay_ids = list(range(1, cfg.n_relays + 1))
        ue_base = cfg.n_relays + 1
        ue_ids = list(range(ue_base, ue_base + cfg.n_ues))
        positions = {donor_id: placement.donor}
        for rid, pos in zip(relay_ids, placement.relays):
            positions[rid] = pos
        for uid, pos in zip(ue_ids, placement.ues):
            positions[uid] = pos

        gnb_ids = [donor_id] + relay_ids
        links = _build_links_for_gnbs(cfg, scenario, positions, gnb_ids, rng_shadow)

        if cfg.forced_relay_parents is not None:
            tree = _forced_tree(donor_id, relay_ids, cfg.forced_relay_parents)
        else:
            tree = topology.attach_iab_nodes(
                donor_id,
                relay_ids,
                positions,
                links,
                policy=cfg.attach_policy,
                outage_snr_db=cfg.channel.outage_snr_db,
            )
        topology.attach_ues(
            tree,
            {u: positions[u] for u in ue_ids},
            {g: positions[g] for g in gnb_ids},
            cfg.attach_delay_s,
        )
        topology.compute_lookahead(tree)
        tables = topology.build_routing_tables(tree)

        self.scenario = scenario
        self.tree = tree
        self.positions = positions

        # gNB shells ordered by id; donor first by construction.
        self.gnbs: dict[int, _Gnb] = {}
        for gid in gnb_ids:
            g = _Gnb(gid, cfg.mac.dci_delay_subframes, cfg.mac.pf_window_subframes)
            g.lookahead = tree.nodes[gid].lookahead_depth
            g.parent = tree.nodes[gid].parent
            self.gnbs[gid] = g

        # Bearers: per gNB, backhaul bearers toward IAB children first, then
        # access bearers toward served UEs, ids assigned in creation order.
        bearer_id = itertools.count()
        self.bearers: list[RlcBearer] = []
        for gid in gnb_ids:
            g = self.gnbs[gid]
            for child in sorted(tree.iab_children(gid)):
                link = topology.link_between(links, gid, child)
                b = self._new_bearer(next(bearer_id), gid, child, BEARER_BACKHAUL, link)
                g.bearers.append(b)
                g.bearer_by_id[b.bearer_id] = b
                g.child_by_bearer[b.bearer_id] = None  # filled below
                self.bearers.append(b)

        self.flows: list[_Flow] = []
        self.flow_by_tunnel: dict[int, _Flow] = {}
        for uid in sorted(ue_ids):
            serving = tree.nodes[uid].parent
            tunnel = tree.ue_tunnels[uid]
            los = geometry.is_los(scenario, positions[serving], positions[uid])
            shadow = draw_shadowing(cfg.channel, rng_shadow, los)
            link = build_link(
                cfg.channel,
                serving,
                uid,
                positions[serving].distance_to(positions[uid]),
                los,
                shadow,
                rx_is_gnb=False,
                symbols_per_subframe=cfg.mac.symbols_per_subframe,
                subframe_duration_s=cfg.mac.subframe_duration_s,
            )
            g = self.gnbs[serving]
            b = self._new_bearer(next(bearer_id), serving, uid, BEARER_ACCESS, link, tunnel)
            g.bearers.append(b)
            g.bearer_by_id[b.bearer_id] = b
            self.bearers.append(b)

            start = cfg.attach_delay_s
            stop = cfg.attach_delay_s + cfg.sim_duration_s
            schedule = generate_flow(
                FlowConfig(uid, cfg.traffic.rate_bps, cfg.traffic.packet_size_bytes, start, stop),
                cfg.core,
            )
            hops = len(tree.path_from_donor(serving))
            flow = _Flow(uid, tunnel, schedule, serving, hops)
            self.flows.append(flow)
            self.flow_by_tunnel[tunnel] = flow

        # Tunnel-to-bearer maps per gNB, then flow path bearers for accounting.
        for gid in gnb_ids:
            g = self.gnbs[gid]
            table = tables[gid]
            for b in g.bearers:
                if b.kind == BEARER_BACKHAUL:
                    g.child_by_bearer[b.bearer_id] = self.gnbs[b.peer]
            child_bearer = {
                self.gnbs[b.peer].node_id: b for b in g.bearers if b.kind == BEARER_BACKHAUL
            }
            access_bearer = {b.peer: b for b in g.bearers if b.kind == BEARER_ACCESS}
            for tunnel in list(table.local) + list(table.next_hop):
                action, child = route_at_node(table, tunnel)
                if action == "deliver_local":
                    ue = next(u for u, t in tree.ue_tunnels.items() if t == tunnel)
                    g.bearer_for_tunnel[tunnel] = access_bearer[ue]
                else:
                    g.bearer_for_tunnel[tunnel] = child_bearer[child]

        for flow in self.flows:
            path = tree.path_from_donor(flow.serving_gnb)
            flow.path_bearers = [
                self.gnbs[gid].bearer_for_tunnel[flow.tunnel] for gid in path
            ]

        self.gnbs_by_eta = sorted(
            self.gnbs.values(), key=lambda g: (-g.lookahead, g.node_id)
        )
        self.gnbs_by_id = sorted(self.gnbs.values(), key=lambda g: g.node_id)

    def _new_bearer(
        self,
        bearer_id: int,
        owner: int,
        peer: int,
        kind: str,
        link: LinkState,
        tunnel: int | None = None,
    ) -> RlcBearer:
        cfg = self.cfg
        capacity = (
            cfg.stack.iab_buffer_bytes if kind == BEARER_BACKHAUL else cfg.stack.ue_buffer_bytes
        )
        err = tb_error_prob(
            link.snr_db,
            link.spectral_efficiency,
            shannon_gap=cfg.channel.shannon_gap,
            bler_target=cfg.channel.bler_target,
            db_per_decade=cfg.channel.bler_db_per_decade,
        )
        return RlcBearer(
            bearer_id=bearer_id,
            owner_gnb=owner,
            peer=peer,
            kind=kind,
            capacity_bytes=capacity,
            segment_header_bytes=cfg.stack.segment_header_bytes,
            overhead_bytes=cfg.stack.tunnel_overhead_bytes if kind == BEARER_BACKHAUL else 0,
            per_symbol_bits=link.per_symbol_capacity_bits,
            error_prob=err if link.per_symbol_capacity_bits > 0 else 1.0,
            snr_db=link.snr_db,
            spectral_efficiency=link.spectral_efficiency,
        )

    # -- per-tick phases -------------------------------------------------------

    def _apply_outcomes(self, tick: int, now: float) -> None:
        cfg = self.cfg
        for gnb, bearer, tb, success, proc, tx_tick in self.outcomes.pop(tick, ()):
            if success:
                bearer.harq_unregister(tb.uid)
                if proc is not None:
                    gnb.procs.pop(proc.uid, None)
                delivered, gap = bearer.receive_ranges(tb.ranges, now)
                if gap and bearer.reorder_deadline is None:
                    deadline_tick = tick + int(
                        math.ceil(cfg.stack.reordering_timer_s / self.sf - 1e-9)
                    )
                    bearer.reorder_deadline = deadline_tick * self.sf
                    self.events.push(deadline_tick, EventKind.TIMER_EXPIRY, bearer)
                if delivered:
                    self._deliver_up(gnb, bearer, delivered, now)
            else:
                self.tb_failures += 1
                count = proc.transmission_count if proc is not None else 1
                if count <= cfg.stack.max_retx:
                    if proc is None:
                        proc = _HarqProc(
                            tb.uid,
                            bearer,
                            tb,
                            count,
                            tx_tick + cfg.stack.harq_retx_delay_subframes,
                            bearer.kind == BEARER_BACKHAUL,
                        )
                        gnb.procs[tb.uid] = proc
                    else:
                        proc.eligible = tx_tick + cfg.stack.harq_retx_delay_subframes
                    gnb.retx.append(proc)
                    gnb.retx.sort(key=lambda p: (p.eligible, p.bearer.bearer_id, p.uid))
                else:
                    self.harq_exhausts += 1
                    if proc is not None:
                        gnb.procs.pop(proc.uid, None)
                    bearer.harq_exhaust_to_arq(tb)

    def _deliver_up(self, gnb: _Gnb, bearer: RlcBearer, delivered, now: float) -> None:
        if bearer.kind == BEARER_ACCESS:
            w0, w1 = self.window
            in_window = w0 <= now <= w1
            for tunnel, a, b in delivered:
                flow = self.flow_by_tunnel[tunnel]
                n = b - a
                sched = flow.schedule
                flow.delivered += n
                lat_last = now - sched.created_at(b - 1)
                lat_first = now - sched.created_at(a)
                if lat_last < flow.latency_min:
                    flow.latency_min = lat_last
                if lat_first > flow.latency_max:
                    flow.latency_max = lat_first
                if in_window:
                    flow.win_delivered += n
                    flow.win_bytes += n * sched.packet_size_bytes
                    flow.win_latency_sum += n * now - sched.created_sum(a, b)
        else:
            # Relayed traffic re-enters the child's own downstream bearer.
            child = self.gnbs[bearer.peer]
            for tunnel, a, b in delivered:
                nxt = child.bearer_for_tunnel[tunnel]
                flow = self.flow_by_tunnel[tunnel]
                _, dropped = nxt.enqueue_packets(
                    tunnel, a, b, flow.schedule.packet_size_bytes
                )
                if dropped:
                    flow.dropped += dropped

    def _sweep_arrivals(self, now: float) -> None:
        donor = self.gnbs_by_id[0]
        for flow in self.flows:
            if not flow.active and flow.arrived >= flow.schedule.n_packets:
                continue
            m = flow.schedule.arrived_count_by(now)
            if m > flow.arrived:
                bearer = donor.bearer_for_tunnel[flow.tunnel]
                _, dropped = bearer.enqueue_packets(
                    flow.tunnel, flow.arrived, m, flow.schedule.packet_size_bytes
                )
                if dropped:
                    flow.dropped += dropped
                flow.arrived = m

    def _schedule_phase(self, tick: int) -> None:
        cfg = self.cfg
        use_pf = cfg.mac.scheduler_kind == SCHEDULER_PF
        for g in self.gnbs_by_eta:
            target = tick + g.lookahead
            if target > self.last_tick:
                continue
            busy = g.busy.mask_for(target, tick if cfg.check_invariants else None)
            flows = [
                FlowInfo(
                    b.bearer_id,
                    q,
                    b.per_symbol_bits,
                    b.kind == BEARER_BACKHAUL,
                )
                for b in g.bearers
                if b.per_symbol_bits > 0 and (q := b.bsr_bytes()) > 0
            ]
            retx_ready = [
                RetxRequest(
                    p.uid,
                    p.bearer.bearer_id,
                    p.tb.n_symbols,
                    p.tb.tb_bits,
                    p.is_iab,
                    p.eligible,
                )
                for p in g.retx
                if p.eligible <= target
            ]
            if not flows and not retx_ready:
                continue
            if use_pf:
                allocation, dcis, placed = schedule_pf(
                    g.pf, cfg.mac, target, busy, flows, retx_ready, computed_at=tick
                )
            else:
                allocation, dcis, placed = schedule_rr(
                    g.rr, cfg.mac, target, busy, flows, retx_ready, computed_at=tick
                )
            if cfg.check_invariants:
                self.checks_performed += 1
                if not verify_work_conservation(allocation, cfg.mac, busy, flows):
                    raise CausalityError(
                        f"free symbols left unused with backlog at gNB {g.node_id}, "
                        f"subframe {target}"
                    )
            if placed:
                placed_set = set(placed)
                g.retx = [p for p in g.retx if p.uid not in placed_set]
            # Promise new-data bytes so the next ticks do not re-grant them.
            for a in allocation.assignments:
                if a.retx_id is None:
                    g.bearer_by_id[a.flow_id].committed_bytes += (
                        a.symbol_count * a.per_symbol_bits
                    ) // 8
            if allocation.assignments:
                g.pending[target] = allocation
            for dci in dcis:
                g.child_by_bearer[dci.flow_id].busy.ingest(dci, tick)
            if cfg.record_allocations:
                self.alloc_log.append((tick, g.node_id, allocation))

    def _transmit_phase(self, tick: int) -> None:
        rng = self.rng_harq
        bucket = None
        for g in self.gnbs_by_id:
            allocation = g.pending.pop(tick, None)
            g.busy.release(tick)
            if allocation is None:
                continue
            if self.cfg.check_invariants and allocation.computed_at != tick - g.lookahead:
                raise CausalityError(
                    f"allocation for subframe {tick} computed at {allocation.computed_at}, "
                    f"expected {tick - g.lookahead}"
                )
            # One transport block per (flow, grant); a retransmission and a
            # fresh grant for the same flow stay separate blocks.
            grouped: dict[tuple, list] = {}
            order = []
            for a in allocation.assignments:
                key = (a.flow_id, a.retx_id)
                if key not in grouped:
                    grouped[key] = []
                    order.append(key)
                grouped[key].append(a)
            for key in order:
                rows = grouped[key]
                bearer = g.bearer_by_id[key[0]]
                first = rows[0]
                if first.retx_id is not None:
                    proc = g.procs[first.retx_id]
                    proc.transmission_count += 1
                    tb = proc.tb
                else:
                    proc = None
                    total_bits = first.tb_bits
                    tb = bearer.make_tb(total_bits)
                    bearer.consume_committed(total_bits // 8)
                    if tb is None:
                        continue
                    tb.n_symbols = sum(r.symbol_count for r in rows)
                    bearer.harq_register(tb)
                self.tb_count += 1
                success = float(rng.random()) >= bearer.error_prob
                if bucket is None:
                    bucket = self.outcomes.setdefault(tick + 1, [])
                bucket.append((g, bearer, tb, success, proc, tick))

    def _handle_timer(self, bearer: RlcBearer, tick: int, now: float) -> None:
        if bearer.reorder_deadline is None or bearer.reorder_deadline > now + 1e-12:
            return  # cancelled or superseded
        nacks = bearer.missing_ranges()
        bearer.reorder_deadline = None
        if not nacks:
            return
        self.status_reports += 1
        self.events.push(
            tick + self.cfg.stack.feedback_delay_subframes, EventKind.STATUS_REPORT, (bearer, nacks)
        )
        # Gaps persist until the retransmission lands; keep the timer running.
        deadline_tick = tick + int(math.ceil(self.cfg.stack.reordering_timer_s / self.sf - 1e-9))
        bearer.reorder_deadline = deadline_tick * self.sf
        self.events.push(deadline_tick, EventKind.TIMER_EXPIRY, bearer)

    def _check_conservation(self) -> None:
        for flow in self.flows:
            in_core = flow.schedule.n_packets - flow.arrived
            resident = 0
            for bearer in flow.path_bearers:
                resident += bearer.admitted.get(flow.tunnel, 0) - bearer.delivered_up.get(
                    flow.tunnel, 0
                )
            total = in_core + flow.dropped + flow.delivered + resident
            if total != flow.schedule.n_packets:
                raise StructuralError(
                    f"conservation violated for tunnel {flow.tunnel}: "
                    f"{total} != {flow.schedule.n_packets}"
                )

    # -- main loop -------------------------------------------------------------

    def run(self) -> RunResult:
        cfg = self.cfg
        for tick in range(self.last_tick + 1):
            now = tick * self.sf
            for _, _, _, kind, payload in self.events.pop_due(tick, max_priority=1):
                payload.active = kind == EventKind.FLOW_START
            self._apply_outcomes(tick, now)
            self._sweep_arrivals(now)
            for _, _, _, kind, payload in self.events.pop_due(tick):
                if kind == EventKind.TIMER_EXPIRY:
                    self._handle_timer(payload, tick, now)
                elif kind == EventKind.STATUS_REPORT:
                    bearer, nacks = payload
                    bearer.apply_status(nacks)
            self._schedule_phase(tick)
            self._transmit_phase(tick)
            if (
                cfg.conservation_check_every
                and tick % cfg.conservation_check_every == 0
                and tick > 0
            ):
                self._check_conservation()
        self._check_conservation()
        return self._finalize()

    def _finalize(self) -> RunResult:
        flows_out = []
        for flow in self.flows:
            resident = 0
            for bearer in flow.path_bearers:
                resident += bearer.admitted.get(flow.tunnel, 0) - bearer.delivered_up.get(
                    flow.tunnel, 0
                )
            resident += flow.schedule.n_packets - flow.arrived
            flows_out.append(
                FlowResult(
                    ue_id=flow.ue_id,
                    tunnel=flow.tunnel,
                    serving_gnb=flow.serving_gnb,
                    hops=flow.hops,
                    generated=flow.schedule.n_packets,
                    arrived=flow.arrived,
                    delivered=flow.delivered,
                    dropped=flow.dropped,
                    win_delivered=flow.win_delivered,
                    win_bytes=flow.win_bytes,
                    win_latency_sum=flow.win_latency_sum,
                    latency_min=flow.latency_min,
                    latency_max=flow.latency_max,
                    residual=resident,
                )
            )
        max_access = max(
            (b.max_occupancy for b in self.bearers if b.kind == BEARER_ACCESS), default=0
        )
        max_backhaul = max(
            (b.max_occupancy for b in self.bearers if b.kind == BEARER_BACKHAUL), default=0
        )
        dup = sum(b.duplicate_bytes_discarded for b in self.bearers)
        return RunResult(
            seed=self.cfg.seed,
            n_relays=self.cfg.n_relays,
            rate_bps=self.cfg.traffic.rate_bps,
            subframes=self.last_tick + 1,
            window=self.window,
            flows=flows_out,
            ue_parent={f.ue_id: f.serving_gnb for f in self.flows},
            relay_parent={
                g.node_id: g.parent for g in self.gnbs_by_id if g.parent is not None
            },
            lookahead={g.node_id: g.lookahead for g in self.gnbs_by_id},
            max_access_occupancy=max_access,
            max_backhaul_occupancy=max_backhaul,
            tb_count=self.tb_count,
            tb_failures=self.tb_failures,
            harq_exhausts=self.harq_exhausts,
            status_reports=self.status_reports,
            duplicate_bytes=dup,
            checks_performed=self.checks_performed,
            allocations=self.alloc_log,
        )


def run_once(config: SimConfig) -> RunResult:
    """Execute one fully deterministic run of the configured scenario."""
    return _Sim(config).run()


def _campaign_run(args: tuple[SimConfig, int]) -> RunResult:
    config, seed = args
    return run_once(replace(config, seed=seed))


def run_campaign(
    config: SimConfig, n_runs: int, max_workers: int | None = None
) -> list[RunResult]:
    """Independent runs with seeds seed, seed+1, ... Each run redraws UE
    placement and shadowing. Results come back in seed order regardless of
    the execution mode."""
    if n_runs < 1:
        raise ConfigurationError("n_runs must be at least 1")
    jobs = [(config, config.seed + i) for i in range(n_runs)]
    if max_workers is None or max_workers <= 1 or n_runs == 1:
        return [_campaign_run(job) for job in jobs]
    import concurrent.futures

    with concurrent.futures.ProcessPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(_campaign_run, jobs))

"""Per-node data plane: RLC-AM bearers, HARQ transport blocks, tunnel routing.

A bearer carries an ordered byte stream. Admitted packets occupy contiguous
stream offsets; the sender tracks the first never-transmitted byte and a queue
of ARQ retransmission ranges, the receiver tracks the delivered prefix plus
any out-of-order ranges. Packets are recorded as *spans* (a tunnel id plus a
contiguous packet-index range), so bulk traffic moves without per-packet
objects: a span of n packets costs the same as one.

In-order delivery falls out of the prefix representation: bytes are handed to
the upper layer exactly once, in stream order. A reception gap starts the
reordering timer; on expiry the receiver reports the missing ranges so the
sender can queue ARQ retransmissions (unless HARQ is already handling them).
"""

from __future__ import annotations

import itertools
from bisect import bisect_right
from dataclasses import dataclass, field

from .errors import ConfigurationError, RoutingError

BEARER_ACCESS = "access"
BEARER_BACKHAUL = "backhaul"

_tb_uid = itertools.count()


@dataclass(frozen=True)
class StackConfig:
    ue_buffer_bytes: int = 10_000_000
    iab_buffer_bytes: int = 40_000_000
    reordering_timer_s: float = 0.002
    max_retx: int = 3
    harq_retx_delay_subframes: int = 4
    feedback_delay_subframes: int = 1
    segment_header_bytes: int = 2
    tunnel_overhead_bytes: int = 60

    def __post_init__(self) -> None:
        if self.ue_buffer_bytes <= 0 or self.iab_buffer_bytes <= 0:
            raise ConfigurationError("buffer capacities must be positive")
        if self.max_retx < 0:
            raise ConfigurationError("max_retx must be non-negative")


@dataclass
class Packet:
    """A single application packet, used at the module surface and in tests;
    bulk traffic is carried as spans instead."""

    packet_id: int
    payload_bytes: int
    tunnel_id: int
    created_at: float
    delivered_at: float | None = None
    hop_trace: list[int] = field(default_factory=list)


class _Span:
    """Contiguous packet-index range of one tunnel occupying stream bytes."""

    __slots__ = ("tunnel", "idx_a", "idx_b", "byte_base", "wire", "delivered")

    def __init__(self, tunnel: int, idx_a: int, idx_b: int, byte_base: int, wire: int):
        self.tunnel = tunnel
        self.idx_a = idx_a
        self.idx_b = idx_b
        self.byte_base = byte_base
        self.wire = wire
        self.delivered = 0  # packets of this span already handed up

    @property
    def byte_end(self) -> int:
        return self.byte_base + (self.idx_b - self.idx_a) * self.wire


class TransportBlock:
    """Bytes carried by one scheduling grant: stream ranges plus sizing."""

    __slots__ = ("uid", "ranges", "payload_bytes", "tb_bits", "n_symbols")

    def __init__(self, ranges: list[tuple[int, int]], payload_bytes: int, tb_bits: int):
        self.uid = next(_tb_uid)
        self.ranges = ranges
        self.payload_bytes = payload_bytes
        self.tb_bits = tb_bits
        self.n_symbols = 0


class RlcBearer:
    """One acknowledged-mode bearer: sender queue, HARQ tracking, receiver
    reassembly. ``capacity_bytes`` bounds queued plus in-flight bytes."""

    def __init__(
        self,
        bearer_id: int,
        owner_gnb: int,
        peer: int,
        kind: str,
        capacity_bytes: int,
        segment_header_bytes: int = 2,
        overhead_bytes: int = 0,
        per_symbol_bits: int = 0,
        error_prob: float = 0.0,
        snr_db: float = 0.0,
        spectral_efficiency: float = 0.0,
    ):
        if kind not in (BEARER_ACCESS, BEARER_BACKHAUL):
            raise ConfigurationError(f"unknown bearer kind {kind!r}")
        self.bearer_id = bearer_id
        self.owner_gnb = owner_gnb
        self.peer = peer
        self.kind = kind
        self.capacity_bytes = capacity_bytes
        self.segment_header_bytes = segment_header_bytes
        self.overhead_bytes = overhead_bytes
        self.per_symbol_bits = per_symbol_bits
        self.error_prob = error_prob
        self.snr_db = snr_db
        self.spectral_efficiency = spectral_efficiency

        # Sender-side stream state (byte offsets).
        self._spans: list[_Span] = []
        self._bases: list[int] = []
        self._head = 0
        self.tail_offset = 0
        self.tx_next = 0
        self.arq_ranges: list[tuple[int, int]] = []
        self.arq_bytes = 0
        self.committed_bytes = 0
        self._inflight: dict[int, list[tuple[int, int]]] = {}

        # Receiver-side state.
        self.delivered_prefix = 0
        self.oo_ranges: list[tuple[int, int]] = []
        self.highest_rx = 0
        self.reorder_deadline: float | None = None

        # Accounting.
        self.admitted: dict[int, int] = {}
        self.dropped: dict[int, int] = {}
        self.delivered_up: dict[int, int] = {}
        self.max_occupancy = 0
        self.duplicate_bytes_discarded = 0

    # -- sender ------------------------------------------------------------

    @property
    def occupancy_bytes(self) -> int:
        return self.tail_offset - self.delivered_prefix

    def enqueue_packets(self, tunnel: int, idx_a: int, idx_b: int, payload_bytes: int) -> tuple[int, int]:
        """Admit up to idx_b-idx_a packets (tail drop past capacity).

        Returns (admitted, dropped) counts. The wire size per packet is the
        payload plus this bearer's tunnel overhead.
        """
        n = idx_b - idx_a
        if n <= 0:
            return 0, 0
        wire = payload_bytes + self.overhead_bytes
        room = self.capacity_bytes - self.occupancy_bytes
        m = min(n, room // wire if room > 0 else 0)
        dropped = n - m
        if dropped:
            self.dropped[tunnel] = self.dropped.get(tunnel, 0) + dropped
        if m <= 0:
            return 0, n
        self.admitted[tunnel] = self.admitted.get(tunnel, 0) + m
        # Extend the tail span only while it is still live (not popped after
        # full delivery), else its packets would never be handed up.
        last = self._spans[-1] if self._head < len(self._spans) else None
        if (
            last is not None
            and last.tunnel == tunnel
            and last.idx_b == idx_a
            and last.wire == wire
        ):
            last.idx_b += m
        else:
            self._spans.append(_Span(tunnel, idx_a, idx_a + m, self.tail_offset, wire))
            self._bases.append(self.tail_offset)
        self.tail_offset += m * wire
        occ = self.occupancy_bytes
        if occ > self.max_occupancy:
            self.max_occupancy = occ
        return m, dropped

    def enqueue(self, packet: Packet) -> bool:
        """Single-packet convenience wrapper; True iff accepted."""
        admitted, _ = self.enqueue_packets(
            packet.tunnel_id, packet.packet_id, packet.packet_id + 1, packet.payload_bytes
        )
        return admitted == 1

    def bsr_bytes(self) -> int:
        """Schedulable backlog: untransmitted plus ARQ bytes, minus bytes
        already promised to pending grants."""
        return max(0, self.tail_offset - self.tx_next + self.arq_bytes - self.committed_bytes)

    def consume_committed(self, nbytes: int) -> None:
        self.committed_bytes = max(0, self.committed_bytes - nbytes)

    def _packets_touched(self, lo: int, hi: int) -> int:
        """Number of packets whose bytes intersect the stream range [lo, hi)."""
        if hi <= lo:
            return 0
        count = 0
        i = bisect_right(self._bases, lo, lo=self._head) - 1
        i = max(i, self._head)
        while i < len(self._spans):
            sp = self._spans[i]
            if sp.byte_base >= hi:
                break
            a = max(lo, sp.byte_base)
            b = min(hi, sp.byte_end)
            if b > a:
                first = (a - sp.byte_base) // sp.wire
                last = (b - sp.byte_base + sp.wire - 1) // sp.wire
                count += last - first
            i += 1
        return count

    def make_tb(self, tb_bits: int) -> TransportBlock | None:
        """Drain up to tb_bits from the bearer into one transport block.

        ARQ retransmission ranges go first, then fresh bytes. Each touched
        packet costs one segment header out of the budget.
        """
        budget = tb_bits // 8
        ranges: list[tuple[int, int]] = []
        total = 0
        hdr = self.segment_header_bytes

        while budget > hdr and self.arq_ranges:
            lo, hi = self.arq_ranges[0]
            cand_hi = min(hi, lo + budget)
            n_seg = self._packets_touched(lo, cand_hi)
            usable = budget - hdr * n_seg
            if usable <= 0:
                break
            take = min(hi - lo, usable)
            ranges.append((lo, lo + take))
            total += take
            budget -= take + hdr * self._packets_touched(lo, lo + take)
            self.arq_bytes -= take
            if take == hi - lo:
                self.arq_ranges.pop(0)
            else:
                self.arq_ranges[0] = (lo + take, hi)

        if budget > hdr and self.tx_next < self.tail_offset:
            lo = self.tx_next
            cand_hi = min(self.tail_offset, lo + budget)
            n_seg = self._packets_touched(lo, cand_hi)
            usable = budget - hdr * n_seg
            take = min(self.tail_offset - lo, max(0, usable))
            if take > 0:
                ranges.append((lo, lo + take))
                total += take
                self.tx_next += take

        if not ranges:
            return None
        return TransportBlock(ranges=ranges, payload_bytes=total, tb_bits=tb_bits)

    # -- HARQ bookkeeping ----------------------------------------------------

    def harq_register(self, tb: TransportBlock) -> None:
        self._inflight[tb.uid] = tb.ranges

    def harq_unregister(self, uid: int) -> None:
        self._inflight.pop(uid, None)

    def harq_covers(self, lo: int, hi: int) -> bool:
        for ranges in self._inflight.values():
            for a, b in ranges:
                if a < hi and lo < b:
                    return True
        return False

    def harq_exhaust_to_arq(self, tb: TransportBlock) -> None:
        """Hand a block whose HARQ budget is spent back to RLC ARQ."""
        self._inflight.pop(tb.uid, None)
        for lo, hi in tb.ranges:
            self._merge_arq(max(lo, self.delivered_prefix), hi)

    def _merge_arq(self, lo: int, hi: int) -> None:
        if hi <= lo:
            return
        merged: list[tuple[int, int]] = []
        placed = False
        for a, b in self.arq_ranges:
            if b < lo or a > hi:
                if not placed and a > hi:
                    merged.append((lo, hi))
                    placed = True
                merged.append((a, b))
            else:
                lo = min(lo, a)
                hi = max(hi, b)
        if not placed:
            merged.append((lo, hi))
            merged.sort()
        self.arq_ranges = merged
        self.arq_bytes = sum(b - a for a, b in self.arq_ranges)

    # -- receiver ------------------------------------------------------------

    def receive_ranges(self, ranges: list[tuple[int, int]], now: float) -> tuple[list, bool]:
        """Absorb delivered stream ranges; return (delivered spans, gap_open).

        Delivered spans are (tunnel, idx_a, idx_b) packet ranges now complete
        and in order. ``gap_open`` is True while the prefix is stuck behind a
        reception hole (reordering timer territory).
        """
        for lo, hi in ranges:
            if hi > self.highest_rx:
                self.highest_rx = hi
            p = self.delivered_prefix
            if hi <= p:
                self.duplicate_bytes_discarded += hi - lo
                continue
            if lo < p:
                self.duplicate_bytes_discarded += p - lo
                lo = p
            if lo == p:
                p = hi
                while self.oo_ranges and self.oo_ranges[0][0] <= p:
                    a, b = self.oo_ranges.pop(0)
                    if b > p:
                        p = b
                self.delivered_prefix = p
            else:
                self._merge_oo(lo, hi)
        gap_open = bool(self.oo_ranges)
        if not gap_open:
            self.reorder_deadline = None
        return self._pop_delivered(), gap_open

    def _merge_oo(self, lo: int, hi: int) -> None:
        merged: list[tuple[int, int]] = []
        placed = False
        for a, b in self.oo_ranges:
            if b < lo or a > hi:
                if not placed and a > hi:
                    merged.append((lo, hi))
                    placed = True
                merged.append((a, b))
            else:
                lo = min(lo, a)
                hi = max(hi, b)
        if not placed:
            merged.append((lo, hi))
            merged.sort()
        self.oo_ranges = merged

    def _pop_delivered(self) -> list[tuple[int, int, int]]:
        out: list[tuple[int, int, int]] = []
        p = self.delivered_prefix
        spans = self._spans
        while self._head < len(spans):
            sp = spans[self._head]
            if sp.byte_end <= p:
                n_pkts = sp.idx_b - sp.idx_a
                if sp.delivered < n_pkts:
                    out.append((sp.tunnel, sp.idx_a + sp.delivered, sp.idx_b))
                    self.delivered_up[sp.tunnel] = (
                        self.delivered_up.get(sp.tunnel, 0) + n_pkts - sp.delivered
                    )
                    sp.delivered = n_pkts
                self._head += 1
                continue
            full = (p - sp.byte_base) // sp.wire
            if full > sp.delivered:
                out.append((sp.tunnel, sp.idx_a + sp.delivered, sp.idx_a + full))
                self.delivered_up[sp.tunnel] = (
                    self.delivered_up.get(sp.tunnel, 0) + full - sp.delivered
                )
                sp.delivered = full
            break
        if self._head > 1024 and self._head * 2 > len(spans):
            del spans[: self._head]
            del self._bases[: self._head]
            self._head = 0
        return out

    def missing_ranges(self) -> list[tuple[int, int]]:
        """Reception holes between the delivered prefix and the highest byte
        seen, as reported in a status message."""
        holes = []
        cursor = self.delivered_prefix
        for a, b in self.oo_ranges:
            if a > cursor:
                holes.append((cursor, a))
            cursor = max(cursor, b)
        return holes

    def apply_status(self, nack_ranges: list[tuple[int, int]]) -> int:
        """Queue ARQ retransmissions for NACKed bytes not already covered by
        an active HARQ process or a pending ARQ range. Returns bytes queued."""
        queued = 0
        for lo, hi in nack_ranges:
            lo = max(lo, self.delivered_prefix)
            if hi <= lo:
                continue
            for a, b in self._uncovered(lo, hi):
                before = self.arq_bytes
                self._merge_arq(a, b)
                queued += self.arq_bytes - before
        return queued

    def _uncovered(self, lo: int, hi: int) -> list[tuple[int, int]]:
        pieces = [(lo, hi)]
        blockers = [r for ranges in self._inflight.values() for r in ranges]
        blockers.extend(self.arq_ranges)
        for a, b in blockers:
            nxt = []
            for x, y in pieces:
                if b <= x or a >= y:
                    nxt.append((x, y))
                    continue
                if x < a:
                    nxt.append((x, a))
                if b < y:
                    nxt.append((b, y))
            pieces = nxt
            if not pieces:
                break
        return pieces


def rlc_am_deliver(bearer: RlcBearer, ranges: list[tuple[int, int]], now: float):
    """Receiver-side acknowledged-mode delivery of arriving segments."""
    return bearer.receive_ranges(ranges, now)


def serve_allocation(bearer: RlcBearer, tb_bits: int, rng) -> tuple[TransportBlock | None, bool]:
    """Transmit one grant worth of bytes; the block fails with the bearer's
    static error probability. HARQ retransmission timing is the engine's job;
    this surface exists for direct exercise of the dequeue/error path."""
    tb = bearer.make_tb(tb_bits)
    if tb is None:
        return None, True
    bearer.harq_register(tb)
    success = float(rng.random()) >= bearer.error_prob
    return tb, success


def route_at_node(routing_table, tunnel: int) -> tuple[str, int | None]:
    """Forwarding decision at one gNB: deliver locally or forward to a child."""
    if tunnel in routing_table.local:
        return "deliver_local", None
    child = routing_table.next_hop.get(tunnel)
    if child is None:
        raise RoutingError(
            f"gNB {routing_table.owner} has no route for tunnel {tunnel}"
        )
    return "forward", child

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iabsim.errors import CausalityError
from iabsim.scheduler import (
    BusyMaskStore,
    Dci,
    FlowInfo,
    MacConfig,
    PfState,
    RetxRequest,
    RrState,
    schedule_pf,
    schedule_rr,
    verify_work_conservation,
)

S10 = MacConfig(symbols_per_subframe=10)
S24 = MacConfig()


def flow(fid, queued, cap=100_000, iab=False):
    return FlowInfo(fid, queued, cap, iab)


def total_syms(allocation, fid=None):
    return sum(
        a.symbol_count
        for a in allocation.assignments
        if fid is None or a.flow_id == fid
    )


class TestRoundRobin:
    def test_single_backlogged_flow_takes_everything(self):
        alloc, dcis, _ = schedule_rr(RrState(), S10, 5, 0, [flow(1, 10**7)])
        assert total_syms(alloc) == 10
        assert dcis == []

    def test_iab_child_capped_at_half(self):
        flows = [flow(1, 10**7, iab=True), flow(2, 10**7)]
        alloc, dcis, _ = schedule_rr(RrState(), S10, 5, 0, flows)
        assert total_syms(alloc, 1) == 5
        assert total_syms(alloc, 2) == 5
        assert len(dcis) == 1 and dcis[0].flow_id == 1

    def test_sole_iab_child_still_capped(self):
        alloc, _, _ = schedule_rr(RrState(), S10, 5, 0, [flow(1, 10**7, iab=True)])
        assert total_syms(alloc, 1) == 5

    def test_small_queue_drained_not_padded(self):
        # 2 symbols worth of queue at 100 kb/symbol.
        alloc, _, _ = schedule_rr(RrState(), S10, 5, 0, [flow(1, 25_000)])
        assert total_syms(alloc) == 2

    def test_rotation_continues_after_last_served(self):
        state = RrState()
        flows = [flow(1, 10**9), flow(2, 10**9), flow(3, 10**9)]
        alloc1, _, _ = schedule_rr(state, S10, 5, 0, flows)
        assert {a.flow_id for a in alloc1.assignments} == {1}
        alloc2, _, _ = schedule_rr(state, S10, 6, 0, flows)
        assert {a.flow_id for a in alloc2.assignments} == {2}
        alloc3, _, _ = schedule_rr(state, S10, 7, 0, flows)
        assert {a.flow_id for a in alloc3.assignments} == {3}
        alloc4, _, _ = schedule_rr(state, S10, 8, 0, flows)
        assert {a.flow_id for a in alloc4.assignments} == {1}

    def test_busy_mask_respected(self):
        busy = 0b0000111100  # symbols 2..5 reserved by the parent
        alloc, _, _ = schedule_rr(RrState(), S10, 5, busy, [flow(1, 10**7)])
        assert total_syms(alloc) == 6
        assert alloc.used_mask & busy == 0

    def test_fairness_window(self):
        # k backlogged identical flows over k*W subframes: per-flow symbol
        # totals differ by at most one subframe's grant.
        k, W = 5, 8
        state = RrState()
        flows = [flow(i, 10**9) for i in range(1, k + 1)]
        counts = {i: 0 for i in range(1, k + 1)}
        for sf in range(k * W):
            alloc, _, _ = schedule_rr(state, S24, sf, 0, flows)
            for a in alloc.assignments:
                counts[a.flow_id] += a.symbol_count
        spread = max(counts.values()) - min(counts.values())
        assert spread <= S24.symbols_per_subframe

    def test_outage_flow_skipped(self):
        alloc, _, _ = schedule_rr(RrState(), S10, 5, 0, [flow(1, 10**7, cap=0)])
        assert alloc.assignments == []


class TestRetransmissionPriority:
    def test_retx_scheduled_before_new_data(self):
        retx = [RetxRequest(77, 2, 4, 400_000, False, 5)]
        flows = [flow(1, 10**9)]
        alloc, _, placed = schedule_rr(RrState(), S10, 5, 0, flows, retx)
        assert placed == [77]
        first = alloc.assignments[0]
        assert first.retx_id == 77 and first.symbol_start == 0 and first.symbol_count == 4
        assert total_syms(alloc, 1) == 6  # remainder goes to new data

    def test_retx_deferred_when_cap_would_break(self):
        retx = [RetxRequest(78, 1, 8, 800_000, True, 5)]  # needs 8 > cap 5
        alloc, _, placed = schedule_rr(RrState(), S10, 5, 0, [], retx)
        assert placed == []
        assert alloc.assignments == []

    def test_retx_plus_new_data_same_iab_flow_stays_capped(self):
        retx = [RetxRequest(79, 1, 3, 300_000, True, 5)]
        flows = [flow(1, 10**9, iab=True)]
        alloc, _, placed = schedule_rr(RrState(), S10, 5, 0, flows, retx)
        assert placed == [79]
        assert total_syms(alloc, 1) == 5  # 3 retx + 2 new


class TestBusyMaskStore:
    def dci(self, target, ranges, created):
        return Dci(
            uid=hash((target, tuple(ranges), created)) & 0xFFFF,
            subframe_index=target,
            flow_id=1,
            ranges=tuple(ranges),
            tb_bits=1000,
            per_symbol_bits=500,
            created_at=created,
        )

    def test_marking_and_union(self):
        store = BusyMaskStore()
        mask = store.ingest(self.dci(50, [(0, 12)], created=48), now_subframe=48)
        assert bin(mask).count("1") == 12
        mask = store.ingest(self.dci(50, [(15, 3)], created=48), now_subframe=48)
        assert bin(mask).count("1") == 15
        assert store.mask_for(50, now_subframe=49) == mask

    def test_idempotent_per_dci(self):
        store = BusyMaskStore()
        d = self.dci(50, [(0, 4)], created=48)
        store.ingest(d, 48)
        store.ingest(d, 48)
        assert bin(store.mask_for(50, 49)).count("1") == 4

    def test_past_subframe_rejected(self):
        store = BusyMaskStore()
        with pytest.raises(CausalityError):
            store.ingest(self.dci(50, [(0, 4)], created=49), now_subframe=50)

    def test_mask_not_readable_before_arrival(self):
        store = BusyMaskStore(dci_delay_subframes=1)
        store.ingest(self.dci(52, [(0, 4)], created=50), now_subframe=50)
        with pytest.raises(CausalityError):
            store.mask_for(52, now_subframe=50)  # arrives only at 51
        assert store.mask_for(52, now_subframe=51) != 0

    def test_lookahead_two_accepts_dci_two_ahead(self):
        store = BusyMaskStore()
        d = self.dci(52, [(0, 6)], created=50)
        store.ingest(d, now_subframe=50)
        assert store.mask_for(52, now_subframe=51) == 0b111111


class TestParentChildConsistency:
    def test_child_allocation_avoids_parent_grant(self):
        # Parent grants its IAB child symbols k..k+m for subframe 60; the
        # child's own allocation for 60 must not touch them.
        parent_flows = [flow(7, 10**7, iab=True), flow(8, 10**7)]
        parent_alloc, dcis, _ = schedule_rr(
            RrState(), S24, 60, 0, parent_flows, computed_at=58
        )
        assert len(dcis) == 1
        child_store = BusyMaskStore()
        child_store.ingest(dcis[0], now_subframe=58)
        busy = child_store.mask_for(60, now_subframe=59)
        child_alloc, _, _ = schedule_rr(
            RrState(), S24, 60, busy, [flow(21, 10**7), flow(22, 10**7)]
        )
        assert child_alloc.used_mask & busy == 0
        assert child_alloc.used_mask & dcis[0].mask == 0


class TestProportionalFair:
    def test_equal_flows_split_within_one_symbol(self):
        flows = [flow(1, 10**7), flow(2, 10**7)]
        alloc, _, _ = schedule_pf(PfState(), S10, 5, 0, flows)
        s1, s2 = total_syms(alloc, 1), total_syms(alloc, 2)
        assert s1 + s2 == 10
        assert abs(s1 - s2) <= 1

    def test_starved_flow_scheduled_first(self):
        state = PfState()
        rich = flow(1, 10**7)
        for sf in range(30):
            schedule_pf(state, S10, sf, 0, [rich])
        # Flow 2 appears with an empty service history at equal capacity.
        alloc, _, _ = schedule_pf(state, S10, 30, 0, [rich, flow(2, 10**7)])
        assert total_syms(alloc, 2) >= total_syms(alloc, 1)
        first = alloc.assignments[0]
        assert first.flow_id == 2

    def test_single_flow_matches_round_robin(self):
        flows = [flow(1, 260_000)]
        pf_alloc, _, _ = schedule_pf(PfState(), S10, 5, 0, flows)
        rr_alloc, _, _ = schedule_rr(RrState(), S10, 5, 0, flows)
        assert [(a.symbol_start, a.symbol_count, a.flow_id) for a in pf_alloc.assignments] == [
            (a.symbol_start, a.symbol_count, a.flow_id) for a in rr_alloc.assignments
        ]

    def test_half_cap_applies(self):
        alloc, _, _ = schedule_pf(PfState(), S10, 5, 0, [flow(1, 10**7, iab=True)])
        assert total_syms(alloc, 1) == 5


flows_strategy = st.lists(
    st.tuples(
        st.integers(0, 10**7),  # queued bytes
        st.sampled_from([0, 20_000, 133_333]),  # per-symbol bits
        st.booleans(),
    ),
    min_size=1,
    max_size=12,
).map(
    lambda rows: [FlowInfo(i, q, c, iab) for i, (q, c, iab) in enumerate(rows)]
)


class TestInvariantProperties:
    @settings(max_examples=150, deadline=None)
    @given(flows_strategy, st.integers(0, (1 << 24) - 1), st.booleans())
    def test_non_overlap_cap_and_work_conservation(self, flows, busy, use_pf):
        busy &= (1 << 24) - 1
        if use_pf:
            alloc, dcis, _ = schedule_pf(PfState(), S24, 100, busy, flows)
        else:
            alloc, dcis, _ = schedule_rr(RrState(), S24, 100, busy, flows)
        #

        seen = 0
        for a in alloc.assignments:
            m = ((1 << a.symbol_count) - 1) << a.symbol_start
            assert m & busy == 0
            assert m & seen == 0
            seen |= m
        per_flow = {}
        for a in alloc.assignments:
            per_flow[a.flow_id] = per_flow.get(a.flow_id, 0) + a.symbol_count
        for f in flows:
            if f.is_iab_child:
                assert per_flow.get(f.flow_id, 0) <= 12
        assert verify_work_conservation(alloc, S24, busy, flows)
        for d in dcis:
            assert d.subframe_index == 100
            assert d.mask & busy == 0

    @settings(max_examples=60, deadline=None)
    @given(flows_strategy)
    def test_dcis_only_for_granted_iab_children(self, flows):
        alloc, dcis, _ = schedule_rr(RrState(), S24, 9, 0, flows)
        iab_granted = {
            a.flow_id
            for a in alloc.assignments
            if any(f.flow_id == a.flow_id and f.is_iab_child for f in flows)
        }
        assert {d.flow_id for d in dcis} == iab_granted


def test_computed_at_stamp():
    alloc, _, _ = schedule_rr(RrState(), S24, 42, 0, [flow(1, 100)], computed_at=40)
    assert alloc.computed_at == 40
    assert alloc.subframe_index == 42

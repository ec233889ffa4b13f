"""IAB tree construction: attachment policies, look-ahead depths, tunnel routing.

The scheduled tree is rooted at the donor. Relays attach first (either to the
geometrically closest donor or, in signal-quality order, to the best already
attached parent, which keeps the graph loop-free by construction); UEs then
attach to the geometrically closest gNB and each receives a unique tunnel id.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .channel import LinkState
from .errors import AttachmentError, StructuralError
from .geometry import Position

ROLE_DONOR = "donor"
ROLE_IAB = "iab"
ROLE_UE = "ue"

POLICY_CLOSEST_WIRED = "closest_wired"
POLICY_BEST_HQF = "best_hqf"

TunnelId = int


@dataclass
class TopologyNode:
    node_id: int
    role: str
    parent: int | None = None
    children: list[int] = field(default_factory=list)
    # Filled by compute_lookahead for donor/IAB nodes; UEs keep zeros.
    lookahead_depth: int = 0
    max_downstream_hops: int = 0


@dataclass
class IabTree:
    nodes: dict[int, TopologyNode]
    donor_id: int
    ue_tunnels: dict[int, TunnelId] = field(default_factory=dict)

    def gnb_ids(self) -> list[int]:
        return sorted(n.node_id for n in self.nodes.values() if n.role != ROLE_UE)

    def ue_ids(self) -> list[int]:
        return sorted(n.node_id for n in self.nodes.values() if n.role == ROLE_UE)

    def iab_children(self, gnb_id: int) -> list[int]:
        return [c for c in self.nodes[gnb_id].children if self.nodes[c].role == ROLE_IAB]

    def ue_children(self, gnb_id: int) -> list[int]:
        return [c for c in self.nodes[gnb_id].children if self.nodes[c].role == ROLE_UE]

    def path_from_donor(self, node_id: int) -> list[int]:
        """Node ids from the donor down to ``node_id`` inclusive."""
        path = []
        cur: int | None = node_id
        seen = set()
        while cur is not None:
            if cur in seen:
                raise StructuralError(f"cycle reached walking up from node {node_id}")
            seen.add(cur)
            path.append(cur)
            cur = self.nodes[cur].parent
        path.reverse()
        if path[0] != self.donor_id:
            raise StructuralError(f"node {node_id} is not rooted at the donor")
        return path


@dataclass
class RoutingTable:
    """Per-gNB forwarding state: tunnel id -> next-hop child, or local."""

    owner: int
    next_hop: dict[TunnelId, int] = field(default_factory=dict)
    local: set[TunnelId] = field(default_factory=set)


def _pair_key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def link_between(links: dict, a: int, b: int) -> LinkState | None:
    return links.get(_pair_key(a, b))


def attach_iab_nodes(
    donor_id: int,
    iab_ids: list[int],
    positions: dict[int, Position],
    links: dict[tuple[int, int], LinkState],
    policy: str = POLICY_BEST_HQF,
    outage_snr_db: float = -5.0,
) -> IabTree:
    """Build the gNB-only tree under one of the two attachment policies."""
    tree = IabTree(nodes={donor_id: TopologyNode(donor_id, ROLE_DONOR)}, donor_id=donor_id)
    for nid in sorted(iab_ids):
        tree.nodes[nid] = TopologyNode(nid, ROLE_IAB)

    if policy == POLICY_CLOSEST_WIRED:
        for nid in sorted(iab_ids):
            link = link_between(links, donor_id, nid)
            if link is None or link.snr_db < outage_snr_db:
                raise AttachmentError(
                    f"IAB node {nid} has no donor link above the outage threshold"
                )
            _set_parent(tree, nid, donor_id)
        return tree

    if policy != POLICY_BEST_HQF:
        raise AttachmentError(f"unknown attachment policy {policy!r}")

    # Highest-quality-first: repeatedly attach the unattached node with the
    # best SNR toward the already attached set. Ties break to lower ids.
    attached = [donor_id]
    remaining = sorted(iab_ids)
    while remaining:
        best: tuple[float, int, int] | None = None  # (snr, node, parent)
        for nid in remaining:
            for parent in attached:
                link = link_between(links, nid, parent)
                if link is None or link.snr_db < outage_snr_db:
                    continue
                if (
                    best is None
                    or link.snr_db > best[0]
                    or (link.snr_db == best[0] and (nid, parent) < (best[1], best[2]))
                ):
                    best = (link.snr_db, nid, parent)
        if best is None:
            raise AttachmentError(
                f"IAB node {remaining[0]} has no candidate parent above the "
                "outage threshold"
            )
        _, nid, parent = best
        _set_parent(tree, nid, parent)
        attached.append(nid)
        remaining.remove(nid)
    return tree


def _set_parent(tree: IabTree, child: int, parent: int) -> None:
    tree.nodes[child].parent = parent
    tree.nodes[parent].children.append(child)


def attach_ues(
    tree: IabTree,
    ue_positions: dict[int, Position],
    gnb_positions: dict[int, Position],
    attach_delay_s: float = 0.1,
) -> IabTree:
    """Attach each UE to the geometrically closest gNB (ties to lower id) and
    assign unique tunnel ids. UE traffic may start no earlier than
    ``attach_delay_s``; the delay itself is enforced by the traffic source.
    """
    next_tunnel = 0
    for ue_id in sorted(ue_positions):
        pos = ue_positions[ue_id]
        serving = min(
            tree.gnb_ids(),
            key=lambda g: (pos.distance_to(gnb_positions[g]), g),
        )
        tree.nodes[ue_id] = TopologyNode(ue_id, ROLE_UE, parent=serving)
        tree.nodes[serving].children.append(ue_id)
        tree.ue_tunnels[ue_id] = next_tunnel
        next_tunnel += 1
    return tree


def compute_lookahead(tree: IabTree) -> IabTree:
    """Fill max downstream gNB hop counts and look-ahead depths.

    For every donor/IAB node the hop count is the length of the longest
    downstream gNB-to-gNB path (UEs do not count), and the look-ahead depth is
    that count plus one. Recomputable after any topology change.
    """
    state: dict[int, int] = {}  # 1 = in progress, 2 = done

    def visit(nid: int) -> int:
        if state.get(nid) == 1:
            raise StructuralError(f"cycle detected at gNB {nid}")
        node = tree.nodes[nid]
        if state.get(nid) == 2:
            return node.max_downstream_hops
        state[nid] = 1
        iab_children = tree.iab_children(nid)
        hops = 0 if not iab_children else 1 + max(visit(c) for c in iab_children)
        node.max_downstream_hops = hops
        node.lookahead_depth = hops + 1
        state[nid] = 2
        return hops

    for nid in tree.gnb_ids():
        visit(nid)
    # Every non-donor gNB must be reachable from the donor.
    reachable = set()
    stack = [tree.donor_id]
    while stack:
        cur = stack.pop()
        reachable.add(cur)
        stack.extend(tree.iab_children(cur))
    missing = set(tree.gnb_ids()) - reachable
    if missing:
        raise StructuralError(f"gNBs {sorted(missing)} are not reachable from the donor")
    return tree


def subtree_ue_count(tree: IabTree, gnb_id: int) -> int:
    """UEs served by ``gnb_id`` or by any gNB below it."""
    count = len(tree.ue_children(gnb_id))
    for child in tree.iab_children(gnb_id):
        count += subtree_ue_count(tree, child)
    return count


def downstream_ue_counts(tree: IabTree) -> dict[int, dict[int, int]]:
    """Per gNB, per IAB-child bearer: how many UEs the bearer carries."""
    return {
        gnb: {child: subtree_ue_count(tree, child) for child in tree.iab_children(gnb)}
        for gnb in tree.gnb_ids()
    }


def build_routing_tables(tree: IabTree) -> dict[int, RoutingTable]:
    """Routing tables mapping each UE tunnel to the next-hop child on every
    gNB of its donor-to-UE path; the serving gNB terminates the tunnel."""
    tables = {gnb: RoutingTable(owner=gnb) for gnb in tree.gnb_ids()}
    for ue_id in tree.ue_ids():
        tunnel = tree.ue_tunnels[ue_id]
        serving = tree.nodes[ue_id].parent
        assert serving is not None
        path = tree.path_from_donor(serving)
        for hop, nxt in zip(path[:-1], path[1:]):
            tables[hop].next_hop[tunnel] = nxt
        tables[serving].local.add(tunnel)
    return tables


def setup_latency_s(
    tree: IabTree, gnb_id: int, core_latency_s: float, subframe_duration_s: float
) -> float:
    """Modeled control-plane setup time for a gNB: two core round-trip legs
    plus one subframe per wireless hop on the donor path."""
    hops = len(tree.path_from_donor(gnb_id)) - 1
    return 2.0 * core_latency_s + hops * subframe_duration_s

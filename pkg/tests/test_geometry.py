import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iabsim.errors import ConfigurationError
from iabsim.geometry import (
    Position,
    build_manhattan_grid,
    is_los,
    place_nodes,
)

from conftest import los_by_sampling


def paper_grid():
    return build_manhattan_grid(50.0, 10.0, 4, 4)


class TestManhattanGrid:
    def test_paper_extent_matches_reference_area(self):
        scenario = paper_grid()
        assert len(scenario.buildings) == 16
        assert scenario.bounds == (0.0, 0.0, 230.0, 230.0)
        assert scenario.area == pytest.approx(0.0529e6)  # 0.0529 km^2

    def test_single_block(self):
        scenario = build_manhattan_grid(50.0, 10.0, 1, 1)
        assert len(scenario.buildings) == 1
        b = scenario.buildings[0]
        assert (b.min_x, b.min_y, b.max_x, b.max_y) == (0.0, 0.0, 50.0, 50.0)
        assert scenario.bounds == (0.0, 0.0, 50.0, 50.0)

    def test_two_blocks_have_exact_street_gap(self):
        scenario = build_manhattan_grid(50.0, 10.0, 2, 1)
        lo, hi = scenario.buildings
        assert hi.min_y - lo.max_y == pytest.approx(10.0)

    def test_street_plus_building_area_partitions_bounds(self):
        scenario = paper_grid()
        built = sum(b.area for b in scenario.buildings)
        assert built + scenario.street_area == pytest.approx(scenario.area)

    def test_buildings_pairwise_disjoint(self):
        scenario = paper_grid()
        bl = scenario.buildings
        for i in range(len(bl)):
            for j in range(i + 1, len(bl)):
                a, b = bl[i], bl[j]
                overlap_x = min(a.max_x, b.max_x) - max(a.min_x, b.min_x)
                overlap_y = min(a.max_y, b.max_y) - max(a.min_y, b.min_y)
                assert overlap_x <= 0 or overlap_y <= 0

    @pytest.mark.parametrize("args", [(0, 10, 4, 4), (50, -1, 4, 4), (50, 10, 0, 4)])
    def test_non_positive_dimension_rejected(self, args):
        with pytest.raises(ConfigurationError):
            build_manhattan_grid(*args)


class TestPlacement:
    def test_relays_ring_at_exact_distance(self):
        scenario = paper_grid()
        placement = place_nodes(scenario, 4, 40, 1)
        assert len(placement.relays) == 4
        for relay in placement.relays:
            assert placement.donor.horizontal_distance_to(relay) == pytest.approx(85.0)

    def test_relay_order_east_north_west_south(self):
        scenario = paper_grid()
        placement = place_nodes(scenario, 3, 0, 1)
        donor = placement.donor
        offsets = [(r.x - donor.x, r.y - donor.y) for r in placement.relays]
        assert offsets == [(85.0, 0.0), (0.0, 85.0), (-85.0, 0.0)]

    def test_zero_relays(self):
        placement = place_nodes(paper_grid(), 0, 40, 1)
        assert placement.relays == ()
        assert len(placement.ues) == 40

    def test_ues_all_outdoor(self):
        scenario = paper_grid()
        placement = place_nodes(scenario, 0, 200, 5)
        for ue in placement.ues:
            assert scenario.is_outdoor(ue.x, ue.y)

    def test_same_seed_identical_different_seed_differs(self):
        scenario = paper_grid()
        a = place_nodes(scenario, 2, 1, 42)
        b = place_nodes(scenario, 2, 1, 42)
        c = place_nodes(scenario, 2, 1, 43)
        assert a == b
        assert a.ues != c.ues

    def test_too_many_relays_rejected(self):
        with pytest.raises(ConfigurationError):
            place_nodes(paper_grid(), 5, 1, 1)

    def test_no_outdoor_area_rejected(self):
        solid = build_manhattan_grid(50.0, 10.0, 1, 1)  # building fills bounds
        with pytest.raises(ConfigurationError):
            place_nodes(solid, 0, 1, 1)

    def test_relay_ring_must_fit(self):
        small = build_manhattan_grid(20.0, 5.0, 2, 2)  # 45 m across
        with pytest.raises(ConfigurationError):
            place_nodes(small, 4, 0, 1, relay_distance=85.0)


class TestLineOfSight:
    def test_donor_to_relays_los_in_preset(self):
        scenario = paper_grid()
        placement = place_nodes(scenario, 4, 0, 1)
        for relay in placement.relays:
            assert is_los(scenario, placement.donor, relay)

    def test_zero_length_segment(self):
        scenario = paper_grid()
        p = Position(30.0, 30.0, 1.0)  # inside a building footprint
        assert is_los(scenario, p, p)

    def test_street_canyon_blockage_matches_oracle(self):
        scenario = paper_grid()
        donor = Position(115.0, 115.0, 10.0)
        # Behind the south-east block relative to the donor, at ground height.
        ue = Position(145.0, 55.0, 1.6)
        assert los_by_sampling(scenario, donor, ue) is False
        assert is_los(scenario, donor, ue) is False

    def test_rooftop_paths_clear_buildings(self):
        scenario = paper_grid()
        a = Position(5.0, 5.0, 20.0)
        b = Position(225.0, 225.0, 20.0)  # above every 15 m roof
        assert is_los(scenario, a, b)
        assert los_by_sampling(scenario, a, b)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 2**30))
    def test_symmetry(self, seed):
        scenario = paper_grid()
        rng = np.random.default_rng(seed)
        pts = rng.uniform(0, 230, size=(2, 2))
        zs = rng.uniform(0, 20, size=2)
        a = Position(pts[0][0], pts[0][1], zs[0])
        b = Position(pts[1][0], pts[1][1], zs[1])
        assert is_los(scenario, a, b) == is_los(scenario, b, a)

    def test_oracle_equivalence_sample(self):
        # The full 10^4-segment equivalence run lives in the acceptance suite.
        scenario = paper_grid()
        rng = np.random.default_rng(99)
        for _ in range(500):
            xy = rng.uniform(0, 230, size=4)
            z = rng.uniform(0, 20, size=2)
            a = Position(xy[0], xy[1], z[0])
            b = Position(xy[2], xy[3], z[1])
            assert is_los(scenario, a, b) == los_by_sampling(scenario, a, b)

    def test_place_nodes_pure_function(self):
        scenario = paper_grid()
        first = place_nodes(scenario, 4, 10, 7)
        again = place_nodes(scenario, 4, 10, 7)
        assert first == again

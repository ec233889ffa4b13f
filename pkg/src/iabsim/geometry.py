"""Manhattan-grid scenarios: building layout, node placement, line-of-sight queries.

The urban layout is a regular grid of square buildings separated by streets.
All geometry is static for a run; every function here is pure, so concurrent
read access is safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

DEFAULT_BUILDING_HEIGHT_M = 15.0
DEFAULT_DONOR_HEIGHT_M = 10.0
DEFAULT_RELAY_HEIGHT_M = 10.0
DEFAULT_UE_HEIGHT_M = 1.6
DEFAULT_RELAY_DISTANCE_M = 85.0

# Relay ring order for n_relays < 4: east, north, west, south.
_RELAY_OFFSETS = ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))


@dataclass(frozen=True)
class Position:
    """A 3-D point in meters; z is height above ground."""

    x: float
    y: float
    z: float = 0.0

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise ConfigurationError(f"non-finite coordinate in {self!r}")
        if self.z < 0:
            raise ConfigurationError(f"negative height in {self!r}")

    def distance_to(self, other: "Position") -> float:
        return math.dist((self.x, self.y, self.z), (other.x, other.y, other.z))

    def horizontal_distance_to(self, other: "Position") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class Building:
    """Axis-aligned rectangular footprint with a flat roof."""

    min_x: float
    min_y: float
    max_x: float
    max_y: float
    height: float

    def __post_init__(self) -> None:
        if not (self.min_x < self.max_x and self.min_y < self.max_y):
            raise ConfigurationError(f"degenerate footprint {self!r}")
        if self.height <= 0:
            raise ConfigurationError(f"non-positive building height {self!r}")

    def contains(self, x: float, y: float) -> bool:
        """Strict-interior containment of a ground-plane point."""
        return self.min_x < x < self.max_x and self.min_y < y < self.max_y

    @property
    def area(self) -> float:
        return (self.max_x - self.min_x) * (self.max_y - self.min_y)


@dataclass(frozen=True)
class Scenario:
    """An urban layout: buildings plus the bounding box that contains them."""

    buildings: tuple[Building, ...]
    bounds: tuple[float, float, float, float]  # min_x, min_y, max_x, max_y
    street_width: float
    block_side: float

    @property
    def area(self) -> float:
        min_x, min_y, max_x, max_y = self.bounds
        return (max_x - min_x) * (max_y - min_y)

    @property
    def street_area(self) -> float:
        return self.area - sum(b.area for b in self.buildings)

    def center(self) -> tuple[float, float]:
        min_x, min_y, max_x, max_y = self.bounds
        return (min_x + max_x) / 2.0, (min_y + max_y) / 2.0

    def is_outdoor(self, x: float, y: float) -> bool:
        return not any(b.contains(x, y) for b in self.buildings)

    def in_bounds(self, x: float, y: float) -> bool:
        min_x, min_y, max_x, max_y = self.bounds
        return min_x <= x <= max_x and min_y <= y <= max_y


@dataclass(frozen=True)
class Placement:
    """Node positions produced by :func:`place_nodes`."""

    donor: Position
    relays: tuple[Position, ...]
    ues: tuple[Position, ...]


def build_manhattan_grid(
    block_side: float,
    street_width: float,
    rows: int,
    cols: int,
    building_height: float = DEFAULT_BUILDING_HEIGHT_M,
) -> Scenario:
    """Lay out ``rows x cols`` square buildings separated by streets.

    Streets of ``street_width`` run between adjacent blocks only, so the
    bounding box is ``cols*block + (cols-1)*street`` wide. A 4x4 grid of 50 m
    blocks with 10 m streets gives 230 m x 230 m = 0.0529 km^2.
    """
    if block_side <= 0 or street_width <= 0:
        raise ConfigurationError("block_side and street_width must be positive")
    if rows <= 0 or cols <= 0:
        raise ConfigurationError("grid must have at least one row and column")

    pitch = block_side + street_width
    buildings = []
    for r in range(rows):
        for c in range(cols):
            x0 = c * pitch
            y0 = r * pitch
            buildings.append(
                Building(x0, y0, x0 + block_side, y0 + block_side, building_height)
            )
    width = cols * block_side + (cols - 1) * street_width
    height = rows * block_side + (rows - 1) * street_width
    return Scenario(
        buildings=tuple(buildings),
        bounds=(0.0, 0.0, width, height),
        street_width=street_width,
        block_side=block_side,
    )


def place_nodes(
    scenario: Scenario,
    n_relays: int,
    n_ues: int,
    rng_seed,
    *,
    donor_height: float = DEFAULT_DONOR_HEIGHT_M,
    relay_height: float = DEFAULT_RELAY_HEIGHT_M,
    ue_height: float = DEFAULT_UE_HEIGHT_M,
    relay_distance: float = DEFAULT_RELAY_DISTANCE_M,
) -> Placement:
    """Place the donor at the scenario center, relays on the cardinal ring,
    and UEs uniformly at random over the outdoor (street) area.

    ``rng_seed`` may be an integer seed or a ``numpy.random.Generator``.
    The result is a pure function of (scenario, counts, seed).
    """
    if not 0 <= n_relays <= 4:
        raise ConfigurationError(f"n_relays must be in 0..4, got {n_relays}")
    if n_ues < 0:
        raise ConfigurationError(f"n_ues must be non-negative, got {n_ues}")

    rng = (
        rng_seed
        if isinstance(rng_seed, np.random.Generator)
        else np.random.default_rng(rng_seed)
    )

    cx, cy = scenario.center()
    donor = Position(cx, cy, donor_height)

    relays = []
    for dx, dy in _RELAY_OFFSETS[:n_relays]:
        x = cx + dx * relay_distance
        y = cy + dy * relay_distance
        if not scenario.in_bounds(x, y):
            raise ConfigurationError(
                f"relay ring of {relay_distance} m does not fit inside bounds "
                f"{scenario.bounds}"
            )
        relays.append(Position(x, y, relay_height))

    if n_ues > 0 and scenario.street_area <= 0:
        raise ConfigurationError("scenario has no outdoor area to place UEs")

    min_x, min_y, max_x, max_y = scenario.bounds
    ues = []
    attempts = 0
    limit = 1000 * (n_ues + 1)
    while len(ues) < n_ues:
        if attempts > limit:
            raise ConfigurationError("could not find enough outdoor UE positions")
        attempts += 1
        x = rng.uniform(min_x, max_x)
        y = rng.uniform(min_y, max_y)
        if scenario.is_outdoor(x, y):
            ues.append(Position(x, y, ue_height))

    return Placement(donor=donor, relays=tuple(relays), ues=tuple(ues))


def _open_crossing(a: Position, b: Position, building: Building):
    """Parameter interval (t0, t1) where segment a->b crosses the open
    footprint interior, or None if it only touches or misses it."""
    t0, t1 = 0.0, 1.0
    for p, d, lo, hi in (
        (a.x, b.x - a.x, building.min_x, building.max_x),
        (a.y, b.y - a.y, building.min_y, building.max_y),
    ):
        if d == 0.0:
            if not (lo < p < hi):
                return None
        else:
            ta = (lo - p) / d
            tb = (hi - p) / d
            if ta > tb:
                ta, tb = tb, ta
            t0 = max(t0, ta)
            t1 = min(t1, tb)
        if t0 >= t1 - 1e-12:
            return None
    return t0, t1


def is_los(scenario: Scenario, a: Position, b: Position) -> bool:
    """True iff no building blocks the 3-D segment between a and b.

    A building blocks the segment when the 2-D footprint is crossed and the
    roof is higher than the segment's interpolated height somewhere on the
    crossing. Symmetric in its arguments; a zero-length segment is LOS.
    """
    if a.x == b.x and a.y == b.y and a.z == b.z:
        return True
    dz = b.z - a.z
    for building in scenario.buildings:
        crossing = _open_crossing(a, b, building)
        if crossing is None:
            continue
        t0, t1 = crossing
        z_lo = min(a.z + t0 * dz, a.z + t1 * dz)
        if z_lo < building.height:
            return False
    return True

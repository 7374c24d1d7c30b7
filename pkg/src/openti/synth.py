"""Synthetic networks and scenarios.

Hand-sized instances with known geometry: a single signalized cross, a
two-zone corridor for calibration studies, and parameterized grids for
property tests. Arm endpoints of the cross are rotated slightly off the
axes so each 2x2 zone cell has an unambiguous nearest anchor node.
"""

from __future__ import annotations

import numpy as np

from .demand import ODMatrix, ZoneGrid, build_zones
from .network import Link, Node, RoadNetwork, SignalizedIntersection, _attach_signals
from .sim import Scenario, SimSettings, assemble_scenario

BASE_LON = -111.90
BASE_LAT = 33.40


def _drive_link(link_id, a, b, length=500.0, lanes=1, speed=10.0):
    return Link(
        link_id=link_id,
        from_node=a,
        to_node=b,
        length=length,
        lanes=lanes,
        free_speed=speed,
        modes=frozenset({"drive"}),
    )


def cross_network() -> RoadNetwork:
    """One 4-way signalized intersection, 500 m arms, straight movements only."""
    nodes = {
        1: Node(1, BASE_LON, BASE_LAT, control="signal"),
        2: Node(2, BASE_LON + 0.002, BASE_LAT + 0.005),  # north arm
        3: Node(3, BASE_LON + 0.005, BASE_LAT - 0.002),  # east arm
        4: Node(4, BASE_LON - 0.002, BASE_LAT - 0.005),  # south arm
        5: Node(5, BASE_LON - 0.005, BASE_LAT + 0.002),  # west arm
    }
    links = [
        _drive_link(1, 2, 1),  # N in
        _drive_link(2, 1, 2),  # N out
        _drive_link(3, 4, 1),  # S in
        _drive_link(4, 1, 4),  # S out
        _drive_link(5, 3, 1),  # E in
        _drive_link(6, 1, 3),  # E out
        _drive_link(7, 5, 1),  # W in
        _drive_link(8, 1, 5),  # W out
    ]
    intersection = SignalizedIntersection(
        node_id=1,
        approaches=(1, 3, 5, 7),
        phases=(((1, 4), (3, 2)), ((5, 8), (7, 6))),  # NS straights, EW straights
    )
    return RoadNetwork(nodes=nodes, links=links, intersections=[intersection])


def cross_zones(network=None) -> ZoneGrid:
    return build_zones(network or cross_network(), rows=2, cols=2)


def cross_scenario(
    ns_volume: float,
    ew_volume: float,
    sn_volume: float = 0.0,
    we_volume: float = 0.0,
    horizon_s: int = 3600,
    seed: int = 0,
    hour: int = 8,
) -> Scenario:
    """Single-intersection scenario with the four through demands given in
    vehicles per hour (zone anchors: NE->N, SE->E, SW->S, NW->W)."""
    network = cross_network()
    zones = cross_zones(network)
    trips = np.zeros((4, 4, 1))
    trips[3, 0, 0] = ns_volume  # N -> S
    trips[1, 2, 0] = ew_volume  # E -> W
    trips[0, 3, 0] = sn_volume  # S -> N
    trips[2, 1, 0] = we_volume  # W -> E
    od = ODMatrix(zones=4, hours=(hour,), trips=trips)
    settings = SimSettings(horizon_s=horizon_s, seed=seed)
    return assemble_scenario(network, od, zones, settings)


def asymmetric_cross_scenario(seed: int = 0, horizon_s: int = 3600) -> Scenario:
    """Heavy north-south flow against a trickle on the cross street."""
    return cross_scenario(
        ns_volume=420.0, ew_volume=40.0, sn_volume=120.0, horizon_s=horizon_s, seed=seed
    )


def symmetric_cross_scenario(seed: int = 0, horizon_s: int = 3600) -> Scenario:
    return cross_scenario(
        ns_volume=180.0,
        ew_volume=180.0,
        sn_volume=180.0,
        we_volume=180.0,
        horizon_s=horizon_s,
        seed=seed,
    )


def corridor_network(length_m: float = 500.0, speed: float = 10.0) -> RoadNetwork:
    """Two nodes joined by one link per direction; no signals."""
    nodes = {
        1: Node(1, BASE_LON, BASE_LAT),
        2: Node(2, BASE_LON + 0.009, BASE_LAT),
    }
    links = [
        _drive_link(1, 1, 2, length=length_m, speed=speed),
        _drive_link(2, 2, 1, length=length_m, speed=speed),
    ]
    return RoadNetwork(nodes=nodes, links=links)


def corridor_scenario(
    ab_per_hour, ba_per_hour, n_hours: int = 1, seed: int = 0
) -> Scenario:
    """Two-zone corridor; volumes may be scalars or per-hour sequences."""
    network = corridor_network()
    zones = build_zones(network, rows=1, cols=2)
    ab = [float(ab_per_hour)] * n_hours if np.isscalar(ab_per_hour) else list(ab_per_hour)
    ba = [float(ba_per_hour)] * n_hours if np.isscalar(ba_per_hour) else list(ba_per_hour)
    hours = tuple(range(len(ab)))
    trips = np.zeros((2, 2, len(hours)))
    for h in range(len(hours)):
        trips[0, 1, h] = ab[h]
        trips[1, 0, h] = ba[h]
    od = ODMatrix(zones=2, hours=hours, trips=trips)
    settings = SimSettings(horizon_s=3600 * len(hours), seed=seed)
    return assemble_scenario(network, od, zones, settings)


def grid_network(
    rows: int,
    cols: int,
    spacing_deg: float = 0.004,
    length_m: float = 400.0,
    speed: float = 10.0,
    lanes: int = 1,
    signals: bool = True,
) -> RoadNetwork:
    """rows x cols lattice of two-way streets; interior nodes get signals."""
    if rows * cols < 2:
        raise ValueError("grid needs at least two nodes")
    nodes = {}
    node_id = {}
    nid = 1
    for r in range(rows):
        for c in range(cols):
            node_id[(r, c)] = nid
            nodes[nid] = Node(nid, BASE_LON + c * spacing_deg, BASE_LAT + r * spacing_deg)
            nid += 1
    links = []
    lid = 1
    for r in range(rows):
        for c in range(cols):
            here = node_id[(r, c)]
            if c + 1 < cols:
                east = node_id[(r, c + 1)]
                links.append(_drive_link(lid, here, east, length_m, lanes, speed))
                links.append(_drive_link(lid + 1, east, here, length_m, lanes, speed))
                lid += 2
            if r + 1 < rows:
                north = node_id[(r + 1, c)]
                links.append(_drive_link(lid, here, north, length_m, lanes, speed))
                links.append(_drive_link(lid + 1, north, here, length_m, lanes, speed))
                lid += 2
    network = RoadNetwork(nodes=nodes, links=links)
    if signals:
        interior = {
            node_id[(r, c)]
            for r in range(1, rows - 1)
            for c in range(1, cols - 1)
        }
        # On thin grids every node with 4 neighbors qualifies; fall back to all.
        _attach_signals(network, interior or set(nodes))
    return network


def random_scenario(rng) -> Scenario:
    """Small random grid + random demand; used by conservation property tests."""
    rows = rng.randint(2, 3)
    cols = rng.randint(2, 3)
    network = grid_network(
        rows,
        cols,
        length_m=rng.uniform(200.0, 700.0),
        speed=rng.uniform(8.0, 14.0),
        lanes=rng.randint(1, 2),
    )
    zones = build_zones(network, rows=rng.randint(1, 2), cols=rng.randint(1, 2))
    n = zones.n
    trips = np.zeros((n, n, 1))
    for o in range(n):
        for d in range(n):
            if o != d and rng.random() < 0.8:
                trips[o, d, 0] = rng.uniform(0.0, 60.0)
    od = ODMatrix(zones=n, hours=(0,), trips=trips)
    horizon = rng.choice([240, 360, 600])
    settings = SimSettings(horizon_s=horizon, seed=rng.randint(0, 10_000))
    return assemble_scenario(network, od, zones, settings)

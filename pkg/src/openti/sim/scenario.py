"""Scenario assembly: routes, anchors and the departure schedule.

A scenario binds a network, a trip table and a zone grid to concrete run
settings. Assembly precomputes one anchor node per zone (nearest drivable
node to the centroid), shortest routes between all anchor pairs by free-flow
time (ties broken by the smallest link-id sequence), and the second-resolution
departure schedule.
"""

from __future__ import annotations

import heapq
import json
import math
import os
import random
from dataclasses import dataclass, field

from ..errors import UnreachablePair
from ..geo import haversine_m

LOST_TIME_S = 3  # all-red seconds on every phase switch


@dataclass(frozen=True)
class SimSettings:
    horizon_s: int
    decision_interval_s: int = 10
    saturation_rate: float = 0.5  # veh/s/lane
    seed: int = 0

    def __post_init__(self):
        if self.horizon_s <= 0:
            raise ValueError("horizon_s must be > 0")
        if self.decision_interval_s <= 0 or self.horizon_s % self.decision_interval_s:
            raise ValueError("decision_interval_s must divide horizon_s")
        if self.saturation_rate <= 0:
            raise ValueError("saturation_rate must be > 0")


def traversal_s(link) -> int:
    return max(1, math.ceil(link.length / link.free_speed))


@dataclass
class Scenario:
    network: object
    od: object
    zones: object
    settings: SimSettings
    anchors: dict = field(default_factory=dict)  # zone_id -> node_id
    routes: dict = field(default_factory=dict)  # (o, d) -> tuple of link ids
    departures: list = field(default_factory=list)  # [(t, route)] sorted by t

    @property
    def horizon_s(self):
        return self.settings.horizon_s

    @property
    def seed(self):
        return self.settings.seed

    def with_od(self, od) -> "Scenario":
        """Same network/zones/routes, new trip table and schedule."""
        return Scenario(
            network=self.network,
            od=od,
            zones=self.zones,
            settings=self.settings,
            anchors=self.anchors,
            routes=self.routes,
            departures=_build_schedule(od, self.routes, self.settings),
        )


def _drive_nodes(network):
    ids = set()
    for link in network.links:
        if "drive" in link.modes:
            ids.add(link.from_node)
            ids.add(link.to_node)
    return sorted(ids)


def _nearest_node(network, candidates, lon, lat):
    best, best_d = None, None
    for nid in candidates:  # candidates sorted: ties go to the smallest id
        node = network.nodes[nid]
        d = haversine_m(lon, lat, node.lon, node.lat)
        if best_d is None or d < best_d:
            best, best_d = nid, d
    return best


def _route_table(network, anchors):
    """Shortest link-id routes between every pair of distinct anchor nodes."""
    drive_out = {}
    for link in network.links:
        if "drive" in link.modes:
            drive_out.setdefault(link.from_node, []).append(link)
    for links in drive_out.values():
        links.sort(key=lambda l: l.link_id)

    anchor_nodes = sorted(set(anchors.values()))
    routes_by_node = {}
    for source in anchor_nodes:
        settled = {}
        heap = [(0, (), source)]
        while heap:
            cost, path, node = heapq.heappop(heap)
            if node in settled:
                continue
            settled[node] = path
            for link in drive_out.get(node, []):
                if link.to_node in settled:
                    continue
                heapq.heappush(
                    heap,
                    (cost + traversal_s(link), path + (link.link_id,), link.to_node),
                )
        routes_by_node[source] = settled

    table = {}
    zone_ids = sorted(anchors)
    for o in zone_ids:
        for d in zone_ids:
            if o == d:
                continue
            src, dst = anchors[o], anchors[d]
            if src == dst:
                table[(o, d)] = ()
            elif dst in routes_by_node[src]:
                table[(o, d)] = routes_by_node[src][dst]
    return table


def _build_schedule(od, routes, settings):
    """Floor(v) departures at uniform spacing per hour cell, plus one with
    probability frac(v), drawn deterministically from the scenario seed."""
    departures = []
    n = od.zones
    for h_idx in range(len(od.hours)):
        base = h_idx * 3600
        if base >= settings.horizon_s:
            break
        for o in range(n):
            for d in range(n):
                if o == d:
                    continue  # intra-zonal trips never enter the network
                volume = float(od.trips[o, d, h_idx])
                if volume <= 0:
                    continue
                if (o, d) not in routes:
                    raise UnreachablePair(o, d)
                route = routes[(o, d)]
                whole = int(volume)
                for k in range(whole):
                    departures.append((base + (k * 3600) // whole, route))
                frac = volume - whole
                if frac > 1e-12:
                    rng = random.Random(
                        settings.seed * 1_000_003 + h_idx * 9_176 + o * 131 + d
                    )
                    if rng.random() < frac:
                        departures.append((base + int(rng.random() * 3600), route))
    departures = [dep for dep in departures if dep[0] < settings.horizon_s]
    departures.sort(key=lambda dep: dep[0])
    return departures


def assemble_scenario(network, od, zones, settings: SimSettings) -> Scenario:
    """Validate inputs and precompute everything the kernel needs."""
    if od.zones != zones.n:
        raise ValueError("trip table and zone grid disagree on zone count")
    candidates = _drive_nodes(network)
    if not candidates:
        raise UnreachablePair(0, 0)
    anchors = {
        z.zone_id: _nearest_node(network, candidates, z.centroid_lon, z.centroid_lat)
        for z in zones.zones
    }
    routes = _route_table(network, anchors)
    departures = _build_schedule(od, routes, settings)
    return Scenario(
        network=network,
        od=od,
        zones=zones,
        settings=settings,
        anchors=anchors,
        routes=routes,
        departures=departures,
    )


def write_scenario_dir(scenario: Scenario, out_dir) -> str:
    """Persist the scenario exchange directory: GMNS + demand.csv + settings."""
    from ..demand import write_demand_csv
    from ..network import to_gmns

    os.makedirs(out_dir, exist_ok=True)
    to_gmns(scenario.network, out_dir)
    write_demand_csv(scenario.od, os.path.join(out_dir, "demand.csv"))
    with open(os.path.join(out_dir, "settings.json"), "w", encoding="utf-8") as fh:
        json.dump(
            {
                "horizon_s": scenario.settings.horizon_s,
                "decision_interval_s": scenario.settings.decision_interval_s,
                "saturation_rate": scenario.settings.saturation_rate,
                "seed": scenario.settings.seed,
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    return str(out_dir)

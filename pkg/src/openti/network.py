"""Road network model: OSM XML in, GMNS CSV out, mode filtering.

The OSM subset consumed: <node id lat lon> plus <way id> with <nd ref> and
<tag k v>. Ways carrying highway/railway tags become directed links
(two-way ways expand to two links); lengths are summed haversine segment
distances over the way geometry.
"""

from __future__ import annotations

import csv
import math
import os
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace

from .errors import EmptyNetwork, EmptyResult, IoError, MalformedXML
from .geo import BBox, haversine_m

MODES = ("drive", "bike", "walk", "rail")

DRIVE_CLASSES = {
    "motorway", "trunk", "primary", "secondary", "tertiary", "residential", "unclassified",
}
WALK_CLASSES = {"footway", "path", "pedestrian"}
RAIL_CLASSES = {"rail", "light_rail", "subway", "tram"}

# Planning defaults (m/s) when maxspeed is absent.
DEFAULT_SPEEDS = {
    "motorway": 27.8,
    "trunk": 27.8,
    "primary": 16.7,
    "secondary": 16.7,
    "tertiary": 11.1,
    "residential": 11.1,
    "unclassified": 11.1,
    "cycleway": 4.2,
    "footway": 4.2,
    "path": 4.2,
    "pedestrian": 4.2,
}
RAIL_SPEED = 16.7
FALLBACK_SPEED = 11.1

NODE_HEADER = ["node_id", "x_coord", "y_coord", "ctrl_type"]
LINK_HEADER = ["link_id", "from_node_id", "to_node_id", "length", "lanes", "free_speed", "allowed_uses"]


@dataclass(frozen=True)
class Node:
    node_id: int
    lon: float
    lat: float
    control: str = "none"  # none | signal


@dataclass(frozen=True)
class Link:
    link_id: int
    from_node: int
    to_node: int
    length: float  # meters
    lanes: int
    free_speed: float  # m/s
    modes: frozenset

    def __post_init__(self):
        if self.length <= 0:
            raise ValueError(f"link {self.link_id}: length must be > 0")
        if self.lanes < 1:
            raise ValueError(f"link {self.link_id}: lanes must be >= 1")
        if self.free_speed <= 0:
            raise ValueError(f"link {self.link_id}: free_speed must be > 0")
        if self.from_node == self.to_node:
            raise ValueError(f"link {self.link_id}: self loops are not allowed")


@dataclass(frozen=True)
class SignalizedIntersection:
    node_id: int
    approaches: tuple  # incoming link ids, ordered
    phases: tuple  # tuple of movement tuples ((in_link, out_link), ...)

    def __post_init__(self):
        if len(self.phases) < 2:
            raise ValueError(f"intersection {self.node_id}: needs >= 2 phases")
        if len(set(self.phases)) != len(self.phases):
            raise ValueError(f"intersection {self.node_id}: phases must be distinct")
        covered = {m[0] for phase in self.phases for m in phase}
        missing = [a for a in self.approaches if a not in covered]
        if missing:
            raise ValueError(
                f"intersection {self.node_id}: approaches {missing} appear in no phase"
            )


@dataclass
class RoadNetwork:
    nodes: dict  # node_id -> Node
    links: list  # [Link]
    intersections: list = field(default_factory=list)
    dangling_dropped: int = 0  # nd refs without a matching node

    def __post_init__(self):
        for link in self.links:
            if link.from_node not in self.nodes or link.to_node not in self.nodes:
                raise ValueError(f"link {link.link_id}: endpoint missing from nodes")

    def extent(self) -> BBox:
        lons = [n.lon for n in self.nodes.values()]
        lats = [n.lat for n in self.nodes.values()]
        eps = 1e-7  # degenerate extents still need a valid box
        return BBox(
            min_lon=min(lons),
            min_lat=min(lats),
            max_lon=max(max(lons), min(lons) + eps),
            max_lat=max(max(lats), min(lats) + eps),
        )

    def in_links(self):
        out = {}
        for link in self.links:
            out.setdefault(link.to_node, []).append(link)
        return out

    def out_links(self):
        out = {}
        for link in self.links:
            out.setdefault(link.from_node, []).append(link)
        return out

    def link_by_id(self):
        return {link.link_id: link for link in self.links}


def _way_modes(tags) -> frozenset:
    modes = set()
    highway = tags.get("highway", "")
    railway = tags.get("railway", "")
    if highway in DRIVE_CLASSES:
        modes.add("drive")
    if highway == "cycleway" or tags.get("bicycle") == "yes":
        modes.add("bike")
    cycleway = tags.get("cycleway")
    if cycleway is not None and cycleway != "no":
        modes.add("bike")
    if highway in WALK_CLASSES:
        modes.add("walk")
    sidewalk = tags.get("sidewalk")
    if sidewalk is not None and sidewalk != "no":
        modes.add("walk")
    if railway in RAIL_CLASSES:
        modes.add("rail")
    return frozenset(modes)


def _way_speed(tags) -> float:
    maxspeed = tags.get("maxspeed", "")
    if maxspeed:
        value = maxspeed.strip().lower()
        try:
            if value.endswith("mph"):
                return max(float(value[:-3].strip()) * 0.44704, 0.1)
            return max(float(value) / 3.6, 0.1)
        except ValueError:
            pass
    highway = tags.get("highway", "")
    if highway in DEFAULT_SPEEDS:
        return DEFAULT_SPEEDS[highway]
    if tags.get("railway", "") in RAIL_CLASSES:
        return RAIL_SPEED
    return FALLBACK_SPEED


def _way_lanes(tags) -> int:
    try:
        lanes = int(tags.get("lanes", "1"))
    except ValueError:
        return 1
    return max(1, lanes)


def bearing_deg(lon1, lat1, lon2, lat2) -> float:
    """Compass bearing from point 1 to point 2, degrees clockwise from north."""
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    dlam = math.radians(lon2 - lon1)
    y = math.sin(dlam) * math.cos(phi2)
    x = math.cos(phi1) * math.sin(phi2) - math.sin(phi1) * math.cos(phi2) * math.cos(dlam)
    return (math.degrees(math.atan2(y, x)) + 360.0) % 360.0


def _is_north_south(bearing: float) -> bool:
    return min(bearing % 180.0, 180.0 - bearing % 180.0) <= 45.0


def default_two_phase(node_id, nodes, incoming, outgoing):
    """Default signal plan: north-south movements vs east-west movements.

    Approach grouping uses the endpoint bearing of the incoming link. U-turn
    movements are excluded unless they are the only way out of an approach.
    Returns None when one of the groups would be empty.
    """
    if len(incoming) < 2:
        return None
    groups = {True: [], False: []}
    for link in incoming:
        a, b = nodes[link.from_node], nodes[link.to_node]
        groups[_is_north_south(bearing_deg(a.lon, a.lat, b.lon, b.lat))].append(link)
    if not groups[True] or not groups[False]:
        return None

    def movements(group):
        moves = []
        for link in group:
            outs = [o for o in outgoing if o.from_node == node_id]
            non_uturn = [o for o in outs if o.to_node != link.from_node]
            chosen = non_uturn if non_uturn else outs
            for o in chosen:
                moves.append((link.link_id, o.link_id))
        return tuple(sorted(moves))

    phase_ns = movements(groups[True])
    phase_ew = movements(groups[False])
    if not phase_ns or not phase_ew:
        return None
    approaches = tuple(sorted(l.link_id for l in incoming))
    return SignalizedIntersection(
        node_id=node_id, approaches=approaches, phases=(phase_ns, phase_ew)
    )


def parse_osm(path) -> RoadNetwork:
    """Parse an OSM XML file into a directed, mode-annotated network."""
    try:
        tree = ET.parse(path)
    except ET.ParseError as exc:
        raise MalformedXML(f"{path}: {exc}")
    root = tree.getroot()
    if root.tag != "osm":
        raise MalformedXML(f"{path}: root element is <{root.tag}>, expected <osm>")

    raw_nodes = {}
    signal_tagged = set()
    for el in root.iter("node"):
        nid = int(el.get("id"))
        raw_nodes[nid] = (float(el.get("lon")), float(el.get("lat")))
        for tag in el.iter("tag"):
            if tag.get("k") == "highway" and tag.get("v") == "traffic_signals":
                signal_tagged.add(nid)

    links = []
    used_nodes = set()
    dangling = 0
    link_id = 1
    for way in root.iter("way"):
        tags = {t.get("k"): t.get("v") for t in way.iter("tag")}
        if "highway" not in tags and "railway" not in tags:
            continue
        modes = _way_modes(tags)
        if not modes:
            continue
        refs = []
        for nd in way.iter("nd"):
            ref = int(nd.get("ref"))
            if ref in raw_nodes:
                refs.append(ref)
            else:
                dangling += 1
        if len(refs) < 2:
            continue
        length = 0.0
        for a, b in zip(refs, refs[1:]):
            lon1, lat1 = raw_nodes[a]
            lon2, lat2 = raw_nodes[b]
            length += haversine_m(lon1, lat1, lon2, lat2)
        if length <= 0 or refs[0] == refs[-1]:
            continue
        speed = _way_speed(tags)
        lanes = _way_lanes(tags)
        oneway = tags.get("oneway", "no")
        directions = []
        if oneway in ("yes", "true", "1"):
            directions = [(refs[0], refs[-1])]
        elif oneway == "-1":
            directions = [(refs[-1], refs[0])]
        else:
            directions = [(refs[0], refs[-1]), (refs[-1], refs[0])]
        for from_n, to_n in directions:
            links.append(
                Link(
                    link_id=link_id,
                    from_node=from_n,
                    to_node=to_n,
                    length=length,
                    lanes=lanes,
                    free_speed=speed,
                    modes=modes,
                )
            )
            link_id += 1
        used_nodes.update((refs[0], refs[-1]))

    if not links:
        raise EmptyNetwork(f"{path}: no eligible highway/railway ways")

    nodes = {}
    for nid in sorted(used_nodes):
        lon, lat = raw_nodes[nid]
        nodes[nid] = Node(node_id=nid, lon=lon, lat=lat, control="none")

    network = RoadNetwork(nodes=nodes, links=links, dangling_dropped=dangling)
    _attach_signals(network, signal_tagged)
    return network


def _attach_signals(network: RoadNetwork, signal_nodes):
    """Build 2-phase plans at tagged nodes; drop the tag when no plan fits."""
    in_links = network.in_links()
    out_links = network.out_links()
    intersections = []
    for nid in sorted(signal_nodes):
        if nid not in network.nodes:
            continue
        plan = default_two_phase(
            nid, network.nodes, in_links.get(nid, []), out_links.get(nid, [])
        )
        if plan is None:
            continue
        intersections.append(plan)
        node = network.nodes[nid]
        network.nodes[nid] = replace(node, control="signal")
    network.intersections = intersections


def _f6(v) -> str:
    return f"{float(v):.6f}"


def to_gmns(network: RoadNetwork, out_dir):
    """Write node.csv / link.csv with the exact published columns."""
    if not network.nodes or not network.links:
        raise ValueError("cannot serialize an empty network")
    try:
        os.makedirs(out_dir, exist_ok=True)
        node_path = os.path.join(out_dir, "node.csv")
        link_path = os.path.join(out_dir, "link.csv")
        with open(node_path, "w", encoding="utf-8", newline="\n") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(NODE_HEADER)
            for nid in sorted(network.nodes):
                node = network.nodes[nid]
                writer.writerow([node.node_id, _f6(node.lon), _f6(node.lat), node.control])
        with open(link_path, "w", encoding="utf-8", newline="\n") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(LINK_HEADER)
            for link in network.links:
                writer.writerow(
                    [
                        link.link_id,
                        link.from_node,
                        link.to_node,
                        _f6(link.length),
                        link.lanes,
                        _f6(link.free_speed),
                        ";".join(sorted(link.modes)),
                    ]
                )
    except OSError as exc:
        raise IoError(f"writing GMNS files failed: {exc}")
    return node_path, link_path


def read_gmns(directory) -> RoadNetwork:
    """Rebuild a network from node.csv / link.csv written by to_gmns."""
    node_path = os.path.join(directory, "node.csv")
    link_path = os.path.join(directory, "link.csv")
    nodes = {}
    signal_nodes = set()
    try:
        with open(node_path, "r", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                nid = int(row["node_id"])
                control = row.get("ctrl_type", "none") or "none"
                nodes[nid] = Node(
                    node_id=nid,
                    lon=float(row["x_coord"]),
                    lat=float(row["y_coord"]),
                    control=control,
                )
                if control == "signal":
                    signal_nodes.add(nid)
        links = []
        with open(link_path, "r", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                links.append(
                    Link(
                        link_id=int(row["link_id"]),
                        from_node=int(row["from_node_id"]),
                        to_node=int(row["to_node_id"]),
                        length=float(row["length"]),
                        lanes=int(row["lanes"]),
                        free_speed=float(row["free_speed"]),
                        modes=frozenset(m for m in row["allowed_uses"].split(";") if m),
                    )
                )
    except OSError as exc:
        raise IoError(f"reading GMNS files failed: {exc}")
    network = RoadNetwork(nodes=nodes, links=links)
    # ctrl_type survives round trips; phases are rebuilt from geometry.
    for nid in sorted(signal_nodes):
        network.nodes[nid] = replace(network.nodes[nid], control="none")
    _attach_signals(network, signal_nodes)
    return network


def filter_network(network: RoadNetwork, mode: str, out_dir):
    """Keep links that allow the mode, persist the sub-network as GMNS.

    Returns (sub_network, directory path). The directory is suffixed with
    the mode so repeated filters do not collide.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    kept = [link for link in network.links if mode in link.modes]
    if not kept:
        raise EmptyResult(f"no links allow mode {mode!r}")
    node_ids = {link.from_node for link in kept} | {link.to_node for link in kept}
    nodes = {nid: network.nodes[nid] for nid in sorted(node_ids)}
    sub = RoadNetwork(nodes=dict(nodes), links=kept)
    signal_nodes = {nid for nid, node in nodes.items() if node.control == "signal"}
    for nid in signal_nodes:
        sub.nodes[nid] = replace(sub.nodes[nid], control="none")
    _attach_signals(sub, signal_nodes)
    target = os.path.join(out_dir, f"network_{mode}")
    to_gmns(sub, target)
    return sub, target

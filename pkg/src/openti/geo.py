"""Geocoding, OSM map download and map rendering.

Each operation has a remote path (Nominatim-compatible search, OSM export
API) and an offline fixture path selected by OPENTI_OFFLINE=1 or an explicit
flag. Offline answers come from bundled fixtures and are byte-deterministic.
"""

from __future__ import annotations

import json
import math
import os
import re
import shutil
from dataclasses import dataclass

from .errors import AreaTooLarge, EmptyNetwork, NoFixture, NotFound, ServiceError

MAX_DOWNLOAD_AREA_DEG2 = 0.25
GEOCODER_URL = "https://nominatim.openstreetmap.org/search"
EXPORT_URL = "https://www.openstreetmap.org/api/0.6/map"
SVG_WIDTH = 1000.0

MODE_COLORS = (
    ("rail", "#7b2d8b"),
    ("bike", "#1f8f3a"),
    ("walk", "#e08a00"),
    ("drive", "#333333"),
)


@dataclass(frozen=True)
class BBox:
    min_lon: float
    min_lat: float
    max_lon: float
    max_lat: float

    def __post_init__(self):
        if not (-180.0 <= self.min_lon < self.max_lon <= 180.0):
            raise ValueError(f"bad longitude range [{self.min_lon}, {self.max_lon}]")
        if not (-90.0 <= self.min_lat < self.max_lat <= 90.0):
            raise ValueError(f"bad latitude range [{self.min_lat}, {self.max_lat}]")

    @property
    def area_deg2(self) -> float:
        return (self.max_lon - self.min_lon) * (self.max_lat - self.min_lat)

    def contains(self, other: "BBox", tol: float = 1e-9) -> bool:
        return (
            self.min_lon <= other.min_lon + tol
            and self.min_lat <= other.min_lat + tol
            and self.max_lon >= other.max_lon - tol
            and self.max_lat >= other.max_lat - tol
        )

    def as_list(self):
        return [self.min_lon, self.min_lat, self.max_lon, self.max_lat]

    def slug(self) -> str:
        return "_".join(repr(v) for v in self.as_list())


@dataclass(frozen=True)
class MapArtifact:
    svg_path: str
    share_link: str
    bbox: BBox


def _offline(flag):
    if flag is not None:
        return bool(flag)
    return os.environ.get("OPENTI_OFFLINE", "") == "1"


def _fixture_dir():
    return os.path.join(os.path.dirname(__file__), "fixtures")


def _load_geocode_fixtures():
    with open(os.path.join(_fixture_dir(), "geocode.json"), "r", encoding="utf-8") as fh:
        return json.load(fh)


def _normalize(name: str) -> str:
    return re.sub(r"\s+", " ", name.strip().lower())


def query_area_range(place: str, offline=None) -> BBox:
    """Resolve a place name to (min_lon, min_lat, max_lon, max_lat)."""
    if not place or not place.strip():
        raise ValueError("place must be non-empty")
    if _offline(offline):
        wanted = _normalize(place)
        entries = _load_geocode_fixtures()
        for entry in entries:
            if _normalize(entry["name"]) == wanted:
                return BBox(*entry["bbox"])
        for entry in entries:
            known = _normalize(entry["name"])
            if wanted in known or known in wanted:
                return BBox(*entry["bbox"])
        raise NotFound(f"no offline fixture for place {place!r}")

    import requests

    try:
        resp = requests.get(
            GEOCODER_URL,
            params={"q": place, "format": "json", "limit": 1},
            headers={"User-Agent": "openti/0.1"},
            timeout=20,
        )
    except requests.RequestException as exc:
        raise ServiceError(f"geocoder unreachable: {exc}")
    if resp.status_code != 200:
        raise ServiceError(f"geocoder status {resp.status_code}")
    hits = resp.json()
    if not hits:
        raise NotFound(f"geocoder has no hit for {place!r}")
    # Nominatim returns boundingbox as [min_lat, max_lat, min_lon, max_lon].
    bb = [float(v) for v in hits[0]["boundingbox"]]
    return BBox(min_lon=bb[2], min_lat=bb[0], max_lon=bb[3], max_lat=bb[1])


def _fixture_maps():
    osm_dir = os.path.join(_fixture_dir(), "osm")
    out = []
    for name in sorted(os.listdir(osm_dir)):
        if not name.endswith(".osm"):
            continue
        path = os.path.join(osm_dir, name)
        bounds = _read_bounds(path)
        if bounds is not None:
            out.append((bounds, path))
    return out


def _read_bounds(path):
    import xml.etree.ElementTree as ET

    try:
        for _, elem in ET.iterparse(path, events=("start",)):
            if elem.tag == "bounds":
                return BBox(
                    min_lon=float(elem.get("minlon")),
                    min_lat=float(elem.get("minlat")),
                    max_lon=float(elem.get("maxlon")),
                    max_lat=float(elem.get("maxlat")),
                )
            if elem.tag in ("node", "way"):
                return None
    except ET.ParseError:
        return None
    return None


def download_osm(bbox: BBox, out_dir, offline=None) -> str:
    """Fetch (or copy, offline) the OSM extract for a bounding box."""
    if bbox.area_deg2 > MAX_DOWNLOAD_AREA_DEG2:
        raise AreaTooLarge(
            f"bbox area {bbox.area_deg2:.4f} deg^2 exceeds guard of "
            f"{MAX_DOWNLOAD_AREA_DEG2} deg^2"
        )
    os.makedirs(out_dir, exist_ok=True)
    out_path = os.path.join(out_dir, f"map_{bbox.slug()}.osm")

    if _offline(offline):
        for bounds, path in _fixture_maps():
            if bounds.contains(bbox):
                shutil.copyfile(path, out_path)
                return out_path
        raise NoFixture(f"no bundled map covers {bbox.as_list()}")

    import requests

    try:
        resp = requests.get(
            EXPORT_URL,
            params={"bbox": ",".join(repr(v) for v in bbox.as_list())},
            headers={"User-Agent": "openti/0.1"},
            timeout=60,
        )
    except requests.RequestException as exc:
        raise ServiceError(f"map export unreachable: {exc}")
    if resp.status_code != 200:
        raise ServiceError(f"map export status {resp.status_code}")
    with open(out_path, "wb") as fh:
        fh.write(resp.content)
    return out_path


def share_link(bbox: BBox) -> str:
    coords = ",".join(repr(v) for v in bbox.as_list())
    return f"https://www.openstreetmap.org/?bbox={coords}"


def _mode_color(modes) -> str:
    for mode, color in MODE_COLORS:
        if mode in modes:
            return color
    return "#888888"


def show_on_map(target, out_dir, offline=None) -> MapArtifact:
    """Render a bbox or a road network to a deterministic SVG.

    Equirectangular projection at a fixed 1000 px width; links become
    polylines colored by mode, nodes dots. Returns the SVG path plus an
    openstreetmap.org share link for the same box.
    """
    from .svgutil import SvgCanvas

    if isinstance(target, BBox):
        bbox = target
        links, nodes = [], []
        stem = f"map_{bbox.slug()}"
    else:
        network = target
        if not network.nodes:
            raise EmptyNetwork("cannot render a network with no nodes")
        bbox = network.extent()
        links = network.links
        nodes = list(network.nodes.values())
        stem = f"network_{len(nodes)}n_{len(links)}l"

    dlon = max(bbox.max_lon - bbox.min_lon, 1e-9)
    dlat = max(bbox.max_lat - bbox.min_lat, 1e-9)
    width = SVG_WIDTH
    height = max(width * dlat / dlon, 10.0)
    pad = 10.0

    def project(lon, lat):
        x = pad + (lon - bbox.min_lon) / dlon * (width - 2 * pad)
        y = pad + (bbox.max_lat - lat) / dlat * (height - 2 * pad)
        return x, y

    canvas = SvgCanvas(width, height)
    if isinstance(target, BBox):
        x0, y0 = project(bbox.min_lon, bbox.max_lat)
        x1, y1 = project(bbox.max_lon, bbox.min_lat)
        canvas.rect(x0, y0, x1 - x0, y1 - y0, fill="#eef3f7", stroke="#28608f", stroke_width=2.0)
    else:
        for link in links:
            a = network.nodes[link.from_node]
            b = network.nodes[link.to_node]
            canvas.polyline(
                [project(a.lon, a.lat), project(b.lon, b.lat)],
                stroke=_mode_color(link.modes),
            )
        for node in nodes:
            x, y = project(node.lon, node.lat)
            canvas.circle(x, y, 3.0, fill="#b02020" if node.control == "signal" else "#1c3f5e")

    os.makedirs(out_dir, exist_ok=True)
    svg_path = os.path.join(out_dir, stem + ".svg")
    canvas.write(svg_path)
    return MapArtifact(svg_path=svg_path, share_link=share_link(bbox), bbox=bbox)


def haversine_m(lon1, lat1, lon2, lat2) -> float:
    """Great-circle distance in meters (R = 6371 km)."""
    r = 6371000.0
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    dphi = phi2 - phi1
    dlam = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    return 2 * r * math.asin(math.sqrt(a))

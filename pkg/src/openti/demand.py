"""Zone grids, gravity-model demand and demand visualization.

Zones are a rows x cols grid over the network extent, ids row-major from the
south-west corner. Trip tables are indexed [origin][destination][hour].
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .errors import AllZonesEmpty, IoError
from .geo import BBox, haversine_m
from .svgutil import SvgCanvas, gray


@dataclass(frozen=True)
class Zone:
    zone_id: int
    bbox: BBox
    centroid_lon: float
    centroid_lat: float
    node_count: int


@dataclass(frozen=True)
class ZoneGrid:
    bbox: BBox
    rows: int
    cols: int
    zones: tuple

    def __post_init__(self):
        if self.rows * self.cols != len(self.zones):
            raise ValueError("zones must cover the full rows x cols grid")

    def zone(self, zone_id) -> Zone:
        return self.zones[zone_id]

    @property
    def n(self):
        return len(self.zones)


@dataclass
class ODMatrix:
    zones: int
    hours: tuple
    trips: np.ndarray  # [origin][destination][hour], >= 0

    def __post_init__(self):
        self.trips = np.asarray(self.trips, dtype=float)
        if self.trips.shape != (self.zones, self.zones, len(self.hours)):
            raise ValueError(
                f"trips shape {self.trips.shape} inconsistent with "
                f"{self.zones} zones x {len(self.hours)} hours"
            )
        if (self.trips < 0).any():
            raise ValueError("trip counts must be non-negative")

    def hour_totals(self):
        return self.trips.sum(axis=(0, 1))

    def copy_with(self, trips) -> "ODMatrix":
        return ODMatrix(zones=self.zones, hours=self.hours, trips=np.array(trips))


@dataclass(frozen=True)
class ObservationSeries:
    link_id: int
    hours: tuple
    counts: tuple  # vehicles per hour, aligned with hours

    def __post_init__(self):
        if len(self.counts) != len(self.hours):
            raise ValueError("counts must align with hours")
        if any(c < 0 for c in self.counts):
            raise ValueError("counts must be non-negative")


def build_zones(network, rows: int, cols: int) -> ZoneGrid:
    """Tile the network extent into a grid; count nodes per cell.

    Cells are left/bottom-inclusive; the top and right edges fold into the
    last row/column so the cells partition the extent exactly.
    """
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    if not network.nodes:
        raise ValueError("network must be non-empty")
    bbox = network.extent()
    dlon = (bbox.max_lon - bbox.min_lon) / cols
    dlat = (bbox.max_lat - bbox.min_lat) / rows

    counts = [0] * (rows * cols)
    for node in network.nodes.values():
        col = min(int((node.lon - bbox.min_lon) / dlon), cols - 1) if dlon > 0 else 0
        row = min(int((node.lat - bbox.min_lat) / dlat), rows - 1) if dlat > 0 else 0
        counts[row * cols + max(col, 0)] += 1

    zones = []
    for row in range(rows):
        for col in range(cols):
            cell = BBox(
                min_lon=bbox.min_lon + col * dlon,
                min_lat=bbox.min_lat + row * dlat,
                max_lon=bbox.min_lon + (col + 1) * dlon,
                max_lat=bbox.min_lat + (row + 1) * dlat,
            )
            zones.append(
                Zone(
                    zone_id=row * cols + col,
                    bbox=cell,
                    centroid_lon=(cell.min_lon + cell.max_lon) / 2.0,
                    centroid_lat=(cell.min_lat + cell.max_lat) / 2.0,
                    node_count=counts[row * cols + col],
                )
            )
    return ZoneGrid(bbox=bbox, rows=rows, cols=cols, zones=tuple(zones))


def _distance_matrix(grid: ZoneGrid) -> np.ndarray:
    n = grid.n
    d = np.zeros((n, n))
    for i, zi in enumerate(grid.zones):
        for j, zj in enumerate(grid.zones):
            if i == j:
                # Intra-zonal distance: half the cell diagonal.
                diag = haversine_m(
                    zi.bbox.min_lon, zi.bbox.min_lat, zi.bbox.max_lon, zi.bbox.max_lat
                )
                d[i, j] = max(diag / 2.0, 1.0)
            else:
                d[i, j] = haversine_m(
                    zi.centroid_lon, zi.centroid_lat, zj.centroid_lon, zj.centroid_lat
                )
    return d


def generate_demand(grid: ZoneGrid, total_trips_per_hour: float, beta: float, hours) -> ODMatrix:
    """Gravity model T_ij = P_i * A_j * d_ij^(-beta), normalized per hour.

    Productions and attractions are the zone node counts; empty zones
    produce and attract nothing.
    """
    if total_trips_per_hour <= 0:
        raise ValueError("total_trips_per_hour must be > 0")
    if beta < 0:
        raise ValueError("beta must be >= 0")
    hours = tuple(int(h) for h in hours)
    if not hours or any(h < 0 or h > 23 for h in hours):
        raise ValueError("hours must be a non-empty list of 0..23")

    weights = np.array([z.node_count for z in grid.zones], dtype=float)
    if weights.sum() == 0:
        raise AllZonesEmpty("every zone has node_count 0")
    base = np.outer(weights, weights)
    if beta > 0:
        base = base * _distance_matrix(grid) ** (-beta)
    total = base.sum()
    if total <= 0:
        raise AllZonesEmpty("gravity weights vanish everywhere")
    hourly = base * (total_trips_per_hour / total)
    trips = np.repeat(hourly[:, :, None], len(hours), axis=2)
    return ODMatrix(zones=grid.n, hours=hours, trips=trips)


def write_demand_csv(od: ODMatrix, path) -> str:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["o_zone", "d_zone", "hour", "volume"])
            for h_idx, hour in enumerate(od.hours):
                for o in range(od.zones):
                    for d in range(od.zones):
                        writer.writerow([o, d, hour, f"{od.trips[o, d, h_idx]:.6f}"])
    except OSError as exc:
        raise IoError(f"writing {path} failed: {exc}")
    return str(path)


def read_demand_csv(path) -> ODMatrix:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rows.append((int(row["o_zone"]), int(row["d_zone"]), int(row["hour"]), float(row["volume"])))
    if not rows:
        raise IoError(f"{path}: no demand rows")
    n = max(max(r[0], r[1]) for r in rows) + 1
    hours = tuple(sorted({r[2] for r in rows}))
    hour_idx = {h: i for i, h in enumerate(hours)}
    trips = np.zeros((n, n, len(hours)))
    for o, d, h, v in rows:
        trips[o, d, hour_idx[h]] = v
    return ODMatrix(zones=n, hours=hours, trips=trips)


def visualize_demand(od: ODMatrix, out_dir) -> list:
    """demand.csv plus one grayscale heatmap SVG per hour (linear, 0..max)."""
    os.makedirs(out_dir, exist_ok=True)
    paths = [write_demand_csv(od, os.path.join(out_dir, "demand.csv"))]
    peak = float(od.trips.max())
    cell = 40.0
    legend_h = 26.0
    for h_idx, hour in enumerate(od.hours):
        width = max(od.zones * cell, cell)
        canvas = SvgCanvas(width + 2, od.zones * cell + legend_h)
        for o in range(od.zones):
            for d in range(od.zones):
                value = od.trips[o, d, h_idx] / peak if peak > 0 else 0.0
                canvas.rect(
                    d * cell, o * cell, cell, cell, fill=gray(value),
                    stroke="#cccccc", stroke_width=0.5,
                )
        canvas.text(2, od.zones * cell + 18, f"hour {hour}  max {peak:.2f}", size=12)
        path = os.path.join(out_dir, f"demand_heatmap_h{hour}.svg")
        canvas.write(path)
        paths.append(path)
    return paths


def write_counts_csv(observations, path) -> str:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["link_id", "hour", "count"])
        for obs in observations:
            for hour, count in zip(obs.hours, obs.counts):
                writer.writerow([obs.link_id, hour, count])
    return str(path)


def read_counts_csv(path) -> list:
    per_link = {}
    with open(path, "r", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            per_link.setdefault(int(row["link_id"]), []).append(
                (int(row["hour"]), int(float(row["count"])))
            )
    out = []
    for link_id in sorted(per_link):
        entries = sorted(per_link[link_id])
        out.append(
            ObservationSeries(
                link_id=link_id,
                hours=tuple(h for h, _ in entries),
                counts=tuple(c for _, c in entries),
            )
        )
    return out

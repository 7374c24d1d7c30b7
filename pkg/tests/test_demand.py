import os
import random

import numpy as np
import pytest

from openti import demand
from openti.errors import AllZonesEmpty
from openti.network import Link, Node, RoadNetwork


def network_with_nodes(coords):
    nodes = {
        i + 1: Node(i + 1, lon, lat) for i, (lon, lat) in enumerate(coords)
    }
    ids = sorted(nodes)
    links = []
    for idx in range(len(ids) - 1):
        links.append(
            Link(
                link_id=idx + 1,
                from_node=ids[idx],
                to_node=ids[idx + 1],
                length=100.0,
                lanes=1,
                free_speed=10.0,
                modes=frozenset({"drive"}),
            )
        )
    if not links:  # single-node networks still need one link for validity
        raise ValueError("need at least 2 nodes")
    return RoadNetwork(nodes=nodes, links=links)


class TestBuildZones:
    def test_single_cell_holds_all_nodes(self):
        network = network_with_nodes([(-111.95, 33.40), (-111.90, 33.45), (-111.92, 33.42)])
        grid = demand.build_zones(network, 1, 1)
        assert grid.n == 1
        assert grid.zones[0].node_count == 3

    def test_cell_centers_land_in_own_cells(self):
        # 2x2 over [0,2]x[0,2]; nodes at the four cell centers.
        network = network_with_nodes([(0.5, 0.5), (1.5, 0.5), (0.5, 1.5), (1.5, 1.5)])
        grid = demand.build_zones(network, 2, 2)
        assert [z.node_count for z in grid.zones] == [1, 1, 1, 1]

    def test_partition_property(self):
        rng = random.Random(9)
        for _ in range(20):
            coords = [
                (rng.uniform(-112, -111.8), rng.uniform(33.3, 33.5))
                for _ in range(rng.randint(2, 25))
            ]
            network = network_with_nodes(coords)
            rows, cols = rng.randint(1, 4), rng.randint(1, 4)
            grid = demand.build_zones(network, rows, cols)
            assert sum(z.node_count for z in grid.zones) == len(coords)

    def test_zone_ids_row_major(self):
        network = network_with_nodes([(0.0, 0.0), (2.0, 2.0)])
        grid = demand.build_zones(network, 2, 3)
        assert [z.zone_id for z in grid.zones] == list(range(6))
        assert grid.zones[0].bbox.min_lat == grid.zones[2].bbox.min_lat
        assert grid.zones[3].bbox.min_lat > grid.zones[0].bbox.min_lat


class TestGenerateDemand:
    def equal_two_zone_grid(self):
        network = network_with_nodes([(0.25, 0.5), (0.75, 0.5)])
        return demand.build_zones(network, 1, 2)

    def test_symmetric_split_beta_zero(self):
        grid = self.equal_two_zone_grid()
        od = demand.generate_demand(grid, total_trips_per_hour=100.0, beta=0.0, hours=(0,))
        assert od.trips[:, :, 0] == pytest.approx(np.full((2, 2), 25.0))

    def test_weights_two_one_hand_evaluated(self):
        # Independent hand evaluation: weights (2,1), beta=0 ->
        # T ~ [[4,2],[2,1]] which normalizes over 9 to [[40,20],[20,10]].
        network = network_with_nodes([(0.2, 0.5), (0.3, 0.5), (0.75, 0.5)])
        grid = demand.build_zones(network, 1, 2)
        assert [z.node_count for z in grid.zones] == [2, 1]
        od = demand.generate_demand(grid, total_trips_per_hour=90.0, beta=0.0, hours=(7,))
        expected = np.array([[40.0, 20.0], [20.0, 10.0]])
        assert od.trips[:, :, 0] == pytest.approx(expected)

    def test_all_zones_empty(self):
        grid = self.equal_two_zone_grid()
        empty = demand.ZoneGrid(
            bbox=grid.bbox,
            rows=grid.rows,
            cols=grid.cols,
            zones=tuple(
                demand.Zone(z.zone_id, z.bbox, z.centroid_lon, z.centroid_lat, 0)
                for z in grid.zones
            ),
        )
        with pytest.raises(AllZonesEmpty):
            demand.generate_demand(empty, 100.0, 0.0, hours=(0,))

    def test_hour_sums_match_total(self):
        rng = random.Random(3)
        for _ in range(10):
            coords = [
                (rng.uniform(0, 1), rng.uniform(0, 1)) for _ in range(rng.randint(2, 12))
            ]
            grid = demand.build_zones(network_with_nodes(coords), 2, 2)
            total = rng.uniform(1, 500)
            beta = rng.choice([0.0, 0.5, 1.0, 2.0])
            hours = tuple(range(rng.randint(1, 4)))
            od = demand.generate_demand(grid, total, beta, hours)
            for h in range(len(hours)):
                assert od.trips[:, :, h].sum() == pytest.approx(total, abs=1e-6)

    def test_empty_zones_produce_nothing(self):
        network = network_with_nodes([(0.1, 0.1), (0.2, 0.2)])
        grid = demand.build_zones(network, 2, 2)  # both nodes share one cell
        od = demand.generate_demand(grid, 50.0, 1.0, hours=(0,))
        for zone in grid.zones:
            if zone.node_count == 0:
                assert od.trips[zone.zone_id, :, 0].sum() == 0
                assert od.trips[:, zone.zone_id, 0].sum() == 0

    def test_bad_inputs(self):
        grid = self.equal_two_zone_grid()
        with pytest.raises(ValueError):
            demand.generate_demand(grid, 0.0, 0.0, hours=(0,))
        with pytest.raises(ValueError):
            demand.generate_demand(grid, 10.0, -1.0, hours=(0,))
        with pytest.raises(ValueError):
            demand.generate_demand(grid, 10.0, 0.0, hours=())


class TestVisualizeDemand:
    def od_2x2(self, values=((1.0, 2.0), (3.0, 4.0))):
        trips = np.zeros((2, 2, 1))
        trips[:, :, 0] = values
        return demand.ODMatrix(zones=2, hours=(8,), trips=trips)

    def test_csv_line_count(self, workspace):
        paths = demand.visualize_demand(self.od_2x2(), workspace)
        with open(paths[0]) as fh:
            assert len(fh.read().splitlines()) == 5  # header + 4 cells

    def test_zero_matrix_legend(self, workspace):
        paths = demand.visualize_demand(self.od_2x2(((0, 0), (0, 0))), workspace)
        with open(paths[1]) as fh:
            svg = fh.read()
        assert "max 0.00" in svg

    def test_byte_deterministic(self, workspace, tmp_path_factory):
        other = str(tmp_path_factory.mktemp("v2"))
        first = demand.visualize_demand(self.od_2x2(), workspace)
        second = demand.visualize_demand(self.od_2x2(), other)
        with open(first[1], "rb") as fh_a, open(second[1], "rb") as fh_b:
            assert fh_a.read() == fh_b.read()

    def test_demand_csv_round_trip(self, workspace):
        od = self.od_2x2()
        path = demand.write_demand_csv(od, os.path.join(workspace, "demand.csv"))
        back = demand.read_demand_csv(path)
        assert back.zones == od.zones
        assert back.hours == od.hours
        assert back.trips == pytest.approx(od.trips)


def test_counts_csv_round_trip(workspace):
    series = [
        demand.ObservationSeries(link_id=3, hours=(0, 1), counts=(12, 7)),
        demand.ObservationSeries(link_id=9, hours=(0, 1), counts=(1, 0)),
    ]
    path = demand.write_counts_csv(series, os.path.join(workspace, "counts.csv"))
    back = demand.read_counts_csv(path)
    assert back == series


def test_observation_series_validation():
    with pytest.raises(ValueError):
        demand.ObservationSeries(link_id=1, hours=(0,), counts=(1, 2))
    with pytest.raises(ValueError):
        demand.ObservationSeries(link_id=1, hours=(0,), counts=(-1,))

import math

import numpy as np
import pytest

from agents.partition_agent import FALLBACK_GRID, ROAD_NODE, PartitionAgent
from data_sources.road_reader import RoadNetwork, parse_road_geojson
from errors import GeoJSONParseError, SeedSelectionError
from geometry.geo_core import BoundingBox, PlanarPoint
from tests.helpers import EQUATOR, degrees_east, feature_collection, line_feature, planar_network


def plus_sign_bytes(arm_metres=1000.0) -> bytes:
    d = degrees_east(arm_metres)
    return feature_collection([
        line_feature([[-d, 0.0], [0.0, 0.0], [d, 0.0]]),
        line_feature([[0.0, -d], [0.0, 0.0], [0.0, d]]),
    ])


def random_network(rng, n_nodes=300, extent=50000.0, n_edges=600) -> RoadNetwork:
    points = [tuple(p) for p in rng.uniform(0.0, extent, size=(n_nodes, 2))]
    pairs = set()
    while len(pairs) < n_edges:
        u, v = rng.integers(0, n_nodes, size=2)
        if u != v:
            pairs.add((int(min(u, v)), int(max(u, v))))
    return planar_network(points, sorted(pairs))


class TestParseRoads:
    def test_plus_sign(self):
        net = parse_road_geojson(plus_sign_bytes(), EQUATOR)
        assert len(net.nodes) == 5
        assert len(net.segments) == 4
        centre = [n for n in net.nodes if n.degree == 4]
        assert len(centre) == 1
        assert centre[0].pos.x == pytest.approx(0.0, abs=1e-9)
        assert sorted(n.degree for n in net.nodes) == [1, 1, 1, 1, 4]
        assert net.total_length == pytest.approx(4000.0, rel=1e-9)

    def test_single_segment_length(self):
        data = feature_collection([line_feature([[0.0, 0.0], [0.001, 0.0]])])
        net = parse_road_geojson(data, EQUATOR)
        assert len(net.segments) == 1
        assert net.segments[0].length == pytest.approx(6371008.8 * math.pi / 180.0 * 0.001, rel=1e-9)

    def test_empty_collection(self):
        net = parse_road_geojson(feature_collection([]), EQUATOR)
        assert net.nodes == [] and net.segments == []
        assert net.bbox.is_degenerate

    def test_non_line_features_skipped_and_counted(self):
        point = {'type': 'Feature', 'properties': {}, 'geometry': {'type': 'Point', 'coordinates': [0.0, 0.0]}}
        data = feature_collection([point, line_feature([[0.0, 0.0], [0.001, 0.0]])])
        net = parse_road_geojson(data, EQUATOR)
        assert net.metadata['skipped_features'] == 1
        assert len(net.segments) == 1

    def test_repeated_segment_stored_once(self):
        data = feature_collection([line_feature([[0.0, 0.0], [0.001, 0.0]]),
                                   line_feature([[0.001, 0.0], [0.0, 0.0]])])
        net = parse_road_geojson(data, EQUATOR)
        assert len(net.segments) == 1
        assert [n.degree for n in net.nodes] == [1, 1]

    def test_near_vertices_snap_together(self):
        tiny = degrees_east(0.1)
        data = feature_collection([line_feature([[0.0, 0.0], [0.001, 0.0]]),
                                   line_feature([[0.001 + tiny, 0.0], [0.001, 0.001]])])
        net = parse_road_geojson(data, EQUATOR, snap_tol=0.5)
        assert len(net.nodes) == 3
        assert max(n.degree for n in net.nodes) == 2

    def test_malformed_json_reports_line(self):
        data = b'{"type": "FeatureCollection",\n"features": [\n}'
        with pytest.raises(GeoJSONParseError) as excinfo:
            parse_road_geojson(data, EQUATOR)
        assert excinfo.value.line is not None
        assert 'line' in str(excinfo.value)

    def test_not_a_feature_collection(self):
        with pytest.raises(GeoJSONParseError):
            parse_road_geojson(b'{"type": "Feature"}', EQUATOR)

    def test_out_of_range_position_names_feature(self):
        data = feature_collection([line_feature([[0.0, 0.0], [0.001, 0.0]]),
                                   line_feature([[0.0, 0.0], [200.0, 0.0]])])
        with pytest.raises(GeoJSONParseError) as excinfo:
            parse_road_geojson(data, EQUATOR)
        assert excinfo.value.feature_index == 1

    def test_degree_counts_distinct_neighbours(self):
        rng = np.random.default_rng(21)
        coords = [[float(x), float(y)] for x, y in rng.uniform(-0.01, 0.01, size=(40, 2))]
        features = [line_feature([coords[int(a)], coords[int(b)]]) for a, b in rng.integers(0, 40, size=(80, 2))]
        net = parse_road_geojson(feature_collection(features), EQUATOR)
        neighbours = {n.id: set() for n in net.nodes}
        for s in net.segments:
            neighbours[s.u].add(s.v)
            neighbours[s.v].add(s.u)
        for node in net.nodes:
            assert node.degree == len(neighbours[node.id])


class TestSelectSeeds:
    def test_plus_sign_gives_single_seed(self):
        net = planar_network([(-1000, 0), (0, 0), (1000, 0), (0, -1000), (0, 1000)],
                             [(0, 1), (1, 2), (3, 1), (1, 4)])
        seeds = PartitionAgent().select_seeds(net, min_degree=4, d_small=5000, d_big=20000)
        assert seeds.seeds == [PlanarPoint(0, 0)]
        assert seeds.source == [ROAD_NODE]

    def test_empty_network_gets_fallback_centre(self):
        net = RoadNetwork(nodes=[], segments=[], bbox=BoundingBox(0.0, 0.0, 20000.0, 20000.0))
        seeds = PartitionAgent().select_seeds(net, min_degree=4, d_small=5000, d_big=20000)
        assert seeds.seeds == [PlanarPoint(10000.0, 10000.0)]
        assert seeds.source == [FALLBACK_GRID]

    def test_close_candidates_lowest_id_wins(self):
        points = [(0, 0), (3, 4)] + [(dx, dy) for dx, dy in ((-1, 0), (1, 0), (0, -1), (0, 1))] \
            + [(3 + dx, 4 + dy) for dx, dy in ((-1, 0), (1, 0), (0, -1), (0, 1))]
        edges = [(0, k) for k in range(2, 6)] + [(1, k) for k in range(6, 10)]
        net = planar_network(points, edges)
        seeds = PartitionAgent().select_seeds(net, min_degree=4, d_small=10, d_big=20)
        assert seeds.seeds == [PlanarPoint(0, 0)]

    def test_higher_degree_preferred(self):
        points = [(0, 0), (3, 0), (-1, 0), (0, 1), (0, -1), (4, 0), (3, 1), (3, -1), (2, 1), (2, -1)]
        edges = [(0, 2), (0, 3), (0, 4), (1, 5), (1, 6), (1, 7), (1, 8), (1, 9)]
        net = planar_network(points, edges)
        seeds = PartitionAgent().select_seeds(net, min_degree=3, d_small=10, d_big=20)
        assert seeds.seeds[0] == PlanarPoint(3, 0)

    def test_degenerate_bbox_rejected(self):
        net = RoadNetwork(nodes=[], segments=[], bbox=BoundingBox(0.0, 0.0, 0.0, 0.0))
        with pytest.raises(SeedSelectionError, match="no seeds derivable"):
            PartitionAgent().select_seeds(net)

    def test_invalid_distances_rejected(self):
        net = RoadNetwork(nodes=[], segments=[], bbox=BoundingBox(0.0, 0.0, 100.0, 100.0))
        with pytest.raises(SeedSelectionError):
            PartitionAgent().select_seeds(net, d_small=20, d_big=10)

    def test_spacing_and_coverage_hold(self):
        rng = np.random.default_rng(17)
        for _ in range(5):
            net = random_network(rng)
            seeds = PartitionAgent().select_seeds(net, min_degree=3, d_small=3000, d_big=8000)
            pts = np.asarray(seeds.seeds)
            d = np.hypot(pts[:, None, 0] - pts[None, :, 0], pts[:, None, 1] - pts[None, :, 1])
            np.fill_diagonal(d, np.inf)
            assert d.min() >= 3000
            gx, gy = np.meshgrid(np.linspace(0, 50000, 60), np.linspace(0, 50000, 60))
            samples = np.stack([gx.ravel(), gy.ravel()], axis=1)
            nearest = np.min(np.hypot(samples[:, None, 0] - pts[None, :, 0], samples[:, None, 1] - pts[None, :, 1]), axis=1)
            # lattice centres are within d_big, so any point is within d_big plus half a cell diagonal
            assert nearest.max() <= 8000 + 8000 * math.sqrt(2) / 2

    def test_road_seeds_come_from_qualifying_nodes(self):
        net = random_network(np.random.default_rng(4))
        seeds = PartitionAgent().select_seeds(net, min_degree=5, d_small=2000, d_big=10000)
        qualifying = {(n.pos.x, n.pos.y) for n in net.nodes if n.degree >= 5}
        for p, tag in zip(seeds.seeds, seeds.source):
            if tag == ROAD_NODE:
                assert (p.x, p.y) in qualifying

    def test_deterministic(self):
        net = random_network(np.random.default_rng(9))
        agent = PartitionAgent()
        a = agent.select_seeds(net, min_degree=3, d_small=3000, d_big=8000)
        b = agent.select_seeds(net, min_degree=3, d_small=3000, d_big=8000)
        assert a.to_dict() == b.to_dict()

import json
import math
from types import SimpleNamespace

import numpy as np
import pytest

from agents.partition_agent import ADMIN, GRID, ROAD_NODE, VORONOI, Partition, PartitionAgent, Region, SeedSet
from errors import GeoJSONParseError, PartitionError, SeedSelectionError
from geometry.geo_core import BoundingBox, PlanarPoint, points_in_polygon, polygon_area
from geometry.spatial_index import brute_force_locate
from tests.helpers import EQUATOR, degrees_east, feature_collection, polygon_feature, square


def seed_set(points):
    """Bare seed container; skips the spacing checks so degenerate inputs reach the partitioner."""
    return SimpleNamespace(seeds=[PlanarPoint(*p) for p in points], source=[ROAD_NODE] * len(points))


def lonlat_square(x0_m, y0_m, size_m):
    x0, y0, s = degrees_east(x0_m), degrees_east(y0_m), degrees_east(size_m)
    return [[[x0, y0], [x0 + s, y0], [x0 + s, y0 + s], [x0, y0 + s], [x0, y0]]]


def containment_counts(partition, xs, ys):
    return sum(points_in_polygon(xs, ys, g).astype(int) for g in partition.geometries)


class TestGridPartition:
    def test_square_bbox(self, grid_4x4):
        assert len(grid_4x4) == 16
        assert grid_4x4.grid_shape == (4, 4)
        for region in grid_4x4.regions:
            assert polygon_area(region.geometry) == pytest.approx(250000.0)
            assert region.kind == GRID

    def test_row_major_ids(self, grid_4x4):
        region = grid_4x4.regions[5]
        assert region.label == "1,1"
        assert region.geometry.bbox.to_list() == [500.0, 500.0, 1000.0, 1000.0]

    def test_last_row_clipped(self):
        part = PartitionAgent().grid_partition(BoundingBox(0, 0, 1000, 900), 500, EQUATOR)
        assert len(part) == 4
        top = part.regions[2:]
        for region in top:
            assert region.geometry.bbox.height == pytest.approx(400.0)
            assert polygon_area(region.geometry) == pytest.approx(200000.0)

    def test_cell_larger_than_bbox(self):
        bbox = BoundingBox(0, 0, 500, 500)
        part = PartitionAgent().grid_partition(bbox, 1000, EQUATOR)
        assert len(part) == 1
        assert part.regions[0].geometry.bbox == bbox

    def test_region_count_is_ceil_product(self):
        rng = np.random.default_rng(2)
        agent = PartitionAgent()
        for _ in range(30):
            w, h = rng.uniform(100, 5000, 2)
            s = rng.uniform(150, 1200)
            part = agent.grid_partition(BoundingBox(0, 0, w, h), s, EQUATOR)
            assert len(part) == math.ceil(w / s) * math.ceil(h / s)
            total = sum(polygon_area(g) for g in part.geometries)
            assert total == pytest.approx(w * h, rel=1e-6)

    def test_invalid_inputs(self):
        with pytest.raises(PartitionError):
            PartitionAgent().grid_partition(BoundingBox(0, 0, 100, 100), 0)
        with pytest.raises(PartitionError):
            PartitionAgent().grid_partition(BoundingBox(0, 0, 100, 0), 10)

    def test_random_points_hit_exactly_one_cell(self):
        rng = np.random.default_rng(8)
        part = PartitionAgent().grid_partition(BoundingBox(0, 0, 3100, 2300), 700, EQUATOR)
        xs = rng.uniform(0, 3100, 10000)
        ys = rng.uniform(0, 2300, 10000)
        assert np.all(containment_counts(part, xs, ys) == 1)


class TestAdminPartition:
    def test_two_squares(self):
        data = feature_collection([polygon_feature(lonlat_square(0, 0, 1000), id='A'),
                                   polygon_feature(lonlat_square(1000, 0, 1000), id='B')])
        part = PartitionAgent().admin_partition(data, EQUATOR)
        assert [r.label for r in part.regions] == ['A', 'B']
        assert [r.id for r in part.regions] == [0, 1]
        assert part.kind == ADMIN
        assert polygon_area(part.regions[0].geometry) == pytest.approx(1e6, rel=1e-6)

    def test_multipolygon_split_largest_first(self):
        small = lonlat_square(0, 0, 100)
        large = lonlat_square(500, 0, 300)
        feature = {'type': 'Feature', 'properties': {'id': 'P'},
                   'geometry': {'type': 'MultiPolygon', 'coordinates': [small, large]}}
        part = PartitionAgent().admin_partition(feature_collection([feature]), EQUATOR)
        assert [r.label for r in part.regions] == ['P-0', 'P-1']
        assert polygon_area(part.regions[0].geometry) > polygon_area(part.regions[1].geometry)

    def test_missing_id_names_feature(self):
        data = feature_collection([polygon_feature(lonlat_square(0, 0, 1000), name='nameless')])
        with pytest.raises(GeoJSONParseError, match="feature 0") as excinfo:
            PartitionAgent().admin_partition(data, EQUATOR)
        assert excinfo.value.feature_index == 0

    def test_custom_id_property(self):
        data = feature_collection([polygon_feature(lonlat_square(0, 0, 1000), precinct=14)])
        part = PartitionAgent().admin_partition(data, EQUATOR, id_property='precinct')
        assert part.regions[0].label == '14'

    def test_short_ring_rejected(self):
        ring = [[[0.0, 0.0], [0.001, 0.0], [0.0, 0.0]]]
        with pytest.raises(GeoJSONParseError):
            PartitionAgent().admin_partition(feature_collection([polygon_feature(ring, id='X')]), EQUATOR)

    def test_hole_is_kept(self):
        outer = lonlat_square(0, 0, 1000)[0]
        inner = lonlat_square(250, 250, 500)[0][::-1]
        part = PartitionAgent().admin_partition(feature_collection([polygon_feature([outer, inner], id='H')]), EQUATOR)
        assert polygon_area(part.regions[0].geometry) == pytest.approx(750000.0, rel=1e-6)

    def test_empty_collection(self):
        with pytest.raises(PartitionError):
            PartitionAgent().admin_partition(feature_collection([]), EQUATOR)

    def test_overlapping_regions_rejected(self):
        data = feature_collection([polygon_feature(lonlat_square(0, 0, 1000), id='A'),
                                   polygon_feature([[[degrees_east(x), degrees_east(y)] for x, y in
                                                     ((500, 0), (1500, 0), (1500, 1000), (500, 1000), (500, 0))]],
                                                   id='B')])
        with pytest.raises(PartitionError, match="'A' and 'B' overlap"):
            PartitionAgent().admin_partition(data, EQUATOR)

    def test_overlap_within_tolerance_accepted(self):
        data = feature_collection([polygon_feature(lonlat_square(0, 0, 1000), id='A'),
                                   polygon_feature(lonlat_square(999, 0, 1000), id='B')])
        with pytest.raises(PartitionError):
            PartitionAgent().admin_partition(data, EQUATOR)
        part = PartitionAgent().admin_partition(data, EQUATOR, overlap_tol=2000.0)
        assert len(part) == 2

    def test_enclave_in_hole_is_not_an_overlap(self):
        outer = lonlat_square(0, 0, 1000)[0]
        hole = lonlat_square(250, 250, 500)[0]
        data = feature_collection([polygon_feature([outer, hole[::-1]], id='ring'),
                                   polygon_feature([hole], id='enclave')])
        part = PartitionAgent().admin_partition(data, EQUATOR)
        assert [r.label for r in part.regions] == ['ring', 'enclave']

    def test_self_crossing_exterior_rejected(self):
        bowtie = [[[degrees_east(x), degrees_east(y)] for x, y in
                   ((0, 0), (2000, 2000), (2000, 0), (0, 1000), (0, 0))]]
        data = feature_collection([polygon_feature(bowtie, id='X')])
        with pytest.raises(GeoJSONParseError, match="crosses itself") as excinfo:
            PartitionAgent().admin_partition(data, EQUATOR)
        assert excinfo.value.feature_index == 0


class TestVoronoiPartition:
    def test_two_seeds(self):
        bbox = BoundingBox(-10, -10, 10, 10)
        part = PartitionAgent().voronoi_partition(seed_set([(0, 0), (10, 0)]), bbox)
        areas = [polygon_area(g) for g in part.geometries]
        assert areas == [pytest.approx(300.0), pytest.approx(100.0)]
        assert part.geometries[0].bbox.max_x == pytest.approx(5.0)
        assert part.kind == VORONOI

    def test_single_seed_is_bbox(self):
        bbox = BoundingBox(0, 0, 100, 50)
        part = PartitionAgent().voronoi_partition(seed_set([(30, 20)]), bbox)
        assert len(part) == 1
        assert polygon_area(part.geometries[0]) == pytest.approx(5000.0)

    def test_quadrant_seeds_equal_areas(self):
        bbox = BoundingBox(0, 0, 100, 100)
        part = PartitionAgent().voronoi_partition(seed_set([(25, 25), (75, 25), (25, 75), (75, 75)]), bbox)
        for g in part.geometries:
            assert polygon_area(g) == pytest.approx(2500.0)

    def test_duplicate_seeds_rejected(self):
        with pytest.raises(PartitionError, match="Duplicate"):
            PartitionAgent().voronoi_partition(seed_set([(1, 1), (1, 1), (5, 5)]), BoundingBox(0, 0, 10, 10))

    def test_seed_outside_bbox_rejected(self):
        with pytest.raises(PartitionError):
            PartitionAgent().voronoi_partition(seed_set([(1, 1), (50, 5)]), BoundingBox(0, 0, 10, 10))

    def test_no_seeds_rejected(self):
        with pytest.raises(PartitionError):
            PartitionAgent().voronoi_partition(seed_set([]), BoundingBox(0, 0, 10, 10))

    def test_containing_cell_has_nearest_seed(self):
        rng = np.random.default_rng(13)
        bbox = BoundingBox(0, 0, 1000, 1000)
        seeds = rng.uniform(0, 1000, size=(30, 2))
        part = PartitionAgent().voronoi_partition(seed_set(seeds), bbox)
        xs = rng.uniform(0, 1000, 1000)
        ys = rng.uniform(0, 1000, 1000)
        d = np.hypot(xs[:, None] - seeds[None, :, 0], ys[:, None] - seeds[None, :, 1])
        ranked = np.sort(d, axis=1)
        clear = ranked[:, 1] - ranked[:, 0] > 1e-6
        located = brute_force_locate(xs, ys, part.geometries)
        np.testing.assert_array_equal(located[clear], np.argmin(d, axis=1)[clear])

    def test_tiles_bbox(self):
        rng = np.random.default_rng(14)
        bbox = BoundingBox(0, 0, 2000, 1500)
        part = PartitionAgent().voronoi_partition(seed_set(rng.uniform([0, 0], [2000, 1500], size=(50, 2))), bbox)
        assert sum(polygon_area(g) for g in part.geometries) == pytest.approx(bbox.area, rel=1e-6)
        xs = rng.uniform(0, 2000, 10000)
        ys = rng.uniform(0, 1500, 10000)
        assert np.all(containment_counts(part, xs, ys) == 1)

    def test_parallel_clipping_matches_serial(self):
        rng = np.random.default_rng(15)
        seeds = seed_set(rng.uniform(0, 1000, size=(40, 2)))
        bbox = BoundingBox(0, 0, 1000, 1000)
        serial = PartitionAgent(workers=1).voronoi_partition(seeds, bbox)
        parallel = PartitionAgent(workers=4).voronoi_partition(seeds, bbox)
        assert json.dumps(serial.to_dict()) == json.dumps(parallel.to_dict())

    def test_accepts_validated_seed_set(self):
        bbox = BoundingBox(-10, -10, 10, 10)
        seeds = SeedSet(seeds=[PlanarPoint(0, 0), PlanarPoint(10, 0)], source=[ROAD_NODE] * 2,
                        d_small=1.0, d_big=100.0, bbox=bbox)
        assert len(PartitionAgent().voronoi_partition(seeds, bbox)) == 2

    def test_seed_set_rejects_close_seeds(self):
        with pytest.raises(SeedSelectionError):
            SeedSet(seeds=[PlanarPoint(0, 0), PlanarPoint(0.5, 0)], source=[ROAD_NODE] * 2,
                    d_small=1.0, d_big=100.0, bbox=BoundingBox(-10, -10, 10, 10))


class TestPartitionDocument:
    def test_serialization_is_deterministic(self):
        bbox = BoundingBox(0, 0, 1000, 1000)
        points = np.random.default_rng(1).uniform(0, 1000, size=(12, 2))
        a = PartitionAgent().voronoi_partition(seed_set(points), bbox)
        b = PartitionAgent().voronoi_partition(seed_set(points), bbox)
        assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())

    def test_round_trip(self, grid_4x4):
        doc = json.dumps(grid_4x4.to_dict())
        restored = Partition.from_dict(json.loads(doc))
        assert json.dumps(restored.to_dict()) == doc
        assert restored.grid_shape == (4, 4)

    def test_malformed_document(self):
        with pytest.raises(PartitionError):
            Partition.from_dict({'kind': 'grid'})

    def test_gap_in_grid_rejected(self):
        regions = [Region(id=0, geometry=square(0, 0), kind=GRID)]
        with pytest.raises(PartitionError, match="tile"):
            Partition(regions=regions, proj=EQUATOR, bbox=BoundingBox(0, 0, 2, 1), kind=GRID)

    def test_ids_must_be_dense(self):
        regions = [Region(id=1, geometry=square(0, 0), kind=ADMIN)]
        with pytest.raises(PartitionError):
            Partition(regions=regions, proj=EQUATOR, bbox=BoundingBox(0, 0, 1, 1), kind=ADMIN)

    def test_unknown_kind(self):
        with pytest.raises(PartitionError):
            Partition(regions=[], proj=EQUATOR, bbox=BoundingBox(0, 0, 1, 1), kind='hexagon')

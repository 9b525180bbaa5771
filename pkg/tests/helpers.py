"""Builders shared by the test modules."""
import json
import math

import numpy as np

from data_sources.road_reader import RoadNetwork, RoadNode, RoadSegment
from geometry.geo_core import BoundingBox, PlanarPoint, Polygon, Projection

EQUATOR = Projection(0.0, 0.0)


def square(x0, y0, size=1.0):
    return Polygon(((x0, y0), (x0 + size, y0), (x0 + size, y0 + size), (x0, y0 + size)))


def feature_collection(features) -> bytes:
    return json.dumps({'type': 'FeatureCollection', 'features': features}).encode('utf-8')


def line_feature(coords, **properties):
    return {'type': 'Feature', 'properties': properties,
            'geometry': {'type': 'LineString', 'coordinates': coords}}


def polygon_feature(rings, **properties):
    return {'type': 'Feature', 'properties': properties,
            'geometry': {'type': 'Polygon', 'coordinates': rings}}


def degrees_east(metres: float) -> float:
    """Longitude offset for `metres` east of (0, 0) under the equator projection."""
    return metres / (EQUATOR.earth_radius * math.pi / 180.0)


def convex_polygon(rng: np.random.Generator, n_vertices: int = 7, radius: float = 100.0) -> Polygon:
    angles = np.sort(rng.uniform(0.0, 2.0 * math.pi, size=n_vertices))
    cx, cy = rng.uniform(-50.0, 50.0, size=2)
    return Polygon(tuple((cx + radius * math.cos(a), cy + radius * math.sin(a)) for a in angles))


def planar_network(points, edges):
    """Road network straight from planar coordinates; degrees follow the edge list."""
    degree = [0] * len(points)
    for u, v in edges:
        degree[u] += 1
        degree[v] += 1
    nodes = [RoadNode(id=i, pos=PlanarPoint(*p), degree=degree[i]) for i, p in enumerate(points)]
    segments = [RoadSegment(u, v, math.dist(points[u], points[v])) for u, v in edges]
    xs, ys = zip(*points)
    return RoadNetwork(nodes=nodes, segments=segments, bbox=BoundingBox.from_points(xs, ys))

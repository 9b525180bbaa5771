"""Road network ingestion from a GeoJSON FeatureCollection of line features."""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import networkx as nx
import numpy as np

from data_sources.geojson_io import feature_geometry, load_feature_collection, lonlat_pairs
from errors import GeoJSONParseError
from geometry.geo_core import BoundingBox, PlanarPoint, Projection

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RoadNode:
    id: int
    pos: PlanarPoint
    degree: int


@dataclass(frozen=True)
class RoadSegment:
    u: int
    v: int
    length: float


@dataclass
class RoadNetwork:
    nodes: List[RoadNode]
    segments: List[RoadSegment]
    bbox: BoundingBox
    metadata: Dict[str, int] = field(default_factory=dict)

    def node_arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        xs = np.fromiter((n.pos.x for n in self.nodes), dtype=float, count=len(self.nodes))
        ys = np.fromiter((n.pos.y for n in self.nodes), dtype=float, count=len(self.nodes))
        return xs, ys

    @property
    def total_length(self) -> float:
        return float(sum(s.length for s in self.segments))

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        for n in self.nodes:
            g.add_node(n.id, x=n.pos.x, y=n.pos.y)
        for s in self.segments:
            g.add_edge(s.u, s.v, length=s.length)
        return g


class _VertexSnapper:
    """Merges vertices closer than tol; the earliest vertex keeps its position."""

    def __init__(self, tol: float):
        self.tol = tol
        self.positions: List[Tuple[float, float]] = []
        self._buckets: Dict[Tuple[int, int], List[int]] = {}

    def _key(self, x: float, y: float) -> Tuple[int, int]:
        if self.tol <= 0:
            return (x, y)
        return (int(math.floor(x / self.tol)), int(math.floor(y / self.tol)))

    def node_for(self, x: float, y: float) -> int:
        kx, ky = self._key(x, y)
        if self.tol <= 0:
            hits = self._buckets.get((kx, ky))
            if hits:
                return hits[0]
        else:
            best = None
            for dx in (-1, 0, 1):
                for dy in (-1, 0, 1):
                    for nid in self._buckets.get((kx + dx, ky + dy), ()):
                        px, py = self.positions[nid]
                        if math.hypot(px - x, py - y) <= self.tol and (best is None or nid < best):
                            best = nid
            if best is not None:
                return best
        nid = len(self.positions)
        self.positions.append((x, y))
        self._buckets.setdefault((kx, ky), []).append(nid)
        return nid


def parse_road_geojson(data: bytes, proj: Projection, snap_tol: float = 0.5) -> RoadNetwork:
    """
    Build a planar road graph from LineString/MultiLineString features.

    Every vertex is a node candidate; candidates within snap_tol merge. Other
    geometry types are skipped and counted in metadata['skipped_features'].
    """
    features = load_feature_collection(data, "road network")
    snapper = _VertexSnapper(snap_tol)
    edge_order: List[Tuple[int, int]] = []
    seen = set()
    skipped = 0

    for index, feature in enumerate(features):
        geometry = feature_geometry(feature, index, "road network")
        gtype = geometry['type']
        if gtype == 'LineString':
            lines = [geometry['coordinates']]
        elif gtype == 'MultiLineString':
            lines = geometry['coordinates']
            if not isinstance(lines, (list, tuple)):
                raise GeoJSONParseError("MultiLineString coordinates must be a list", feature_index=index)
        else:
            skipped += 1
            continue
        for line in lines:
            pairs = lonlat_pairs(line, index, "road network")
            if not pairs:
                continue
            lons, lats = zip(*pairs)
            xs, ys = proj.project_arrays(lons, lats)
            ids = [snapper.node_for(float(x), float(y)) for x, y in zip(xs, ys)]
            for u, v in zip(ids, ids[1:]):
                if u == v:
                    continue
                key = (min(u, v), max(u, v))
                if key in seen:
                    continue
                seen.add(key)
                edge_order.append((u, v))

    graph = nx.Graph()
    graph.add_edges_from(edge_order)
    # candidates that never ended up on a segment are not road nodes
    used = sorted(graph.nodes())
    dense = {old: new for new, old in enumerate(used)}
    nodes = [
        RoadNode(id=dense[old], pos=PlanarPoint(*snapper.positions[old]), degree=int(graph.degree(old)))
        for old in used
    ]
    segments = []
    for u, v in edge_order:
        pu = nodes[dense[u]].pos
        pv = nodes[dense[v]].pos
        segments.append(RoadSegment(u=dense[u], v=dense[v], length=math.hypot(pv.x - pu.x, pv.y - pu.y)))

    if nodes:
        xs = [n.pos.x for n in nodes]
        ys = [n.pos.y for n in nodes]
        bbox = BoundingBox.from_points(xs, ys)
    else:
        bbox = BoundingBox(0.0, 0.0, 0.0, 0.0)

    if skipped:
        logger.warning(f"⚠️ Skipped {skipped} non-line road features")
    logger.info(f"✅ Road network: {len(nodes)} nodes, {len(segments)} segments")
    return RoadNetwork(nodes=nodes, segments=segments, bbox=bbox, metadata={'skipped_features': skipped})

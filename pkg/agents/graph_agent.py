import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import networkx as nx
import numpy as np

from agents.mapping_agent import UrbanFeatures
from agents.partition_agent import GRID, VORONOI, Partition, region_from_dict, region_to_dict
from config.settings import settings
from data_sources.road_reader import RoadNetwork
from errors import GraphError
from geometry.geo_core import BoundingBox, Projection, polygon_area, shared_boundary_length
from geometry.spatial_index import NO_REGION, BucketIndex, default_bucket_size

logger = logging.getLogger(__name__)

QUEEN_DIAGONAL_FACTOR = 0.1


@dataclass(frozen=True)
class GraphEdge:
    u: int
    v: int
    weight: float

    def __post_init__(self):
        if not self.u < self.v:
            raise GraphError(f"Edge endpoints must satisfy u < v, got ({self.u}, {self.v})")
        if not self.weight > 0:
            raise GraphError(f"Edge ({self.u}, {self.v}) has non-positive weight {self.weight}")


@dataclass
class RegionGraph:
    partition: Partition
    edges: List[GraphEdge]
    static_features: Optional[UrbanFeatures] = None

    @property
    def n_nodes(self) -> int:
        return len(self.partition)

    def adjacency_matrix(self, binary: bool = True) -> np.ndarray:
        n = self.n_nodes
        a = np.zeros((n, n), dtype=float)
        for e in self.edges:
            w = 1.0 if binary else e.weight
            a[e.u, e.v] = w
            a[e.v, e.u] = w
        return a

    def to_dict(self) -> Dict[str, Any]:
        feats = self.static_features
        return {
            'regions': [region_to_dict(r) for r in self.partition.regions],
            'edges': [[e.u, e.v, e.weight] for e in self.edges],
            'feature_categories': list(feats.categories) if feats else [],
            'features': feats.matrix.tolist() if feats else [],
            'meta': {
                'kind': self.partition.kind,
                'proj': self.partition.proj.to_dict(),
                'bbox': self.partition.bbox.to_list(),
                'grid_shape': list(self.partition.grid_shape) if self.partition.grid_shape else None,
                'cell_size': self.partition.cell_size,
                'features_normalized': bool(feats.normalized) if feats else False,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(',', ':'))

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RegionGraph':
        try:
            meta = data['meta']
            partition = Partition(
                regions=[region_from_dict(r) for r in data['regions']],
                proj=Projection(meta['proj']['origin_lon'], meta['proj']['origin_lat']),
                bbox=BoundingBox(*meta['bbox']),
                kind=meta['kind'],
                grid_shape=tuple(meta['grid_shape']) if meta.get('grid_shape') else None,
                cell_size=meta.get('cell_size'),
            )
            edges = [GraphEdge(int(u), int(v), float(w)) for u, v, w in data['edges']]
            features = None
            if data.get('feature_categories'):
                features = UrbanFeatures(
                    categories=list(data['feature_categories']),
                    matrix=np.asarray(data['features'], dtype=float),
                    normalized=bool(meta.get('features_normalized', False)),
                )
        except (KeyError, TypeError, ValueError) as e:
            raise GraphError(f"Malformed graph document: {e}")
        return GraphAgent().assemble_graph(partition, edges, features)

    @classmethod
    def from_json(cls, text: str) -> 'RegionGraph':
        return cls.from_dict(json.loads(text))

    def to_networkx(self, totals: Optional[np.ndarray] = None) -> nx.Graph:
        g = nx.Graph()
        for r in self.partition.regions:
            attrs = {'label': r.label or '', 'kind': r.kind, 'area': polygon_area(r.geometry)}
            if totals is not None:
                attrs['total_count'] = int(totals[r.id])
            g.add_node(r.id, **attrs)
        for e in self.edges:
            g.add_edge(e.u, e.v, weight=e.weight)
        return g


class GraphAgent:
    """Agent responsible for region adjacency and edge weights"""

    def __init__(self, shared_tol: float = settings.SHARED_BOUNDARY_TOL, workers: int = 1):
        self.shared_tol = shared_tol
        self.workers = max(1, int(workers))
        logger.info("GraphAgent initialized")

    def build_adjacency(self, part: Partition, tol: Optional[float] = None, queen: bool = False) -> List[GraphEdge]:
        """
        Weighted region adjacency.

        Grid partitions use rook neighbours from (row, col) arithmetic, weighted
        by the shared side length; queen adds diagonals at 0.1 * cell_size.
        Other kinds connect regions sharing positive boundary length.
        """
        tol = self.shared_tol if tol is None else tol
        if part.kind == GRID and part.grid_shape is not None:
            edges = self._grid_adjacency(part, queen)
        else:
            edges = self._boundary_adjacency(part, tol)
        edges.sort(key=lambda e: (e.u, e.v))
        logger.info(f"✅ Adjacency ({part.kind}): {len(edges)} edges over {len(part)} regions")
        return edges

    def _grid_adjacency(self, part: Partition, queen: bool) -> List[GraphEdge]:
        rows, cols = part.grid_shape
        widths = [part.regions[c].geometry.bbox.width for c in range(cols)]
        heights = [part.regions[r * cols].geometry.bbox.height for r in range(rows)]
        edges: List[GraphEdge] = []
        for r in range(rows):
            for c in range(cols):
                rid = r * cols + c
                if c + 1 < cols:
                    edges.append(GraphEdge(rid, rid + 1, heights[r]))
                if r + 1 < rows:
                    edges.append(GraphEdge(rid, rid + cols, widths[c]))
                if queen and r + 1 < rows:
                    diagonal = QUEEN_DIAGONAL_FACTOR * float(part.cell_size)
                    if c + 1 < cols:
                        edges.append(GraphEdge(rid, rid + cols + 1, diagonal))
                    if c - 1 >= 0:
                        edges.append(GraphEdge(rid, rid + cols - 1, diagonal))
        return edges

    def _candidate_pairs(self, part: Partition, tol: float) -> List[Tuple[int, int]]:
        boxes = np.asarray([g.bbox.to_list() for g in part.geometries], dtype=float)
        if len(boxes) < 2:
            return []
        pairs: List[Tuple[int, int]] = []
        for i in range(len(boxes) - 1):
            rest = boxes[i + 1:]
            hit = ~((boxes[i, 2] + tol < rest[:, 0]) | (rest[:, 2] + tol < boxes[i, 0])
                    | (boxes[i, 3] + tol < rest[:, 1]) | (rest[:, 3] + tol < boxes[i, 1]))
            pairs.extend((i, i + 1 + int(j)) for j in np.nonzero(hit)[0])
        return pairs

    def _boundary_adjacency(self, part: Partition, tol: float) -> List[GraphEdge]:
        pairs = self._candidate_pairs(part, tol)
        geoms = part.geometries

        def weigh(pair):
            return shared_boundary_length(geoms[pair[0]], geoms[pair[1]], tol)

        if self.workers > 1 and len(pairs) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                lengths = list(pool.map(weigh, pairs))
        else:
            lengths = [weigh(p) for p in pairs]
        logger.debug(f"Boundary adjacency: {len(pairs)} candidate pairs after bbox pruning")
        return [GraphEdge(u, v, w) for (u, v), w in zip(pairs, lengths) if w > 0]

    def build_road_weights(self, part: Partition, net: RoadNetwork,
                           index: Optional[BucketIndex] = None) -> List[GraphEdge]:
        """Sum the length of road segments whose endpoints fall in two different regions."""
        if part.kind != VORONOI:
            raise GraphError(f"Road-length weights are defined only for voronoi partitions, not '{part.kind}'")
        if index is None:
            index = BucketIndex(part.geometries, default_bucket_size(part.geometries))
        xs, ys = net.node_arrays()
        node_region = index.locate(xs, ys)
        totals: Dict[Tuple[int, int], float] = {}
        for seg in net.segments:
            ru = int(node_region[seg.u])
            rv = int(node_region[seg.v])
            if ru == NO_REGION or rv == NO_REGION or ru == rv:
                continue
            key = (min(ru, rv), max(ru, rv))
            totals[key] = totals.get(key, 0.0) + seg.length
        edges = [GraphEdge(u, v, w) for (u, v), w in sorted(totals.items()) if w > 0]
        logger.info(f"✅ Road-length weights: {len(edges)} edges, {sum(e.weight for e in edges):.1f} m of crossing roads")
        return edges

    def assemble_graph(self, part: Partition, edges: List[GraphEdge],
                       features: Optional[UrbanFeatures] = None) -> RegionGraph:
        n = len(part)
        seen = set()
        for e in edges:
            if e.v >= n or e.u < 0:
                raise GraphError(f"Edge ({e.u}, {e.v}) references a region outside 0..{n - 1}")
            if (e.u, e.v) in seen:
                raise GraphError(f"Duplicate edge ({e.u}, {e.v})")
            seen.add((e.u, e.v))
        if features is not None and features.n_regions != n:
            raise GraphError(f"Feature matrix has {features.n_regions} rows for {n} regions")
        isolated = n - len({x for e in edges for x in (e.u, e.v)})
        if isolated:
            logger.debug(f"{isolated} regions have no edges")
        return RegionGraph(partition=part, edges=sorted(edges, key=lambda e: (e.u, e.v)), static_features=features)

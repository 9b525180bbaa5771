import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from config.settings import settings
from data_sources.admin_reader import read_admin_polygons
from data_sources.road_reader import RoadNetwork
from errors import GeometryError, PartitionError, SeedSelectionError
from geometry.geo_core import (BoundingBox, PlanarPoint, Polygon, Projection, clip_ring, intersection_area,
                               polygon_area)

logger = logging.getLogger(__name__)

GRID = 'grid'
ADMIN = 'admin'
VORONOI = 'voronoi'
ROAD_NODE = 'road-node'
FALLBACK_GRID = 'fallback-grid'

_TILING_RTOL = 1e-6
_DUPLICATE_SEED_DIST = 1e-9


class _PointHash:
    """Square-bucket hash answering 'is any stored point within r' for r <= cell."""

    def __init__(self, cell: float):
        self.cell = cell
        self.buckets: Dict[Tuple[int, int], List[Tuple[float, float]]] = {}

    def _key(self, x: float, y: float) -> Tuple[int, int]:
        return int(math.floor(x / self.cell)), int(math.floor(y / self.cell))

    def add(self, x: float, y: float) -> None:
        self.buckets.setdefault(self._key(x, y), []).append((x, y))

    def nearest_within(self, x: float, y: float, r: float) -> Optional[float]:
        kx, ky = self._key(x, y)
        best = None
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for px, py in self.buckets.get((kx + dx, ky + dy), ()):
                    d = math.hypot(px - x, py - y)
                    if d <= r and (best is None or d < best):
                        best = d
        return best


def _lattice_cells(bbox: BoundingBox, pitch: float):
    """Row-major lattice cells of the given pitch, the last row/column clipped to bbox."""
    cols = max(1, math.ceil(bbox.width / pitch - 1e-9))
    rows = max(1, math.ceil(bbox.height / pitch - 1e-9))
    for r in range(rows):
        y0 = bbox.min_y + r * pitch
        y1 = bbox.max_y if r == rows - 1 else bbox.min_y + (r + 1) * pitch
        for c in range(cols):
            x0 = bbox.min_x + c * pitch
            x1 = bbox.max_x if c == cols - 1 else bbox.min_x + (c + 1) * pitch
            yield r, c, BoundingBox(x0, y0, x1, y1)


@dataclass
class SeedSet:
    """Voronoi seeds; spacing and lattice coverage are verified on construction."""
    seeds: List[PlanarPoint]
    source: List[str]
    d_small: float
    d_big: float
    bbox: BoundingBox

    def __post_init__(self):
        if len(self.seeds) != len(self.source):
            raise SeedSelectionError("seeds and source tags differ in length")
        spacing = _PointHash(self.d_small)
        for x, y in self.seeds:
            d = spacing.nearest_within(x, y, self.d_small)
            if d is not None and d < self.d_small:
                raise SeedSelectionError(f"Seeds closer than d_small={self.d_small}: ({x:.3f}, {y:.3f})")
            spacing.add(x, y)
        coverage = _PointHash(self.d_big)
        for x, y in self.seeds:
            coverage.add(x, y)
        for _, _, cell in _lattice_cells(self.bbox, self.d_big):
            cx = (cell.min_x + cell.max_x) / 2.0
            cy = (cell.min_y + cell.max_y) / 2.0
            if coverage.nearest_within(cx, cy, self.d_big) is None:
                raise SeedSelectionError(f"Lattice centre ({cx:.1f}, {cy:.1f}) is farther than d_big from every seed")

    def __len__(self) -> int:
        return len(self.seeds)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'seeds': [[p.x, p.y] for p in self.seeds],
            'source': list(self.source),
            'd_small': self.d_small,
            'd_big': self.d_big,
            'bbox': self.bbox.to_list(),
        }


@dataclass(frozen=True)
class Region:
    id: int
    geometry: Polygon
    kind: str
    label: Optional[str] = None

    def __post_init__(self):
        if polygon_area(self.geometry) <= 0.0:
            raise PartitionError(f"Region {self.id} has zero area")


@dataclass
class Partition:
    regions: List[Region]
    proj: Projection
    bbox: BoundingBox
    kind: str
    grid_shape: Optional[Tuple[int, int]] = None
    cell_size: Optional[float] = None
    _geometries: List[Polygon] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in (GRID, ADMIN, VORONOI):
            raise PartitionError(f"Unknown partition kind '{self.kind}'")
        for expected, region in enumerate(self.regions):
            if region.id != expected:
                raise PartitionError(f"Region ids must be dense from 0; found {region.id} at position {expected}")
        self._geometries = [r.geometry for r in self.regions]
        if self.kind in (GRID, VORONOI) and self.regions:
            total = sum(polygon_area(g) for g in self._geometries)
            if abs(total - self.bbox.area) > _TILING_RTOL * self.bbox.area:
                raise PartitionError(f"{self.kind} regions do not tile the bbox: {total} vs {self.bbox.area}")

    def __len__(self) -> int:
        return len(self.regions)

    @property
    def geometries(self) -> List[Polygon]:
        return self._geometries

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind,
            'proj': self.proj.to_dict(),
            'bbox': self.bbox.to_list(),
            'grid_shape': list(self.grid_shape) if self.grid_shape else None,
            'cell_size': self.cell_size,
            'regions': [region_to_dict(r) for r in self.regions],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Partition':
        try:
            proj = Projection(data['proj']['origin_lon'], data['proj']['origin_lat'])
            regions = [region_from_dict(r) for r in data['regions']]
            return cls(
                regions=regions,
                proj=proj,
                bbox=BoundingBox(*data['bbox']),
                kind=data['kind'],
                grid_shape=tuple(data['grid_shape']) if data.get('grid_shape') else None,
                cell_size=data.get('cell_size'),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise PartitionError(f"Malformed partition document: {e}")


def region_to_dict(region: Region) -> Dict[str, Any]:
    return {
        'id': region.id,
        'kind': region.kind,
        'label': region.label,
        'ring': [[x, y] for x, y in region.geometry.exterior],
        'holes': [[[x, y] for x, y in h] for h in region.geometry.holes],
    }


def region_from_dict(data: Dict[str, Any]) -> Region:
    geometry = Polygon(
        tuple((float(x), float(y)) for x, y in data['ring']),
        tuple(tuple((float(x), float(y)) for x, y in h) for h in data.get('holes', [])),
    )
    return Region(id=int(data['id']), geometry=geometry, kind=data['kind'], label=data.get('label'))


class PartitionAgent:
    """Agent responsible for turning a city extent into regions"""

    def __init__(self, workers: int = settings.ASSIGN_WORKERS):
        self.workers = max(1, int(workers))
        self.partition: Optional[Partition] = None
        logger.info("PartitionAgent initialized")

    def select_seeds(self, net: RoadNetwork, min_degree: int = 4, d_small: float = 5000.0,
                     d_big: float = 20000.0) -> SeedSet:
        """
        Degree-ranked greedy seeds with a coverage lattice.

        Road nodes with degree >= min_degree are taken by (degree desc, id asc)
        when at least d_small from every accepted seed; then each d_big lattice
        cell whose centre is farther than d_big from all seeds gets its centre
        as a fallback seed.
        """
        if not net.nodes and net.bbox.is_degenerate:
            raise SeedSelectionError("no seeds derivable: empty road network and degenerate bbox")
        if net.bbox.is_degenerate:
            raise SeedSelectionError(f"no seeds derivable: degenerate road network bbox {net.bbox.to_list()}")
        if min_degree < 1:
            raise SeedSelectionError("min_degree must be >= 1")
        if not 0 < d_small < d_big:
            raise SeedSelectionError("seed selection requires 0 < d_small < d_big")

        candidates = sorted((n for n in net.nodes if n.degree >= min_degree), key=lambda n: (-n.degree, n.id))
        spacing = _PointHash(d_small)
        coverage = _PointHash(d_big)
        seeds: List[PlanarPoint] = []
        source: List[str] = []
        for node in candidates:
            x, y = node.pos
            d = spacing.nearest_within(x, y, d_small)
            if d is not None and d < d_small:
                continue
            seeds.append(PlanarPoint(x, y))
            source.append(ROAD_NODE)
            spacing.add(x, y)
            coverage.add(x, y)
        n_road = len(seeds)

        for _, _, cell in _lattice_cells(net.bbox, d_big):
            cx = (cell.min_x + cell.max_x) / 2.0
            cy = (cell.min_y + cell.max_y) / 2.0
            if coverage.nearest_within(cx, cy, d_big) is None:
                seeds.append(PlanarPoint(cx, cy))
                source.append(FALLBACK_GRID)
                spacing.add(cx, cy)
                coverage.add(cx, cy)

        logger.info(f"🎯 Selected {n_road} road-node seeds from {len(candidates)} candidates "
                    f"(degree >= {min_degree}) plus {len(seeds) - n_road} fallback seeds")
        return SeedSet(seeds=seeds, source=source, d_small=d_small, d_big=d_big, bbox=net.bbox)

    def grid_partition(self, bbox: BoundingBox, cell_size: float, proj: Optional[Projection] = None) -> Partition:
        """Row-major square cells from (min_x, min_y); the last row/column is clipped to bbox."""
        if cell_size <= 0:
            raise PartitionError("cell_size must be positive")
        if bbox.is_degenerate:
            raise PartitionError(f"Cannot grid a degenerate bbox {bbox.to_list()}")
        regions: List[Region] = []
        rows = cols = 0
        for r, c, cell in _lattice_cells(bbox, cell_size):
            rows, cols = max(rows, r + 1), max(cols, c + 1)
            regions.append(Region(id=len(regions), geometry=Polygon.from_bbox(cell), kind=GRID, label=f"{r},{c}"))
        partition = Partition(regions=regions, proj=proj or Projection(0.0, 0.0), bbox=bbox, kind=GRID,
                              grid_shape=(rows, cols), cell_size=float(cell_size))
        logger.info(f"✅ Grid partition: {rows}x{cols} = {len(regions)} cells of {cell_size:g} m")
        self.partition = partition
        return partition

    def admin_partition(self, data: bytes, proj: Projection, id_property: str = 'id',
                        overlap_tol: float = settings.ADMIN_OVERLAP_TOL) -> Partition:
        polygons = read_admin_polygons(data, proj, id_property)
        if not polygons:
            raise PartitionError("Admin boundary file contains no features")
        regions = [Region(id=i, geometry=poly, kind=ADMIN, label=label) for i, (label, poly) in enumerate(polygons)]
        self._check_admin_overlaps(regions, overlap_tol)
        xs = [g.bbox.min_x for _, g in polygons] + [g.bbox.max_x for _, g in polygons]
        ys = [g.bbox.min_y for _, g in polygons] + [g.bbox.max_y for _, g in polygons]
        partition = Partition(regions=regions, proj=proj, bbox=BoundingBox.from_points(xs, ys), kind=ADMIN)
        logger.info(f"✅ Admin partition: {len(regions)} regions keyed by '{id_property}'")
        self.partition = partition
        return partition

    def voronoi_partition(self, seeds: SeedSet, bbox: BoundingBox, proj: Optional[Projection] = None) -> Partition:
        """
        Cell i is bbox clipped by the bisector against every other seed.

        Other seeds are visited nearest first and the loop stops once a seed
        is more than twice the cell's radius away, since its bisector can no
        longer cut the cell.
        """
        if len(seeds.seeds) == 0:
            raise PartitionError("Voronoi partition needs at least one seed")
        pts = np.asarray([[p[0], p[1]] for p in seeds.seeds], dtype=float)
        outside = ~((pts[:, 0] >= bbox.min_x) & (pts[:, 0] <= bbox.max_x)
                    & (pts[:, 1] >= bbox.min_y) & (pts[:, 1] <= bbox.max_y))
        if outside.any():
            raise PartitionError(f"{int(outside.sum())} seeds lie outside the bbox")
        self._check_duplicate_seeds(pts)

        box_ring = Polygon.from_bbox(bbox).exterior

        def cell(i: int) -> Polygon:
            d = np.hypot(pts[:, 0] - pts[i, 0], pts[:, 1] - pts[i, 1])
            ring = box_ring
            si = (pts[i, 0], pts[i, 1])
            radius = max(math.hypot(x - si[0], y - si[1]) for x, y in ring)
            for j in np.argsort(d, kind='stable'):
                if j == i:
                    continue
                if d[j] > 2.0 * radius:
                    break
                clipped = clip_ring(ring, si, (pts[j, 0], pts[j, 1]))
                if clipped is None:
                    raise PartitionError(f"Voronoi cell {i} vanished while clipping against seed {j}")
                if clipped is not ring:
                    ring = clipped
                    radius = max(math.hypot(x - si[0], y - si[1]) for x, y in ring)
            return Polygon(tuple(ring))

        if self.workers > 1 and len(pts) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                cells = list(pool.map(cell, range(len(pts))))
        else:
            cells = [cell(i) for i in range(len(pts))]

        regions = [Region(id=i, geometry=g, kind=VORONOI, label=str(i)) for i, g in enumerate(cells)]
        partition = Partition(regions=regions, proj=proj or Projection(0.0, 0.0), bbox=bbox, kind=VORONOI)
        logger.info(f"✅ Voronoi partition: {len(regions)} cells "
                    f"({seeds.source.count(FALLBACK_GRID)} from fallback seeds)")
        self.partition = partition
        return partition

    @staticmethod
    def _check_admin_overlaps(regions: List[Region], tol: float) -> None:
        """Admin regions may leave gaps but must not overlap by more than tol square metres."""
        boxes = np.asarray([r.geometry.bbox.to_list() for r in regions], dtype=float)
        for i in range(len(regions)):
            # strict bbox overlap; touching boxes share no area
            hits = np.nonzero((boxes[i + 1:, 0] < boxes[i, 2]) & (boxes[i + 1:, 2] > boxes[i, 0])
                              & (boxes[i + 1:, 1] < boxes[i, 3]) & (boxes[i + 1:, 3] > boxes[i, 1]))[0]
            for j in (hits + i + 1).tolist():
                a, b = regions[i], regions[j]
                try:
                    shared = intersection_area(a.geometry, b.geometry)
                except GeometryError as e:
                    raise PartitionError(f"Cannot compare admin regions '{a.label}' and '{b.label}': {e}")
                if shared > tol:
                    raise PartitionError(f"Admin regions '{a.label}' and '{b.label}' overlap by {shared:.2f} m²")
            logger.debug(f"Admin region '{regions[i].label}' checked against {len(hits)} neighbour(s)")

    @staticmethod
    def _check_duplicate_seeds(pts: np.ndarray) -> None:
        seen = _PointHash(1.0)
        for x, y in pts:
            if seen.nearest_within(float(x), float(y), _DUPLICATE_SEED_DIST) is not None:
                raise PartitionError(f"Duplicate Voronoi seeds at ({x:.3f}, {y:.3f}) (distance < 1e-9)")
            seen.add(float(x), float(y))

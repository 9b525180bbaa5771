"""
Planar projection and polygon kernels.

All coordinates downstream of ingestion are meters on an equirectangular plane
centred on the dataset. Types are immutable; every operation here is a pure
function and may be called from any thread.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Iterator, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from errors import GeometryError

logger = logging.getLogger(__name__)

EARTH_RADIUS = 6371008.8
DEFAULT_SHARED_TOL = 0.01
ADMIN_SNAP_GRID = 0.001
BOUNDARY_EPS = 1e-9

# Upper bound on points x vertices evaluated in one vectorized batch
_PIP_BATCH_CELLS = 2_000_000

Ring = Tuple[Tuple[float, float], ...]


@dataclass(frozen=True)
class GeoPoint:
    lon: float
    lat: float

    def __post_init__(self):
        if not (-180.0 <= self.lon <= 180.0) or not (-90.0 <= self.lat <= 90.0):
            raise GeometryError(f"Invalid WGS84 coordinate: lon={self.lon}, lat={self.lat}")


class PlanarPoint(NamedTuple):
    """Meters east/north of the projection origin"""
    x: float
    y: float


@dataclass(frozen=True)
class Projection:
    """Equirectangular projection about an origin"""
    origin_lon: float
    origin_lat: float
    earth_radius: float = EARTH_RADIUS

    def __post_init__(self):
        GeoPoint(self.origin_lon, self.origin_lat)

    @classmethod
    def centered_on(cls, lons: Sequence[float], lats: Sequence[float]) -> "Projection":
        """Projection whose origin is the centre of the coordinates' extent."""
        lons = np.asarray(lons, dtype=float)
        lats = np.asarray(lats, dtype=float)
        if lons.size == 0:
            raise GeometryError("Cannot centre a projection on zero points")
        return cls(
            origin_lon=float((lons.min() + lons.max()) / 2.0),
            origin_lat=float((lats.min() + lats.max()) / 2.0),
        )

    @property
    def _kx(self) -> float:
        return self.earth_radius * math.pi / 180.0 * math.cos(self.origin_lat * math.pi / 180.0)

    @property
    def _ky(self) -> float:
        return self.earth_radius * math.pi / 180.0

    def project_arrays(self, lons, lats) -> Tuple[np.ndarray, np.ndarray]:
        lons = np.asarray(lons, dtype=float)
        lats = np.asarray(lats, dtype=float)
        return (lons - self.origin_lon) * self._kx, (lats - self.origin_lat) * self._ky

    def unproject_arrays(self, xs, ys) -> Tuple[np.ndarray, np.ndarray]:
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        return xs / self._kx + self.origin_lon, ys / self._ky + self.origin_lat

    def to_dict(self) -> dict:
        return {"origin_lon": self.origin_lon, "origin_lat": self.origin_lat}


def project(p: GeoPoint, proj: Projection) -> PlanarPoint:
    x = proj.earth_radius * (p.lon - proj.origin_lon) * math.pi / 180.0 * math.cos(proj.origin_lat * math.pi / 180.0)
    y = proj.earth_radius * (p.lat - proj.origin_lat) * math.pi / 180.0
    return PlanarPoint(x, y)


def unproject(p: PlanarPoint, proj: Projection) -> GeoPoint:
    lon = p.x / (proj.earth_radius * math.pi / 180.0 * math.cos(proj.origin_lat * math.pi / 180.0)) + proj.origin_lon
    lat = p.y / (proj.earth_radius * math.pi / 180.0) + proj.origin_lat
    return GeoPoint(lon, lat)


@dataclass(frozen=True)
class BoundingBox:
    min_x: float
    min_y: float
    max_x: float
    max_y: float

    def __post_init__(self):
        if self.min_x > self.max_x or self.min_y > self.max_y:
            raise GeometryError(f"Inverted bounding box: {self}")

    @classmethod
    def from_points(cls, xs, ys) -> "BoundingBox":
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.size == 0:
            return cls(0.0, 0.0, 0.0, 0.0)
        return cls(float(xs.min()), float(ys.min()), float(xs.max()), float(ys.max()))

    @property
    def width(self) -> float:
        return self.max_x - self.min_x

    @property
    def height(self) -> float:
        return self.max_y - self.min_y

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def is_degenerate(self) -> bool:
        return self.width <= 0.0 or self.height <= 0.0

    def expanded(self, pad: float) -> "BoundingBox":
        return BoundingBox(self.min_x - pad, self.min_y - pad, self.max_x + pad, self.max_y + pad)

    def contains(self, x: float, y: float) -> bool:
        return self.min_x <= x <= self.max_x and self.min_y <= y <= self.max_y

    def overlaps(self, other: "BoundingBox", pad: float = 0.0) -> bool:
        return not (
            self.max_x + pad < other.min_x
            or other.max_x + pad < self.min_x
            or self.max_y + pad < other.min_y
            or other.max_y + pad < self.min_y
        )

    def to_list(self) -> List[float]:
        return [self.min_x, self.min_y, self.max_x, self.max_y]


def _signed_area(ring: np.ndarray) -> float:
    x = ring[:, 0]
    y = ring[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _normalize_ring(coords, want_ccw: bool) -> Ring:
    pts = [(float(c[0]), float(c[1])) for c in coords]
    if len(pts) > 1 and pts[0] == pts[-1]:
        pts = pts[:-1]
    # consecutive duplicates add zero-length edges
    dedup = [p for i, p in enumerate(pts) if i == 0 or p != pts[i - 1]]
    if len(dedup) < 3:
        raise GeometryError(f"Ring needs at least 3 distinct vertices, got {len(dedup)}")
    area = _signed_area(np.asarray(dedup))
    if area == 0.0:
        raise GeometryError("Ring has zero area")
    if (area > 0) != want_ccw:
        dedup.reverse()
    return tuple(dedup)


@dataclass(frozen=True)
class Polygon:
    """
    Simple polygon with optional holes.

    Closure is implicit (the first vertex is never repeated). The exterior is
    stored counterclockwise and holes clockwise whatever the input orientation.
    """
    exterior: Ring
    holes: Tuple[Ring, ...] = ()
    _arrays: Tuple[np.ndarray, ...] = field(init=False, repr=False, compare=False, hash=False)
    _bbox: BoundingBox = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        exterior = _normalize_ring(self.exterior, want_ccw=True)
        holes = tuple(_normalize_ring(h, want_ccw=False) for h in self.holes)
        object.__setattr__(self, "exterior", exterior)
        object.__setattr__(self, "holes", holes)
        arrays = tuple(np.asarray(r, dtype=float) for r in (exterior,) + holes)
        object.__setattr__(self, "_arrays", arrays)
        ext = arrays[0]
        object.__setattr__(
            self, "_bbox",
            BoundingBox(float(ext[:, 0].min()), float(ext[:, 1].min()), float(ext[:, 0].max()), float(ext[:, 1].max())),
        )

    @classmethod
    def from_bbox(cls, bbox: BoundingBox) -> "Polygon":
        return cls((
            (bbox.min_x, bbox.min_y),
            (bbox.max_x, bbox.min_y),
            (bbox.max_x, bbox.max_y),
            (bbox.min_x, bbox.max_y),
        ))

    @property
    def bbox(self) -> BoundingBox:
        return self._bbox

    def ring_arrays(self) -> Tuple[np.ndarray, ...]:
        """Exterior first, then holes, each as an (m, 2) array."""
        return self._arrays

    def rings(self) -> Iterator[Ring]:
        yield self.exterior
        yield from self.holes

    def segments(self) -> np.ndarray:
        """All boundary segments as rows (x1, y1, x2, y2)."""
        parts = [np.hstack([r, np.roll(r, -1, axis=0)]) for r in self._arrays]
        return np.vstack(parts)

    def is_simple(self) -> bool:
        return ring_is_simple(self._arrays[0])


def ring_is_simple(ring: np.ndarray) -> bool:
    """True when no two non-adjacent edges of the ring intersect."""
    m = len(ring)
    if m <= 3:
        return True
    p1 = ring
    p2 = np.roll(ring, -1, axis=0)
    d = p2 - p1
    # [i, j]: side of edge j's endpoints relative to edge i
    o1 = d[:, None, 0] * (p1[None, :, 1] - p1[:, None, 1]) - d[:, None, 1] * (p1[None, :, 0] - p1[:, None, 0])
    o2 = d[:, None, 0] * (p2[None, :, 1] - p1[:, None, 1]) - d[:, None, 1] * (p2[None, :, 0] - p1[:, None, 0])
    straddle = np.sign(o1) * np.sign(o2) < 0
    crossing = straddle & straddle.T
    idx = np.arange(m)
    gap = np.abs(idx[:, None] - idx[None, :])
    adjacent = (gap <= 1) | (gap == m - 1)
    return not bool(np.any(crossing & ~adjacent))


def snap_coords(coords, grid: float = ADMIN_SNAP_GRID) -> List[Tuple[float, float]]:
    return [(round(float(x) / grid) * grid, round(float(y) / grid) * grid) for x, y in coords]


def _ring_crossings(xs: np.ndarray, ys: np.ndarray, ring: np.ndarray) -> np.ndarray:
    x1 = ring[:, 0][None, :]
    y1 = ring[:, 1][None, :]
    x2 = np.roll(ring[:, 0], -1)[None, :]
    y2 = np.roll(ring[:, 1], -1)[None, :]
    px = xs[:, None]
    py = ys[:, None]
    straddles = (y1 > py) != (y2 > py)
    dy = np.where(y2 == y1, 1.0, y2 - y1)
    x_at = x1 + (py - y1) * (x2 - x1) / dy
    hits = straddles & (px < x_at)
    return (np.count_nonzero(hits, axis=1) % 2) == 1


def _ring_touches(xs: np.ndarray, ys: np.ndarray, ring: np.ndarray, eps: float) -> np.ndarray:
    x1 = ring[:, 0][None, :]
    y1 = ring[:, 1][None, :]
    x2 = np.roll(ring[:, 0], -1)[None, :]
    y2 = np.roll(ring[:, 1], -1)[None, :]
    px = xs[:, None]
    py = ys[:, None]
    seg_len = np.hypot(x2 - x1, y2 - y1)
    cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
    near_line = np.abs(cross) <= eps * np.maximum(seg_len, 1.0)
    within = (
        (px >= np.minimum(x1, x2) - eps) & (px <= np.maximum(x1, x2) + eps)
        & (py >= np.minimum(y1, y2) - eps) & (py <= np.maximum(y1, y2) + eps)
    )
    return np.any(near_line & within, axis=1)


def points_in_polygon(xs, ys, poly: Polygon, eps: float = BOUNDARY_EPS) -> np.ndarray:
    """
    Vectorized even-odd containment.

    Boundary points (exterior or hole edges) count as inside; points strictly
    inside a hole do not.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    result = np.zeros(xs.shape[0], dtype=bool)
    if xs.size == 0:
        return result
    rings = poly.ring_arrays()
    n_vertices = sum(len(r) for r in rings)
    step = max(1, _PIP_BATCH_CELLS // n_vertices)
    bb = poly.bbox
    candidate = (xs >= bb.min_x - eps) & (xs <= bb.max_x + eps) & (ys >= bb.min_y - eps) & (ys <= bb.max_y + eps)
    cand_idx = np.nonzero(candidate)[0]
    for start in range(0, cand_idx.size, step):
        idx = cand_idx[start:start + step]
        cx = xs[idx]
        cy = ys[idx]
        inside = _ring_crossings(cx, cy, rings[0]) | _ring_touches(cx, cy, rings[0], eps)
        for hole in rings[1:]:
            in_hole = _ring_crossings(cx, cy, hole) & ~_ring_touches(cx, cy, hole, eps)
            inside &= ~in_hole
        result[idx] = inside
    return result


def point_in_polygon(p: PlanarPoint, poly: Polygon) -> bool:
    return bool(points_in_polygon(np.array([p[0]]), np.array([p[1]]), poly)[0])


def polygon_area(poly: Polygon) -> float:
    rings = poly.ring_arrays()
    area = abs(_signed_area(rings[0])) - sum(abs(_signed_area(h)) for h in rings[1:])
    return max(0.0, area)


def shared_boundary_length(a: Polygon, b: Polygon, tol: float = DEFAULT_SHARED_TOL) -> float:
    """
    Length of boundary that a and b have in common.

    Segments count as coincident when both endpoints of one lie within tol of
    the other's supporting line; their overlap is measured along that line.
    Point contacts contribute nothing.
    """
    if tol <= 0:
        raise GeometryError("tol must be positive")
    # canonical argument order makes the result exactly symmetric
    if (b.exterior, b.holes) < (a.exterior, a.holes):
        a, b = b, a
    if not a.bbox.overlaps(b.bbox, pad=tol):
        return 0.0
    sa = a.segments()
    sb = b.segments()
    bb_b = b.bbox.expanded(tol)
    bb_a = a.bbox.expanded(tol)
    sa = sa[_segments_touching_box(sa, bb_b)]
    sb = sb[_segments_touching_box(sb, bb_a)]
    if len(sa) == 0 or len(sb) == 0:
        return 0.0

    ax1, ay1, ax2, ay2 = (sa[:, k][:, None] for k in range(4))
    bx1, by1, bx2, by2 = (sb[:, k][None, :] for k in range(4))
    length = np.hypot(ax2 - ax1, ay2 - ay1)
    valid = length > 0
    safe_len = np.where(valid, length, 1.0)
    ux = (ax2 - ax1) / safe_len
    uy = (ay2 - ay1) / safe_len

    d1 = np.abs(ux * (by1 - ay1) - uy * (bx1 - ax1))
    d2 = np.abs(ux * (by2 - ay2) - uy * (bx2 - ax2))
    collinear = (d1 <= tol) & (d2 <= tol) & valid

    t1 = ux * (bx1 - ax1) + uy * (by1 - ay1)
    t2 = ux * (bx2 - ax1) + uy * (by2 - ay1)
    lo = np.maximum(np.minimum(t1, t2), 0.0)
    hi = np.minimum(np.maximum(t1, t2), length)
    overlap = np.clip(hi - lo, 0.0, None)
    return float(np.sum(np.where(collinear, overlap, 0.0)))


def _segments_touching_box(segs: np.ndarray, bb: BoundingBox) -> np.ndarray:
    lo_x = np.minimum(segs[:, 0], segs[:, 2])
    hi_x = np.maximum(segs[:, 0], segs[:, 2])
    lo_y = np.minimum(segs[:, 1], segs[:, 3])
    hi_y = np.maximum(segs[:, 1], segs[:, 3])
    return (hi_x >= bb.min_x) & (lo_x <= bb.max_x) & (hi_y >= bb.min_y) & (lo_y <= bb.max_y)


def clip_ring(ring: Sequence[Tuple[float, float]], a: Tuple[float, float], b: Tuple[float, float]) -> Optional[List[Tuple[float, float]]]:
    """
    Keep the part of ring closer to a than to b.

    Returns the ring unchanged (same object) when nothing is cut and None when
    nothing remains.
    """
    ax, ay = a
    bx, by = b
    nx = bx - ax
    ny = by - ay
    mx = (ax + bx) / 2.0
    my = (ay + by) / 2.0
    sides = [(px - mx) * nx + (py - my) * ny for px, py in ring]
    if max(sides) <= 0.0:
        return ring
    if min(sides) > 0.0:
        return None
    out: List[Tuple[float, float]] = []
    m = len(ring)
    for i in range(m):
        p = ring[i]
        q = ring[(i + 1) % m]
        sp = sides[i]
        sq = sides[(i + 1) % m]
        if sp <= 0.0:
            out.append(p)
        if (sp < 0.0 < sq) or (sq < 0.0 < sp):
            t = sp / (sp - sq)
            out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    cleaned = [pt for i, pt in enumerate(out) if pt != out[i - 1]] if len(out) > 1 else out
    if len(cleaned) < 3:
        return None
    if _signed_area(np.asarray(cleaned)) <= 0.0:
        return None
    return cleaned


def halfplane_clip(poly: Polygon, a: PlanarPoint, b: PlanarPoint) -> Optional[Polygon]:
    """Clip poly to {p : |p - a| <= |p - b|}; None when the result is empty."""
    if a[0] == b[0] and a[1] == b[1]:
        raise GeometryError("halfplane_clip needs two distinct points")
    exterior = clip_ring(poly.exterior, a, b)
    if exterior is None:
        return None
    holes = []
    changed = exterior is not poly.exterior
    for hole in poly.holes:
        # holes are clockwise; clip on the counterclockwise copy
        ccw = tuple(reversed(hole))
        clipped = clip_ring(ccw, a, b)
        if clipped is not ccw:
            changed = True
        if clipped is not None:
            holes.append(tuple(reversed(clipped)))
    if not changed:
        return poly
    return Polygon(tuple(exterior), tuple(holes))


def _clip_left_of(ring, p: Tuple[float, float], q: Tuple[float, float]):
    """Keep the part of a counterclockwise ring left of the directed line p -> q."""
    nx, ny = p[1] - q[1], q[0] - p[0]
    return clip_ring(ring, (p[0] + nx, p[1] + ny), (p[0] - nx, p[1] - ny))


def triangulate_ring(ring: Sequence[Tuple[float, float]]) -> List[Ring]:
    """Ear-clipping triangulation of a simple counterclockwise ring."""
    pts = np.asarray(ring, dtype=float)
    idx = list(range(len(pts)))
    triangles: List[Ring] = []
    while len(idx) > 3:
        m = len(idx)
        for k in range(m):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % m]
            a, b, c = pts[i0], pts[i1], pts[i2]
            turn = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
            if turn == 0.0:
                # collinear vertex, no triangle to emit
                idx.pop(k)
                break
            if turn < 0.0:
                continue
            others = pts[[j for j in idx if j not in (i0, i1, i2)]]
            if len(others):
                s1 = (b[0] - a[0]) * (others[:, 1] - a[1]) - (b[1] - a[1]) * (others[:, 0] - a[0])
                s2 = (c[0] - b[0]) * (others[:, 1] - b[1]) - (c[1] - b[1]) * (others[:, 0] - b[0])
                s3 = (a[0] - c[0]) * (others[:, 1] - c[1]) - (a[1] - c[1]) * (others[:, 0] - c[0])
                if np.any((s1 >= 0) & (s2 >= 0) & (s3 >= 0)):
                    continue
            triangles.append((tuple(a), tuple(b), tuple(c)))
            idx.pop(k)
            break
        else:
            raise GeometryError("Ring cannot be triangulated; is it simple?")
    if len(idx) == 3 and _signed_area(pts[idx]) > 0.0:
        triangles.append(tuple(tuple(pts[j]) for j in idx))
    return triangles


def _ring_overlap_area(subject: Ring, triangles: Sequence[Ring]) -> float:
    """Area shared by a counterclockwise ring and the union of disjoint triangles."""
    sub = np.asarray(subject, dtype=float)
    lo, hi = sub.min(axis=0), sub.max(axis=0)
    total = 0.0
    for tri in triangles:
        t = np.asarray(tri)
        if np.any(t.max(axis=0) < lo) or np.any(t.min(axis=0) > hi):
            continue
        clipped = subject
        for e in range(3):
            clipped = _clip_left_of(clipped, tri[e], tri[(e + 1) % 3])
            if clipped is None:
                break
        if clipped is not None:
            total += _signed_area(np.asarray(clipped))
    return total


def intersection_area(a: Polygon, b: Polygon) -> float:
    """Area of a ∩ b, holes included, for simple polygons."""
    if not a.bbox.overlaps(b.bbox):
        return 0.0
    a_holes = [tuple(reversed(h)) for h in a.holes]
    b_ext = triangulate_ring(b.exterior)
    b_holes = [triangulate_ring(tuple(reversed(h))) for h in b.holes]
    area = _ring_overlap_area(a.exterior, b_ext)
    area -= sum(_ring_overlap_area(h, b_ext) for h in a_holes)
    area -= sum(_ring_overlap_area(a.exterior, t) for t in b_holes)
    area += sum(_ring_overlap_area(h, t) for h in a_holes for t in b_holes)
    return max(0.0, area)

"""Administrative boundary ingestion (Polygon / MultiPolygon features)."""
import logging
from typing import List, Tuple

from data_sources.geojson_io import feature_geometry, load_feature_collection, lonlat_pairs
from errors import GeoJSONParseError, GeometryError
from geometry.geo_core import ADMIN_SNAP_GRID, Polygon, Projection, polygon_area, snap_coords

logger = logging.getLogger(__name__)


def _ring_to_planar(ring, proj: Projection, index: int):
    pairs = lonlat_pairs(ring, index, "admin boundary")
    if len(pairs) > 1 and pairs[0] == pairs[-1]:
        pairs = pairs[:-1]
    if len(pairs) < 3:
        raise GeoJSONParseError(f"Invalid ring with {len(pairs)} distinct points (need >= 3)", feature_index=index)
    lons, lats = zip(*pairs)
    xs, ys = proj.project_arrays(lons, lats)
    return snap_coords(zip(xs, ys), ADMIN_SNAP_GRID)


def _polygon_from_rings(rings, proj: Projection, index: int) -> Polygon:
    if not isinstance(rings, (list, tuple)) or not rings:
        raise GeoJSONParseError("Polygon has no rings", feature_index=index)
    planar = [_ring_to_planar(r, proj, index) for r in rings]
    try:
        poly = Polygon(tuple(planar[0]), tuple(tuple(h) for h in planar[1:]))
    except GeometryError as e:
        raise GeoJSONParseError(f"Invalid ring: {e}", feature_index=index)
    if not poly.is_simple():
        raise GeoJSONParseError("Exterior ring crosses itself", feature_index=index)
    return poly


def read_admin_polygons(data: bytes, proj: Projection, id_property: str = 'id') -> List[Tuple[str, Polygon]]:
    """
    (label, polygon) pairs in file order.

    A MultiPolygon yields one entry per part, largest part first, labelled
    '<id>-0', '<id>-1', ...
    """
    features = load_feature_collection(data, "admin boundary")
    out: List[Tuple[str, Polygon]] = []
    for index, feature in enumerate(features):
        properties = feature.get('properties') or {}
        if id_property not in properties or properties[id_property] in (None, ''):
            raise GeoJSONParseError(f"Missing id property '{id_property}'", feature_index=index)
        label = str(properties[id_property])
        geometry = feature_geometry(feature, index, "admin boundary")
        gtype = geometry['type']
        if gtype == 'Polygon':
            out.append((label, _polygon_from_rings(geometry['coordinates'], proj, index)))
        elif gtype == 'MultiPolygon':
            parts = [_polygon_from_rings(p, proj, index) for p in geometry['coordinates']]
            ranked = sorted(range(len(parts)), key=lambda k: -polygon_area(parts[k]))
            for k, part_idx in enumerate(ranked):
                out.append((f"{label}-{k}", parts[part_idx]))
        else:
            raise GeoJSONParseError(f"Unsupported admin geometry type '{gtype}'", feature_index=index)
    logger.info(f"✅ Read {len(out)} admin polygons from {len(features)} features")
    return out

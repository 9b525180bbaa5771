"""Shared GeoJSON reading/writing helpers."""
import json
import logging
from typing import Any, Dict, List

import geojson

from errors import GeoJSONParseError

logger = logging.getLogger(__name__)


def load_feature_collection(data: bytes, what: str = "GeoJSON") -> List[Dict[str, Any]]:
    """Decode a FeatureCollection and return its features as plain mappings."""
    try:
        text = data.decode('utf-8-sig')
    except UnicodeDecodeError as e:
        raise GeoJSONParseError(f"{what} is not UTF-8: {e}")
    try:
        doc = geojson.loads(text)
    except json.JSONDecodeError as e:
        raise GeoJSONParseError(f"{what} is not valid JSON: {e.msg}", line=e.lineno)
    except (ValueError, TypeError) as e:
        raise GeoJSONParseError(f"{what} could not be decoded: {e}")
    if not isinstance(doc, dict) or doc.get('type') != 'FeatureCollection':
        raise GeoJSONParseError(f"{what} must be a FeatureCollection")
    features = doc.get('features')
    if not isinstance(features, list):
        raise GeoJSONParseError(f"{what} has no 'features' array")
    for i, feature in enumerate(features):
        if not isinstance(feature, dict) or feature.get('type') != 'Feature':
            raise GeoJSONParseError(f"{what} entry is not a Feature", feature_index=i)
    return features


def feature_geometry(feature: Dict[str, Any], index: int, what: str = "GeoJSON") -> Dict[str, Any]:
    geometry = feature.get('geometry')
    if not isinstance(geometry, dict) or 'type' not in geometry or 'coordinates' not in geometry:
        raise GeoJSONParseError(f"{what} feature has no usable geometry", feature_index=index)
    return geometry


def lonlat_pairs(coords: Any, index: int, what: str = "GeoJSON") -> List[List[float]]:
    """Validate a coordinate list of [lon, lat(, z)] entries."""
    if not isinstance(coords, (list, tuple)):
        raise GeoJSONParseError(f"{what} coordinates must be a list", feature_index=index)
    pairs = []
    for c in coords:
        if not isinstance(c, (list, tuple)) or len(c) < 2:
            raise GeoJSONParseError(f"{what} position must have at least two numbers", feature_index=index)
        try:
            lon, lat = float(c[0]), float(c[1])
        except (TypeError, ValueError):
            raise GeoJSONParseError(f"{what} position is not numeric", feature_index=index)
        if not (-180.0 <= lon <= 180.0) or not (-90.0 <= lat <= 90.0):
            raise GeoJSONParseError(f"{what} position out of WGS84 range: {lon}, {lat}", feature_index=index)
        pairs.append([lon, lat])
    return pairs


def dumps_feature_collection(features: List[geojson.Feature]) -> str:
    return geojson.dumps(geojson.FeatureCollection(features), separators=(',', ':'))

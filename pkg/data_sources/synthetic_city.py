"""
Deterministic synthetic city for smoke runs and tests.

A jittered street lattice, hotspot-clustered events with a daily rhythm,
categorized POIs and a 2x2 district layer, all written in the formats the
readers accept.
"""
import io
import json
import logging
import os
from dataclasses import dataclass
from typing import Dict, List, Tuple

import geojson
import numpy as np
import pandas as pd

from data_sources.geojson_io import dumps_feature_collection
from geometry.geo_core import Projection

logger = logging.getLogger(__name__)

POI_CATEGORIES = ('food', 'office', 'retail', 'school', 'transit')
EPOCH_START = pd.Timestamp('2023-01-01T00:00:00Z')


@dataclass
class SyntheticCity:
    roads: List[geojson.Feature]
    admin: List[geojson.Feature]
    events: pd.DataFrame
    pois: pd.DataFrame
    bbox: List[float]


def _lattice(rng: np.random.Generator, n: int, spacing: float, jitter: float) -> np.ndarray:
    """(n, n, 2) intersection positions in metres, origin at the lattice centre."""
    half = (n - 1) * spacing / 2.0
    axis = np.arange(n) * spacing - half
    gx, gy = np.meshgrid(axis, axis, indexing='ij')
    pts = np.stack([gx, gy], axis=-1)
    pts += rng.uniform(-jitter, jitter, size=pts.shape)
    return pts


def generate_city(seed: int = 0, n_events: int = 5000, days: int = 90, n_blocks: int = 12,
                  spacing: float = 1000.0, center: Tuple[float, float] = (13.40, 52.52),
                  n_hotspots: int = 4, n_pois: int = 600) -> SyntheticCity:
    rng = np.random.default_rng(seed)
    proj = Projection(center[0], center[1])
    pts = _lattice(rng, n_blocks, spacing, jitter=0.15 * spacing)

    def to_lonlat(xy: np.ndarray) -> List[List[float]]:
        lons, lats = proj.unproject_arrays(xy[:, 0], xy[:, 1])
        return [[round(float(a), 6), round(float(b), 6)] for a, b in zip(lons, lats)]

    roads = []
    for i in range(n_blocks):
        roads.append(geojson.Feature(geometry=geojson.LineString(to_lonlat(pts[i, :, :])),
                                     properties={'name': f"street-{i}"}))
        roads.append(geojson.Feature(geometry=geojson.LineString(to_lonlat(pts[:, i, :])),
                                     properties={'name': f"avenue-{i}"}))

    flat = pts.reshape(-1, 2)
    min_x, min_y = flat.min(axis=0)
    max_x, max_y = flat.max(axis=0)

    centres = rng.uniform([min_x, min_y], [max_x, max_y], size=(n_hotspots, 2)) * 0.6
    sigmas = rng.uniform(0.04, 0.12, size=n_hotspots) * (max_x - min_x)
    weights = rng.dirichlet(np.ones(n_hotspots) * 2.0)
    which = rng.choice(n_hotspots, size=n_events, p=weights)
    xy = centres[which] + rng.normal(size=(n_events, 2)) * sigmas[which, None]
    xy[:, 0] = np.clip(xy[:, 0], min_x, max_x)
    xy[:, 1] = np.clip(xy[:, 1], min_y, max_y)

    # evening-heavy daily rhythm
    day = rng.integers(0, days, size=n_events)
    hour = np.mod(rng.normal(19.0, 4.0, size=n_events), 24.0)
    seconds = (day * 86400 + hour * 3600).astype(np.int64)
    order = np.argsort(seconds, kind='stable')
    stamps = (EPOCH_START + pd.to_timedelta(seconds[order], unit='s')).strftime('%Y-%m-%dT%H:%M:%SZ')
    lonlat = to_lonlat(xy[order])
    events = pd.DataFrame({
        'timestamp': stamps,
        'latitude': [p[1] for p in lonlat],
        'longitude': [p[0] for p in lonlat],
        'category': rng.choice(['theft', 'assault', 'vandalism'], size=n_events)[order],
    })

    poi_centres = centres[rng.choice(n_hotspots, size=n_pois)]
    poi_xy = poi_centres + rng.normal(size=(n_pois, 2)) * (0.2 * (max_x - min_x))
    poi_xy[:, 0] = np.clip(poi_xy[:, 0], min_x, max_x)
    poi_xy[:, 1] = np.clip(poi_xy[:, 1], min_y, max_y)
    poi_lonlat = to_lonlat(poi_xy)
    pois = pd.DataFrame({
        'latitude': [p[1] for p in poi_lonlat],
        'longitude': [p[0] for p in poi_lonlat],
        'category': rng.choice(POI_CATEGORIES, size=n_pois),
    })

    # districts slightly larger than the lattice so every event has a district
    pad = 0.5 * spacing
    xs = [min_x - pad, (min_x + max_x) / 2.0, max_x + pad]
    ys = [min_y - pad, (min_y + max_y) / 2.0, max_y + pad]
    admin = []
    for r in range(2):
        for c in range(2):
            ring = np.array([[xs[c], ys[r]], [xs[c + 1], ys[r]], [xs[c + 1], ys[r + 1]],
                             [xs[c], ys[r + 1]], [xs[c], ys[r]]])
            admin.append(geojson.Feature(geometry=geojson.Polygon([to_lonlat(ring)]),
                                         properties={'id': f"D{r}{c}", 'name': f"District {r}{c}"}))

    lo = to_lonlat(np.array([[min_x, min_y], [max_x, max_y]]))
    bbox = [lo[0][0], lo[0][1], lo[1][0], lo[1][1]]
    logger.info(f"🏙️ Synthetic city: {len(roads)} streets, {n_events} events over {days} days, {n_pois} POIs")
    return SyntheticCity(roads=roads, admin=admin, events=events, pois=pois, bbox=bbox)


def _csv(frame: pd.DataFrame) -> str:
    buf = io.StringIO()
    frame.to_csv(buf, index=False, lineterminator='\n')
    return buf.getvalue()


def write_city(city: SyntheticCity, output_dir: str) -> Dict[str, str]:
    """Write the four inputs plus a ready-to-run config.json; returns name -> path"""
    os.makedirs(output_dir, exist_ok=True)
    paths = {
        'roads': os.path.join(output_dir, 'roads.geojson'),
        'admin': os.path.join(output_dir, 'admin.geojson'),
        'events': os.path.join(output_dir, 'events.csv'),
        'poi': os.path.join(output_dir, 'poi.csv'),
    }
    texts = {
        'roads': dumps_feature_collection(city.roads),
        'admin': dumps_feature_collection(city.admin),
        'events': _csv(city.events),
        'poi': _csv(city.pois),
    }
    for key, path in paths.items():
        with open(path, 'w', encoding='utf-8', newline='') as fh:
            fh.write(texts[key])

    config = {
        'paths': {**{k: os.path.abspath(v) for k, v in paths.items()},
                  'output_dir': os.path.abspath(os.path.join(output_dir, 'run'))},
        'mapping': {'kind': 'grid', 'cell_size': 2000.0, 'bbox': city.bbox},
        'dataset': {'bin_width': 86400, 'window': 7},
        'train': {'epochs': 200, 'hidden': 16, 'seed': 0},
    }
    paths['config'] = os.path.join(output_dir, 'config.json')
    with open(paths['config'], 'w', encoding='utf-8') as fh:
        json.dump(config, fh, indent=2, sort_keys=True)
        fh.write('\n')
    logger.info(f"✅ Synthetic inputs written to {output_dir}")
    return paths

"""Uniform bucket grid over region bounding boxes."""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Sequence, Tuple

import numpy as np

from geometry.geo_core import Polygon, points_in_polygon

logger = logging.getLogger(__name__)

NO_REGION = -1


class BucketIndex:
    """
    Maps integer bucket coordinates (bx, by) to candidate region ids.

    Every region is registered in each bucket its bounding box overlaps, and
    candidate lists are kept in ascending id order so the first containing
    region is also the lowest id.
    """

    def __init__(self, geometries: Sequence[Polygon], bucket_size: float):
        if bucket_size <= 0:
            raise ValueError("bucket_size must be positive")
        self.bucket_size = float(bucket_size)
        self.geometries = list(geometries)
        grid: Dict[Tuple[int, int], List[int]] = {}
        for rid, geom in enumerate(self.geometries):
            bb = geom.bbox
            for bx in range(self._cell(bb.min_x), self._cell(bb.max_x) + 1):
                for by in range(self._cell(bb.min_y), self._cell(bb.max_y) + 1):
                    grid.setdefault((bx, by), []).append(rid)
        self.buckets: Dict[Tuple[int, int], Tuple[int, ...]] = {k: tuple(v) for k, v in grid.items()}
        logger.debug(f"BucketIndex built: {len(self.buckets)} buckets of {self.bucket_size:.1f} m for {len(self.geometries)} regions")

    def _cell(self, v: float) -> int:
        return int(math.floor(v / self.bucket_size))

    def candidates(self, x: float, y: float) -> Tuple[int, ...]:
        return self.buckets.get((self._cell(x), self._cell(y)), ())

    def locate(self, xs, ys, workers: int = 1) -> np.ndarray:
        """
        Region id for every point, NO_REGION when no region contains it.

        Points are split into contiguous chunks when workers > 1; results are
        written back by position so the output never depends on scheduling.
        """
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        n = xs.shape[0]
        if workers <= 1 or n < 2 * workers:
            return self._locate_chunk(xs, ys)
        bounds = np.linspace(0, n, workers + 1).astype(int)
        out = np.full(n, NO_REGION, dtype=np.int64)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                (lo, hi, pool.submit(self._locate_chunk, xs[lo:hi], ys[lo:hi]))
                for lo, hi in zip(bounds[:-1], bounds[1:])
            ]
            for lo, hi, fut in futures:
                out[lo:hi] = fut.result()
        return out

    def _locate_chunk(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        out = np.full(xs.shape[0], NO_REGION, dtype=np.int64)
        if xs.size == 0:
            return out
        finite = np.isfinite(xs) & np.isfinite(ys)
        bx = np.zeros(xs.shape[0], dtype=np.int64)
        by = np.zeros(xs.shape[0], dtype=np.int64)
        bx[finite] = np.floor(xs[finite] / self.bucket_size).astype(np.int64)
        by[finite] = np.floor(ys[finite] / self.bucket_size).astype(np.int64)
        keys = np.stack([bx, by], axis=1)[finite]
        positions = np.nonzero(finite)[0]
        if positions.size == 0:
            return out
        uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        order = np.argsort(inverse, kind="stable")
        splits = np.cumsum(np.bincount(inverse, minlength=len(uniq)))[:-1]
        for key, members in zip(uniq, np.split(order, splits)):
            candidates = self.buckets.get((int(key[0]), int(key[1])))
            if not candidates:
                continue
            idx = positions[members]
            pending = idx
            for rid in candidates:
                hit = points_in_polygon(xs[pending], ys[pending], self.geometries[rid])
                out[pending[hit]] = rid
                pending = pending[~hit]
                if pending.size == 0:
                    break
        return out


def default_bucket_size(geometries: Sequence[Polygon]) -> float:
    """Median region bbox width, falling back to 1 m for degenerate input."""
    widths = [g.bbox.width for g in geometries if g.bbox.width > 0]
    if not widths:
        return 1.0
    return float(np.median(widths))


def brute_force_locate(xs, ys, geometries: Sequence[Polygon]) -> np.ndarray:
    """Reference lookup testing every region; lowest containing id wins."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    out = np.full(xs.shape[0], NO_REGION, dtype=np.int64)
    for rid, geom in enumerate(geometries):
        hit = points_in_polygon(xs, ys, geom) & (out == NO_REGION)
        out[hit] = rid
    return out

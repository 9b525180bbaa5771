from typing import List, Dict, Any, NamedTuple, Optional, Sequence
import logging
from dataclasses import dataclass

import numpy as np

from agents.partition_agent import Partition
from config.settings import settings
from data_sources.event_reader import Event
from errors import EventParseError
from geometry.spatial_index import NO_REGION, BucketIndex, default_bucket_size

logger = logging.getLogger(__name__)


class AssignedEvent(NamedTuple):
    event_id: int
    region_id: Optional[int]
    timestamp: int


@dataclass
class UrbanFeatures:
    """Per-region POI category counts, columns in `categories` order"""
    categories: List[str]
    matrix: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        if self.matrix.ndim != 2 or self.matrix.shape[1] != len(self.categories):
            raise ValueError(f"Feature matrix shape {self.matrix.shape} does not match {len(self.categories)} categories")
        if np.any(self.matrix < 0):
            raise ValueError("Feature matrix has negative entries")
        if self.normalized:
            sums = self.matrix.sum(axis=1)
            nonzero = sums > 0
            if np.any(np.abs(sums[nonzero] - 1.0) > 1e-9):
                raise ValueError("Normalized feature rows must sum to 1")

    @property
    def n_regions(self) -> int:
        return self.matrix.shape[0]


class MappingAgent:
    """Agent responsible for placing events and POIs into regions"""

    def __init__(self, workers: int = settings.ASSIGN_WORKERS):
        self.workers = max(1, int(workers))
        self.last_summary: Dict[str, Any] = {}
        logger.info(f"MappingAgent initialized ({self.workers} worker(s))")

    def build_bucket_index(self, part: Partition, bucket_size: Optional[float] = None) -> BucketIndex:
        size = bucket_size if bucket_size is not None else default_bucket_size(part.geometries)
        return BucketIndex(part.geometries, size)

    def locate(self, lons, lats, part: Partition, index: BucketIndex) -> np.ndarray:
        xs, ys = part.proj.project_arrays(lons, lats)
        return index.locate(xs, ys, workers=self.workers)

    def assign_events(self, events: Sequence[Event], part: Partition, index: BucketIndex) -> List[AssignedEvent]:
        """
        Region of every event, in input order.

        Candidates come from the event's bucket; among containing regions the
        lowest id wins. Events inside no region keep region_id None.
        """
        lons = np.fromiter((e.lon for e in events), dtype=float, count=len(events))
        lats = np.fromiter((e.lat for e in events), dtype=float, count=len(events))
        region_ids = self.locate(lons, lats, part, index)
        assigned = [
            AssignedEvent(event_id=e.id, region_id=(None if rid == NO_REGION else int(rid)), timestamp=e.timestamp)
            for e, rid in zip(events, region_ids.tolist())
        ]
        inside = int(np.count_nonzero(region_ids != NO_REGION))
        outside = len(events) - inside
        self.last_summary = {
            'total_events': len(events),
            'inside': inside,
            'outside': outside,
            'inside_rate': round(inside / len(events) * 100, 2) if events else 0.0,
        }
        logger.info(f"📊 Assigned {inside}/{len(events)} events to regions ({outside} outside every region)")
        if outside:
            logger.warning(f"⚠️ {outside} events fall outside every region")
        return assigned

    def aggregate_poi_features(self, pois: Sequence[Event], part: Partition, index: BucketIndex,
                               normalize: bool = False) -> UrbanFeatures:
        """Count POIs per (region, category); optionally row-normalize."""
        categories = sorted({p.category for p in pois if p.category})
        if not categories:
            raise EventParseError("No POI has a category")
        column = {c: k for k, c in enumerate(categories)}
        lons = np.fromiter((p.lon for p in pois), dtype=float, count=len(pois))
        lats = np.fromiter((p.lat for p in pois), dtype=float, count=len(pois))
        region_ids = self.locate(lons, lats, part, index)

        matrix = np.zeros((len(part), len(categories)), dtype=float)
        for poi, rid in zip(pois, region_ids.tolist()):
            if rid == NO_REGION or not poi.category:
                continue
            matrix[rid, column[poi.category]] += 1.0
        if normalize:
            sums = matrix.sum(axis=1, keepdims=True)
            matrix = np.divide(matrix, sums, out=np.zeros_like(matrix), where=sums > 0)

        logger.info(f"✅ Urban features: {len(categories)} categories over {len(part)} regions "
                    f"({int(np.count_nonzero(region_ids != NO_REGION))}/{len(pois)} POIs inside)")
        return UrbanFeatures(categories=categories, matrix=matrix, normalized=normalize)

    def get_assignment_summary(self) -> Dict[str, Any]:
        return dict(self.last_summary)

from typing import List, Dict, Any, Optional, Sequence
import io
import logging
import os

import geojson
import networkx as nx
import numpy as np
import pandas as pd

from agents.dataset_agent import CountMatrix
from agents.graph_agent import RegionGraph
from agents.partition_agent import Partition, Region
from data_sources.geojson_io import dumps_feature_collection

logger = logging.getLogger(__name__)

DEFAULT_TOP_K = 10


def write_atomic(path: str, text: str) -> None:
    """Write through a temporary sibling file so readers never see a partial file"""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    tmp = f"{path}.tmp"
    with open(tmp, 'w', encoding='utf-8', newline='') as fh:
        fh.write(text)
    os.replace(tmp, path)


def _closed_lonlat(ring, partition: Partition) -> List[List[float]]:
    xs = [p[0] for p in ring]
    ys = [p[1] for p in ring]
    lons, lats = partition.proj.unproject_arrays(xs, ys)
    coords = [[float(lon), float(lat)] for lon, lat in zip(lons, lats)]
    coords.append(coords[0])
    return coords


class ExportAgent:
    """Agent responsible for map-ready GeoJSON / CSV exports"""

    def __init__(self, top_k: int = DEFAULT_TOP_K):
        self.top_k = top_k
        logger.info("ExportAgent initialized")

    def region_feature(self, region: Region, partition: Partition,
                       extra: Optional[Dict[str, Any]] = None) -> geojson.Feature:
        rings = [_closed_lonlat(r, partition) for r in region.geometry.rings()]
        properties = {'id': region.id, 'kind': region.kind, 'label': region.label}
        if extra:
            properties.update(extra)
        return geojson.Feature(geometry=geojson.Polygon(rings), properties=properties)

    def regions_geojson(self, partition: Partition) -> str:
        """Regions in WGS84 with id, kind and label properties"""
        features = [self.region_feature(r, partition) for r in partition.regions]
        return dumps_feature_collection(features)

    def heatmap_geojson(self, partition: Partition, totals: Sequence[int]) -> str:
        """Regions carrying their total inside-event count as `total_count`"""
        totals = np.asarray(totals, dtype=np.int64)
        if totals.shape[0] != len(partition):
            raise ValueError(f"{totals.shape[0]} totals for {len(partition)} regions")
        features = [self.region_feature(r, partition, {'total_count': int(totals[r.id])})
                    for r in partition.regions]
        logger.info(f"📊 Heatmap: {int(totals.sum())} events over {len(partition)} regions, "
                    f"busiest region {int(np.argmax(totals))} ({int(totals.max())})")
        return dumps_feature_collection(features)

    def top_regions(self, totals: Sequence[int], k: Optional[int] = None) -> List[int]:
        """Most active regions; equal totals rank by lowest id"""
        totals = np.asarray(totals, dtype=np.int64)
        order = np.lexsort((np.arange(totals.shape[0]), -totals))
        return [int(i) for i in order[:(k or self.top_k)]]

    def active_nodes_csv(self, cm: CountMatrix, k: Optional[int] = None) -> str:
        """Per-bin counts of the top-k regions, one row per bin"""
        top = self.top_regions(cm.totals(), k)
        starts = pd.to_datetime([cm.bin_start(t) for t in range(cm.n_bins)], unit='s', utc=True)
        frame = pd.DataFrame({'bin_start': starts.strftime('%Y-%m-%dT%H:%M:%SZ')})
        for rid in top:
            frame[f"region_{rid}"] = cm.counts[rid]
        buf = io.StringIO()
        frame.to_csv(buf, index=False, lineterminator='\n')
        return buf.getvalue()

    def runs_csv(self, runs: List[Dict[str, Any]]) -> str:
        columns = ['id', 'timestamp', 'command', 'config_digest', 'mapping_kind', 'mapping_params',
                   'n_regions', 'n_edges', 'success', 'auc', 'accuracy', 'balanced_accuracy', 'f1', 'mcc']
        frame = pd.DataFrame(runs, columns=columns)
        buf = io.StringIO()
        frame.to_csv(buf, index=False, lineterminator='\n')
        return buf.getvalue()

    def mcc_comparison_csv(self, rows: List[Dict[str, Any]]) -> str:
        frame = pd.DataFrame(rows, columns=['mapping_kind', 'mapping_params', 'runs', 'mean_mcc', 'best_mcc'])
        buf = io.StringIO()
        frame.to_csv(buf, index=False, lineterminator='\n')
        return buf.getvalue()

    def graphml(self, graph: RegionGraph, totals: Optional[Sequence[int]] = None) -> str:
        g = graph.to_networkx(np.asarray(totals) if totals is not None else None)
        return '\n'.join(nx.generate_graphml(g)) + '\n'

    def export_all(self, output_dir: str, graph: RegionGraph, cm: CountMatrix,
                   runs: List[Dict[str, Any]], mcc_rows: Optional[List[Dict[str, Any]]] = None) -> List[str]:
        """Write every export; returns the written paths"""
        totals = cm.totals()
        outputs = {
            'regions.geojson': self.regions_geojson(graph.partition),
            'heatmap.geojson': self.heatmap_geojson(graph.partition, totals),
            'active_nodes.csv': self.active_nodes_csv(cm),
            'runs.csv': self.runs_csv(runs),
            'graph.graphml': self.graphml(graph, totals),
            'mcc_by_mapping.csv': self.mcc_comparison_csv(mcc_rows or []),
        }
        written = []
        for name, text in outputs.items():
            path = os.path.join(output_dir, name)
            write_atomic(path, text)
            written.append(path)
        logger.info(f"✅ Exported {len(written)} files to {output_dir}")
        return written

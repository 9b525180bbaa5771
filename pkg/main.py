#!/usr/bin/env python3
"""
Urban event graph mapper.

Turns geolocated event records into a region graph with per-region event
time series, trains a GCN occurrence baseline on it, and exports the results
as GeoJSON/CSV for any map viewer.

    python main.py synthesize --output demo
    python main.py partition --config demo/config.json
    python main.py build     --config demo/config.json
    python main.py train     --config demo/config.json
    python main.py evaluate  --config demo/config.json --split test
    python main.py export    --config demo/config.json
"""
import argparse
import dataclasses
import json
import logging
import os
import sys
from typing import List, Optional

from agents.dataset_agent import CountMatrix, DatasetAgent, SplitDataset
from agents.export_agent import ExportAgent
from agents.graph_agent import GraphAgent, RegionGraph
from agents.logger_agent import LoggerAgent
from agents.mapping_agent import MappingAgent
from agents.model_agent import ModelAgent
from agents.partition_agent import Partition, PartitionAgent
from config.run_config import RunConfig, load_run_config
from config.settings import settings
from data_sources.event_reader import parse_events_csv, parse_poi_csv
from data_sources.road_reader import parse_road_geojson
from data_sources.synthetic_city import generate_city, write_city
from errors import ConfigError, GeoJSONParseError, InputFileError, MapperError, PartitionError
from geometry.geo_core import BoundingBox, Projection

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s %(message)s'

PARTITION_FILE = 'partition.json'
SEEDS_FILE = 'seeds.json'
REGIONS_FILE = 'regions.geojson'
GRAPH_FILE = 'graph.json'
COUNTS_FILE = 'counts.csv'
COUNTS_META_FILE = 'counts.json'
HEATMAP_FILE = 'heatmap.geojson'
CHECKPOINT_FILE = 'checkpoint.json'
TRACE_FILE = 'loss_trace.csv'
REPORT_FILE = 'report.json'

USAGE_ERRORS = (ConfigError, InputFileError, GeoJSONParseError, PartitionError)


def setup_logging(level: str) -> None:
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if settings.LOG_FILE:
        handlers.append(logging.FileHandler(settings.LOG_FILE))
    logging.basicConfig(level=level, format=LOG_FORMAT, handlers=handlers, force=True)


def _read_bytes(path: str) -> bytes:
    try:
        with open(path, 'rb') as fh:
            return fh.read()
    except OSError as e:
        raise InputFileError(f"Cannot read {path}: {e}")


def _read_text(output_dir: str, name: str, produced_by: str) -> str:
    path = os.path.join(output_dir, name)
    if not os.path.isfile(path):
        raise InputFileError(f"{path} not found; run '{produced_by}' first")
    return _read_bytes(path).decode('utf-8')


def _dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + '\n'


def _configured_bbox(config: RunConfig, proj: Projection) -> Optional[BoundingBox]:
    bbox = config.mapping.bbox
    if bbox is None:
        return None
    xs, ys = proj.project_arrays([bbox[0], bbox[2]], [bbox[1], bbox[3]])
    return BoundingBox(float(xs[0]), float(ys[0]), float(xs[1]), float(ys[1]))


# --- SUBCOMMANDS ---
def cmd_partition(config: RunConfig, run_log: LoggerAgent) -> int:
    paths, mapping = config.paths, config.mapping
    run_log.record_inputs({k: getattr(paths, k) for k in config.required_inputs('partition')})

    with run_log.stage('read_events'):
        parsed = parse_events_csv(_read_bytes(paths.events), config.schema)
        run_log.add_dropped('event_rows', parsed.dropped)
    if not parsed.events:
        raise PartitionError("No valid events to anchor the projection")
    lons, lats = parsed.coordinates()
    proj = Projection.centered_on(lons, lats)
    xs, ys = proj.project_arrays(lons, lats)
    event_bbox = BoundingBox.from_points(xs, ys)
    bbox = _configured_bbox(config, proj)

    agent = PartitionAgent(workers=config.dataset.workers)
    with run_log.stage('partition'):
        if mapping.kind == 'grid':
            partition = agent.grid_partition(bbox or event_bbox, mapping.cell_size, proj)
        elif mapping.kind == 'admin':
            partition = agent.admin_partition(_read_bytes(paths.admin), proj, mapping.admin_id_property)
        else:
            net = parse_road_geojson(_read_bytes(paths.roads), proj, mapping.road_snap_tol)
            run_log.add_dropped('non_line_road_features', net.metadata.get('skipped_features', 0))
            if bbox is None:
                bbox = event_bbox
                if net.nodes:
                    b = net.bbox
                    bbox = BoundingBox(min(b.min_x, bbox.min_x), min(b.min_y, bbox.min_y),
                                       max(b.max_x, bbox.max_x), max(b.max_y, bbox.max_y))
            seeds = agent.select_seeds(dataclasses.replace(net, bbox=bbox), mapping.min_degree,
                                       mapping.d_small, mapping.d_big)
            partition = agent.voronoi_partition(seeds, bbox, proj)
            run_log.write_output(SEEDS_FILE, _dumps(seeds.to_dict()))

    run_log.write_output(PARTITION_FILE, json.dumps(partition.to_dict(), separators=(',', ':')))
    run_log.write_output(REGIONS_FILE, ExportAgent().regions_geojson(partition))
    run_log.summary = {'n_regions': len(partition), 'kind': partition.kind}
    run_log.write_manifest('partition', config)
    run_log.record_run('partition', config, n_regions=len(partition))
    return 0


def cmd_build(config: RunConfig, run_log: LoggerAgent) -> int:
    paths, mapping = config.paths, config.mapping
    partition = Partition.from_dict(json.loads(_read_text(paths.output_dir, PARTITION_FILE, 'partition')))
    run_log.record_inputs({k: getattr(paths, k) for k in config.required_inputs('build')})

    mapper = MappingAgent(workers=config.dataset.workers)
    with run_log.stage('assign'):
        parsed = parse_events_csv(_read_bytes(paths.events), config.schema)
        run_log.add_dropped('event_rows', parsed.dropped)
        index = mapper.build_bucket_index(partition, mapping.bucket_size)
        assigned = mapper.assign_events(parsed.events, partition, index)
        assignment = mapper.get_assignment_summary()
        run_log.add_dropped('events_outside_regions', assignment['outside'])

    features = None
    if paths.poi:
        with run_log.stage('poi_features'):
            pois = parse_poi_csv(_read_bytes(paths.poi), config.schema)
            run_log.add_dropped('poi_rows', pois.dropped)
            features = mapper.aggregate_poi_features(pois.events, partition, index,
                                                     normalize=config.dataset.normalize_features)

    graph_agent = GraphAgent(shared_tol=mapping.shared_tol, workers=config.dataset.workers)
    with run_log.stage('graph'):
        if mapping.kind == 'voronoi' and mapping.voronoi_weights == 'road':
            net = parse_road_geojson(_read_bytes(paths.roads), partition.proj, mapping.road_snap_tol)
            edges = graph_agent.build_road_weights(partition, net, index)
        else:
            edges = graph_agent.build_adjacency(partition, mapping.shared_tol, queen=mapping.queen)
        graph = graph_agent.assemble_graph(partition, edges, features)

    with run_log.stage('bin'):
        dataset_agent = DatasetAgent(config.dataset.bin_width, config.dataset.window, config.dataset.split)
        cm = dataset_agent.bin_events(assigned, len(partition))

    run_log.write_output(GRAPH_FILE, graph.to_json())
    run_log.write_output(COUNTS_FILE, cm.to_csv())
    run_log.write_output(COUNTS_META_FILE, _dumps(cm.sidecar()))
    run_log.write_output(HEATMAP_FILE, ExportAgent().heatmap_geojson(partition, cm.totals()))
    run_log.summary = {
        'assignment': assignment,
        'n_regions': graph.n_nodes,
        'n_edges': len(graph.edges),
        'n_bins': cm.n_bins,
    }
    run_log.write_manifest('build', config)
    run_log.record_run('build', config, n_regions=graph.n_nodes, n_edges=len(graph.edges))
    return 0


def _load_dataset(config: RunConfig):
    out = config.paths.output_dir
    graph = RegionGraph.from_json(_read_text(out, GRAPH_FILE, 'build'))
    cm = CountMatrix.from_files(_read_text(out, COUNTS_FILE, 'build'), _read_text(out, COUNTS_META_FILE, 'build'))
    agent = DatasetAgent(config.dataset.bin_width, config.dataset.window, config.dataset.split)
    samples = agent.make_windows(cm)
    dataset: SplitDataset = agent.chronological_split(samples, n_bins=cm.n_bins)
    return graph, cm, agent, dataset


def cmd_train(config: RunConfig, run_log: LoggerAgent) -> int:
    graph, cm, dataset_agent, dataset = _load_dataset(config)
    run_log.add_dropped('straddling_windows', dataset.dropped)
    model_agent = ModelAgent(config.train)
    with run_log.stage('train'):
        result, data = model_agent.train(graph, dataset)
    with run_log.stage('evaluate'):
        reports = model_agent.evaluate_splits(result.model, data, ('val', 'test'))

    report = {name: r.to_dict() for name, r in reports.items()}
    report['config_digest'] = config.digest()
    report['best_epoch'] = result.best_epoch
    run_log.write_output(CHECKPOINT_FILE, _dumps(model_agent.checkpoint(result, data)))
    run_log.write_output(TRACE_FILE, ModelAgent.loss_trace_csv(result))
    run_log.write_output(REPORT_FILE, _dumps(report))
    run_log.summary = {'dataset': dataset_agent.describe(dataset), 'best_epoch': result.best_epoch}
    run_log.write_manifest('train', config)
    run_log.record_run('train', config, n_regions=graph.n_nodes, n_edges=len(graph.edges),
                       reports={name: r.to_dict() for name, r in reports.items()})
    return 0


def cmd_evaluate(config: RunConfig, run_log: LoggerAgent, split: str = 'test') -> int:
    graph, _, _, dataset = _load_dataset(config)
    model_agent = ModelAgent(config.train)
    checkpoint = json.loads(_read_text(config.paths.output_dir, CHECKPOINT_FILE, 'train'))
    model, scaler = model_agent.load_checkpoint(checkpoint)
    data = model_agent.prepare(graph, dataset, scaler=scaler)
    report = model_agent.evaluate_splits(model, data, (split,))[split]
    doc = {split: report.to_dict(), 'config_digest': config.digest()}
    run_log.write_output(f"evaluation_{split}.json", _dumps(doc))
    run_log.write_manifest('evaluate', config)
    return 0


def cmd_export(config: RunConfig, run_log: LoggerAgent) -> int:
    out = config.paths.output_dir
    graph = RegionGraph.from_json(_read_text(out, GRAPH_FILE, 'build'))
    cm = CountMatrix.from_files(_read_text(out, COUNTS_FILE, 'build'), _read_text(out, COUNTS_META_FILE, 'build'))
    runs = run_log.db_manager.get_recent_runs(limit=1000)
    mcc_rows = run_log.db_manager.compare_mcc()
    for row in (r for r in mcc_rows if r['mean_mcc'] is not None):
        logger.info(f"📊 {row['mapping_kind']} {row['mapping_params']}: mean MCC {row['mean_mcc']:.3f} "
                    f"over {row['runs']} runs (best {row['best_mcc']:.3f})")
    for path in ExportAgent().export_all(out, graph, cm, runs, mcc_rows):
        run_log.add_output(path)
    run_log.write_manifest('export', config)
    return 0


def cmd_synthesize(output: str, seed: int, n_events: int) -> int:
    paths = write_city(generate_city(seed=seed, n_events=n_events), output)
    print(paths['config'])
    return 0


# --- ENTRY POINT ---
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='run configuration JSON')
    common.add_argument('--output', help='output directory (overrides paths.output_dir)')
    common.add_argument('--seed', type=int, help='training / generator seed')
    common.add_argument('--log-level', choices=sorted(settings.LOG_LEVELS), help='log verbosity')

    parser = argparse.ArgumentParser(description='Map urban events onto region graphs and train a GCN baseline')
    sub = parser.add_subparsers(dest='command', required=True)
    sub.add_parser('partition', parents=[common], help='partition the city into regions')
    sub.add_parser('build', parents=[common], help='assign events, build the graph and count matrix')
    sub.add_parser('train', parents=[common], help='train the GCN and evaluate on val/test')
    evaluate = sub.add_parser('evaluate', parents=[common], help='re-evaluate a saved checkpoint')
    evaluate.add_argument('--split', choices=['train', 'val', 'test'], default='test')
    sub.add_parser('export', parents=[common], help='write map-ready GeoJSON/CSV/GraphML exports')
    synth = sub.add_parser('synthesize', parents=[common], help='generate a synthetic city')
    synth.add_argument('--events', type=int, default=5000, help='number of events')
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(settings.LOG_LEVELS.get((args.log_level or settings.LOG_LEVEL or 'info').lower(), 'INFO'))

    if args.command == 'synthesize':
        if not args.output:
            raise ConfigError("synthesize requires --output DIR")
        return cmd_synthesize(args.output, args.seed or 0, args.events)

    config = load_run_config(args.config).apply_overrides(args.output, args.seed, args.log_level)
    setup_logging(config.resolved_log_level())
    config.validate(args.command)
    os.makedirs(config.paths.output_dir, exist_ok=True)
    run_log = LoggerAgent(config.paths.output_dir)
    logger.info(f"🚀 {args.command} (config {config.digest()[:12]}, output {config.paths.output_dir})")

    if args.command == 'partition':
        return cmd_partition(config, run_log)
    if args.command == 'build':
        return cmd_build(config, run_log)
    if args.command == 'train':
        return cmd_train(config, run_log)
    if args.command == 'evaluate':
        return cmd_evaluate(config, run_log, args.split)
    return cmd_export(config, run_log)


def main(argv: Optional[List[str]] = None) -> int:
    try:
        return run(argv)
    except USAGE_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except MapperError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        logger.exception(f"Unexpected failure: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())

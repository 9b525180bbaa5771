"""
Run configuration: one JSON file, overridable from the command line.

Precedence is flag > file > environment > default.
"""
import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from typing import Any, Dict, List, Optional, Union

from config.settings import settings
from errors import ConfigError

logger = logging.getLogger(__name__)

MAPPING_KINDS = ('grid', 'admin', 'voronoi')


@dataclass
class EventSchema:
    timestamp: str = 'timestamp'
    latitude: str = 'latitude'
    longitude: str = 'longitude'
    category: str = 'category'


@dataclass
class PathsConfig:
    events: Optional[str] = None
    roads: Optional[str] = None
    admin: Optional[str] = None
    poi: Optional[str] = None
    output_dir: str = settings.DEFAULT_OUTPUT_DIR


@dataclass
class MappingConfig:
    kind: str = 'grid'
    # grid
    cell_size: float = 1000.0
    queen: bool = False
    # admin
    admin_id_property: str = 'id'
    # voronoi
    min_degree: int = 4
    d_small: float = 5000.0
    d_big: float = 20000.0
    road_snap_tol: float = settings.ROAD_SNAP_TOL
    voronoi_weights: str = 'road'
    # shared
    bbox: Optional[List[float]] = None
    shared_tol: float = settings.SHARED_BOUNDARY_TOL
    bucket_size: Optional[float] = None


@dataclass
class DatasetConfig:
    bin_width: int = 86400
    window: int = 12
    split: List[float] = field(default_factory=lambda: [0.70, 0.15, 0.15])
    normalize_features: bool = False
    workers: int = settings.ASSIGN_WORKERS


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 200
    hidden: int = 16
    seed: int = 0
    pos_weight: Union[str, float] = 'auto'
    binary_adjacency: bool = True
    threshold: float = 0.5
    log_every: int = 10


@dataclass
class RunConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    mapping: MappingConfig = field(default_factory=MappingConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    schema: EventSchema = field(default_factory=EventSchema)
    log_level: Optional[str] = None

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunConfig':
        return _build(cls, data, 'config')

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def apply_overrides(self, output_dir: Optional[str] = None, seed: Optional[int] = None,
                        log_level: Optional[str] = None) -> 'RunConfig':
        if output_dir is not None:
            self.paths.output_dir = output_dir
        if seed is not None:
            self.train.seed = int(seed)
        if log_level is not None:
            self.log_level = log_level
        return self

    def resolved_log_level(self) -> str:
        name = self.log_level or settings.LOG_LEVEL or 'info'
        level = settings.LOG_LEVELS.get(str(name).lower())
        if level is None:
            raise ConfigError(f"Unknown log level '{name}' (expected one of error, warn, info, debug)")
        return level

    def validate(self, command: str) -> None:
        """Check internal consistency and that the inputs `command` reads exist."""
        m = self.mapping
        if m.kind not in MAPPING_KINDS:
            raise ConfigError(f"mapping.kind must be exactly one of {', '.join(MAPPING_KINDS)}; got '{m.kind}'")
        if m.kind == 'grid' and m.cell_size <= 0:
            raise ConfigError("mapping.cell_size must be positive")
        if m.kind == 'voronoi':
            if m.min_degree < 1:
                raise ConfigError("mapping.min_degree must be >= 1")
            if not 0 < m.d_small < m.d_big:
                raise ConfigError("mapping requires 0 < d_small < d_big")
            if m.voronoi_weights not in ('road', 'boundary'):
                raise ConfigError("mapping.voronoi_weights must be 'road' or 'boundary'")
        if m.bbox is not None and len(m.bbox) != 4:
            raise ConfigError("mapping.bbox must be [min_lon, min_lat, max_lon, max_lat]")
        d = self.dataset
        if d.bin_width <= 0:
            raise ConfigError("dataset.bin_width must be positive")
        if d.window < 1:
            raise ConfigError("dataset.window must be >= 1")
        if len(d.split) != 3 or any(f < 0 for f in d.split) or abs(sum(d.split) - 1.0) > 1e-9:
            raise ConfigError("dataset.split must be three non-negative fractions summing to 1")
        t = self.train
        if t.learning_rate <= 0 or t.epochs < 1 or t.hidden < 1:
            raise ConfigError("train requires learning_rate > 0, epochs >= 1, hidden >= 1")
        if not (t.pos_weight == 'auto' or (isinstance(t.pos_weight, (int, float)) and t.pos_weight > 0)):
            raise ConfigError("train.pos_weight must be 'auto' or a positive number")
        self.resolved_log_level()

        for key in self.required_inputs(command):
            path = getattr(self.paths, key)
            if not path:
                raise ConfigError(f"paths.{key} is required for '{command}' with mapping '{m.kind}'")
            if not os.path.isfile(path):
                raise ConfigError(f"Input file not found: paths.{key} = {path}")

    def required_inputs(self, command: str) -> List[str]:
        needed: List[str] = []
        if command in ('partition', 'build'):
            needed.append('events')
            if self.mapping.kind == 'admin':
                needed.append('admin')
            if self.mapping.kind == 'voronoi':
                needed.append('roads')
        if command == 'build' and self.paths.poi:
            needed.append('poi')
        return needed

    def snapshot(self) -> Dict[str, Any]:
        """Config content that defines the experiment (no output/log settings)."""
        snap = self.to_dict()
        snap.pop('log_level', None)
        snap['paths'].pop('output_dir', None)
        return snap

    def digest(self) -> str:
        canonical = json.dumps(self.snapshot(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def _build(cls, data: Any, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a JSON object")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"Unknown key(s) in {where}: {', '.join(unknown)}")
    kwargs = {}
    for name, value in data.items():
        default = known[name].default_factory() if callable(known[name].default_factory) else None
        if default is not None and is_dataclass(default):
            kwargs[name] = _build(type(default), value, f"{where}.{name}")
        else:
            kwargs[name] = value
    return cls(**kwargs)


def load_run_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig()
    if not os.path.isfile(path):
        raise ConfigError(f"Config file not found: {path}")
    try:
        with open(path, 'r', encoding='utf-8') as fh:
            data = json.load(fh)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: line {e.lineno}: {e.msg}")
    config = RunConfig.from_dict(data)
    logger.debug(f"Loaded run config from {path}")
    return config

from typing import List, Dict, Any, Optional
import hashlib
import json
import logging
import os
import time
from contextlib import contextmanager
from datetime import datetime, timezone

from agents.export_agent import write_atomic
from config.run_config import RunConfig
from config.settings import settings
from database.db_manager import DatabaseManager
from errors import InputFileError

logger = logging.getLogger(__name__)

MANIFEST_NAME = 'manifest.json'
TIMINGS_NAME = 'timings.json'


def file_digest(path: str) -> str:
    h = hashlib.sha256()
    try:
        with open(path, 'rb') as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b''):
                h.update(chunk)
    except OSError as e:
        raise InputFileError(f"Cannot read {path}: {e}")
    return h.hexdigest()


class LoggerAgent:
    """Agent responsible for the run manifest and the local run store"""

    def __init__(self, output_dir: str, db_path: Optional[str] = None):
        self.output_dir = output_dir
        self.db_path = db_path or settings.runs_database_path(output_dir)
        self._db: Optional[DatabaseManager] = None
        self.input_digests: Dict[str, str] = {}
        self.timings: Dict[str, float] = {}
        self.dropped: Dict[str, int] = {}
        self.outputs: List[str] = []
        self.summary: Dict[str, Any] = {}
        logger.debug(f"LoggerAgent initialized (output={output_dir})")

    @property
    def db_manager(self) -> DatabaseManager:
        if self._db is None:
            self._db = DatabaseManager(self.db_path)
        return self._db

    @contextmanager
    def stage(self, name: str):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = round(time.perf_counter() - start, 6)
            logger.debug(f"Stage '{name}' took {self.timings[name]:.3f}s")

    def record_inputs(self, paths: Dict[str, Optional[str]]) -> Dict[str, str]:
        for key, path in sorted(paths.items()):
            if path:
                self.input_digests[key] = file_digest(path)
        return dict(self.input_digests)

    def add_dropped(self, key: str, count: int) -> None:
        self.dropped[key] = self.dropped.get(key, 0) + int(count)
        if count:
            logger.warning(f"⚠️ Dropped {count} {key}")

    def add_output(self, path: str) -> None:
        rel = os.path.relpath(path, self.output_dir)
        if rel not in self.outputs:
            self.outputs.append(rel)

    def write_output(self, name: str, text: str) -> str:
        path = os.path.join(self.output_dir, name)
        write_atomic(path, text)
        self.add_output(path)
        return path

    def manifest(self, command: str, config: RunConfig) -> Dict[str, Any]:
        return {
            'command': command,
            'config': config.snapshot(),
            'config_digest': config.digest(),
            'input_digests': dict(sorted(self.input_digests.items())),
            'stage_timings': {'file': TIMINGS_NAME, 'stages': sorted(self.timings)},
            'dropped': dict(sorted(self.dropped.items())),
            'summary': self.summary,
            'outputs': sorted(self.outputs),
        }

    def write_timings(self) -> str:
        path = os.path.join(self.output_dir, TIMINGS_NAME)
        write_atomic(path, json.dumps(dict(sorted(self.timings.items())), indent=2) + '\n')
        return path

    def write_manifest(self, command: str, config: RunConfig) -> str:
        """
        Written last, atomically; lists every output of this run.

        Wall-clock stage timings go to timings.json so identical runs
        produce identical manifests.
        """
        self.write_timings()
        path = os.path.join(self.output_dir, MANIFEST_NAME)
        write_atomic(path, json.dumps(self.manifest(command, config), indent=2, sort_keys=True) + '\n')
        logger.info(f"📝 Manifest written to {path}")
        return path

    def record_run(self, command: str, config: RunConfig, n_regions: int = 0, n_edges: int = 0,
                   success: bool = True, reports: Optional[Dict[str, Dict[str, Any]]] = None) -> Optional[int]:
        m = config.mapping
        params = {'kind': m.kind}
        if m.kind == 'grid':
            params.update(cell_size=m.cell_size, queen=m.queen)
        elif m.kind == 'admin':
            params.update(admin_id_property=m.admin_id_property)
        else:
            params.update(min_degree=m.min_degree, d_small=m.d_small, d_big=m.d_big)
        params.update(bin_width=config.dataset.bin_width, window=config.dataset.window)
        run_id = self.db_manager.insert_run({
            'timestamp': datetime.now(timezone.utc).strftime('%Y-%m-%dT%H:%M:%SZ'),
            'command': command,
            'config_digest': config.digest(),
            'mapping_kind': m.kind,
            'mapping_params': params,
            'n_regions': n_regions,
            'n_edges': n_edges,
            'success': success,
        })
        if run_id is not None:
            for split, metrics in (reports or {}).items():
                self.db_manager.insert_metrics(run_id, split, metrics)
            logger.debug(f"Run {run_id} recorded in {self.db_path}")
        return run_id

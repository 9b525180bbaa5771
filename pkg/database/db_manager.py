import sqlite3
import logging
import json
from typing import Dict, Any, List, Optional
from datetime import datetime, timezone
import os

logger = logging.getLogger(__name__)


class DatabaseManager:
    """Local run store: one row per CLI run plus per-split metrics"""

    def __init__(self, db_path: str):
        self.db_path = db_path

        # Ensure database directory exists
        db_dir = os.path.dirname(db_path)
        if db_dir and not os.path.exists(db_dir):
            os.makedirs(db_dir)

        self._init_database()
        logger.debug(f"DatabaseManager initialized with path: {db_path}")

    def _init_database(self):
        """Initialize database tables"""
        try:
            with sqlite3.connect(self.db_path) as conn:
                cursor = conn.cursor()

                cursor.execute('''
                    CREATE TABLE IF NOT EXISTS runs (
                        id INTEGER PRIMARY KEY AUTOINCREMENT,
                        timestamp TEXT NOT NULL,
                        command TEXT NOT NULL,
                        config_digest TEXT NOT NULL,
                        mapping_kind TEXT NOT NULL,
                        mapping_params TEXT DEFAULT '{}',
                        n_regions INTEGER DEFAULT 0,
                        n_edges INTEGER DEFAULT 0,
                        success BOOLEAN DEFAULT 0
                    )
                ''')

                cursor.execute('''
                    CREATE TABLE IF NOT EXISTS run_metrics (
                        run_id INTEGER NOT NULL REFERENCES runs(id),
                        split TEXT NOT NULL,
                        auc REAL,
                        accuracy REAL NOT NULL,
                        balanced_accuracy REAL NOT NULL,
                        f1 REAL NOT NULL,
                        mcc REAL NOT NULL,
                        PRIMARY KEY (run_id, split)
                    )
                ''')

                conn.commit()

        except Exception as e:
            logger.error(f"Error initializing run store: {e}")
            raise

    def insert_run(self, run_data: Dict[str, Any]) -> Optional[int]:
        """Insert a run record; returns its id, or None on failure"""
        try:
            with sqlite3.connect(self.db_path) as conn:
                cursor = conn.cursor()
                cursor.execute('''
                    INSERT INTO runs (
                        timestamp, command, config_digest, mapping_kind,
                        mapping_params, n_regions, n_edges, success
                    ) VALUES (?, ?, ?, ?, ?, ?, ?, ?)
                ''', (
                    run_data.get('timestamp') or datetime.now(timezone.utc).strftime('%Y-%m-%dT%H:%M:%SZ'),
                    run_data.get('command', ''),
                    run_data.get('config_digest', ''),
                    run_data.get('mapping_kind', ''),
                    json.dumps(run_data.get('mapping_params', {}), sort_keys=True),
                    int(run_data.get('n_regions', 0)),
                    int(run_data.get('n_edges', 0)),
                    bool(run_data.get('success', False)),
                ))
                conn.commit()
                return cursor.lastrowid

        except Exception as e:
            logger.error(f"Error inserting run: {e}")
            return None

    def insert_metrics(self, run_id: int, split: str, metrics: Dict[str, Any]) -> bool:
        try:
            with sqlite3.connect(self.db_path) as conn:
                conn.execute('''
                    INSERT OR REPLACE INTO run_metrics (
                        run_id, split, auc, accuracy, balanced_accuracy, f1, mcc
                    ) VALUES (?, ?, ?, ?, ?, ?, ?)
                ''', (
                    run_id, split, metrics.get('auc'), metrics['accuracy'],
                    metrics['balanced_accuracy'], metrics['f1'], metrics['mcc'],
                ))
                conn.commit()
                return True

        except Exception as e:
            logger.error(f"Error inserting metrics for run {run_id}: {e}")
            return False

    def get_recent_runs(self, limit: int = 20) -> List[Dict[str, Any]]:
        """Most recent runs first, joined with their test-split metrics"""
        try:
            with sqlite3.connect(self.db_path) as conn:
                conn.row_factory = sqlite3.Row
                cursor = conn.cursor()
                cursor.execute('''
                    SELECT r.*, m.auc, m.accuracy, m.balanced_accuracy, m.f1, m.mcc
                    FROM runs r
                    LEFT JOIN run_metrics m ON m.run_id = r.id AND m.split = 'test'
                    ORDER BY r.id DESC
                    LIMIT ?
                ''', (limit,))
                return [dict(row) for row in cursor.fetchall()]

        except Exception as e:
            logger.error(f"Error getting recent runs: {e}")
            return []

    def get_run_count(self) -> int:
        try:
            with sqlite3.connect(self.db_path) as conn:
                cursor = conn.cursor()
                cursor.execute('SELECT COUNT(*) FROM runs')
                return cursor.fetchone()[0]

        except Exception as e:
            logger.error(f"Error getting run count: {e}")
            return 0

    def compare_mcc(self, mapping_kind: Optional[str] = None) -> List[Dict[str, Any]]:
        """Test MCC of every successful training run, grouped by mapping parameters"""
        try:
            with sqlite3.connect(self.db_path) as conn:
                conn.row_factory = sqlite3.Row
                cursor = conn.cursor()
                query = '''
                    SELECT r.mapping_kind, r.mapping_params, COUNT(*) AS runs,
                           AVG(m.mcc) AS mean_mcc, MAX(m.mcc) AS best_mcc
                    FROM runs r JOIN run_metrics m ON m.run_id = r.id AND m.split = 'test'
                    WHERE r.success = 1
                '''
                params: tuple = ()
                if mapping_kind:
                    query += ' AND r.mapping_kind = ?'
                    params = (mapping_kind,)
                query += ' GROUP BY r.mapping_kind, r.mapping_params ORDER BY mean_mcc DESC'
                cursor.execute(query, params)
                return [dict(row) for row in cursor.fetchall()]

        except Exception as e:
            logger.error(f"Error comparing MCC: {e}")
            return []

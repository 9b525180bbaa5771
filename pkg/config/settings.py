import os
from dotenv import load_dotenv

load_dotenv()


class Settings:
    # Logging Configuration
    LOG_LEVEL = os.getenv('STM_LOG_LEVEL')
    LOG_FILE = os.getenv('STM_LOG_FILE')

    # Output / run store
    DEFAULT_OUTPUT_DIR = os.getenv('STM_OUTPUT_DIR', './output')
    RUNS_DATABASE_PATH = os.getenv('STM_RUNS_DB')

    # Parallelism for event assignment
    ASSIGN_WORKERS = int(os.getenv('STM_WORKERS', 1))

    # Geometry tolerances (metres, square metres)
    SHARED_BOUNDARY_TOL = float(os.getenv('STM_SHARED_TOL', 0.01))
    ROAD_SNAP_TOL = float(os.getenv('STM_ROAD_SNAP_TOL', 0.5))
    ADMIN_OVERLAP_TOL = float(os.getenv('STM_ADMIN_OVERLAP_TOL', 1.0))

    # Log level names accepted on the command line / in config files
    LOG_LEVELS = {
        'error': 'ERROR',
        'warn': 'WARNING',
        'warning': 'WARNING',
        'info': 'INFO',
        'debug': 'DEBUG',
    }

    def runs_database_path(self, output_dir: str) -> str:
        """Run store location; defaults to a file inside the output directory"""
        return self.RUNS_DATABASE_PATH or os.path.join(output_dir, 'runs.db')


settings = Settings()

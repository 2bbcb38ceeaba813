"""
Configuration for the DAB verifier application
"""
import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Project paths
PROJECT_ROOT = Path(__file__).parent.parent
DATA_DIR = PROJECT_ROOT / "data"
MODELS_DIR = DATA_DIR / "models"
PROPERTIES_DIR = DATA_DIR / "properties"
CATALOGS_DIR = DATA_DIR / "catalogs"
SUITES_DIR = DATA_DIR / "suites"

APP_NAME = "dab-verifier"
APP_VERSION = "1.0.0"
APP_DESCRIPTION = """
Verifier for data-aware, block-structured business processes.

Models are validated, classified against the decidability conditions,
compiled into array-based artifact systems and checked by backward
reachability. UNSAFE traces are replayed on concrete catalogs.
"""

# Solver configuration
SMT_SOLVER = os.getenv("DABV_SMT_SOLVER")  # e.g. "z3 -in -smt2" or "z3py"; unset = internal procedure
SOLVER_TIMEOUT_MS = int(os.getenv("DABV_TIMEOUT_MS", "10000"))

# Search limits
MAX_NODES = 100000
MAX_SECONDS = 600  # seconds per verification run

# Randomised suites and benchmarks
DEFAULT_SEED = int(os.getenv("DABV_SEED", "20201"))
DEFAULT_JOBS = int(os.getenv("DABV_JOBS", str(min(4, os.cpu_count() or 1))))

# Oracle defaults
ORACLE_MAX_CASES = 2
ORACLE_MAX_ROWS = 3
ORACLE_MAX_STEPS = 500
ORACLE_FRESH_VALUES = 1
ORACLE_CATALOG_SIZE = 1
ORACLE_MAX_STATES = 200000

# Log capture per run
MAX_CAPTURED_LOGS = 100

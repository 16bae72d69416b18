import os
import logging
from dotenv import load_dotenv

logger = logging.getLogger(__name__)

# Load .env from the project root (one level above src/)
ROOT_DIR = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
dotenv_path = os.path.join(ROOT_DIR, '.env')
if os.path.exists(dotenv_path):
    load_dotenv(dotenv_path=dotenv_path)
    logger.debug(f"[Settings] Loaded .env from: {dotenv_path}")
else:
    load_dotenv()  # Fallback to default search

LOG_LEVEL = os.getenv("LAB_LOG_LEVEL", "INFO").upper()
OUTPUT_DIR = os.getenv("LAB_OUTPUT_DIR", os.path.join(ROOT_DIR, "output"))
CACHE_DIR = os.getenv("LAB_CACHE_DIR", os.path.join(ROOT_DIR, ".lab_cache"))

try:
    THREADS = max(1, int(os.getenv("LAB_THREADS", "4")))
except ValueError:
    logger.warning(f"[Settings] LAB_THREADS={os.getenv('LAB_THREADS')!r} is not an integer, using 4.")
    THREADS = 4

LOG_FORMAT = '%(asctime)s - %(levelname)s - [%(name)s] - %(message)s'


def configure_logging(level: str = LOG_LEVEL):
    """Root logging setup used by the CLI entry point."""
    logging.basicConfig(level=getattr(logging, level, logging.INFO), format=LOG_FORMAT)

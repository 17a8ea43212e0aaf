from src.core.config import settings

CACHE_DIR = settings.CACHE_DIR
DENSITY_CACHE_FILE = "densities.jsonl"

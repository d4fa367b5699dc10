# backend/settings.py
import os

from dotenv import load_dotenv

# local .env overrides
load_dotenv()

LOG_LEVELS = ("CRITICAL", "ERROR", "WARNING", "INFO", "DEBUG")


def log_level_name(raw, fallback="WARNING"):
    """Upper-cased level name, or ``fallback`` when ``raw`` is not one of LOG_LEVELS."""
    name = str(raw or "").strip().upper()
    return name if name in LOG_LEVELS else fallback


# ----------------------
# CONFIG
# ----------------------
DEFAULT_SEED = int(os.environ.get("FRACHEAT_SEED", "20240601"))
MAX_GRID_POINTS = int(os.environ.get("FRACHEAT_MAX_GRID_POINTS", "64"))
LOG_LEVEL = log_level_name(os.environ.get("FRACHEAT_LOG_LEVEL"))


def default_threads():
    """Worker cap: FRACHEAT_THREADS if set, otherwise the CPU count."""
    raw = os.environ.get("FRACHEAT_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            return 1
    return max(1, os.cpu_count() or 1)

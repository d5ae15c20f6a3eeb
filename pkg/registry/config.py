"""
Registry settings, read from the environment (a ``.env`` file in the working
directory is honoured).
"""
import os
from pathlib import Path

from dotenv import load_dotenv

import validation

load_dotenv()

CACHE_DIR_VAR = 'RECDATA_CACHE_DIR'
CATALOG_VAR = 'RECDATA_CATALOG'
RETRIES_VAR = 'RECDATA_DOWNLOAD_RETRIES'
RETRY_MS_VAR = 'RECDATA_RETRY_MS'
TIMEOUT_VAR = 'RECDATA_TIMEOUT_S'
LOCK_TIMEOUT_VAR = 'RECDATA_LOCK_TIMEOUT_S'

DEFAULT_CACHE_DIR = Path.home() / '.cache' / 'recdata'
USER_CATALOG_FILE = 'catalog.yml'


def _int_setting(var: str, default: int, min_value: int = 0) -> int:
    raw = os.getenv(var, str(default))
    try:
        value = int(raw)
    except ValueError:
        raise validation.ValidationError(f'{var} must be an integer: {raw!r}')
    validation.validate_integer(value, var, min_value=min_value)
    return value


def cache_dir() -> Path:
    return Path(os.getenv(CACHE_DIR_VAR) or DEFAULT_CACHE_DIR)


def user_catalog_path() -> Path:
    """User catalog overlay; defaults to ``catalog.yml`` in the cache."""
    return Path(os.getenv(CATALOG_VAR) or cache_dir() / USER_CATALOG_FILE)


def download_retries() -> int:
    return _int_setting(RETRIES_VAR, 3, min_value=1)


def retry_ms() -> int:
    return _int_setting(RETRY_MS_VAR, 500)


def timeout_s() -> int:
    return _int_setting(TIMEOUT_VAR, 60, min_value=1)


def lock_timeout_s() -> int:
    return _int_setting(LOCK_TIMEOUT_VAR, 600, min_value=1)

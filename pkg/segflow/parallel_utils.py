import os
from concurrent.futures import ThreadPoolExecutor

from .errors import ConfigurationError

THREADS_ENV = "SEGFLOW_THREADS"


def max_workers():
    """Worker cap from SEGFLOW_THREADS, defaulting to the CPU count."""
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigurationError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    if value < 1:
        raise ConfigurationError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return value


def parallel_map(fn, items):
    """Map fn over items, in order, on at most max_workers() threads.

    Results come back in input order so downstream reductions stay reproducible.
    """
    items = list(items)
    workers = min(max_workers(), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, items))

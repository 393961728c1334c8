"""Ordered parallel map over sample indices, capped by ``RML_THREADS``."""
import os
from concurrent.futures import ThreadPoolExecutor

from .errors import ConfigError

__all__ = ["worker_count", "map_ordered"]


def worker_count(requested=None) -> int:
    """Number of workers: ``requested``, else ``RML_THREADS``, else the CPU count."""
    n = requested
    if n is None:
        env = os.environ.get("RML_THREADS")
        try:
            n = int(env) if env else (os.cpu_count() or 1)
        except ValueError:
            raise ConfigError(f"RML_THREADS must be an integer, got {env!r}") from None
    return max(1, int(n))


def map_ordered(fn, items, workers=None):
    """``[fn(x) for x in items]`` evaluated on a thread pool, results in input order.

    NumPy's linear algebra releases the GIL, so threads give real speedups
    for the eigendecompositions that dominate the Monte Carlo workers.
    """
    items = list(items)
    n = min(worker_count(workers), max(1, len(items)))
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))

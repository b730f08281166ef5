"""
Cache layer.

In-process memoization is backed by cachetools; resumable experiment
results are persisted with diskcache.
"""
from pathlib import Path
from typing import Any, Callable, TypeVar

from cachetools import LRUCache
from diskcache import Cache

from pmac.config import CACHE_DIR

T = TypeVar("T")


def create_lru_cache(maxsize: int = 100) -> LRUCache:
    """
    Create an LRU cache (evicts least recently used).

    Args:
        maxsize: Maximum number of items in cache

    Returns:
        LRUCache instance
    """
    return LRUCache(maxsize=maxsize)


def cached_call(cache: Any, key: Any, loader: Callable[[], T]) -> T:
    """
    Get value from cache or load and store it.

    Unlike a plain memo decorator, loader errors propagate and nothing is
    cached for the key.

    Example:
        block = cached_call(_blocks, (K, S, start, stop), lambda: decode(start, stop))
    """
    try:
        return cache[key]
    except KeyError:
        value = loader()
        cache[key] = value
        return value


class TrialCache:
    """Persistent per-trial results keyed by experiment fingerprint.

    Rows are stored as plain dicts so a resumed run reproduces the table a
    fresh run would write.
    """

    def __init__(self, fingerprint: str, directory: Path | None = None):
        self.fingerprint = fingerprint
        self.directory = Path(directory) if directory is not None else CACHE_DIR / "trials"
        self._cache = Cache(str(self.directory), eviction_policy="least-recently-used")

    def _key(self, trial_index: int) -> str:
        return f"{self.fingerprint}:{trial_index}"

    def get(self, trial_index: int) -> list[dict] | None:
        return self._cache.get(self._key(trial_index))

    def put(self, trial_index: int, rows: list[dict]) -> None:
        self._cache.set(self._key(trial_index), rows)

    def __contains__(self, trial_index: int) -> bool:
        return self._key(trial_index) in self._cache

    def close(self) -> None:
        self._cache.close()

    def __enter__(self) -> "TrialCache":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

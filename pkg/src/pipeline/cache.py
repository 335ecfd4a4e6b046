"""Memoisation of label-free subtree outputs."""

from collections import OrderedDict
from typing import Callable, Hashable, Optional
import logging
import threading

import numpy as np

from src.config import get_settings

logger = logging.getLogger(__name__)


class SubtreeCache:
    """
    Bounded LRU map from (dataset key, canonical subtree text) to node output.

    Only IMAGE/FEATURES subtrees without classifier descendants are stored;
    their outputs depend on the images alone. Stored arrays are read-only.
    The map is bounded both by entry count and by the total ``nbytes`` of the
    stored arrays, and is emptied whenever a new generation starts.
    """

    def __init__(self, max_entries: int = 20000, max_bytes: Optional[int] = None):
        self.max_entries = max_entries
        self.max_bytes = max_bytes
        self.generation: Optional[int] = None
        self._entries: OrderedDict[Hashable, np.ndarray] = OrderedDict()
        self._bytes = 0
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: Hashable) -> bool:
        return key in self._entries

    @property
    def nbytes(self) -> int:
        return self._bytes

    def get_or_compute(self, key: Hashable, compute: Callable[[], np.ndarray]) -> np.ndarray:
        with self._lock:
            value = self._entries.get(key)
            if value is not None:
                self._entries.move_to_end(key)
                self.hits += 1
                return value

        value = compute()
        value.setflags(write=False)
        with self._lock:
            self.misses += 1
            if self.max_bytes is not None and value.nbytes > self.max_bytes:
                return value
            previous = self._entries.pop(key, None)
            if previous is not None:
                self._bytes -= previous.nbytes
            self._entries[key] = value
            self._bytes += value.nbytes
            self._evict()
        return value

    def _evict(self) -> None:
        while len(self._entries) > self.max_entries or (
            self.max_bytes is not None and self._bytes > self.max_bytes
        ):
            _, dropped = self._entries.popitem(last=False)
            self._bytes -= dropped.nbytes

    def start_generation(self, generation: int) -> None:
        """Forget outputs computed for an earlier generation."""
        with self._lock:
            if generation == self.generation:
                return
            self.generation = generation
            self._entries.clear()
            self._bytes = 0

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()
            self._bytes = 0
            self.generation = None
            self.hits = 0
            self.misses = 0

    def stats(self) -> dict[str, int]:
        return {
            "entries": len(self._entries),
            "bytes": self._bytes,
            "hits": self.hits,
            "misses": self.misses,
        }


_process_cache: Optional[SubtreeCache] = None


def get_cache() -> Optional[SubtreeCache]:
    """Per-process cache, or None when caching is disabled in settings."""
    global _process_cache
    settings = get_settings()
    if not settings.cache_enabled:
        return None
    if _process_cache is None:
        _process_cache = SubtreeCache(settings.cache_max_entries, settings.cache_max_bytes)
        logger.debug(
            "Created subtree cache with %d entries, %d bytes",
            settings.cache_max_entries, settings.cache_max_bytes,
        )
    return _process_cache


def start_generation(generation: int) -> None:
    """Scope this process's cache to ``generation``; runs inside pool workers too."""
    cache = get_cache()
    if cache is not None:
        cache.start_generation(generation)

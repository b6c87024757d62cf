import threading
import logging
from typing import Callable, Generic, Hashable, Optional, TypeVar

import numpy as np
from cachetools import LRUCache
from app.core.config import settings

T = TypeVar('T')
logger = logging.getLogger(__name__)


class ComputationCache(Generic[T]):
    """
    Thread-safe LRU memoization of deterministic numerical results.
    Used for the control unitaries shared by every likelihood evaluation of a round.
    """

    def __init__(self, max_size: int = None):
        """
        Initialize the cache with the given capacity

        Args:
            max_size: Maximum number of items in the cache
        """
        self.max_size = max_size or settings.CACHE_MAX_SIZE
        self.cache = LRUCache(maxsize=self.max_size)
        self.hits = 0
        self.misses = 0

        # Lock for thread safety when seeds fan out across workers
        self.lock = threading.RLock()

    def get(self, key: Hashable, compute_func: Callable[[], T] = None) -> Optional[T]:
        """
        Get an item from cache, computing and storing it on a miss

        Args:
            key: Cache key
            compute_func: Optional function producing the value

        Returns:
            Cached or freshly computed value, None on a miss without compute_func
        """
        with self.lock:
            if key in self.cache:
                self.hits += 1
                return self.cache[key]
            self.misses += 1

        if compute_func is None:
            return None

        logger.debug(f"Cache miss for key: {key}")
        value = compute_func()
        if isinstance(value, np.ndarray):
            value.setflags(write=False)
        self.set(key, value)
        return value

    def set(self, key: Hashable, value: T) -> None:
        with self.lock:
            self.cache[key] = value

    def invalidate(self, key: Hashable) -> None:
        with self.lock:
            self.cache.pop(key, None)

    def clear(self) -> None:
        """Clear the entire cache"""
        with self.lock:
            self.cache.clear()
            self.hits = 0
            self.misses = 0
            logger.debug("Cache cleared")

    def __len__(self) -> int:
        with self.lock:
            return len(self.cache)


# Global cache of control unitaries e^{iH(Ω̂)dt}
unitary_cache = ComputationCache[np.ndarray]()

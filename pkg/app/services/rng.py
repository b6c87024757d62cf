import logging
from typing import List, Optional, Sequence

import numpy as np

from app.core.errors import InputValidationError

logger = logging.getLogger(__name__)

SEED_LIMIT = 2 ** 64


class RngStream:
    """
    Seeded random stream backed by numpy's counter-based Philox generator.

    Philox output depends only on the seed sequence and the counter, so
    identical seeds give identical draws on every platform. A stream must
    not be shared between concurrent tasks; use spawn() for per-task streams.
    """

    def __init__(self, seed: int, _sequence: Optional[np.random.SeedSequence] = None):
        if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or not 0 <= int(seed) < SEED_LIMIT:
            raise InputValidationError(f"Seed must be an integer in [0, 2**64), got {seed!r}")
        self.seed = int(seed)
        self._sequence = _sequence if _sequence is not None else np.random.SeedSequence(self.seed)
        self._generator = np.random.Generator(np.random.Philox(self._sequence))

    @property
    def spawn_key(self) -> tuple:
        return tuple(self._sequence.spawn_key)

    @property
    def counter(self) -> np.ndarray:
        """Current Philox counter"""
        return np.asarray(self._generator.bit_generator.state["state"]["counter"]).copy()

    def spawn(self, n: int) -> List["RngStream"]:
        """Independent child streams, reproducible from the parent seed"""
        return [RngStream(self.seed, _sequence=child) for child in self._sequence.spawn(n)]

    def multinomial(self, shots: int, probabilities: Sequence[float]) -> np.ndarray:
        p = np.clip(np.asarray(probabilities, dtype=float), 0.0, None)
        p = p / p.sum()
        return self._generator.multinomial(int(shots), p)

    def normal(self, size=None) -> np.ndarray:
        return self._generator.standard_normal(size)

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None) -> np.ndarray:
        return self._generator.uniform(low, high, size)

    def derive_seed(self) -> int:
        """Draw a 64-bit seed for a run that owns its own stream"""
        return int(self._generator.integers(0, SEED_LIMIT, dtype=np.uint64))

    def unit_vector(self, dim: int) -> np.ndarray:
        vec = self.normal(dim)
        return vec / np.linalg.norm(vec)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, spawn_key={self.spawn_key})"

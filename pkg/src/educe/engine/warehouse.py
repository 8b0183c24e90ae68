"""The value warehouse: a memo cache from context keys to computed values."""

from __future__ import annotations

import threading


class Warehouse:
    """Stores at most one value per key; the first writer wins.

    Values for a key are deterministic, so a concurrent recompute of the same
    key must arrive at the same value and may be dropped. hits + misses always
    equals the number of lookups.
    """

    def __init__(self) -> None:
        self._memo: dict[str, int] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0
        self.stores = 0

    def lookup(self, key: str) -> int | None:
        with self._lock:
            if key in self._memo:
                self.hits += 1
                return self._memo[key]
            self.misses += 1
            return None

    def store(self, key: str, value: int) -> int:
        with self._lock:
            if key not in self._memo:
                self._memo[key] = value
                self.stores += 1
            return self._memo[key]

    def __len__(self) -> int:
        return len(self._memo)

    def __contains__(self, key: str) -> bool:
        return key in self._memo

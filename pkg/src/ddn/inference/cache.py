"""LRU cache of folded networks keyed by embedding fingerprint."""

from __future__ import annotations

from collections import OrderedDict

from ..dynnet.network import FoldedNetwork


class FoldCache:
    def __init__(self, capacity: int = 8):
        if capacity < 1:
            raise ValueError(f"cache capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._entries: OrderedDict[str, FoldedNetwork] = OrderedDict()

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, fingerprint: str) -> bool:
        return fingerprint in self._entries

    def get(self, fingerprint: str) -> FoldedNetwork | None:
        net = self._entries.get(fingerprint)
        if net is not None:
            self._entries.move_to_end(fingerprint)
        return net

    def put(self, fingerprint: str, net: FoldedNetwork) -> None:
        self._entries[fingerprint] = net
        self._entries.move_to_end(fingerprint)
        while len(self._entries) > self.capacity:
            self._entries.popitem(last=False)

    def fingerprints(self) -> list[str]:
        """Oldest-first key order, for inspection in tests."""
        return list(self._entries)

"""
hashing.py — Seeded MurmurHash3 family for page-localized sketches.

Seed derivation
---------------
A 32-bit base seed is taken from the master seed:

    base = murmur3_32(le_u64(master_seed), seed=0)

Hash index i then uses seed (base + i) mod 2**32. Index 0 is reserved for
the page selector h0; the row hashes h1..hr use indices 1..depth. Seeds are
therefore pairwise distinct for any depth < 2**32.

Every hash is the low 64 bits of murmur3_x64_128 over the key bytes, unsigned,
reduced modulo its range. Integer keys are hashed as 8 little-endian bytes
(taken modulo 2**64), str keys as UTF-8, bytes as-is. A sketch file is only
readable with the family rebuilt from the master seed stored in its header.
"""

from dataclasses import dataclass, field
from typing import Iterable, Union

import mmh3

Key = Union[int, str, bytes]

_U64_MASK = (1 << 64) - 1
_U32_MASK = (1 << 32) - 1
PAGE_SELECTOR_INDEX = 0


def key_bytes(key: Key) -> bytes:
    if isinstance(key, bytes):
        return key
    if isinstance(key, str):
        return key.encode("utf-8")
    return (int(key) & _U64_MASK).to_bytes(8, "little")


def derive_seed(master_seed: int, index: int) -> int:
    base = mmh3.hash(key_bytes(master_seed), 0, signed=False)
    return (base + index) & _U32_MASK


def hash64(data: bytes, seed: int) -> int:
    return mmh3.hash64(data, seed, signed=False)[0]


@dataclass(frozen=True)
class HashFamily:
    """h0 picks one of page_count pages; h1..h_depth pick a column inside it."""

    master_seed: int
    depth: int
    page_count: int
    columns_per_page: int
    _page_seed: int = field(init=False, repr=False)
    _row_seeds: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError(f"depth must be >= 1, got {self.depth}")
        if self.page_count < 1:
            raise ValueError(f"page_count must be >= 1, got {self.page_count}")
        if self.columns_per_page < 1:
            raise ValueError(f"columns_per_page must be >= 1, got {self.columns_per_page}")
        object.__setattr__(self, "master_seed", int(self.master_seed) & _U64_MASK)
        object.__setattr__(self, "_page_seed", derive_seed(self.master_seed, PAGE_SELECTOR_INDEX))
        object.__setattr__(self, "_row_seeds", tuple(
            derive_seed(self.master_seed, i) for i in range(1, self.depth + 1)
        ))

    @property
    def width(self) -> int:
        return self.page_count * self.columns_per_page

    @property
    def row_seeds(self) -> tuple:
        return self._row_seeds

    @property
    def page_seed(self) -> int:
        return self._page_seed

    def page_index(self, key: Key) -> int:
        return hash64(key_bytes(key), self._page_seed) % self.page_count

    def page_indices(self, keys: Iterable[Key]) -> list[int]:
        seed, k = self._page_seed, self.page_count
        return [hash64(key_bytes(key), seed) % k for key in keys]

    def column_offsets(self, key: Key) -> list[int]:
        data = key_bytes(key)
        cpp = self.columns_per_page
        return [hash64(data, seed) % cpp for seed in self._row_seeds]

    def localized_columns(self, key: Key) -> list[int]:
        """Global columns of the key's cells, all inside its page span."""
        data = key_bytes(key)
        cpp = self.columns_per_page
        start = (hash64(data, self._page_seed) % self.page_count) * cpp
        return [start + hash64(data, seed) % cpp for seed in self._row_seeds]

    def spread_columns(self, key: Key) -> list[int]:
        """Classical count-min columns: each row hash ranges over the full width."""
        data = key_bytes(key)
        width = self.width
        return [hash64(data, seed) % width for seed in self._row_seeds]

    def columns(self, key: Key, localized: bool) -> list[int]:
        return self.localized_columns(key) if localized else self.spread_columns(key)

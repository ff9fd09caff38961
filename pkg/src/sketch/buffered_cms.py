"""
Buffered count-min sketch over paged storage.

Each key is routed by h0 to one logical page and its depth row hashes stay
inside that page's column span. Updates are staged as (column offsets, count)
entries in the page's in-memory sub-buffer; when a sub-buffer fills, its page is
read once, every staged entry is applied, and the page is written back once.

An estimate reads the key's page, folds in any staged entries for that page,
and takes the row minimum. The page is written back only when staged entries
were applied, so an estimate against an empty sub-buffer costs one page read.

Staged entries leave a sub-buffer only once their page write succeeds, so a
failed write keeps them pending. If applying a sub-buffer would overflow a
counter, the page is not written; the sub-buffer is emptied, its counts are
taken back out of total_inserted and CounterOverflowError is raised.
"""

from dataclasses import dataclass, field

import numpy as np

from hashing import HashFamily, Key
from sketch.core_cms import CounterMatrix, CounterOverflowError, SketchParams, derive_params_from_geometry
from sketch.paged_store import FileBackend, StorageBackend

COUNT_BYTES = 4


def entry_bytes(depth: int, columns_per_page: int) -> int:
    """Bytes one staged update occupies: depth column offsets plus a count."""
    offset_bytes = 2 if columns_per_page <= 1 << 16 else 4
    return depth * offset_bytes + COUNT_BYTES


def sub_buffer_capacity(params: SketchParams) -> int:
    if params.buffer_bytes <= 0:
        raise ValueError("buffered sketch needs buffer_bytes > 0")
    per_page = params.buffer_bytes // params.page_count
    capacity = per_page // entry_bytes(params.depth, params.columns_per_page)
    if capacity < 1:
        raise ValueError(
            f"buffer of {params.buffer_bytes}B over {params.page_count} pages leaves "
            f"{per_page}B per sub-buffer, less than one "
            f"{entry_bytes(params.depth, params.columns_per_page)}B entry"
        )
    return capacity


@dataclass
class SubBuffer:
    page_id: int
    capacity_entries: int
    offsets: list = field(default_factory=list)
    counts: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.counts)

    @property
    def is_full(self) -> bool:
        return len(self.counts) >= self.capacity_entries

    @property
    def entries(self) -> list[tuple[list[int], int]]:
        return list(zip(self.offsets, self.counts))

    def append(self, offsets: list[int], count: int) -> None:
        self.offsets.append(offsets)
        self.counts.append(count)

    def clear(self) -> None:
        self.offsets.clear()
        self.counts.clear()


@dataclass
class IoReport:
    page_reads: int
    page_writes: int
    updates_applied: int
    predicted_amortized: float

    @property
    def measured_amortized(self) -> float:
        if not self.updates_applied:
            return 0.0
        return (self.page_reads + self.page_writes) / self.updates_applied


class BufferedCountMinSketch:
    def __init__(self, params: SketchParams, family: HashFamily, store: StorageBackend,
                 total_inserted: int = 0):
        if (family.page_count, family.columns_per_page, family.depth) != \
                (params.page_count, params.columns_per_page, params.depth):
            raise ValueError("hash family geometry does not match the sketch parameters")
        self.params = params
        self.family = family
        self.store = store
        self.layout = store.layout
        self.capacity_entries = sub_buffer_capacity(params)
        self.entry_bytes = entry_bytes(params.depth, params.columns_per_page)
        self.sub_buffers = [SubBuffer(i, self.capacity_entries) for i in range(params.page_count)]
        self.total_inserted = total_inserted
        self.updates = 0
        self.updates_applied = 0
        self.flushes = 0
        self._limit = int(np.iinfo(self.layout.dtype).max)
        self._rows = np.arange(params.depth)

    @classmethod
    def create(cls, path: str, params: SketchParams, master_seed: int) -> "BufferedCountMinSketch":
        store = FileBackend.create(path, params.layout, master_seed, localized=True)
        return cls(params, params.family(master_seed), store)

    @classmethod
    def open(cls, path: str, buffer_bytes: int) -> "BufferedCountMinSketch":
        store = FileBackend.open(path)
        header = store.header
        if not header.localized:
            store.close()
            raise ValueError(f"{path} holds a classical sketch, not a page-localized one")
        params = derive_params_from_geometry(
            header.depth, header.page_count, header.width // header.page_count,
            header.cell_bytes, header.page_bytes, buffer_bytes,
        )
        return cls(params, params.family(header.master_seed), store, header.total_inserted)

    @property
    def pending_entries(self) -> int:
        return sum(len(sb) for sb in self.sub_buffers)

    def update(self, key: Key, count: int = 1) -> None:
        if count < 1:
            raise ValueError(f"count must be a positive integer, got {count}")
        sub_buffer = self.sub_buffers[self.family.page_index(key)]
        sub_buffer.append(self.family.column_offsets(key), count)
        self.total_inserted += count
        self.updates += 1
        if sub_buffer.is_full:
            self._flush(sub_buffer)

    def estimate(self, key: Key) -> int:
        page_id = self.family.page_index(key)
        page = self.store.read_page(page_id)
        block = self.layout.cells(page)
        sub_buffer = self.sub_buffers[page_id]
        dirty = len(sub_buffer) > 0
        if dirty:
            self._apply(sub_buffer, block)
        value = int(block[self.family.column_offsets(key), self._rows].min())
        if dirty:
            self.store.write_page(page_id, page)
            self._commit(sub_buffer)
        return value

    def flush_all(self) -> None:
        for sub_buffer in self.sub_buffers:
            if len(sub_buffer):
                self._flush(sub_buffer)
        self.store.flush_header(self.total_inserted)

    def close(self) -> None:
        try:
            self.flush_all()
        finally:
            self.store.close()

    def io_report(self) -> IoReport:
        stats = self.store.stats
        return IoReport(
            page_reads=stats.page_reads,
            page_writes=stats.page_writes,
            updates_applied=self.updates_applied,
            predicted_amortized=self.params.page_count * self.entry_bytes / self.params.buffer_bytes,
        )

    def snapshot(self) -> CounterMatrix:
        """Stored matrix as-is; staged entries are not included."""
        return CounterMatrix.from_pages(self.params, self.store, self.total_inserted)

    def _flush(self, sub_buffer: SubBuffer) -> None:
        page = self.store.read_page(sub_buffer.page_id)
        self._apply(sub_buffer, self.layout.cells(page))
        self.store.write_page(sub_buffer.page_id, page)
        self._commit(sub_buffer)
        self.flushes += 1

    def _apply(self, sub_buffer: SubBuffer, block: np.ndarray) -> None:
        """Add staged entries to a page view. Entries stay staged until _commit."""
        offsets = np.asarray(sub_buffer.offsets, dtype=np.int64)
        counts = np.asarray(sub_buffer.counts, dtype=np.uint64)
        delta = np.zeros(block.shape, dtype=np.uint64)
        np.add.at(delta, (offsets, np.broadcast_to(self._rows, offsets.shape)),
                  counts[:, None])
        if np.any(delta > np.uint64(self._limit) - block.astype(np.uint64)):
            dropped = self._discard(sub_buffer)
            raise CounterOverflowError(
                f"applying sub-buffer of page {sub_buffer.page_id} would overflow; "
                f"{dropped} staged update(s) discarded"
            )
        block += delta.astype(block.dtype)

    def _commit(self, sub_buffer: SubBuffer) -> None:
        self.updates_applied += len(sub_buffer)
        sub_buffer.clear()

    def _discard(self, sub_buffer: SubBuffer) -> int:
        # The page is left untouched, so the staged counts leave the total too.
        dropped = len(sub_buffer)
        self.total_inserted -= sum(sub_buffer.counts)
        sub_buffer.clear()
        return dropped

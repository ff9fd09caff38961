"""
Count-min sketch parameters, counter matrix and the unbuffered sketches.

CountMinSketch is an in-memory r x c matrix. In classical mode each row hash
ranges over the full width; in localized mode h0 picks a page and the row
hashes stay inside it. The localized sketch is the reference the buffered
sketch must match cell for cell.

PagedCountMinSketch keeps the classical matrix on a StorageBackend. Every
operation reads each distinct page its cells fall in, and updates write them
back.
"""

import math
from dataclasses import dataclass, replace
from typing import Iterable, Optional

import numpy as np

from hashing import HashFamily, Key
from sketch.paged_store import FileBackend, PageLayout, StorageBackend, cell_dtype

DEFAULT_PAGE_BYTES = 4096
DEFAULT_CELL_BYTES = 8

# Absorbs float noise in e / epsilon, e.g. e / (e / 272) = 272.00000000000006.
_CEIL_TOLERANCE = 1e-9


class CounterOverflowError(ArithmeticError):
    pass


def depth_for_delta(delta: float) -> int:
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return max(1, math.ceil(math.log(1 / delta) - _CEIL_TOLERANCE))


def _round_up(value: int, multiple: int) -> int:
    return -(-value // multiple) * multiple


@dataclass(frozen=True)
class SketchParams:
    epsilon: float
    delta: float
    depth: int
    width: int
    cell_bytes: int
    page_bytes: int
    page_count: int
    columns_per_page: int
    element_budget: int
    buffer_bytes: int = 0
    requested_width: int = 0

    @property
    def layout(self) -> PageLayout:
        return PageLayout(self.page_bytes, self.cell_bytes, self.depth,
                          self.columns_per_page, self.page_count)

    @property
    def sketch_bytes(self) -> int:
        return self.page_count * self.page_bytes

    @property
    def ram_to_sketch_ratio(self) -> float:
        return self.sketch_bytes / self.buffer_bytes if self.buffer_bytes else math.inf

    def with_buffer(self, buffer_bytes: int) -> "SketchParams":
        return replace(self, buffer_bytes=buffer_bytes)

    def family(self, master_seed: int) -> HashFamily:
        return HashFamily(master_seed, self.depth, self.page_count, self.columns_per_page)


def _paged_params(epsilon, delta, depth, requested_width, cell_bytes, page_bytes,
                  element_budget, buffer_bytes) -> SketchParams:
    layout = PageLayout.fit(page_bytes, cell_bytes, depth, 1)
    cpp = layout.columns_per_page
    width = _round_up(requested_width, cpp)
    return SketchParams(
        epsilon=epsilon, delta=delta, depth=depth, width=width,
        cell_bytes=cell_bytes, page_bytes=page_bytes, page_count=width // cpp,
        columns_per_page=cpp, element_budget=element_budget,
        buffer_bytes=buffer_bytes, requested_width=requested_width,
    )


def derive_params_from_size(size_bytes: int, delta: float, max_overestimate: int,
                            page_bytes: int = DEFAULT_PAGE_BYTES,
                            cell_bytes: int = DEFAULT_CELL_BYTES,
                            buffer_bytes: int = 0) -> SketchParams:
    """Size the sketch from a byte budget, the way the benchmark tables are built.

    depth = ceil(ln 1/delta), width = ceil(cells / depth) and the element budget
    n = floor(cells * O / (depth * e)), so that e * n / width stays near O.
    """
    depth = depth_for_delta(delta)
    cell_dtype(cell_bytes)
    if size_bytes < page_bytes:
        raise ValueError(f"sketch size {size_bytes}B is smaller than one {page_bytes}B page")
    if max_overestimate < 1:
        raise ValueError(f"max overestimate must be >= 1, got {max_overestimate}")
    cell_count = size_bytes // cell_bytes
    requested_width = -(-cell_count // depth)
    element_budget = math.floor(cell_count * max_overestimate / (depth * math.e))
    if element_budget < 1:
        raise ValueError(f"sketch of {size_bytes}B cannot hold a single element at O={max_overestimate}")
    return _paged_params(
        epsilon=max_overestimate / element_budget, delta=delta, depth=depth,
        requested_width=requested_width, cell_bytes=cell_bytes, page_bytes=page_bytes,
        element_budget=element_budget, buffer_bytes=buffer_bytes,
    )


def derive_params_from_error(epsilon: float, delta: float,
                             page_bytes: int = DEFAULT_PAGE_BYTES,
                             cell_bytes: int = DEFAULT_CELL_BYTES,
                             buffer_bytes: int = 0) -> SketchParams:
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    depth = depth_for_delta(delta)
    requested_width = math.ceil(math.e / epsilon - _CEIL_TOLERANCE)
    return _paged_params(
        epsilon=epsilon, delta=delta, depth=depth, requested_width=requested_width,
        cell_bytes=cell_bytes, page_bytes=page_bytes,
        element_budget=0, buffer_bytes=buffer_bytes,
    )


def derive_params_from_geometry(depth: int, page_count: int, columns_per_page: int,
                                cell_bytes: int = DEFAULT_CELL_BYTES,
                                page_bytes: Optional[int] = None,
                                buffer_bytes: int = 0) -> SketchParams:
    """Explicit geometry; epsilon = e / width and delta = e^-depth follow from it."""
    if page_bytes is None:
        page_bytes = columns_per_page * depth * cell_bytes
    layout = PageLayout(page_bytes, cell_bytes, depth, columns_per_page, page_count)
    width = layout.width
    return SketchParams(
        epsilon=min(math.e / width, 1.0 - 1e-12), delta=math.exp(-depth), depth=depth,
        width=width, cell_bytes=cell_bytes, page_bytes=page_bytes,
        page_count=page_count, columns_per_page=columns_per_page,
        element_budget=0, buffer_bytes=buffer_bytes, requested_width=width,
    )


class CounterMatrix:
    """depth x width unsigned counters plus the running insert total."""

    def __init__(self, params: SketchParams):
        self.params = params
        self.dtype = cell_dtype(params.cell_bytes)
        self.limit = int(np.iinfo(self.dtype).max)
        self.cells = np.zeros((params.depth, params.width), dtype=self.dtype)
        self.total_inserted = 0
        self._rows = np.arange(params.depth)

    def increment(self, columns: list[int], count: int) -> None:
        for row, col in enumerate(columns):
            if int(self.cells[row, col]) > self.limit - count:
                raise CounterOverflowError(f"cell ({row}, {col}) would exceed {self.limit}")
        self.cells[self._rows, columns] += np.asarray(count, dtype=self.dtype)
        self.total_inserted += count

    def increment_many(self, columns: np.ndarray) -> None:
        """Unit-increment every row of each column tuple; columns has shape (n, depth)."""
        if len(columns) == 0:
            return
        flat = (self._rows * self.params.width + columns).ravel()
        index, hits = np.unique(flat, return_counts=True)
        cells = self.cells.reshape(-1)
        current = cells[index].astype(np.uint64)
        if np.any(hits.astype(np.uint64) > np.uint64(self.limit) - current):
            raise CounterOverflowError(f"bulk update of {len(columns)} keys would overflow")
        cells[index] += hits.astype(self.dtype)
        self.total_inserted += len(columns)

    def minimum(self, columns: list[int]) -> int:
        return int(self.cells[self._rows, columns].min())

    def row_sums(self) -> list[int]:
        return [int(s) for s in self.cells.sum(axis=1, dtype=np.uint64)]

    def __eq__(self, other) -> bool:
        if not isinstance(other, CounterMatrix):
            return NotImplemented
        return (self.total_inserted == other.total_inserted
                and np.array_equal(self.cells, other.cells))

    @classmethod
    def from_pages(cls, params: SketchParams, store: StorageBackend,
                   total_inserted: int = 0) -> "CounterMatrix":
        """Read every page of a store back into row-major form (counts page reads)."""
        matrix = cls(params)
        layout = store.layout
        cpp = layout.columns_per_page
        for page_id in range(layout.page_count):
            block = layout.cells(store.read_page(page_id))
            matrix.cells[:, page_id * cpp:(page_id + 1) * cpp] = block.T
        matrix.total_inserted = total_inserted
        return matrix


class CountMinSketch:
    def __init__(self, params: SketchParams, family: HashFamily, localized: bool = False):
        self.params = params
        self.family = family
        self.localized = localized
        self.matrix = CounterMatrix(params)

    @classmethod
    def build(cls, params: SketchParams, master_seed: int, localized: bool = False) -> "CountMinSketch":
        return cls(params, params.family(master_seed), localized=localized)

    @property
    def total_inserted(self) -> int:
        return self.matrix.total_inserted

    def update(self, key: Key, count: int = 1) -> None:
        if count < 1:
            raise ValueError(f"count must be a positive integer, got {count}")
        self.matrix.increment(self.family.columns(key, self.localized), count)

    def update_many(self, keys: Iterable[Key]) -> None:
        columns = self.family.columns
        localized = self.localized
        cols = np.array([columns(key, localized) for key in keys], dtype=np.int64)
        self.matrix.increment_many(cols.reshape(-1, self.params.depth))

    def estimate(self, key: Key) -> int:
        return self.matrix.minimum(self.family.columns(key, self.localized))


class PagedCountMinSketch:
    """Classical count-min sketch whose matrix lives on paged storage.

    A key's depth cells usually fall in depth different pages, so an update
    costs one read and one write per distinct page and an estimate one read per
    distinct page.
    """

    def __init__(self, params: SketchParams, family: HashFamily, store: StorageBackend,
                 total_inserted: int = 0):
        self.params = params
        self.family = family
        self.store = store
        self.layout = store.layout
        self.limit = int(np.iinfo(self.layout.dtype).max)
        self.total_inserted = total_inserted

    @classmethod
    def create(cls, path: str, params: SketchParams, master_seed: int) -> "PagedCountMinSketch":
        store = FileBackend.create(path, params.layout, master_seed, localized=False)
        return cls(params, params.family(master_seed), store)

    @classmethod
    def open(cls, path: str) -> "PagedCountMinSketch":
        store = FileBackend.open(path)
        header = store.header
        if header.localized:
            store.close()
            raise ValueError(f"{path} holds a page-localized sketch")
        params = derive_params_from_geometry(header.depth, header.page_count,
                                             header.width // header.page_count,
                                             header.cell_bytes, header.page_bytes)
        return cls(params, params.family(header.master_seed), store, header.total_inserted)

    def _by_page(self, key: Key) -> dict[int, list[tuple[int, int]]]:
        cpp = self.layout.columns_per_page
        pages: dict[int, list[tuple[int, int]]] = {}
        for row, col in enumerate(self.family.spread_columns(key)):
            page_id, local = divmod(col, cpp)
            pages.setdefault(page_id, []).append((row, local))
        return pages

    def update(self, key: Key, count: int = 1) -> None:
        if count < 1:
            raise ValueError(f"count must be a positive integer, got {count}")
        pages = self._by_page(key)
        loaded = {}
        for page_id, cells in pages.items():
            page = self.store.read_page(page_id)
            block = self.layout.cells(page)
            for row, local in cells:
                if int(block[local, row]) > self.limit - count:
                    raise CounterOverflowError(f"page {page_id} cell ({row}, {local}) would overflow")
            loaded[page_id] = (page, block)
        for page_id, cells in pages.items():
            page, block = loaded[page_id]
            for row, local in cells:
                block[local, row] += count
            self.store.write_page(page_id, page)
        self.total_inserted += count

    def estimate(self, key: Key) -> int:
        best = None
        for page_id, cells in self._by_page(key).items():
            block = self.layout.cells(self.store.read_page(page_id))
            for row, local in cells:
                value = int(block[local, row])
                if best is None or value < best:
                    best = value
        return best

    def snapshot(self) -> CounterMatrix:
        return CounterMatrix.from_pages(self.params, self.store, self.total_inserted)

    def flush_all(self) -> None:
        self.store.flush_header(self.total_inserted)

    def close(self) -> None:
        try:
            self.flush_all()
        finally:
            self.store.close()

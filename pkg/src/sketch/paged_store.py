"""
paged_store.py — Block storage for the counter matrix.

Layout
------
The matrix is cut into page_count logical pages of columns_per_page columns
each. Inside a page the cells are stored column-first: all depth cells of one
column are contiguous, so cell (row j, local column c) sits at byte
(c * depth + j) * cell_bytes. Unused bytes at the page tail are zero.

File format (little-endian)
---------------------------
Page 0 is a header page:

    magic "BCMS" | version u32 | depth u32 | width u64 | cell_bytes u32 |
    page_bytes u32 | page_count u64 | master_seed u64 | localized u8 |
    total_inserted u64 | zero fill to page_bytes

Data page i lives at file offset (i + 1) * page_bytes.

Backends count every data-page access in IoStats. Header reads and writes are
metadata and are not counted. There is no page cache here.
"""

import os
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

MAGIC = b"BCMS"
FORMAT_VERSION = 1
HEADER_STRUCT = struct.Struct("<4sIIQIIQQBQ")

CELL_DTYPES = {1: "<u1", 2: "<u2", 4: "<u4", 8: "<u8"}


class StorageError(Exception):
    def __init__(self, message: str, page_id: Optional[int] = None):
        super().__init__(message if page_id is None else f"page {page_id}: {message}")
        self.page_id = page_id


class SketchFormatError(StorageError):
    pass


def cell_dtype(cell_bytes: int) -> np.dtype:
    try:
        return np.dtype(CELL_DTYPES[cell_bytes])
    except KeyError:
        raise ValueError(f"cell_bytes must be one of {sorted(CELL_DTYPES)}, got {cell_bytes}") from None


@dataclass(frozen=True)
class PageLayout:
    page_bytes: int
    cell_bytes: int
    depth: int
    columns_per_page: int
    page_count: int

    def __post_init__(self):
        cell_dtype(self.cell_bytes)
        if self.depth < 1 or self.columns_per_page < 1 or self.page_count < 1:
            raise ValueError(
                f"layout needs depth, columns_per_page and page_count >= 1, got "
                f"{self.depth}, {self.columns_per_page}, {self.page_count}"
            )
        if self.used_bytes_per_page > self.page_bytes:
            raise ValueError(
                f"{self.columns_per_page} columns x {self.depth} rows x {self.cell_bytes}B "
                f"do not fit a {self.page_bytes}B page"
            )

    @classmethod
    def fit(cls, page_bytes: int, cell_bytes: int, depth: int, page_count: int) -> "PageLayout":
        """Pack as many whole columns into each page as fit."""
        columns_per_page = page_bytes // (cell_bytes * depth)
        if columns_per_page < 1:
            raise ValueError(
                f"page of {page_bytes}B cannot hold one column of {depth} x {cell_bytes}B cells"
            )
        return cls(page_bytes, cell_bytes, depth, columns_per_page, page_count)

    @property
    def width(self) -> int:
        return self.columns_per_page * self.page_count

    @property
    def used_bytes_per_page(self) -> int:
        return self.columns_per_page * self.depth * self.cell_bytes

    @property
    def pad_bytes_per_page(self) -> int:
        return self.page_bytes - self.used_bytes_per_page

    @property
    def cells_per_page(self) -> int:
        return self.columns_per_page * self.depth

    @property
    def dtype(self) -> np.dtype:
        return cell_dtype(self.cell_bytes)

    def locate_cell(self, row: int, global_column: int) -> tuple[int, int]:
        if not 0 <= row < self.depth:
            raise IndexError(f"row {row} outside [0, {self.depth})")
        if not 0 <= global_column < self.width:
            raise IndexError(f"column {global_column} outside [0, {self.width})")
        page_id, local = divmod(global_column, self.columns_per_page)
        return page_id, (local * self.depth + row) * self.cell_bytes

    def cells(self, page: bytearray) -> np.ndarray:
        """Writable (columns_per_page, depth) view of a page buffer's counters."""
        return np.frombuffer(page, dtype=self.dtype, count=self.cells_per_page).reshape(
            self.columns_per_page, self.depth
        )

    def check_page_id(self, page_id: int) -> None:
        if not 0 <= page_id < self.page_count:
            raise IndexError(f"page {page_id} outside [0, {self.page_count})")


@dataclass
class IoStats:
    page_reads: int = 0
    page_writes: int = 0

    @property
    def total(self) -> int:
        return self.page_reads + self.page_writes

    def reset(self) -> None:
        self.page_reads = 0
        self.page_writes = 0

    def snapshot(self) -> "IoStats":
        return IoStats(self.page_reads, self.page_writes)


@dataclass
class SketchHeader:
    depth: int
    width: int
    cell_bytes: int
    page_bytes: int
    page_count: int
    master_seed: int
    localized: bool
    total_inserted: int = 0
    version: int = FORMAT_VERSION

    def pack(self) -> bytes:
        raw = HEADER_STRUCT.pack(
            MAGIC, self.version, self.depth, self.width, self.cell_bytes,
            self.page_bytes, self.page_count, self.master_seed,
            1 if self.localized else 0, self.total_inserted,
        )
        return raw + bytes(self.page_bytes - len(raw))

    @classmethod
    def unpack(cls, raw: bytes) -> "SketchHeader":
        if len(raw) < HEADER_STRUCT.size:
            raise SketchFormatError("file too short for a sketch header")
        (magic, version, depth, width, cell_bytes, page_bytes, page_count,
         master_seed, localized, total_inserted) = HEADER_STRUCT.unpack_from(raw)
        if magic != MAGIC:
            raise SketchFormatError(f"bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise SketchFormatError(f"unsupported format version {version}")
        return cls(depth, width, cell_bytes, page_bytes, page_count,
                   master_seed, bool(localized), total_inserted, version)

    def layout(self) -> PageLayout:
        if self.page_count < 1 or self.width % self.page_count:
            raise SketchFormatError(f"width {self.width} is not a multiple of {self.page_count} pages")
        try:
            return PageLayout(self.page_bytes, self.cell_bytes, self.depth,
                              self.width // self.page_count, self.page_count)
        except ValueError as exc:
            raise SketchFormatError(str(exc)) from None


class StorageBackend:
    """Page-granular store. read_page returns the last bytes written to that page."""

    def __init__(self, layout: PageLayout):
        self.layout = layout
        self.stats = IoStats()

    @property
    def page_bytes(self) -> int:
        return self.layout.page_bytes

    def read_page(self, page_id: int) -> bytearray:
        self.layout.check_page_id(page_id)
        page = self._read(page_id)
        self.stats.page_reads += 1
        return page

    def write_page(self, page_id: int, page) -> None:
        self.layout.check_page_id(page_id)
        if len(page) != self.layout.page_bytes:
            raise ValueError(f"page buffer is {len(page)}B, expected {self.layout.page_bytes}B")
        self._write(page_id, page)
        self.stats.page_writes += 1

    def flush_header(self, total_inserted: int) -> None:
        pass

    def close(self) -> None:
        pass

    def _read(self, page_id: int) -> bytearray:
        raise NotImplementedError

    def _write(self, page_id: int, page) -> None:
        raise NotImplementedError

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class MemoryBackend(StorageBackend):
    def __init__(self, layout: PageLayout):
        super().__init__(layout)
        self._data = bytearray(layout.page_bytes * layout.page_count)

    def _read(self, page_id: int) -> bytearray:
        start = page_id * self.layout.page_bytes
        return bytearray(self._data[start:start + self.layout.page_bytes])

    def _write(self, page_id: int, page) -> None:
        start = page_id * self.layout.page_bytes
        self._data[start:start + self.layout.page_bytes] = page


class FileBackend(StorageBackend):
    """Header page plus page_count data pages in one file, positional I/O only."""

    def __init__(self, path: str, fd: int, header: SketchHeader):
        super().__init__(header.layout())
        self.path = path
        self.header = header
        self._fd = fd

    @classmethod
    def create(cls, path: str, layout: PageLayout, master_seed: int, localized: bool) -> "FileBackend":
        header = SketchHeader(
            depth=layout.depth, width=layout.width, cell_bytes=layout.cell_bytes,
            page_bytes=layout.page_bytes, page_count=layout.page_count,
            master_seed=master_seed, localized=localized,
        )
        if layout.page_bytes < HEADER_STRUCT.size:
            raise ValueError(f"file-backed sketches need pages of at least {HEADER_STRUCT.size}B")
        try:
            fd = os.open(path, os.O_RDWR | os.O_CREAT | os.O_TRUNC, 0o644)
            os.pwrite(fd, header.pack(), 0)
            os.ftruncate(fd, layout.page_bytes * (layout.page_count + 1))
        except OSError as exc:
            raise StorageError(f"cannot create {path}: {exc}") from exc
        return cls(path, fd, header)

    @classmethod
    def open(cls, path: str) -> "FileBackend":
        try:
            fd = os.open(path, os.O_RDWR)
        except OSError as exc:
            raise StorageError(f"cannot open {path}: {exc}") from exc
        try:
            header = SketchHeader.unpack(os.pread(fd, HEADER_STRUCT.size, 0))
            layout = header.layout()
            expected = layout.page_bytes * (layout.page_count + 1)
            actual = os.fstat(fd).st_size
            if actual != expected:
                raise SketchFormatError(
                    f"{path} is {actual}B but its header describes {expected}B"
                )
        except BaseException:
            os.close(fd)
            raise
        return cls(path, fd, header)

    def _offset(self, page_id: int) -> int:
        return (page_id + 1) * self.layout.page_bytes

    def _read(self, page_id: int) -> bytearray:
        try:
            raw = os.pread(self._fd, self.layout.page_bytes, self._offset(page_id))
        except OSError as exc:
            raise StorageError(f"read failed: {exc}", page_id) from exc
        if len(raw) != self.layout.page_bytes:
            raise StorageError(f"short read ({len(raw)}B)", page_id)
        return bytearray(raw)

    def _write(self, page_id: int, page) -> None:
        try:
            written = os.pwrite(self._fd, page, self._offset(page_id))
        except OSError as exc:
            raise StorageError(f"write failed: {exc}", page_id) from exc
        if written != self.layout.page_bytes:
            raise StorageError(f"short write ({written}B)", page_id)

    def flush_header(self, total_inserted: int) -> None:
        self.header.total_inserted = total_inserted
        try:
            os.pwrite(self._fd, self.header.pack(), 0)
        except OSError as exc:
            raise StorageError(f"header write failed: {exc}") from exc

    def close(self) -> None:
        if self._fd is not None:
            os.close(self._fd)
            self._fd = None

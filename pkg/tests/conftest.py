import os
import sys

import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, ROOT)
sys.path.insert(0, os.path.join(ROOT, "src"))

from sketch.core_cms import derive_params_from_geometry  # noqa: E402


@pytest.fixture
def small_params():
    """2 rows, 4 pages of 4 columns, sub-buffers of 8 entries (8B each)."""
    return derive_params_from_geometry(depth=2, page_count=4, columns_per_page=4, buffer_bytes=4 * 8 * 8)


@pytest.fixture
def sketch_path(tmp_path):
    return str(tmp_path / "sketch.bcms")


def keys_on_page(family, page_id, count, start=0):
    """First count integer keys (from start) that h0 routes to page_id."""
    found = []
    key = start
    while len(found) < count:
        if family.page_index(key) == page_id:
            found.append(key)
        key += 1
    return found

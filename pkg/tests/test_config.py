import os

import pytest

from config import BenchConfig, format_size, list_profiles, load_profile, parse_size, validate_config
from conftest import ROOT

EXAMPLE_CONFIG = os.path.join(ROOT, "example_config.ini")


@pytest.mark.parametrize("text, expected", [
    ("4096", 4096),
    ("64KB", 64 << 10),
    ("128MB", 128 << 20),
    ("1GB", 1 << 30),
    ("1.5k", 1536),
    (" 2 mb ", 2 << 20),
    (8192, 8192),
])
def test_parse_size(text, expected):
    assert parse_size(text) == expected


@pytest.mark.parametrize("text", ["", "MB", "12XB", "-4KB"])
def test_parse_size_rejects_garbage(text):
    with pytest.raises(ValueError):
        parse_size(text)


def test_format_size():
    assert format_size(128 << 20) == "128MB"
    assert format_size(1 << 30) == "1GB"
    assert format_size(1536) == "1536B"


def test_from_dict_reads_ini_keys():
    cfg = BenchConfig.from_dict({
        "variant": "classical", "backend": "file", "size": "1MB", "delta": "0.05",
        "overestimate": "4", "page_bytes": "8KB", "buffer_bytes": "128KB",
        "seed": "7", "elements": "500", "queries": "20", "out": "r.csv",
    })
    assert cfg.variant == "classical" and cfg.backend == "file"
    assert (cfg.size_bytes, cfg.page_bytes, cfg.buffer_bytes) == (1 << 20, 8192, 128 << 10)
    assert (cfg.delta, cfg.max_overestimate, cfg.seed) == (0.05, 4, 7)
    assert (cfg.element_count, cfg.query_count, cfg.output_path) == (500, 20, "r.csv")


def test_from_dict_defaults():
    assert BenchConfig.from_dict({}) == BenchConfig()


def test_override_skips_none():
    cfg = BenchConfig().override(seed=None, size_bytes=1 << 20, unknown=3)
    assert cfg.seed == BenchConfig().seed
    assert cfg.size_bytes == 1 << 20


def test_ram_to_sketch_ratio():
    assert BenchConfig(size_bytes=4 << 20, buffer_bytes=1 << 20).ram_to_sketch_ratio == 4


def test_validate_lists_every_problem():
    cfg = BenchConfig(variant="fancy", backend="tape", delta=2.0, query_count=-1)
    with pytest.raises(ValueError) as exc:
        validate_config(cfg)
    message = str(exc.value)
    for fragment in ("variant", "backend", "delta", "queries"):
        assert fragment in message


def test_buffered_run_needs_buffer_below_sketch_size():
    with pytest.raises(ValueError):
        validate_config(BenchConfig(size_bytes=1 << 20, buffer_bytes=1 << 20))
    validate_config(BenchConfig(variant="classical", size_bytes=1 << 20, buffer_bytes=1 << 20))


def test_load_profile_merges_defaults():
    name, values = load_profile(EXAMPLE_CONFIG, "RATIO04")
    cfg = BenchConfig.from_dict(values)
    assert name == "RATIO04"
    assert cfg.size_bytes == 1 << 20
    assert cfg.buffer_bytes == 256 << 10
    assert cfg.ram_to_sketch_ratio == 4
    validate_config(cfg)


def test_profile_env_var_selects_section(monkeypatch):
    monkeypatch.setenv("BCMS_PROFILE", "CLASSICAL_FILE")
    name, values = load_profile(EXAMPLE_CONFIG)
    assert name == "CLASSICAL_FILE"
    assert values["backend"] == "file"


def test_first_profile_is_the_fallback(monkeypatch):
    monkeypatch.delenv("BCMS_PROFILE", raising=False)
    assert load_profile(EXAMPLE_CONFIG)[0] == list_profiles(EXAMPLE_CONFIG)[0] == "RATIO02"


def test_missing_profile_and_file(tmp_path):
    with pytest.raises(ValueError):
        load_profile(EXAMPLE_CONFIG, "NOPE")
    with pytest.raises(FileNotFoundError):
        load_profile(str(tmp_path / "absent.ini"))
    empty = tmp_path / "empty.ini"
    empty.write_text("[DEFAULT]\nseed = 1\n")
    with pytest.raises(ValueError):
        load_profile(str(empty))


def test_unknown_ini_keys_are_ignored():
    assert BenchConfig.from_dict({"workers": "4", "color": "blue"}) == BenchConfig()

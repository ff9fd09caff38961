import configparser
import os
import re
from dataclasses import dataclass, fields
from typing import Optional

import ui

CONFIG_PATH = "bench_config.ini"
PROFILE_ENV = "BCMS_PROFILE"

VARIANTS = ("classical", "buffered")
BACKENDS = ("memory", "file")

_SIZE_UNITS = {"": 1, "B": 1, "KB": 1 << 10, "MB": 1 << 20, "GB": 1 << 30, "TB": 1 << 40}
_SIZE_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*([KMGT]?B?)\s*$", re.IGNORECASE)


def parse_size(value) -> int:
    """Byte count from 4096, '64KB', '128MB' or '1GB' (binary multiples)."""
    if isinstance(value, int):
        return value
    match = _SIZE_RE.match(str(value))
    if not match:
        raise ValueError(f"Unrecognised size '{value}' (expected e.g. 4096, 64KB, 128MB, 1GB)")
    number, unit = match.groups()
    unit = unit.upper()
    if unit and not unit.endswith("B"):
        unit += "B"
    return int(float(number) * _SIZE_UNITS[unit])


def format_size(num_bytes: int) -> str:
    for unit in ("GB", "MB", "KB"):
        scale = _SIZE_UNITS[unit]
        if num_bytes >= scale and num_bytes % scale == 0:
            return f"{num_bytes // scale}{unit}"
    return f"{num_bytes}B"


@dataclass
class BenchConfig:
    variant: str = "buffered"
    backend: str = "memory"
    size_bytes: int = 4 << 20
    delta: float = 0.01
    max_overestimate: int = 8
    page_bytes: int = 4096
    buffer_bytes: int = 1 << 20
    seed: int = 42
    element_count: Optional[int] = None
    query_count: int = 10_000
    output_path: Optional[str] = None
    sketch_path: str = "sketch.bcms"

    @classmethod
    def from_dict(cls, d: dict) -> "BenchConfig":
        elements = d.get("elements") or d.get("element_count")
        return cls(
            variant=d.get("variant", cls.variant),
            backend=d.get("backend", cls.backend),
            size_bytes=parse_size(d.get("size", cls.size_bytes)),
            delta=float(d.get("delta", cls.delta)),
            max_overestimate=int(d.get("overestimate", cls.max_overestimate)),
            page_bytes=parse_size(d.get("page_bytes", cls.page_bytes)),
            buffer_bytes=parse_size(d.get("buffer_bytes", cls.buffer_bytes)),
            seed=int(d.get("seed", cls.seed)),
            element_count=int(elements) if elements else None,
            query_count=int(d.get("queries", cls.query_count)),
            output_path=d.get("out") or None,
            sketch_path=d.get("sketch_path", cls.sketch_path),
        )

    def override(self, **values) -> "BenchConfig":
        """Copy with every non-None keyword applied on top."""
        known = {f.name for f in fields(self)}
        updates = {k: v for k, v in values.items() if v is not None and k in known}
        return BenchConfig(**{**self.__dict__, **updates})

    @property
    def ram_to_sketch_ratio(self) -> float:
        return self.size_bytes / self.buffer_bytes if self.buffer_bytes else float("inf")


def validate_config(cfg: BenchConfig) -> None:
    problems = []
    if cfg.variant not in VARIANTS:
        problems.append(f"variant must be one of {', '.join(VARIANTS)} (got '{cfg.variant}')")
    if cfg.backend not in BACKENDS:
        problems.append(f"backend must be one of {', '.join(BACKENDS)} (got '{cfg.backend}')")
    for name in ("size_bytes", "page_bytes", "max_overestimate"):
        if getattr(cfg, name) <= 0:
            problems.append(f"{name} must be positive")
    if not 0 < cfg.delta < 1:
        problems.append(f"delta must lie in (0, 1) (got {cfg.delta})")
    if cfg.element_count is not None and cfg.element_count < 0:
        problems.append("elements must not be negative")
    if cfg.query_count < 0:
        problems.append("queries must not be negative")
    if cfg.variant == "buffered":
        if cfg.buffer_bytes <= 0:
            problems.append("buffer_bytes must be positive for the buffered variant")
        elif cfg.buffer_bytes >= cfg.size_bytes:
            problems.append(
                f"buffer ({format_size(cfg.buffer_bytes)}) must be smaller than the sketch "
                f"({format_size(cfg.size_bytes)}) for an out-of-memory run"
            )
    if problems:
        raise ValueError("Invalid benchmark config: " + "; ".join(problems))


def load_profile(path: str = CONFIG_PATH, section: Optional[str] = None) -> tuple[str, dict]:
    """Return (section_name, values) for one profile of an INI file.

    With no section given, the BCMS_PROFILE env var picks it, else the first one.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"Config file '{path}' not found.")
    config = configparser.ConfigParser()
    config.read(path)
    sections = config.sections()
    if not sections:
        raise ValueError(f"No profiles found in {path}.")
    section = section or os.getenv(PROFILE_ENV) or sections[0]
    if section not in config:
        raise ValueError(f"Profile '{section}' not found in {path} (have: {', '.join(sections)}).")
    ui.ok(f"Loaded profile '{section}' from {path}")
    return section, {key: config[section][key] for key in config[section]}


def list_profiles(path: str = CONFIG_PATH) -> list[str]:
    config = configparser.ConfigParser()
    config.read(path)
    return config.sections()

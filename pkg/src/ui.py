"""
ui.py — Terminal output for the sketch benchmarks.

Everything a run prints goes through here: banners, phase headers, status
lines, bullets and key/value tables. Colour comes from ANSI codes and is off
when NO_COLOR is set or stdout is not a terminal.

While capture is on (start_log/stop_log), each printed line is also kept as
Markdown so main can save it with --log.
"""

import os
import sys

WIDTH = 70

_RESET  = "\033[0m"
_BOLD   = "\033[1m"
_DIM    = "\033[2m"
_GREEN  = "\033[32m"
_YELLOW = "\033[33m"
_RED    = "\033[31m"
_CYAN   = "\033[36m"


def _colour_enabled() -> bool:
    if os.environ.get("NO_COLOR"):
        return False
    return hasattr(sys.stdout, "isatty") and sys.stdout.isatty()


_USE_COLOR = _colour_enabled()
_STREAM = None

_LOG_LINES: list[str] = []
_LOG_ENABLED = False


def set_stream(stream) -> None:
    """Route output to stream; None means stdout."""
    global _STREAM
    _STREAM = stream


def _emit(text: str = "") -> None:
    print(text, file=_STREAM or sys.stdout)


def _c(code: str, text: str) -> str:
    return f"{code}{text}{_RESET}" if _USE_COLOR else text


# ── run log ────────────────────────────────────────────────────────

def start_log() -> None:
    """Start a fresh capture."""
    global _LOG_ENABLED, _LOG_LINES
    _LOG_ENABLED = True
    _LOG_LINES = []


def stop_log() -> None:
    global _LOG_ENABLED
    _LOG_ENABLED = False


def get_log_lines() -> list[str]:
    return list(_LOG_LINES)


def _log(md_line: str) -> None:
    if _LOG_ENABLED:
        _LOG_LINES.append(md_line)


# ── headers ────────────────────────────────────────────────────────

def _centred(text: str) -> str:
    return " " * max((WIDTH - len(text)) // 2, 0) + text


def banner(title: str, subtitle: str = "") -> None:
    """Top-of-run banner; subtitle carries the command, backend and seed."""
    edge = _c(_CYAN + _BOLD, "═" * WIDTH)
    _emit()
    _emit(edge)
    _emit(_c(_CYAN + _BOLD, _centred(title)))
    if subtitle:
        _emit(_c(_DIM, _centred(subtitle)))
    _emit(edge)
    _emit()
    _log(f"# {title}")
    if subtitle:
        _log(f"> {subtitle}")
    _log("")


def section(title: str) -> None:
    rule = _c(_BOLD, "─" * WIDTH)
    _emit()
    _emit(rule)
    _emit(_c(_BOLD, f"  {title}"))
    _emit(rule)
    _log(f"\n## {title}")
    _log("---")


# ── status lines ───────────────────────────────────────────────────

def _status(marker: str, colour: str, msg: str, md_marker: str, tint_text: bool = False) -> None:
    _emit(_c(colour + _BOLD, f"  {marker} ") + (_c(colour, msg) if tint_text else msg))
    _log(f"{md_marker} {msg}")


def ok(msg: str) -> None:
    _status("✓", _GREEN, msg, "✓")


def warn(msg: str) -> None:
    _status("!", _YELLOW, msg, "⚠️ ", tint_text=True)


def error(msg: str) -> None:
    _status("✗", _RED, msg, "✗", tint_text=True)


def info(msg: str) -> None:
    _emit("    " + msg)
    _log(f"    {msg}")


def progress(msg: str) -> None:
    """Long-running step, e.g. an insert or query phase."""
    _emit(_c(_DIM, f"  ⋯ {msg}"))
    _log(f"⋯ {msg}")


def bullet(label: str, value: str = "") -> None:
    dot = _c(_BOLD, "•")
    if value:
        _emit(f"  {dot} {_c(_BOLD, label)}: {value}")
        _log(f"- **{label}**: {value}")
    else:
        _emit(f"  {dot} {label}")
        _log(f"- {label}")


def kv_table(rows: list[tuple], title: str = "") -> None:
    """Aligned (label, value) rows; the log gets a two-column Markdown table."""
    if title:
        _emit(_c(_BOLD, f"  {title}"))
        _log(f"\n**{title}**\n")
    width = max((len(str(label)) for label, _ in rows), default=0)
    _log("| Field | Value |")
    _log("|---|---|")
    for label, value in rows:
        _emit(f"    {_c(_DIM, str(label).ljust(width))}  {value}")
        _log(f"| {label} | {value} |")

import csv
import sys
from datetime import datetime

import ui

BENCH_COLUMNS = ["variant", "backend", "sizeBytes", "delta", "O", "seed", "ops", "wallSeconds",
                 "opsPerSec", "pageReads", "pageWrites", "amortizedIo", "predictedIo"]

CONFIGURE_COLUMNS = ["sizeBytes", "delta", "O", "pageBytes", "depth", "requestedWidth", "width",
                     "columnsPerPage", "pageCount", "elementBudget", "epsilon"]

# Columns whose values depend on the machine, not the seed.
WALL_CLOCK_COLUMNS = {"wallSeconds", "opsPerSec"}


def write_csv(rows: list[dict], columns: list[str], path=None) -> None:
    """Write rows to path, or to stdout when path is None or '-'."""
    if path in (None, "-"):
        writer = csv.DictWriter(sys.stdout, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        return
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=columns)
        writer.writeheader()
        writer.writerows(rows)
    ui.ok(f"CSV written to {path} ({len(rows)} row(s))")


def build_run_markdown(title: str, params_rows: list[tuple], tables: dict, notes: list[str] = ()) -> str:
    """
    Markdown report: a parameter table, then one table per entry of tables.

    tables maps a heading to (columns, rows) where rows are dicts keyed by column.
    """
    lines = []

    def h1(t):  lines.extend([f"# {t}", ""])
    def h2(t):  lines.extend([f"## {t}", ""])
    def row(*cols): lines.append("| " + " | ".join(str(c) for c in cols) + " |")
    def sep(*cols): lines.append("|" + "|".join(["---"] * len(cols)) + "|")
    def blank():    lines.append("")

    h1(title)
    lines.append(f"*Generated: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}*")
    blank()
    lines.append("---")
    blank()

    if params_rows:
        h2("Sketch Parameters")
        row("Field", "Value")
        sep("Field", "Value")
        for label, value in params_rows:
            row(label, value)
        blank()

    for heading, (columns, rows) in tables.items():
        h2(heading)
        if rows:
            row(*columns)
            sep(*columns)
            for r in rows:
                row(*(_fmt(r.get(c, "")) for c in columns))
        else:
            lines.append("*No rows.*")
        blank()

    if notes:
        h2("Notes")
        for note in notes:
            lines.append(f"- {note}")
        blank()

    return "\n".join(lines) + "\n"


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def write_markdown(path: str, content: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(content)
    ui.ok(f"Report written to {path}")


def write_run_log(path: str) -> None:
    lines = ui.get_log_lines()
    with open(path, "w", encoding="utf-8") as f:
        f.write("# Sketch Benchmark — Run Log\n\n")
        f.write(f"*Generated: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}*\n\n")
        f.write("---\n\n")
        for line in lines:
            f.write(line + "\n")
    ui.ok(f"Run log saved to {path}")

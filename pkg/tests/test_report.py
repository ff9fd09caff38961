import csv

import ui
from report import BENCH_COLUMNS, build_run_markdown, write_csv, write_run_log


def test_csv_to_stdout_keeps_column_order(capsys):
    rows = [{"variant": "buffered", "ops": 3}, {"variant": "classical", "ops": 4}]
    write_csv(rows, ["variant", "ops"])
    out = capsys.readouterr().out.splitlines()
    assert out == ["variant,ops", "buffered,3", "classical,4"]


def test_csv_to_file(tmp_path):
    path = tmp_path / "bench.csv"
    write_csv([{c: 1 for c in BENCH_COLUMNS}], BENCH_COLUMNS, str(path))
    with open(path, newline="") as f:
        assert next(csv.reader(f)) == BENCH_COLUMNS


def test_markdown_report_sections():
    text = build_run_markdown(
        "Run", [("Depth", 5)],
        {"Results": (["a", "b"], [{"a": 0.123456789, "b": "x"}]), "Empty": (["a"], [])},
        notes=["seeded"],
    )
    assert "# Run" in text
    assert "| Depth | 5 |" in text
    assert "| 0.123457 | x |" in text
    assert "*No rows.*" in text
    assert "- seeded" in text


def test_run_log_captures_ui_lines(tmp_path):
    ui.start_log()
    ui.section("Phase")
    ui.ok("done")
    ui.kv_table([("Pages", 4)], title="Layout")
    ui.stop_log()
    ui.ok("not captured")
    lines = ui.get_log_lines()
    assert "✓ done" in lines
    assert "| Pages | 4 |" in lines
    assert not any("not captured" in line for line in lines)

    path = tmp_path / "log.md"
    write_run_log(str(path))
    assert "✓ done" in path.read_text(encoding="utf-8")

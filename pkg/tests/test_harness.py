import csv
import io
import os

import pytest

import harness
import main
from config import BenchConfig
from report import BENCH_COLUMNS, CONFIGURE_COLUMNS, WALL_CLOCK_COLUMNS
from sketch.buffered_cms import BufferedCountMinSketch
from sketch.core_cms import PagedCountMinSketch
from verification import uniform_keys

KB = 1 << 10


def _cfg(**overrides):
    base = BenchConfig(size_bytes=512 * KB, buffer_bytes=256 * KB, element_count=10_000,
                       query_count=2_000, seed=3)
    return base.override(**overrides)


def test_configure_reproduces_table_row():
    params = harness.cmd_configure(128 << 20, 0.01, 8)
    assert params.depth == 5
    assert abs(params.requested_width - 3355444) <= 1
    assert abs(params.element_budget - 9875188) <= 2


def test_configure_rejects_sketch_below_one_page():
    with pytest.raises(ValueError):
        harness.cmd_configure(1000, 0.01, 8)


def test_buffered_insert_below_capacity_flushes_each_dirty_page_once():
    cfg = _cfg(element_count=1_000)
    params = harness.bench_params(cfg)
    dirty = len(set(params.family(cfg.seed).page_indices(uniform_keys(1_000, cfg.seed))))
    result = harness.cmd_insert_bench(cfg)
    assert (result.page_reads, result.page_writes) == (dirty, dirty)
    assert result.amortized_io_per_op == pytest.approx(2 * dirty / 1_000)


def test_identical_seeds_give_identical_rows():
    cfg = _cfg(variant="classical", element_count=2_000)
    first = harness.cmd_insert_bench(cfg).csv_row(cfg)
    second = harness.cmd_insert_bench(cfg).csv_row(cfg)
    for column in BENCH_COLUMNS:
        if column not in WALL_CLOCK_COLUMNS:
            assert first[column] == second[column]
    assert set(first) == set(BENCH_COLUMNS)


def test_buffered_queries_cost_one_read_each():
    result = harness.cmd_query_bench(_cfg())
    assert (result.page_reads, result.page_writes) == (2_000, 0)
    assert result.predicted_io_per_op == 1.0


def test_io_ratios_at_ram_to_sketch_ratio_two():
    cfg = _cfg()
    insert = {v: harness.cmd_insert_bench(cfg, v) for v in ("classical", "buffered")}
    query = {v: harness.cmd_query_bench(cfg, v) for v in ("classical", "buffered")}
    depth = harness.bench_params(cfg).depth
    assert depth == 5
    assert insert["classical"].amortized_io_per_op >= depth * insert["buffered"].amortized_io_per_op
    assert query["classical"].amortized_io_per_op / query["buffered"].amortized_io_per_op >= depth / 2


def test_ratio_sweep_rows():
    rows = harness.cmd_ratio_sweep(_cfg(buffer_bytes=128 * KB, element_count=3_000, query_count=500),
                                   ratios=(2, 4))
    assert [r["ratio"] for r in rows] == [2, 4]
    assert all(r["insertIoRatio"] > 1 and r["queryIoRatio"] > 1 for r in rows)


def test_overestimate_bench_without_inserts():
    classical, buffered = harness.cmd_overestimate_bench(_cfg(element_count=0))
    assert classical.queries == buffered.queries == 0
    assert harness.compare_reports(classical, buffered)


def test_overestimate_bench_reports_both_variants():
    classical, buffered = harness.cmd_overestimate_bench(_cfg(element_count=5_000))
    assert classical.queries == buffered.queries == 5_000
    assert classical.tail_fraction <= 0.01 + 0.01
    assert buffered.tail_fraction <= 0.01 + 0.01


def test_file_backend_runs_persist(tmp_path):
    path = str(tmp_path / "bench.bcms")
    harness.cmd_insert_bench(_cfg(backend="file", sketch_path=path, element_count=3_000))
    harness.cmd_insert_bench(_cfg(backend="file", sketch_path=path, element_count=3_000,
                                  variant="classical"))

    buffered = BufferedCountMinSketch.open(str(tmp_path / "bench.buffered.bcms"), buffer_bytes=256 * KB)
    classical = PagedCountMinSketch.open(str(tmp_path / "bench.classical.bcms"))
    keys = uniform_keys(3_000, 3)
    assert buffered.total_inserted == classical.total_inserted == 3_000
    assert all(buffered.estimate(k) >= 1 and classical.estimate(k) >= 1 for k in keys[:200])
    buffered.close()
    classical.close()


def test_verify_guarantee_summary():
    passed, rows = harness.cmd_verify("guarantee", n=5_000, queries=1_000, seeds=3)
    assert passed
    assert [r["seed"] for r in rows] == [0, 1, 2]


def test_unknown_suite():
    with pytest.raises(ValueError):
        harness.cmd_verify("nonsense")


def test_allowed_failures():
    assert harness.allowed_failures(20) == 1
    assert harness.allowed_failures(19) == 0


def test_main_writes_bench_csv(tmp_path):
    out = tmp_path / "insert.csv"
    code = main.main(["insert", "--size", "512KB", "--buffer-bytes", "256KB",
                      "--elements", "500", "--seed", "1", "--out", str(out)])
    assert code == main.EXIT_OK
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert list(rows[0]) == BENCH_COLUMNS
    assert rows[0]["variant"] == "buffered" and rows[0]["ops"] == "500"


def test_main_reports_errors_with_exit_code_one(tmp_path):
    assert main.main(["configure", "--size", "1000"]) == main.EXIT_ERROR
    assert main.main(["verify", "maxload", "--n", "100", "--k", "64"]) == main.EXIT_ERROR


def test_main_failed_check_exit_code(monkeypatch, tmp_path):
    monkeypatch.setattr(harness, "cmd_verify", lambda suite, **kw: (False, []))
    assert main.main(["verify", "maxload", "--out", str(tmp_path / "v.csv")]) == main.EXIT_CHECK_FAILED


def test_main_report_and_log(tmp_path):
    report = tmp_path / "cfg.md"
    log = tmp_path / "log.md"
    code = main.main(["configure", "--size", "4MB", "--report", str(report), "--log", str(log)])
    assert code == main.EXIT_OK
    assert "Sketch Parameters" in report.read_text()
    assert os.path.getsize(log) > 0


def test_main_loads_profiles(tmp_path):
    ini = tmp_path / "bench.ini"
    ini.write_text("[SMALL]\nvariant = classical\nsize = 256KB\nelements = 300\nqueries = 50\n")
    out = tmp_path / "q.csv"
    assert main.main(["query", "--config", str(ini), "--profile", "SMALL", "--out", str(out)]) == 0
    row = next(csv.DictReader(io.StringIO(out.read_text())))
    assert row["variant"] == "classical" and row["ops"] == "50"


def test_overestimate_command_fails_when_tails_exceed_delta(monkeypatch, tmp_path):
    from verification import ErrorReport
    heavy_tail = ErrorReport(queries=1_000, mean_overestimate=3.0, max_overestimate=9,
                             tail_fraction=0.5, threshold=1.0)
    monkeypatch.setattr(harness, "cmd_overestimate_bench", lambda cfg: (heavy_tail, heavy_tail))
    code = main.main(["overestimate", "--size", "512KB", "--buffer-bytes", "256KB",
                      "--out", str(tmp_path / "o.csv")])
    assert code == main.EXIT_CHECK_FAILED


def test_overestimate_passed_needs_both_tails_and_parity():
    from verification import ErrorReport
    good = ErrorReport(1_000, 2.0, 5, 0.0, 10.0)
    bad = ErrorReport(1_000, 2.0, 5, 0.2, 10.0)
    assert harness.overestimate_passed(good, good, 0.01)
    assert not harness.overestimate_passed(good, bad, 0.01)
    assert not harness.overestimate_passed(good, ErrorReport(1_000, 3.0, 5, 0.0, 10.0), 0.01)


def test_configure_writes_parameter_row(tmp_path):
    out = tmp_path / "cfg.csv"
    assert main.main(["configure", "--size", "128MB", "--out", str(out)]) == main.EXIT_OK
    row = next(csv.DictReader(io.StringIO(out.read_text())))
    assert list(row) == CONFIGURE_COLUMNS
    assert row["depth"] == "5"
    assert abs(int(row["requestedWidth"]) - 3355444) <= 1
    assert abs(int(row["elementBudget"]) - 9875188) <= 2


def test_theorem_suite_keeps_requested_delta():
    passed, rows = harness.verify_theorem(k=4, delta=0.05, n=10_000, queries=500, seeds=1)
    assert passed
    assert rows[0]["delta"] == 0.05
    assert rows[0]["bound"] == pytest.approx(0.05 + 1 / 4)

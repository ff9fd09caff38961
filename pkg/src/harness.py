import math
import os
import time
from dataclasses import dataclass, replace
from typing import Optional

import ui
from config import BenchConfig, format_size, validate_config
from sketch.buffered_cms import BufferedCountMinSketch
from sketch.core_cms import (
    PagedCountMinSketch, SketchParams, depth_for_delta,
    derive_params_from_error, derive_params_from_geometry, derive_params_from_size,
)
from sketch.paged_store import MemoryBackend, PageLayout
from verification import (
    CheckResult, ErrorReport, ExactCounter, check_cms_guarantee,
    check_theorem_bound, compare_reports, max_load_trials, overestimate_stats,
    result_row, run_trials, uniform_keys, within_tail_bound,
)

SWEEP_RATIOS = (2, 4, 8, 16)


@dataclass
class BenchResult:
    variant: str
    ops: int
    wall_seconds: float
    page_reads: int
    page_writes: int
    predicted_io_per_op: float
    error_report: Optional[ErrorReport] = None

    @property
    def ops_per_second(self) -> float:
        return self.ops / self.wall_seconds if self.wall_seconds > 0 else 0.0

    @property
    def amortized_io_per_op(self) -> float:
        return (self.page_reads + self.page_writes) / self.ops if self.ops else 0.0

    def csv_row(self, cfg: BenchConfig) -> dict:
        return {
            "variant": self.variant,
            "backend": cfg.backend,
            "sizeBytes": cfg.size_bytes,
            "delta": cfg.delta,
            "O": cfg.max_overestimate,
            "seed": cfg.seed,
            "ops": self.ops,
            "wallSeconds": round(self.wall_seconds, 6),
            "opsPerSec": round(self.ops_per_second, 1),
            "pageReads": self.page_reads,
            "pageWrites": self.page_writes,
            "amortizedIo": self.amortized_io_per_op,
            "predictedIo": self.predicted_io_per_op,
        }


def params_rows(params: SketchParams) -> list[tuple]:
    rows = [
        ("Size", format_size(params.sketch_bytes)),
        ("Width (requested)", params.requested_width),
        ("Width (page-padded)", params.width),
        ("Depth", params.depth),
        ("Elements", params.element_budget),
        ("Epsilon", f"{params.epsilon:.6g}"),
        ("Delta", params.delta),
        ("Columns per page", params.columns_per_page),
        ("Pages", params.page_count),
        ("Pad bytes per page", params.layout.pad_bytes_per_page),
    ]
    if params.buffer_bytes:
        rows.append(("Buffer", format_size(params.buffer_bytes)))
        rows.append(("RAM-to-sketch ratio", f"{params.ram_to_sketch_ratio:.2f}"))
    return rows


def cmd_configure(size_bytes: int, delta: float, max_overestimate: int,
                  page_bytes: int = 4096) -> SketchParams:
    params = derive_params_from_size(size_bytes, delta, max_overestimate, page_bytes)
    ui.section(f"Sketch Configuration — {format_size(size_bytes)}")
    ui.kv_table(params_rows(params))
    return params


def configure_row(params: SketchParams, size_bytes: int, max_overestimate: int) -> dict:
    return {
        "sizeBytes": size_bytes,
        "delta": params.delta,
        "O": max_overestimate,
        "pageBytes": params.page_bytes,
        "depth": params.depth,
        "requestedWidth": params.requested_width,
        "width": params.width,
        "columnsPerPage": params.columns_per_page,
        "pageCount": params.page_count,
        "elementBudget": params.element_budget,
        "epsilon": params.epsilon,
    }


def expected_distinct_pages(params: SketchParams) -> float:
    """Mean number of distinct pages a classical key's depth cells land in."""
    k = params.page_count
    return k * (1 - (1 - 1 / k) ** params.depth)


def bench_params(cfg: BenchConfig) -> SketchParams:
    validate_config(cfg)
    buffer_bytes = cfg.buffer_bytes if cfg.variant == "buffered" else 0
    return derive_params_from_size(cfg.size_bytes, cfg.delta, cfg.max_overestimate,
                                   cfg.page_bytes, buffer_bytes=buffer_bytes)


def _sketch_path(cfg: BenchConfig, variant: str) -> str:
    root, ext = os.path.splitext(cfg.sketch_path)
    return f"{root}.{variant}{ext or '.bcms'}"


def build_sketch(cfg: BenchConfig, params: SketchParams, variant: str):
    if variant == "buffered":
        if not params.buffer_bytes:
            params = params.with_buffer(cfg.buffer_bytes)
        if cfg.backend == "file":
            return BufferedCountMinSketch.create(_sketch_path(cfg, variant), params, cfg.seed)
        return BufferedCountMinSketch(params, params.family(cfg.seed), MemoryBackend(params.layout))
    if cfg.backend == "file":
        return PagedCountMinSketch.create(_sketch_path(cfg, variant), params, cfg.seed)
    return PagedCountMinSketch(params, params.family(cfg.seed), MemoryBackend(params.layout))


def _predicted_insert_io(sketch, params: SketchParams) -> float:
    if isinstance(sketch, BufferedCountMinSketch):
        return sketch.io_report().predicted_amortized
    return 2 * expected_distinct_pages(params)


def _insert_phase(cfg: BenchConfig, params: SketchParams, variant: str, keep_oracle: bool = False):
    n = params.element_budget if cfg.element_count is None else cfg.element_count
    keys = uniform_keys(n, cfg.seed)
    sketch = build_sketch(cfg, params, variant)
    ui.progress(f"Inserting {n:,} keys into the {variant} sketch …")
    start = time.perf_counter()
    for key in keys:
        sketch.update(key)
    sketch.flush_all()
    wall = time.perf_counter() - start
    stats = sketch.store.stats
    result = BenchResult(variant, n, wall, stats.page_reads, stats.page_writes,
                         _predicted_insert_io(sketch, params))
    oracle = ExactCounter(keys) if keep_oracle else None
    return sketch, result, oracle


def cmd_insert_bench(cfg: BenchConfig, variant: Optional[str] = None) -> BenchResult:
    variant = variant or cfg.variant
    params = bench_params(cfg.override(variant=variant))
    sketch, result, _ = _insert_phase(cfg, params, variant)
    sketch.close()
    ui.ok(f"{variant}: {result.ops:,} inserts, {result.amortized_io_per_op:.4f} page I/Os per insert "
          f"(model {result.predicted_io_per_op:.4f})")
    return result


def cmd_query_bench(cfg: BenchConfig, variant: Optional[str] = None) -> BenchResult:
    variant = variant or cfg.variant
    params = bench_params(cfg.override(variant=variant))
    sketch, _, _ = _insert_phase(cfg, params, variant)
    sketch.store.stats.reset()
    queries = uniform_keys(cfg.query_count, cfg.seed + 1)
    ui.progress(f"Querying {len(queries):,} uniform keys on the {variant} sketch …")
    start = time.perf_counter()
    for key in queries:
        sketch.estimate(key)
    wall = time.perf_counter() - start
    stats = sketch.store.stats
    predicted = 1.0 if variant == "buffered" else expected_distinct_pages(params)
    result = BenchResult(variant, len(queries), wall, stats.page_reads, stats.page_writes, predicted)
    sketch.close()
    ui.ok(f"{variant}: {result.ops:,} queries, {result.amortized_io_per_op:.4f} page I/Os per query")
    return result


def cmd_overestimate_bench(cfg: BenchConfig) -> tuple[ErrorReport, ErrorReport]:
    """Same workload into both variants; returns (classical, buffered) reports."""
    reports = []
    for variant in ("classical", "buffered"):
        params = bench_params(cfg.override(variant=variant))
        sketch, result, oracle = _insert_phase(cfg, params, variant, keep_oracle=True)
        report = overestimate_stats(sketch, oracle, threshold=params.epsilon * result.ops)
        sketch.close()
        reports.append(report)
        ui.bullet(f"{variant} overestimate",
                  f"mean {report.mean_overestimate:.4f}, max {report.max_overestimate}, "
                  f"tail ≥ εn {report.tail_fraction:.4%}")
    classical, buffered = reports
    if compare_reports(classical, buffered):
        ui.ok("Mean overestimates agree within 5%.")
    else:
        ui.warn("Mean overestimates differ by more than 5%.")
    return classical, buffered


def overestimate_passed(classical: ErrorReport, buffered: ErrorReport, delta: float) -> bool:
    """Both tails within delta (plus slack) and mean overestimates within 5%."""
    passed = True
    for variant, report in (("classical", classical), ("buffered", buffered)):
        if not within_tail_bound(report, delta):
            ui.error(f"{variant}: tail fraction {report.tail_fraction:.4f} exceeds delta {delta}")
            passed = False
    return compare_reports(classical, buffered) and passed


def cmd_ratio_sweep(cfg: BenchConfig, ratios=SWEEP_RATIOS) -> list[dict]:
    """Insert and query both variants with sketch size = buffer x ratio."""
    rows = []
    for ratio in ratios:
        sized = cfg.override(size_bytes=cfg.buffer_bytes * ratio)
        ui.section(f"RAM-to-sketch ratio {ratio}  ({format_size(sized.size_bytes)} sketch)")
        inserts = {v: cmd_insert_bench(sized, v) for v in ("classical", "buffered")}
        queries = {v: cmd_query_bench(sized, v) for v in ("classical", "buffered")}
        insert_ratio = _ratio(inserts["classical"].amortized_io_per_op, inserts["buffered"].amortized_io_per_op)
        query_ratio = _ratio(queries["classical"].amortized_io_per_op, queries["buffered"].amortized_io_per_op)
        ui.bullet("Insert I/O ratio (classical / buffered)", f"{insert_ratio:.1f}x")
        ui.bullet("Query I/O ratio (classical / buffered)", f"{query_ratio:.2f}x")
        rows.append({
            "ratio": ratio,
            "sizeBytes": sized.size_bytes,
            "insertIoClassical": inserts["classical"].amortized_io_per_op,
            "insertIoBuffered": inserts["buffered"].amortized_io_per_op,
            "queryIoClassical": queries["classical"].amortized_io_per_op,
            "queryIoBuffered": queries["buffered"].amortized_io_per_op,
            "insertIoRatio": insert_ratio,
            "queryIoRatio": query_ratio,
        })
    return rows


def _ratio(a: float, b: float) -> float:
    return a / b if b else math.inf


def allowed_failures(seed_count: int) -> int:
    """One failing seed in twenty is within the statistical budget."""
    return seed_count // 20


def _summarize_checks(name: str, results: list[CheckResult], tolerated: int) -> bool:
    failures = sum(1 for r in results if not r.passed)
    passed = failures <= tolerated
    tails = [r.tail_fraction for r in results]
    ui.bullet(name, f"{len(results) - failures}/{len(results)} within bound "
                    f"(tail max {max(tails):.4f}, bound {results[0].bound:.4f} + {results[0].slack:.4f})")
    (ui.ok if passed else ui.error)(f"{name}: {'PASS' if passed else 'FAIL'}")
    return passed


def verify_guarantee(epsilon: float = math.e / 272, delta: float = 0.05, n: int = 10_000,
                     queries: int = 10_000, seeds: int = 20, seed: int = 0,
                     variant: str = "classical", page_bytes: int = 4096,
                     query_mode: str = "inserted", workers: int = 1) -> tuple[bool, list[dict]]:
    params = derive_params_from_error(epsilon, delta, page_bytes)
    seed_list = [seed + i for i in range(seeds)]
    results = run_trials(lambda s: check_cms_guarantee(params, n, queries, s, variant, query_mode),
                         seed_list, workers)
    rows = [result_row(i, s, n, params, r) for i, (s, r) in enumerate(zip(seed_list, results))]
    return _summarize_checks(f"{variant} guarantee", results, allowed_failures(seeds)), rows


def verify_theorem(k: int = 16, delta: float = 0.05, c: float = 1.0, n: int = 1_000_000,
                   queries: int = 10_000, seeds: int = 20, seed: int = 0,
                   page_bytes: int = 4096, cell_bytes: int = 8,
                   workers: int = 1) -> tuple[bool, list[dict]]:
    depth = depth_for_delta(delta)
    layout = PageLayout.fit(page_bytes, cell_bytes, depth, k)
    params = derive_params_from_geometry(depth, k, layout.columns_per_page, cell_bytes, page_bytes)
    params = replace(params, delta=delta)
    seed_list = [seed + i for i in range(seeds)]
    results = run_trials(lambda s: check_theorem_bound(params, n, c, s, queries), seed_list, workers)
    rows = [result_row(i, s, n, params, r) for i, (s, r) in enumerate(zip(seed_list, results))]
    return _summarize_checks("localized bound", results, allowed_failures(seeds)), rows


def verify_max_load(n: int = 1_000_000, k: int = 64, c: float = 1.0, trials: int = 400,
                    seed: int = 0, placement: str = "random") -> tuple[bool, list[dict]]:
    result = max_load_trials(n, k, c, trials, seed, placement=placement)
    ui.info(f"{trials} trials of {n:,} keys over {k} pages, {placement} placement, "
            f"threshold {result.threshold:,.1f}")
    row = {
        "trial": trials, "seed": seed, "n": n, "k": k, "epsilon": "", "delta": "",
        "threshold": result.threshold, "bound": result.bound,
        "tailFraction": result.tail_fraction, "mean": "", "max": "",
    }
    return _summarize_checks("max page load", [result], 0), [row]


def cmd_verify(suite: str, **kwargs) -> tuple[bool, list[dict]]:
    suites = {"guarantee": verify_guarantee, "theorem": verify_theorem, "maxload": verify_max_load}
    if suite not in suites:
        raise ValueError(f"Unknown verification suite '{suite}' (choose from {', '.join(suites)}).")
    ui.section(f"Verification — {suite}")
    return suites[suite](**kwargs)

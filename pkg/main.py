import argparse
import math
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), "src"))

import ui
import harness
from config import BenchConfig, load_profile, parse_size
from report import BENCH_COLUMNS, CONFIGURE_COLUMNS, build_run_markdown, write_csv, write_markdown, write_run_log
from verification import CSV_COLUMNS

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CHECK_FAILED = 2


def _add_bench_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI file holding benchmark profiles.")
    p.add_argument("--profile", help="Profile (section) to load from --config.")
    p.add_argument("--variant", choices=["classical", "buffered"])
    p.add_argument("--backend", choices=["memory", "file"])
    p.add_argument("--size", type=parse_size, help="Sketch size, e.g. 4MB or 128MB.")
    p.add_argument("--delta", type=float)
    p.add_argument("--overestimate", type=int, help="Maximum overestimate O the sketch is sized for.")
    p.add_argument("--page-bytes", type=parse_size)
    p.add_argument("--buffer-bytes", type=parse_size)
    p.add_argument("--elements", type=int, help="Keys to insert (default: derived element budget).")
    p.add_argument("--queries", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--sketch-path", help="Sketch file for the file backend.")


def _add_output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="CSV output path (default: standard output).")
    p.add_argument("--report", nargs="?", const="bench_report.md", help="Write a Markdown report.")
    p.add_argument("--log", nargs="?", const="bench_log.md", help="Save the full run log as Markdown.")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Count-min sketch and buffered count-min sketch benchmarks over paged storage."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("configure", help="Derive sketch dimensions from size, delta and overestimate.")
    p.add_argument("--size", type=parse_size, default=parse_size("128MB"))
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--overestimate", type=int, default=8)
    p.add_argument("--page-bytes", type=parse_size, default=4096)
    _add_output_flags(p)

    for name, text in (("insert", "Insert benchmark."),
                       ("query", "Query benchmark (runs the insert phase first)."),
                       ("overestimate", "Overestimates of both variants on one workload."),
                       ("sweep", "Insert + query I/O at RAM-to-sketch ratios 2, 4, 8, 16.")):
        p = sub.add_parser(name, help=text)
        _add_bench_flags(p)
        _add_output_flags(p)

    p = sub.add_parser("verify", help="Statistical checks of the error and load bounds.")
    p.add_argument("suite", choices=["guarantee", "theorem", "maxload"])
    p.add_argument("--epsilon", type=float, default=math.e / 272)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--n", type=int)
    p.add_argument("--queries", type=int, default=10_000)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--trials", type=int, default=400)
    p.add_argument("--variant", choices=["classical", "localized", "buffered"], default="classical")
    p.add_argument("--placement", choices=["random", "hash"], default="random")
    p.add_argument("--query-mode", choices=["inserted", "uniform"], default="inserted",
                   help="Query inserted keys or uniform random keys (guarantee suite).")
    p.add_argument("--workers", type=int, default=1,
                   help="Thread-pool size for seeded trials (little speedup: trials hold the GIL).")
    _add_output_flags(p)
    return parser


def bench_config(args) -> BenchConfig:
    cfg = BenchConfig()
    if args.config:
        _, values = load_profile(args.config, args.profile)
        cfg = BenchConfig.from_dict(values)
    return cfg.override(
        variant=args.variant, backend=args.backend, size_bytes=args.size, delta=args.delta,
        max_overestimate=args.overestimate, page_bytes=args.page_bytes,
        buffer_bytes=args.buffer_bytes, element_count=args.elements,
        query_count=args.queries, seed=args.seed, output_path=args.out,
        sketch_path=args.sketch_path,
    )


def _verify_kwargs(args) -> dict:
    if args.suite == "guarantee":
        return dict(epsilon=args.epsilon, delta=args.delta, n=args.n or 10_000,
                    queries=args.queries, seeds=args.seeds, seed=args.seed,
                    variant=args.variant, query_mode=args.query_mode,
                    workers=args.workers)
    if args.suite == "theorem":
        return dict(k=args.k or 16, delta=args.delta, c=args.c, n=args.n or 1_000_000,
                    queries=args.queries, seeds=args.seeds, seed=args.seed, workers=args.workers)
    return dict(n=args.n or 1_000_000, k=args.k or 64, c=args.c, trials=args.trials,
                seed=args.seed, placement=args.placement)


def run(args) -> int:
    if args.command == "configure":
        params = harness.cmd_configure(args.size, args.delta, args.overestimate, args.page_bytes)
        write_csv([harness.configure_row(params, args.size, args.overestimate)], CONFIGURE_COLUMNS, args.out)
        if args.report:
            write_markdown(args.report, build_run_markdown("Sketch Configuration",
                                                           harness.params_rows(params), {}))
        return EXIT_OK

    if args.command == "verify":
        passed, rows = harness.cmd_verify(args.suite, **_verify_kwargs(args))
        write_csv(rows, CSV_COLUMNS, args.out)
        if args.report:
            write_markdown(args.report, build_run_markdown(
                f"Verification — {args.suite}", [], {"Trials": (CSV_COLUMNS, rows)},
            ))
        return EXIT_OK if passed else EXIT_CHECK_FAILED

    cfg = bench_config(args)
    ui.banner("Sketch Benchmark", f"{args.command} · {cfg.backend} backend · seed {cfg.seed}")
    params = harness.bench_params(cfg)
    ui.kv_table(harness.params_rows(params), title="Configuration")

    if args.command == "overestimate":
        classical, buffered = harness.cmd_overestimate_bench(cfg)
        columns = ["variant", "queries", "mean_overestimate", "max_overestimate", "tail_fraction", "threshold"]
        rows = [dict(variant=v, **r.__dict__) for v, r in (("classical", classical), ("buffered", buffered))]
        write_csv(rows, columns, cfg.output_path)
        tables = {"Overestimates": (columns, rows)}
        ok = harness.overestimate_passed(classical, buffered, params.delta)
    elif args.command == "sweep":
        rows = harness.cmd_ratio_sweep(cfg)
        columns = list(rows[0]) if rows else []
        write_csv(rows, columns, cfg.output_path)
        tables = {"RAM-to-sketch ratio sweep": (columns, rows)}
        ok = True
    else:
        bench = harness.cmd_insert_bench if args.command == "insert" else harness.cmd_query_bench
        rows = [bench(cfg).csv_row(cfg)]
        write_csv(rows, BENCH_COLUMNS, cfg.output_path)
        tables = {f"{args.command.title()} Benchmark": (BENCH_COLUMNS, rows)}
        ok = True

    if args.report:
        write_markdown(args.report, build_run_markdown(
            f"Sketch Benchmark — {args.command}", harness.params_rows(params), tables,
        ))
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "out", None) in (None, "-"):
        ui.set_stream(sys.stderr)
    ui.start_log()
    try:
        code = run(args)
    except Exception as e:
        ui.error(str(e))
        code = EXIT_ERROR
    ui.stop_log()
    if args.log:
        write_run_log(args.log)
    ui.set_stream(None)
    return code


if __name__ == "__main__":
    sys.exit(main())

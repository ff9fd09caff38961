"""
Oracle and Monte Carlo checks of the sketch error bounds.

All probabilities use natural logarithms. Statistical checks pass when the
observed tail fraction stays within the bound plus a 3-sigma binomial slack.
"""

import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np
from scipy import stats

from hashing import HashFamily, Key
from sketch.buffered_cms import BufferedCountMinSketch
from sketch.core_cms import CountMinSketch, SketchParams
from sketch.paged_store import MemoryBackend

CSV_COLUMNS = ["trial", "seed", "n", "k", "epsilon", "delta", "threshold", "bound",
               "tailFraction", "mean", "max"]

# Margin demanded over k (ln k)^3 before the max-load threshold is trusted.
ASSUMPTION_FACTOR = 10


class InvariantViolation(Exception):
    pass


class ExactCounter:
    """True frequencies of every key fed to a sketch."""

    def __init__(self, keys: Iterable[Key] = ()):
        self.counts = Counter(keys)

    def add(self, key: Key, count: int = 1) -> None:
        self.counts[key] += count

    def count(self, key: Key) -> int:
        return self.counts.get(key, 0)

    def keys(self):
        return self.counts.keys()

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def __len__(self) -> int:
        return len(self.counts)


@dataclass
class ErrorReport:
    queries: int
    mean_overestimate: float
    max_overestimate: int
    tail_fraction: float
    threshold: float


@dataclass
class CheckResult:
    threshold: float
    bound: float
    tail_fraction: float
    slack: float
    report: Optional[ErrorReport] = None

    @property
    def passed(self) -> bool:
        return self.tail_fraction <= self.bound + self.slack


def binomial_slack(p: float, trials: int) -> float:
    if trials <= 0:
        return 0.0
    p = min(max(p, 0.0), 1.0)
    return 3 * math.sqrt(p * (1 - p) / trials)


def uniform_keys(n: int, seed: int) -> list[int]:
    """n uniform 64-bit integer keys, identical for identical seeds."""
    rng = np.random.default_rng(seed)
    return rng.integers(0, 1 << 64, size=n, dtype=np.uint64).tolist()


def uniformity_pvalue(counts) -> float:
    """Chi-square p-value of a histogram against the uniform distribution."""
    return float(stats.chisquare(np.asarray(counts, dtype=np.float64)).pvalue)


def overestimate_stats(sketch, oracle: ExactCounter, threshold: float = math.inf,
                       queries: Optional[Iterable[Key]] = None) -> ErrorReport:
    """Error = estimate - true count for each distinct inserted key (or given queries)."""
    keys = list(oracle.keys()) if queries is None else list(queries)
    if not keys:
        return ErrorReport(0, 0.0, 0, 0.0, threshold)
    total = 0
    worst = 0
    tail = 0
    for key in keys:
        error = sketch.estimate(key) - oracle.count(key)
        if error < 0:
            raise InvariantViolation(f"key {key!r} underestimated by {-error}")
        total += error
        worst = max(worst, error)
        if error >= threshold:
            tail += 1
    return ErrorReport(
        queries=len(keys),
        mean_overestimate=total / len(keys),
        max_overestimate=worst,
        tail_fraction=tail / len(keys),
        threshold=threshold,
    )


def within_tail_bound(report: ErrorReport, delta: float) -> bool:
    """Tail fraction at the threshold stays below delta plus 3-sigma slack."""
    return report.tail_fraction <= delta + binomial_slack(delta, report.queries)


def compare_reports(classical: ErrorReport, buffered: ErrorReport, tolerance: float = 0.05) -> bool:
    """Mean overestimates agree within a relative tolerance."""
    if classical.mean_overestimate == buffered.mean_overestimate:
        return True
    scale = max(classical.mean_overestimate, buffered.mean_overestimate)
    return abs(classical.mean_overestimate - buffered.mean_overestimate) <= tolerance * scale


def build_variant(params: SketchParams, seed: int, variant: str):
    if variant == "classical":
        return CountMinSketch.build(params, seed)
    if variant == "localized":
        return CountMinSketch.build(params, seed, localized=True)
    if variant == "buffered":
        if not params.buffer_bytes:
            params = params.with_buffer(params.sketch_bytes)
        return BufferedCountMinSketch(params, params.family(seed), MemoryBackend(params.layout))
    raise ValueError(f"unknown sketch variant '{variant}'")


def _fill(sketch, keys: list[int]) -> None:
    if isinstance(sketch, CountMinSketch):
        sketch.update_many(keys)
        return
    for key in keys:
        sketch.update(key)
    sketch.flush_all()


def _query_keys(keys: list[int], query_count: int, seed: int, mode: str) -> list[int]:
    if mode == "uniform":
        return uniform_keys(query_count, seed ^ 0xA5A5)
    rng = np.random.default_rng(seed ^ 0x5A5A)
    distinct = list(dict.fromkeys(keys))
    if query_count >= len(distinct):
        return distinct
    picks = rng.choice(len(distinct), size=query_count, replace=False)
    return [distinct[i] for i in picks]


def check_cms_guarantee(params: SketchParams, n: int, query_count: int, seed: int,
                        variant: str = "classical", query_mode: str = "inserted") -> CheckResult:
    """Tail of Error >= epsilon * n must stay below delta (plus slack)."""
    if params.element_budget and n > params.element_budget:
        raise ValueError(f"n={n} exceeds the element budget {params.element_budget}")
    keys = uniform_keys(n, seed)
    sketch = build_variant(params, seed, variant)
    _fill(sketch, keys)
    oracle = ExactCounter(keys)
    queries = _query_keys(keys, query_count, seed, query_mode)
    threshold = params.epsilon * n
    report = overestimate_stats(sketch, oracle, threshold, queries)
    return CheckResult(threshold, params.delta, report.tail_fraction,
                       binomial_slack(params.delta, report.queries), report)


def theorem_threshold(n: int, epsilon: float, c: float, k: int) -> float:
    return n * epsilon * (1 + math.sqrt(2 * (c + 1) * k * math.log(k) / n))


def check_theorem_bound(params: SketchParams, n: int, c: float, seed: int,
                        query_count: int = 10_000) -> CheckResult:
    """Localized tail at n*eps*(1 + sqrt(2(C+1) k ln k / n)) against delta + 1/k^C."""
    k = params.page_count
    if k < 2:
        raise ValueError("page-localized bound needs at least 2 pages (ln k = 0 otherwise)")
    if n < k:
        raise ValueError(f"n={n} must be at least the page count {k}")
    if c < 1:
        raise ValueError(f"C must be >= 1, got {c}")
    keys = uniform_keys(n, seed)
    sketch = build_variant(params, seed, "localized")
    _fill(sketch, keys)
    threshold = theorem_threshold(n, params.epsilon, c, k)
    bound = params.delta + 1 / k ** c
    report = overestimate_stats(sketch, ExactCounter(keys), threshold,
                                _query_keys(keys, query_count, seed, "inserted"))
    return CheckResult(threshold, bound, report.tail_fraction,
                       binomial_slack(bound, report.queries), report)


def max_load_threshold(n: int, k: int, c: float) -> float:
    return n / k + math.sqrt(2 * (c + 1) * n * math.log(k) / k)


def check_assumption(n: int, k: int) -> None:
    needed = ASSUMPTION_FACTOR * k * math.log(k) ** 3
    if n < needed:
        raise ValueError(
            f"n={n} is not sufficiently larger than k (ln k)^3 for k={k}; "
            f"use n >= {math.ceil(needed)}"
        )


def _random_bins(n: int, k: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).integers(0, k, size=n)


def _hashed_bins(n: int, k: int, seed: int) -> np.ndarray:
    family = HashFamily(seed, 1, k, 1)
    return np.asarray(family.page_indices(range(n)), dtype=np.int64)


PLACEMENTS = {"random": _random_bins, "hash": _hashed_bins}


def max_load(bins: np.ndarray, k: int) -> int:
    return int(np.bincount(bins, minlength=k).max())


def max_load_trials(n: int, k: int, c: float, trials: int, seed: int,
                    placement: str = "random",
                    bins_fn: Optional[Callable[[int, int, int], np.ndarray]] = None,
                    enforce_assumption: bool = True) -> CheckResult:
    """Fraction of trials whose fullest page exceeds n/k + sqrt(2(C+1) n ln k / k)."""
    if k < 2:
        raise ValueError("max-load trials need at least 2 bins")
    if trials < 1:
        raise ValueError("max-load trials need at least one trial")
    if enforce_assumption:
        check_assumption(n, k)
    place = bins_fn or PLACEMENTS[placement]
    threshold = max_load_threshold(n, k, c)
    exceeded = sum(
        1 for trial in range(trials)
        if max_load(place(n, k, seed + trial), k) > threshold
    )
    bound = 1 / k ** c
    return CheckResult(threshold, bound, exceeded / trials, binomial_slack(bound, trials))


def run_trials(fn: Callable[[int], CheckResult], seeds: list[int], workers: int = 1) -> list[CheckResult]:
    """Run independent seeded trials, optionally across a thread pool; order follows seeds.

    Trials are mostly pure-Python hashing and hold the GIL, so workers > 1 only
    overlaps the numpy sections; expect little speedup.
    """
    if workers <= 1 or len(seeds) <= 1:
        return [fn(seed) for seed in seeds]
    with ThreadPoolExecutor(max_workers=min(workers, len(seeds))) as pool:
        return list(pool.map(fn, seeds))


def result_row(trial: int, seed: int, n: int, params: SketchParams, result: CheckResult,
               k: Optional[int] = None) -> dict:
    report = result.report
    return {
        "trial": trial,
        "seed": seed,
        "n": n,
        "k": params.page_count if k is None else k,
        "epsilon": params.epsilon,
        "delta": params.delta,
        "threshold": result.threshold,
        "bound": result.bound,
        "tailFraction": result.tail_fraction,
        "mean": report.mean_overestimate if report else "",
        "max": report.max_overestimate if report else "",
    }
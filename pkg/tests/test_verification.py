import math

import numpy as np
import pytest

from sketch.core_cms import CountMinSketch, derive_params_from_error, derive_params_from_geometry
from verification import (
    CheckResult, ExactCounter, InvariantViolation, binomial_slack, check_assumption,
    check_cms_guarantee, check_theorem_bound, compare_reports, max_load_threshold,
    max_load_trials, overestimate_stats, run_trials, theorem_threshold, uniform_keys,
)


def test_exact_counter_tracks_frequencies():
    oracle = ExactCounter(["a", "b", "a"])
    oracle.add("c", 5)
    assert oracle.count("a") == 2
    assert oracle.count("missing") == 0
    assert oracle.total == 8
    assert len(oracle) == 3


def test_uniform_keys_are_reproducible():
    assert uniform_keys(100, 7) == uniform_keys(100, 7)
    assert uniform_keys(100, 7) != uniform_keys(100, 8)
    assert all(0 <= k < 1 << 64 for k in uniform_keys(1000, 1))


def test_lone_key_has_no_overestimate():
    sketch = CountMinSketch.build(derive_params_from_error(0.01, 0.05), 1)
    sketch.update("only", 3)
    report = overestimate_stats(sketch, ExactCounter({"only": 3}))
    assert (report.queries, report.mean_overestimate, report.max_overestimate) == (1, 0.0, 0)


def test_single_cell_sketch_overestimates_by_everything_else():
    sketch = CountMinSketch.build(derive_params_from_geometry(1, 1, 1), 1)
    oracle = ExactCounter()
    for key, count in (("a", 1), ("b", 2)):
        sketch.update(key, count)
        oracle.add(key, count)
    report = overestimate_stats(sketch, oracle, threshold=2)
    assert report.max_overestimate == 2
    assert report.mean_overestimate == 1.5
    assert report.tail_fraction == 0.5


def test_underestimate_raises_invariant_violation():
    class Broken:
        def estimate(self, key):
            return 0

    with pytest.raises(InvariantViolation):
        overestimate_stats(Broken(), ExactCounter(["x"]))


def test_empty_oracle_gives_empty_report():
    sketch = CountMinSketch.build(derive_params_from_error(0.1, 0.1), 1)
    report = overestimate_stats(sketch, ExactCounter())
    assert report.queries == 0 and report.tail_fraction == 0.0


def test_binomial_slack():
    assert binomial_slack(0.05, 10_000) == pytest.approx(3 * math.sqrt(0.05 * 0.95 / 10_000))
    assert binomial_slack(0.05, 0) == 0.0


def test_classical_guarantee_holds_across_seeds():
    params = derive_params_from_error(math.e / 272, 0.05)
    results = [check_cms_guarantee(params, 10_000, 10_000, seed) for seed in range(20)]
    assert sum(r.passed for r in results) >= 19
    assert all(r.report.queries == 10_000 for r in results)


@pytest.mark.parametrize("variant", ["localized", "buffered"])
def test_guarantee_check_runs_for_page_localized_variants(variant):
    params = derive_params_from_error(math.e / 272, 0.05)
    result = check_cms_guarantee(params, 10_000, 2_000, seed=3, variant=variant)
    assert result.passed


def test_wide_threshold_leaves_no_tail():
    params = derive_params_from_error(0.99, 0.5)
    result = check_cms_guarantee(params, 50, 50, seed=1)
    assert result.threshold == pytest.approx(49.5)
    assert result.tail_fraction == 0.0


def test_uniform_query_mode_covers_absent_keys():
    params = derive_params_from_error(math.e / 272, 0.05)
    result = check_cms_guarantee(params, 5_000, 1_000, seed=2, query_mode="uniform")
    assert result.report.queries == 1_000
    assert result.passed


def test_guarantee_rejects_more_keys_than_budgeted():
    from sketch.core_cms import derive_params_from_size
    params = derive_params_from_size(64 * 1024, 0.05, 8)
    with pytest.raises(ValueError):
        check_cms_guarantee(params, params.element_budget + 1, 10, seed=0)


def test_theorem_threshold_multiplier():
    n, k = 1_000_000, 16
    multiplier = theorem_threshold(n, 1.0, 1, k) / n
    assert multiplier == pytest.approx(1 + math.sqrt(4 * 16 * math.log(16) / n))
    assert multiplier == pytest.approx(1.0133, abs=1e-4)


def test_max_load_threshold_value():
    t = max_load_threshold(1_000_000, 64, 1)
    assert t == pytest.approx(15625 + 509.8, abs=0.5)


def test_theorem_bound_small_instance():
    params = derive_params_from_geometry(depth=3, page_count=4, columns_per_page=10)
    result = check_theorem_bound(params, 10_000, 1, seed=5, query_count=2_000)
    assert result.bound == pytest.approx(math.exp(-3) + 0.25)
    assert result.passed


@pytest.mark.parametrize("pages, n, c", [(1, 100, 1), (4, 3, 1), (4, 100, 0.5)])
def test_theorem_bound_rejects_degenerate_inputs(pages, n, c):
    params = derive_params_from_geometry(depth=2, page_count=pages, columns_per_page=4)
    with pytest.raises(ValueError):
        check_theorem_bound(params, n, c, seed=0)


@pytest.mark.slow
def test_theorem_bound_full_scale():
    params = derive_params_from_geometry(depth=3, page_count=16, columns_per_page=170, page_bytes=4096)
    results = [check_theorem_bound(params, 1_000_000, 1, seed) for seed in range(20)]
    assert sum(r.passed for r in results) >= 19


def test_max_load_trials_hold_at_full_scale():
    result = max_load_trials(1_000_000, 64, 1, trials=400, seed=0)
    assert result.bound == pytest.approx(1 / 64)
    assert result.passed


def test_max_load_with_hashed_placement():
    result = max_load_trials(50_000, 8, 1, trials=5, seed=0, placement="hash")
    assert result.passed


def test_max_load_counts_threshold_crossings():
    def round_robin(n, k, seed):
        return np.arange(n) % k

    def one_bin(n, k, seed):
        return np.zeros(n, dtype=np.int64)

    assert max_load_trials(100_000, 16, 1, 10, 0, bins_fn=round_robin).tail_fraction == 0.0
    crowded = max_load_trials(100_000, 16, 1, 10, 0, bins_fn=one_bin)
    assert crowded.tail_fraction == 1.0
    assert not crowded.passed


def test_max_load_assumption_is_enforced():
    with pytest.raises(ValueError):
        check_assumption(1_000, 64)
    with pytest.raises(ValueError):
        max_load_trials(1_000, 64, 1, 10, 0)
    relaxed = max_load_trials(1_000, 64, 1, 10, 0, enforce_assumption=False)
    assert 0.0 <= relaxed.tail_fraction <= 1.0


def test_max_load_rejects_single_bin():
    with pytest.raises(ValueError):
        max_load_trials(1_000, 1, 1, 10, 0, enforce_assumption=False)


def test_run_trials_keeps_seed_order():
    def fake(seed):
        return CheckResult(threshold=seed, bound=0.0, tail_fraction=0.0, slack=0.0)

    seeds = list(range(30))
    assert [r.threshold for r in run_trials(fake, seeds, workers=4)] == seeds
    assert [r.threshold for r in run_trials(fake, seeds)] == seeds


def test_buffered_overestimates_match_classical():
    params = derive_params_from_error(math.e / 272, 0.05)
    classical = check_cms_guarantee(params, 100_000, 10_000, seed=17, variant="classical")
    buffered = check_cms_guarantee(params, 100_000, 10_000, seed=17, variant="buffered")
    assert compare_reports(classical.report, buffered.report)
    assert classical.passed and buffered.passed


def test_compare_reports_tolerance():
    from verification import ErrorReport
    base = ErrorReport(10, 100.0, 120, 0.0, 1.0)
    assert compare_reports(base, ErrorReport(10, 104.0, 130, 0.0, 1.0))
    assert not compare_reports(base, ErrorReport(10, 110.0, 130, 0.0, 1.0))


def test_within_tail_bound_uses_binomial_slack():
    from verification import ErrorReport, within_tail_bound
    slack = binomial_slack(0.05, 10_000)
    assert within_tail_bound(ErrorReport(10_000, 1.0, 3, 0.05 + slack, 5.0), 0.05)
    assert not within_tail_bound(ErrorReport(10_000, 1.0, 3, 0.05 + 2 * slack, 5.0), 0.05)

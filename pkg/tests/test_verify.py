from __future__ import annotations

import numpy as np
import pytest

from shardsim.verify import (
    PropertyResult,
    check_expected_cardinality,
    check_metric_oracle,
    check_monotone_convergence,
    check_pricing_consistency,
    check_vertex_optimality,
    compare_pool,
    random_loading,
    random_network,
    random_pool,
    random_simplex,
    run_all,
)


def test_random_simplex_on_simplex():
    rng = np.random.default_rng(0)
    for _ in range(500):
        x = random_simplex(rng, int(rng.integers(1, 9)))
        assert (x >= 0).all() and x.sum() == pytest.approx(1.0, abs=1e-12)


def test_random_loading_bounds():
    rng = np.random.default_rng(1)
    for _ in range(500):
        m = int(rng.integers(1, 9))
        lam = random_loading(rng, m)
        assert min(lam) >= 0 and sum(lam) <= 1 - 1 / m + 1e-12


def test_random_network_is_valid():
    rng = np.random.default_rng(2)
    net = random_network(rng, 10)
    assert 10 <= len(net.edges) <= 40


def test_oracle_detects_corrupted_cache():
    pool = random_pool(np.random.default_rng(3), 4, 20)
    assert compare_pool(pool) == pytest.approx(0.0, abs=1e-12)
    pool.per_shard_counts[0] += 1
    assert compare_pool(pool) is None


@pytest.mark.parametrize("check", [
    lambda: check_vertex_optimality(trials=200, seed=7),
    lambda: check_monotone_convergence(trials=20, seed=7),
    lambda: check_pricing_consistency(trials=50, seed=7),
    lambda: check_metric_oracle(trials=200, seed=7),
    lambda: check_expected_cardinality(16),
])
def test_checks_pass(check):
    assert check().passed


def test_run_all_single_shard():
    results = run_all(m=1, trials=100)
    assert all(r.passed for r in results) and len(results) == 6


def test_result_line():
    assert PropertyResult("x", True, 3, "ok").line() == "[PASS] x: 3 trials (ok)"
    assert PropertyResult("x", False, 3).line() == "[FAIL] x: 3 trials"

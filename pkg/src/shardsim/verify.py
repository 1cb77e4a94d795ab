"""Randomised property checks behind ``shardsim verify``.

Each check returns a :class:`PropertyResult`; none of them raise on failure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .game import (
    TIE_TOL,
    EdgeStrategy,
    PotentialState,
    best_response_request,
    best_response_sweeps,
    edge_utility,
    request_values,
    verify_potential_step,
)
from .ledger import (
    Transaction,
    TransactionPool,
    loading_from_counts,
    pool_efficiency,
    shard_balance,
    shard_loading,
    shard_usage,
)
from .network import Network
from .pricing import (
    PricingParams,
    expected_cardinality_matrix,
    expected_price,
    price,
    price_matrix,
    price_matvec,
)

EXACT_TOL = 1e-12


@dataclass(frozen=True)
class PropertyResult:
    name: str
    passed: bool
    trials: int
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        return f"[{status}] {self.name}: {self.trials} trials{extra}"


def random_simplex(rng: np.random.Generator, m: int) -> np.ndarray:
    """Uniform draw from the simplex, with a chance of landing on a vertex or face."""
    r = rng.random()
    if r < 0.2:
        e = np.zeros(m)
        e[rng.integers(m)] = 1.0
        return e
    x = rng.exponential(size=m)
    if r < 0.4 and m > 1:
        x[rng.random(m) < 0.5] = 0.0
        if x.sum() == 0:
            x[rng.integers(m)] = 1.0
    return x / x.sum()


def random_pool(rng: np.random.Generator, m: int, size: int, k_max: int | None = None) -> TransactionPool:
    pool = TransactionPool(m)
    k_max = m if k_max is None else min(k_max, m)
    for _ in range(size):
        k = int(rng.integers(1, k_max + 1))
        shards = rng.choice(m, size=k, replace=False)
        pool.append(Transaction.spread(int(rng.integers(100)), int(rng.integers(100)),
                                       shards.tolist(), float(rng.uniform(0.1, 100)), m))
    return pool


def random_loading(rng: np.random.Generator, m: int) -> list[float]:
    """Loading vector of a random pool: any mix from balanced to one hot shard."""
    counts = rng.integers(0, 50, size=m)
    if rng.random() < 0.3:
        counts[rng.integers(m)] += int(rng.integers(0, 500))
    total = int(counts.sum())
    return loading_from_counts(counts.tolist(), total)


def random_params(rng: np.random.Generator) -> PricingParams:
    choice = rng.integers(4)
    alpha = [0.0, 1.0, float(rng.uniform(0, 3)), float(10 ** rng.uniform(-5, -2))][choice]
    return PricingParams(alpha=alpha)


def _faulty(pmat: np.ndarray) -> np.ndarray:
    bad = pmat.copy()
    if bad.shape[0] > 1:
        bad[0, 1] = -bad[0, 1]
    else:
        bad[0, 0] = -bad[0, 0]
    return bad


def check_potential_identity(trials: int = 2000, seed: int = 0, m_range: tuple[int, int] = (2, 8),
                   max_edges: int = 12, inject_fault: bool = False) -> PropertyResult:
    """Change in the potential equals change in the deviating edge's utility.

    ``inject_fault`` evaluates the edge utility against a corrupted matrix;
    the check must then fail.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        m = int(rng.integers(m_range[0], m_range[1] + 1))
        pmat = price_matrix(random_loading(rng, m), random_params(rng))
        n_edges = int(rng.integers(1, max_edges + 1))
        strategies = [EdgeStrategy(random_simplex(rng, m), random_simplex(rng, m)) for _ in range(n_edges)]
        state = PotentialState(strategies, pmat)
        edge = int(rng.integers(n_edges))
        side = "w" if rng.random() < 0.5 else "v"
        old = getattr(strategies[edge], side)
        new = random_simplex(rng, m)
        if inject_fault:
            d_h, _ = verify_potential_step(state, edge, side, old, new)
            bad = _faulty(pmat)
            after = strategies[edge].copy()
            setattr(after, side, new)
            d_u = edge_utility(after, bad) - edge_utility(strategies[edge], bad)
        else:
            d_h, d_u = verify_potential_step(state, edge, side, old, new)
        worst = max(worst, abs(d_h - d_u))
    return PropertyResult("potential-delta-identity", worst <= EXACT_TOL, trials,
                          f"max |dH - du| = {worst:.3g}")


def check_vertex_optimality(trials: int = 1000, mixed: int = 1000, seed: int = 1,
                            m_range: tuple[int, int] = (2, 8)) -> PropertyResult:
    """The pure best response is never beaten by a mixed strategy."""
    rng = np.random.default_rng(seed)
    worst_gap = -np.inf
    worst_vertex = 0.0
    for _ in range(trials):
        m = int(rng.integers(m_range[0], m_range[1] + 1))
        pmat = price_matrix(random_loading(rng, m), random_params(rng))
        v_hat = random_simplex(rng, m)
        w_star = best_response_request(pmat, v_hat)
        br_value = float(w_star @ pmat @ v_hat)
        vals = request_values(pmat, v_hat)
        worst_vertex = max(worst_vertex, abs(br_value - vals.max()))
        ws = rng.dirichlet(np.ones(m), size=mixed)
        worst_gap = max(worst_gap, float((ws @ vals).max() - br_value))
    ok = worst_gap <= EXACT_TOL and worst_vertex <= EXACT_TOL
    return PropertyResult("vertex-optimality", ok, trials,
                          f"max mixed - pure = {worst_gap:.3g}, |pure - best vertex| = {worst_vertex:.3g}")


def random_network(rng: np.random.Generator, n: int) -> Network:
    """Random directed graph on n agents with between n and 4n distinct edges."""
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    k = int(rng.integers(n, min(4 * n, len(pairs)) + 1))
    picked = sorted(rng.choice(len(pairs), size=k, replace=False).tolist())
    return Network(n, tuple(pairs[p] for p in picked), "random")


def check_monotone_convergence(trials: int = 100, seed: int = 2, max_n: int = 50,
                               m_range: tuple[int, int] = (2, 8), max_sweeps: int = 10) -> PropertyResult:
    """Frozen-P best-response sweeps raise H monotonically and stop at a fixed point."""
    rng = np.random.default_rng(seed)
    failures = 0
    worst_drop = 0.0
    most_sweeps = 0
    for _ in range(trials):
        n = int(rng.integers(3, max_n + 1))
        m = int(rng.integers(m_range[0], m_range[1] + 1))
        pmat = price_matrix(random_loading(rng, m), random_params(rng))
        n_edges = len(random_network(rng, n).edges)
        strategies = [EdgeStrategy(random_simplex(rng, m), random_simplex(rng, m)) for _ in range(n_edges)]
        trace, converged = best_response_sweeps(strategies, pmat, max_sweeps)
        drops = np.diff(trace)
        worst_drop = min(worst_drop, float(drops.min()) if len(drops) else 0.0)
        most_sweeps = max(most_sweeps, (len(trace) - 1) // (2 * n_edges))
        if not converged or (len(drops) and drops.min() < -EXACT_TOL) or not is_fixed_point(strategies, pmat):
            failures += 1
    return PropertyResult("potential-monotone-convergence", failures == 0, trials,
                          f"failures={failures}, largest H drop={worst_drop:.3g}, max sweeps={most_sweeps}")


def is_fixed_point(strategies: list[EdgeStrategy], pmat: np.ndarray) -> bool:
    """No single best-response update would change any strategy."""
    for st in strategies:
        vals = pmat @ st.v
        if vals.max() > float(st.w @ vals) + TIE_TOL:
            return False
        vals = st.w @ pmat
        if vals.max() > float(vals @ st.v) + TIE_TOL:
            return False
    return True


def check_pricing_consistency(trials: int = 200, seed: int = 3, m_range: tuple[int, int] = (1, 8)) -> PropertyResult:
    """Expected price on pure strategies equals the direct price of that shard set,
    and the matrix-free product equals the matrix product."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        m = int(rng.integers(m_range[0], m_range[1] + 1))
        pool = random_pool(rng, m, int(rng.integers(0, 40)))
        params = random_params(rng)
        lam = shard_loading(pool)
        pmat = price_matrix(lam, params)
        for s in range(m):
            for t in range(m):
                ws, vt = np.eye(m)[s], np.eye(m)[t]
                worst = max(worst, abs(expected_price(ws, vt, pmat) - price({s, t}, pool, params)))
        x = random_simplex(rng, m)
        worst = max(worst, float(np.abs(np.array(price_matvec(lam, x, params)) - pmat @ x).max()))
    return PropertyResult("pricing-consistency", worst <= EXACT_TOL, trials, f"max error = {worst:.3g}")


def brute_force_metrics(txs: list[Transaction], m: int) -> dict[str, object]:
    """Pool metrics straight from the transaction list, no cached counts."""
    counts = [sum(1 for tx in txs if tx.amounts[s] > 0) for s in range(m)]
    total = sum(sum(1 for x in tx.amounts if x > 0) for tx in txs)
    usage = [c / total if total else 0.0 for c in counts]
    lam = [max(0.0, u - 1.0 / m) if total else 0.0 for u in usage]
    out: dict[str, object] = {"counts": counts, "total": total, "usage": usage, "loading": lam,
                              "balance": 1.0 - sum(lam)}
    if txs:
        out["efficiency"] = (1.0 - sum(lam)) / (total / len(txs))
    return out


def compare_pool(pool: TransactionPool) -> float | None:
    """Max real-valued discrepancy between cached and brute-force metrics, or
    None when the integer caches disagree."""
    ref = brute_force_metrics(pool.transactions, pool.m)
    if pool.per_shard_counts != ref["counts"] or pool.total_usages != ref["total"]:
        return None
    err = max(float(np.abs(shard_usage(pool) - ref["usage"]).max()),
              float(np.abs(shard_loading(pool) - ref["loading"]).max()),
              abs(shard_balance(pool) - ref["balance"]))
    if len(pool):
        err = max(err, abs(pool_efficiency(pool) - ref["efficiency"]))
    return err


def check_metric_oracle(trials: int = 500, seed: int = 4, m_range: tuple[int, int] = (1, 8),
                        max_size: int = 60) -> PropertyResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    mismatches = 0
    for _ in range(trials):
        m = int(rng.integers(m_range[0], m_range[1] + 1))
        pool = random_pool(rng, m, int(rng.integers(0, max_size + 1)))
        if rng.random() < 0.2:
            pool.reset()
            for tx in random_pool(rng, m, int(rng.integers(0, 10))).transactions:
                pool.append(tx)
        err = compare_pool(pool)
        if err is None:
            mismatches += 1
        else:
            worst = max(worst, err)
    ok = mismatches == 0 and worst <= EXACT_TOL
    return PropertyResult("metric-oracle-equivalence", ok, trials,
                          f"count mismatches={mismatches}, max error={worst:.3g}")


def check_expected_cardinality(m_max: int = 16) -> PropertyResult:
    worst = 0.0
    for m in range(1, m_max + 1):
        w = v = np.full(m, 1.0 / m)
        bilinear = float(w @ expected_cardinality_matrix(m) @ v)
        enumerated = sum(w[s] * v[t] * (1 if s == t else 2) for s in range(m) for t in range(m))
        worst = max(worst, abs(bilinear - (2 - 1 / m)), abs(bilinear - enumerated))
    return PropertyResult("expected-cardinality", worst <= EXACT_TOL, m_max, f"max error = {worst:.3g}")


def run_all(seed: int = 0, m: int | None = None, trials: int = 2000,
            inject_fault: bool = False) -> list[PropertyResult]:
    """The ``verify`` suite.  ``m`` pins the shard count for every check."""
    rng_m = (m, m) if m is not None else None
    checks: list[Callable[[], PropertyResult]] = [
        lambda: check_potential_identity(trials, seed, rng_m or (2, 8), inject_fault=inject_fault),
        lambda: check_vertex_optimality(max(trials // 10, 1), 1000, seed + 1, rng_m or (2, 8)),
        lambda: check_monotone_convergence(min(trials, 100), seed + 2, 50, rng_m or (2, 8)),
        lambda: check_pricing_consistency(max(trials // 10, 1), seed + 3, rng_m or (1, 8)),
        lambda: check_metric_oracle(max(trials // 4, 1), seed + 4, rng_m or (1, 8)),
        lambda: check_expected_cardinality(m or 16),
    ]
    return [c() for c in checks]


from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shardsim.ledger import Transaction, TransactionPool
from shardsim.pricing import (
    PricingError,
    PricingParams,
    check_simplex,
    expected_balance_matrix,
    expected_cardinality_matrix,
    expected_efficiency_matrix,
    expected_price,
    price,
    price_from_loading,
    price_matrix,
    price_matvec,
)
from shardsim.verify import random_loading

LAM = [0.0, 0.25, 0.25, 0.0]
E = np.eye(4)
UNIFORM4 = np.full(4, 0.25)


def loaded_pool():
    pool = TransactionPool(4)
    for s in [1] * 4 + [2] * 4:
        pool.append(Transaction.spread(0, 1, [s], 10.0, 4))
    return pool


def balanced_pool():
    pool = TransactionPool(4)
    for s in range(4):
        pool.append(Transaction.spread(0, 1, [s], 10.0, 4))
    return pool


class TestPrice:
    @pytest.mark.parametrize("alpha", [0.0, 0.001, 1.0, 3.0])
    def test_unloaded_single_shard_costs_p0(self, alpha):
        assert price([2], balanced_pool(), PricingParams(p0=0.3, alpha=alpha)) == pytest.approx(0.3)

    def test_two_unloaded_shards_alpha_one(self):
        assert price([0, 3], balanced_pool(), PricingParams(alpha=1.0)) == pytest.approx(0.5)

    def test_single_loaded_shard(self):
        assert price([1], loaded_pool(), PricingParams()) == pytest.approx(0.25)

    def test_empty_pool_prices_as_balanced(self):
        assert price([0], TransactionPool(4), PricingParams(p0=1.0)) == 1.0

    def test_empty_shard_set(self):
        with pytest.raises(PricingError):
            price_from_loading([], LAM, PricingParams())

    @pytest.mark.parametrize("kwargs", [dict(p_max=-1.0), dict(alpha=-0.1)])
    def test_param_validation(self, kwargs):
        with pytest.raises(PricingError):
            PricingParams(**kwargs)

    def test_cross_discount(self):
        assert PricingParams(alpha=1.0).cross_discount == pytest.approx(0.5)
        assert PricingParams(alpha=0.0).cross_discount == 1.0


class TestMatrices:
    def test_cardinality_pure(self):
        mc = expected_cardinality_matrix(2)
        e0, e1 = np.eye(2)
        assert e0 @ mc @ e0 == 1
        assert e0 @ mc @ e1 == 2

    def test_cardinality_uniform(self):
        assert UNIFORM4 @ expected_cardinality_matrix(4) @ UNIFORM4 == pytest.approx(1.75)

    def test_cardinality_rejects_zero_shards(self):
        with pytest.raises(PricingError):
            expected_cardinality_matrix(0)

    def test_balance_matrix(self):
        np.testing.assert_array_equal(expected_balance_matrix(np.zeros(4)), np.ones((4, 4)))
        mb = expected_balance_matrix(LAM)
        assert mb[1, 2] == pytest.approx(0.5)
        assert mb[0, 0] == 1.0
        assert E[1] @ mb @ E[2] == pytest.approx(0.5)

    def test_efficiency_matrix(self):
        me = expected_efficiency_matrix(np.zeros(4))
        np.testing.assert_allclose(me, 0.5 + 0.5 * np.eye(4))
        assert UNIFORM4 @ me @ UNIFORM4 == pytest.approx(0.625)
        np.testing.assert_array_equal(expected_efficiency_matrix(LAM), price_matrix(LAM, PricingParams(alpha=1.0)))

    def test_price_matrix_entries(self):
        np.testing.assert_array_equal(price_matrix(np.zeros(4), PricingParams(alpha=0.0)), np.ones((4, 4)))
        assert price_matrix(LAM, PricingParams(alpha=1.0))[1, 2] == pytest.approx(0.25)

    def test_expected_price_matches_direct_price(self):
        pmat = price_matrix(LAM, PricingParams())
        assert expected_price(E[1], E[1], pmat) == pytest.approx(0.25)
        assert price([1], loaded_pool(), PricingParams()) == pytest.approx(0.25)

    def test_expected_price_examples(self):
        p1 = price_matrix(np.zeros(4), PricingParams(alpha=1.0))
        assert expected_price(E[2], E[2], price_matrix(np.zeros(4), PricingParams())) == 0.0
        assert expected_price(E[1], E[2], p1) == pytest.approx(0.5)
        assert expected_price(UNIFORM4, UNIFORM4, p1) == pytest.approx(0.375)

    def test_expected_price_applies_params(self):
        params = PricingParams(p0=1.0, p_max=2.0, alpha=1.0)
        pmat = price_matrix(np.zeros(4), params)
        assert expected_price(E[0], E[1], pmat, params) == pytest.approx(2.0)

    def test_simplex_check(self):
        with pytest.raises(PricingError):
            check_simplex(np.array([0.5, 0.6]))
        with pytest.raises(PricingError):
            expected_price(np.array([1.2, -0.2]), E[0][:2], np.ones((2, 2)))


def test_pure_strategy_consistency_exhaustive():
    rng = np.random.default_rng(11)
    for m in range(1, 9):
        for _ in range(5):
            pool = TransactionPool(m)
            for _ in range(int(rng.integers(0, 30))):
                k = int(rng.integers(1, m + 1))
                pool.append(Transaction.spread(0, 1, rng.choice(m, k, replace=False).tolist(), 1.0, m))
            for alpha in (0.0, 0.00015, 0.001, 1.0, 2.5):
                params = PricingParams(p0=0.1, p_max=2.0, alpha=alpha)
                lam = np.asarray(pool.per_shard_counts, float)
                lam = np.maximum(0, lam / pool.total_usages - 1 / m) if pool.total_usages else np.zeros(m)
                pmat = price_matrix(lam, params)
                for s, t in itertools.product(range(m), repeat=2):
                    got = expected_price(np.eye(m)[s], np.eye(m)[t], pmat, params)
                    assert got == pytest.approx(price({s, t}, pool, params), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1), st.floats(0, 3))
def test_matvec_matches_matrix_and_symmetry(m, seed, alpha):
    rng = np.random.default_rng(seed)
    lam = random_loading(rng, m)
    params = PricingParams(alpha=alpha)
    pmat = price_matrix(lam, params)
    x = rng.dirichlet(np.ones(m))
    np.testing.assert_allclose(price_matvec(lam, x, params), pmat @ x, atol=1e-12)
    np.testing.assert_array_equal(pmat, pmat.T)
    assert pmat.min() >= 0 and pmat.max() <= 1
    w, v = rng.dirichlet(np.ones(m)), rng.dirichlet(np.ones(m))
    assert w @ pmat @ v == pytest.approx(v @ pmat @ w, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 0.2), min_size=2, max_size=8), st.floats(0.0001, 2))
def test_price_monotone_in_balance_and_cardinality(lam, alpha):
    params = PricingParams(alpha=alpha)
    m = len(lam)
    singles = [price_from_loading([s], lam, params) for s in range(m)]
    order = np.argsort(lam)
    assert all(singles[a] <= singles[b] + 1e-15 for a, b in zip(order, order[1:]))
    # same balance, larger set: strictly dearer
    flat = [0.0] * m
    assert price_from_loading([0, 1], flat, params) > price_from_loading([0], flat, params)

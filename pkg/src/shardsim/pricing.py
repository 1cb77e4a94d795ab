"""Efficiency-based transaction pricing and the expected-value matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .ledger import TransactionPool, shard_loading

SIMPLEX_TOL = 1e-9


class PricingError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class PricingParams:
    p0: float = 0.0
    p_max: float = 1.0
    alpha: float = 0.0

    def __post_init__(self) -> None:
        if self.p_max < 0:
            raise PricingError("p_max must be >= 0")
        if self.alpha < 0:
            raise PricingError("alpha must be >= 0")

    @property
    def cross_discount(self) -> float:
        """1 / 2**alpha, the off-diagonal factor of the price matrix."""
        return math.exp(-self.alpha * math.log(2.0))


def price_from_loading(shards: Sequence[int], loading: Sequence[float],
                       params: PricingParams) -> float:
    if not shards:
        raise PricingError("cannot price an empty shard set")
    balance = 1.0 - sum(loading[s] for s in shards)
    k = len(shards)
    scale = 1.0 if k == 1 else math.exp(params.alpha * math.log(k))
    return params.p0 + (1.0 - balance / scale) * params.p_max


def price(tx_shards: Iterable[int], pool: TransactionPool, params: PricingParams) -> float:
    """Fee for a transaction touching ``tx_shards`` given the current pool."""
    shards = sorted(set(tx_shards))
    return price_from_loading(shards, shard_loading(pool), params)


def expected_cardinality_matrix(m: int) -> np.ndarray:
    if m < 1:
        raise PricingError("m must be >= 1")
    return 2.0 * np.ones((m, m)) - np.eye(m)


def expected_balance_matrix(loading: Sequence[float]) -> np.ndarray:
    lam = np.asarray(loading, dtype=float)
    mat = 1.0 - (lam[:, None] + lam[None, :])
    np.fill_diagonal(mat, 1.0 - lam)
    return mat


def _clamp(mat: np.ndarray) -> np.ndarray:
    # Valid loadings keep every entry >= 1/m; clamping only absorbs rounding.
    assert mat.min() > -1e-9 and mat.max() < 1.0 + 1e-9, "matrix entry outside [0, 1]"
    return np.clip(mat, 0.0, 1.0, out=mat)


def price_matrix(loading: Sequence[float], params: PricingParams) -> np.ndarray:
    """Matrix P with 1 - lam_s on the diagonal and (1 - lam_s - lam_t) / 2**alpha off it."""
    lam = np.asarray(loading, dtype=float)
    mat = (1.0 - (lam[:, None] + lam[None, :])) * params.cross_discount
    np.fill_diagonal(mat, 1.0 - lam)
    return _clamp(mat)


def price_matvec(loading: Sequence[float], x: Sequence[float], params: PricingParams) -> list[float]:
    """P @ x without forming P (P is symmetric, so this is also x @ P).

    Uses (P x)_s = (1 - l_s) x_s + c [(1 - l_s)(X - x_s) - (L - l_s x_s)] with
    X = sum(x), L = sum(l * x) and c = 1 / 2**alpha.
    """
    c = params.cross_discount
    total = sum(x)
    weighted = sum(l * xi for l, xi in zip(loading, x))
    return [(1.0 - l) * xi + c * ((1.0 - l) * (total - xi) - (weighted - l * xi))
            for l, xi in zip(loading, x)]


def expected_efficiency_matrix(loading: Sequence[float]) -> np.ndarray:
    return price_matrix(loading, PricingParams(alpha=1.0))


def check_simplex(x: np.ndarray, name: str = "distribution") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or (x < 0).any() or abs(x.sum() - 1.0) > SIMPLEX_TOL:
        raise PricingError(f"{name} is not on the probability simplex: {x}")
    return x


def expected_price(w: Sequence[float], v: Sequence[float], pmat: np.ndarray,
                   params: PricingParams | None = None) -> float:
    """Expected fee of future transactions: p0 + (1 - w^T P v) * p_max."""
    w = check_simplex(w, "request distribution")
    v = check_simplex(v, "sending distribution")
    params = params or PricingParams()
    return params.p0 + (1.0 - float(w @ pmat @ v)) * params.p_max

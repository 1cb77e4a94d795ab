"""Receiver shard requests, sender fulfillment and balance settlement."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import NamedTuple, Sequence

import numpy as np

from .game import TIE_TOL, EmpiricalEstimate, argmax_lowest
from .ledger import Transaction, TransactionPool, loading_from_counts
from .pricing import PricingParams, price_from_loading, price_matvec


class SettlementError(RuntimeError):
    """A settlement would overdraw a balance; indicates a feasibility bug."""


@dataclass
class AgentState:
    id: int
    balances: np.ndarray
    gamma_r: float = 0.0
    gamma_s: float = 0.0
    # receiver-side estimates of each sender's sending shards, keyed by sender
    send_estimates: dict[int, EmpiricalEstimate] = field(default_factory=dict)
    # sender-side estimates of each receiver's request shards, keyed by receiver
    request_estimates: dict[int, EmpiricalEstimate] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not (0.0 <= self.gamma_r <= 1.0 and 0.0 <= self.gamma_s <= 1.0):
            raise ValueError("gamma_r and gamma_s must lie in [0, 1]")

    @property
    def m(self) -> int:
        return len(self.balances)

    def send_estimate(self, sender: int) -> EmpiricalEstimate:
        est = self.send_estimates.get(sender)
        if est is None:
            est = self.send_estimates[sender] = EmpiricalEstimate.uniform(self.m)
        return est

    def request_estimate(self, receiver: int) -> EmpiricalEstimate:
        est = self.request_estimates.get(receiver)
        if est is None:
            est = self.request_estimates[receiver] = EmpiricalEstimate.uniform(self.m)
        return est


@dataclass(frozen=True)
class FulfillmentResult:
    accepted: bool
    shard_set: tuple[int, ...] = ()
    funding: tuple[int, ...] = ()
    fee: float = 0.0
    reason: str = ""


class Candidate(NamedTuple):
    """One way to fund a transaction: withdraw from ``funding``, touching ``shard_set``."""

    funding: tuple[int, ...]
    shard_set: tuple[int, ...]
    fee: float | None


def _pool_loading(pool: TransactionPool) -> list[float]:
    return loading_from_counts(pool.per_shard_counts, pool.total_usages)


def choose_request_shard(receiver: AgentState, sender_id: int, amount: float,
                         pool: TransactionPool, params: PricingParams, *,
                         loading: Sequence[float] | None = None,
                         rng: np.random.Generator | None = None) -> int:
    """Shard minimising gamma_r * (immediate fee) + (1 - gamma_r) * (expected future fee).

    The immediate fee is that of a single-shard transaction in the candidate
    shard; the expected future fee uses the receiver's estimate of the
    sender's sending distribution.  ``rng`` switches ties to a random draw.
    """
    m = receiver.m
    if m == 1 or params.p_max == 0:
        return 0 if rng is None else int(rng.integers(m))
    if loading is None:
        loading = _pool_loading(pool)
    g = receiver.gamma_r
    future = price_matvec(loading, receiver.send_estimate(sender_id).as_list(), params)
    if g == 0.0:
        score = future
    else:
        score = [g * (1.0 - l) + (1.0 - g) * f for l, f in zip(loading, future)]
    return argmax_lowest(score, rng)


def funding_candidates(sender: AgentState, request_shard: int, amount: float,
                       loading: Sequence[float], params: PricingParams,
                       k_max: int = 2, lazy_fees: bool = False,
                       sizes: tuple[int, int] | None = None) -> list[Candidate]:
    """Every funding set whose transaction touches at most ``k_max`` shards and
    whose balances cover amount plus the fee of that shard set.

    Funding shards must hold resources.  Candidates are ordered by funding-set
    size, then lexicographically, so single-shard funding comes first in
    shard order.  ``sizes`` restricts the funding-set sizes (inclusive).  With
    ``lazy_fees`` a candidate whose funds cover the largest possible fee is
    accepted unpriced (``fee`` is None).
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    b = sender.balances.tolist()
    floor = amount + params.p0
    ceiling = floor + params.p_max
    held = [s for s, x in enumerate(b) if x > 0]
    lo, hi = sizes if sizes is not None else (1, k_max)
    out: list[Candidate] = []
    for size in range(max(lo, 1), min(hi, k_max, len(held)) + 1):
        for funding in combinations(held, size):
            if request_shard in funding:
                shard_set = funding
            elif size == k_max:
                continue
            else:
                shard_set = tuple(sorted(funding + (request_shard,)))
            funds = b[funding[0]] if size == 1 else sum(b[s] for s in funding)
            if funds < floor:
                continue
            if lazy_fees and funds >= ceiling:
                out.append(Candidate(funding, shard_set, None))
                continue
            fee = price_from_loading(shard_set, loading, params)
            if funds >= amount + fee:
                out.append(Candidate(funding, shard_set, fee))
    return out


def _result(c: Candidate, loading: Sequence[float], params: PricingParams) -> FulfillmentResult:
    fee = c.fee if c.fee is not None else price_from_loading(c.shard_set, loading, params)
    return FulfillmentResult(True, c.shard_set, c.funding, fee)


def feasible_shard_sets(sender: AgentState, request_shard: int, amount: float,
                        pool: TransactionPool, params: PricingParams,
                        k_max: int = 2) -> list[tuple[int, ...]]:
    seen: dict[tuple[int, ...], None] = {}
    for c in funding_candidates(sender, request_shard, amount, _pool_loading(pool), params, k_max):
        seen.setdefault(c.shard_set)
    return list(seen)


def _pick(cands: list[Candidate], scores: Sequence[float] | None,
          rng: np.random.Generator | None) -> Candidate:
    """Best-scoring candidate.  Ties go to the earliest in candidate order
    (smallest funding set, then lexicographic) or, with ``rng``, to a uniform
    draw over every tied candidate."""
    if scores is None:
        tied = list(range(len(cands)))
    else:
        cut = max(scores) - TIE_TOL
        tied = [k for k, x in enumerate(scores) if x >= cut]
    if rng is None or len(tied) == 1:
        return cands[tied[0]]
    return cands[tied[int(rng.integers(len(tied)))]]


def choose_send_shards(sender: AgentState, receiver_id: int, request_shard: int,
                       amount: float, pool: TransactionPool, params: PricingParams, *,
                       k_max: int = 2, loading: Sequence[float] | None = None,
                       rng: np.random.Generator | None = None) -> FulfillmentResult:
    """Pick the feasible funding set with the lowest blended current/expected fee.

    A funding set is scored as a sending distribution spread uniformly over
    its shards, so it never beats its best member; larger sets are only
    examined when that member cannot fund the transfer on its own.
    """
    if loading is None:
        loading = _pool_loading(pool)
    g = sender.gamma_s
    lazy = g == 0.0
    singles = funding_candidates(sender, request_shard, amount, loading, params, k_max,
                                 lazy_fees=lazy, sizes=(1, 1))
    if params.p_max == 0:
        cands = singles or funding_candidates(sender, request_shard, amount, loading, params,
                                              k_max, lazy_fees=True)
        if not cands:
            return FulfillmentResult(False, reason="insufficient funds")
        return _result(_pick(cands, None, rng), loading, params)
    col = price_matvec(loading, sender.request_estimate(receiver_id).as_list(), params)

    def score(c: Candidate) -> float:
        f = c.funding
        future = col[f[0]] if len(f) == 1 else sum(col[s] for s in f) / len(f)
        if g == 0.0:
            return future
        # fee = p0 + (1 - eff) * p_max, so -fee ranks like eff
        now = 1.0 - (c.fee - params.p0) / params.p_max
        return g * now + (1.0 - g) * future

    scores = [score(c) for c in singles]
    if lazy and singles:
        # A multi-shard set scores the mean of its members, so it cannot beat
        # the best single once that matches the best held shard.  Under random
        # ties it still has to be drawn when it ties.
        held = sorted((col[s] for s, x in enumerate(sender.balances.tolist()) if x > 0), reverse=True)
        top = max(scores)
        if top >= held[0] - TIE_TOL and (
                rng is None or len(held) < 2 or (held[0] + held[1]) / 2 < top - TIE_TOL):
            return _result(_pick(singles, scores, rng), loading, params)
    multi = funding_candidates(sender, request_shard, amount, loading, params, k_max,
                               lazy_fees=lazy, sizes=(2, k_max))
    cands = singles + multi
    if not cands:
        return FulfillmentResult(False, reason="insufficient funds")
    scores += [score(c) for c in multi]
    return _result(_pick(cands, scores, rng), loading, params)


def random_request_shard(m: int, rng: np.random.Generator) -> int:
    return int(rng.integers(m))


def random_send_shards(sender: AgentState, request_shard: int, amount: float,
                       loading: Sequence[float], params: PricingParams,
                       rng: np.random.Generator, k_max: int = 2,
                       fixed_fee: float | None = None) -> FulfillmentResult:
    """Hash-style baseline: a uniformly random single funding shard among those
    that can cover the transfer, falling back to any feasible funding set."""
    if fixed_fee is not None:
        params = PricingParams(p0=fixed_fee, p_max=0.0, alpha=params.alpha)
    b = sender.balances.tolist()
    floor = amount + params.p0
    ceiling = floor + params.p_max
    singles = []
    for t, x in enumerate(b):
        if x < floor:
            continue
        if t != request_shard and k_max < 2:
            continue
        shard_set = (t,) if t == request_shard else tuple(sorted((t, request_shard)))
        if x >= ceiling:
            singles.append(Candidate((t,), shard_set, None))
            continue
        fee = price_from_loading(shard_set, loading, params)
        if x >= amount + fee:
            singles.append(Candidate((t,), shard_set, fee))
    cands = singles or funding_candidates(sender, request_shard, amount, loading, params,
                                          k_max, lazy_fees=True)
    if not cands:
        return FulfillmentResult(False, reason="insufficient funds")
    return _result(cands[int(rng.integers(len(cands)))], loading, params)


def withdrawal_plan(balances: Sequence[float], funding: Sequence[int], need: float) -> dict[int, float]:
    """Greedy split: drain funding shards in descending balance order (lowest
    index first among equals) until ``need`` is covered."""
    order = sorted(funding, key=lambda s: (-balances[s], s))
    plan: dict[int, float] = {}
    for s in order:
        if need <= 0:
            break
        take = min(balances[s], need)
        if take > 0:
            plan[s] = take
            need -= take
    if need > 1e-9:
        raise SettlementError(f"funding shards {tuple(funding)} short by {need}")
    return plan


def settle(sender: AgentState, receiver: AgentState, tx: Transaction, fee: float,
           funding: Sequence[int], request_shard: int) -> dict[int, float]:
    """Move ``tx.total`` from the sender's funding shards to the receiver's
    request shard.  The fee is withdrawn too and burned.  Returns the plan."""
    amount = tx.total
    if amount <= 0:
        raise SettlementError("transaction amount must be positive")
    plan = withdrawal_plan(sender.balances, funding, amount + fee)
    for s, x in plan.items():
        left = sender.balances[s] - x
        if left < 0:
            if left < -1e-9:
                raise SettlementError(f"agent {sender.id} shard {s} would go negative")
            left = 0.0
        sender.balances[s] = left
    receiver.balances[request_shard] += amount
    return plan


def sending_shard(plan: dict[int, float], funding: Sequence[int]) -> int:
    """The shard recorded as the sender's choice: the largest withdrawal."""
    if len(funding) == 1:
        return funding[0]
    return max(plan, key=lambda s: (plan[s], -s))

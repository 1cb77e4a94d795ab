"""Shards, transactions, pools, blocks and the pool-level throughput metrics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class LedgerError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class Transaction:
    """A transfer requested by ``receiver`` from ``sender``.

    ``amounts`` is the dense per-shard vector; the shard set of the
    transaction is every shard with a positive entry.
    """

    receiver: int
    sender: int
    amounts: tuple[float, ...]
    fee_paid: float = 0.0

    def __post_init__(self) -> None:
        if any(x < 0 for x in self.amounts):
            raise LedgerError("transaction amounts must be non-negative")
        if not any(x > 0 for x in self.amounts):
            raise LedgerError("transaction must move a positive amount")
        if self.fee_paid < 0:
            raise LedgerError("fee must be non-negative")

    @classmethod
    def spread(cls, receiver: int, sender: int, shards: Iterable[int], amount: float,
               m: int, fee_paid: float = 0.0) -> Transaction:
        """Build a transaction over ``shards``, splitting ``amount`` evenly."""
        shards = sorted(set(shards))
        if not shards:
            raise LedgerError("empty shard set")
        if amount <= 0:
            raise LedgerError("amount must be positive")
        part = amount / len(shards)
        tau = [0.0] * m
        for s in shards:
            if not 0 <= s < m:
                raise LedgerError(f"shard {s} out of range for m={m}")
            tau[s] = part
        return cls(receiver, sender, tuple(tau), fee_paid)

    @property
    def m(self) -> int:
        return len(self.amounts)

    @property
    def shards(self) -> tuple[int, ...]:
        return tuple(s for s, x in enumerate(self.amounts) if x > 0)

    @property
    def cardinality(self) -> int:
        return sum(1 for x in self.amounts if x > 0)

    @property
    def total(self) -> float:
        return sum(self.amounts)


@dataclass(slots=True)
class TransactionPool:
    """Pending transactions plus cached per-shard usage counts."""

    m: int
    transactions: list[Transaction] = field(default_factory=list)
    per_shard_counts: list[int] = field(init=False)
    total_usages: int = field(init=False, default=0)

    def __post_init__(self) -> None:
        if self.m < 1:
            raise LedgerError("m must be >= 1")
        txs = list(self.transactions)
        self.transactions = []
        self.per_shard_counts = [0] * self.m
        self.total_usages = 0
        for tx in txs:
            self.append(tx)

    def __len__(self) -> int:
        return len(self.transactions)

    def append(self, tx: Transaction) -> TransactionPool:
        if tx.m != self.m:
            raise LedgerError(f"transaction has {tx.m} shards, pool has {self.m}")
        counts = self.per_shard_counts
        k = 0
        for s, x in enumerate(tx.amounts):
            if x > 0:
                counts[s] += 1
                k += 1
        self.total_usages += k
        self.transactions.append(tx)
        return self

    def reset(self) -> list[Transaction]:
        """Empty the pool and return what it held."""
        txs = self.transactions
        self.transactions = []
        self.per_shard_counts = [0] * self.m
        self.total_usages = 0
        return txs

    def recount(self) -> tuple[list[int], int]:
        """Brute-force recount of the cached quantities."""
        counts = [0] * self.m
        for tx in self.transactions:
            for s in tx.shards:
                counts[s] += 1
        return counts, sum(tx.cardinality for tx in self.transactions)

    def mean_cardinality(self) -> float:
        if not self.transactions:
            return 0.0
        return self.total_usages / len(self.transactions)


@dataclass(frozen=True, slots=True)
class Block:
    index: int
    transactions: tuple[Transaction, ...]
    efficiency: float
    mean_cardinality: float
    balance: float
    shard_counts: tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.transactions)


class BalanceSheet:
    """Per-agent, per-shard resource holdings."""

    def __init__(self, balances: np.ndarray | Sequence[Sequence[float]]):
        b = np.array(balances, dtype=float)
        if b.ndim != 2:
            raise LedgerError("balances must be an (n, m) array")
        if (b < 0).any():
            raise LedgerError("balances must be non-negative")
        self.b = b

    @property
    def n(self) -> int:
        return self.b.shape[0]

    @property
    def m(self) -> int:
        return self.b.shape[1]

    def __getitem__(self, agent: int) -> np.ndarray:
        return self.b[agent]

    def total(self) -> float:
        return float(self.b.sum())


def append_transaction(pool: TransactionPool, tx: Transaction) -> TransactionPool:
    return pool.append(tx)


def shard_usage(pool: TransactionPool) -> np.ndarray:
    """Fraction of all shard usages in the pool attributable to each shard.

    The empty pool maps to the all-zero vector.
    """
    if pool.total_usages == 0:
        return np.zeros(pool.m)
    return np.asarray(pool.per_shard_counts, dtype=float) / pool.total_usages


def loading_from_counts(counts: Sequence[int], total: int) -> list[float]:
    """Plain-float loading vector; the simulator's hot path uses this directly."""
    m = len(counts)
    if total == 0:
        return [0.0] * m
    inv_m = 1.0 / m
    return [max(0.0, c / total - inv_m) for c in counts]


def shard_loading(pool: TransactionPool) -> np.ndarray:
    return np.asarray(loading_from_counts(pool.per_shard_counts, pool.total_usages))


def shard_balance(pool: TransactionPool, shards: Iterable[int] | None = None) -> float:
    """One minus the summed loading over ``shards`` (all shards when None)."""
    lam = shard_loading(pool)
    if shards is None:
        return 1.0 - float(lam.sum())
    idx = sorted(set(shards))
    if not idx:
        raise LedgerError("shard balance needs a non-empty shard set")
    return 1.0 - float(sum(lam[s] for s in idx))


def pool_efficiency(pool: TransactionPool) -> float:
    if len(pool) == 0:
        raise LedgerError("efficiency undefined for empty pool")
    return shard_balance(pool) / pool.mean_cardinality()


def transaction_efficiency(tx: Transaction, pool: TransactionPool) -> float:
    shards = tx.shards
    return shard_balance(pool, shards) / len(shards)


def should_assemble(pool: TransactionPool, slots: int) -> bool:
    if slots < 1:
        raise LedgerError("slots per shard must be >= 1")
    return max(pool.per_shard_counts) >= slots


def assemble_block(pool: TransactionPool, index: int) -> Block:
    """Cut the current pool into a block and reset the pool."""
    if len(pool) == 0:
        raise LedgerError("cannot assemble an empty block")
    balance = shard_balance(pool)
    card = pool.mean_cardinality()
    counts = tuple(pool.per_shard_counts)
    txs = tuple(pool.reset())
    return Block(index=index, transactions=txs, efficiency=balance / card,
                 mean_cardinality=card, balance=balance, shard_counts=counts)

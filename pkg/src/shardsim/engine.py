"""The simulation loop: request, fulfillment, block assembly and metric traces."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np

from . import __version__
from .agents import (
    AgentState,
    FulfillmentResult,
    choose_request_shard,
    choose_send_shards,
    random_request_shard,
    random_send_shards,
    sending_shard,
    settle,
)
from .ledger import Block, Transaction, TransactionPool, assemble_block, loading_from_counts
from .network import ConfigError, Network, ScenarioConfig, build_network, initial_balances
from .pricing import PricingParams

STALL_FACTOR = 100


class SimulationStalled(RuntimeError):
    pass


class MetricSample(NamedTuple):
    tx_index: int
    shard_usage: tuple[float, ...]
    loading_sum: float
    mean_cardinality: float
    fee: float
    accepted: bool
    block_index: int
    block_boundary: bool
    request_spread: float


@dataclass
class SimState:
    config: ScenarioConfig
    network: Network
    agents: list[AgentState]
    pool: TransactionPool
    params: PricingParams
    gen_rng: np.random.Generator
    policy_rng: np.random.Generator
    tie_rng: np.random.Generator | None
    blocks: list[Block] = field(default_factory=list)
    trace: list[MetricSample] = field(default_factory=list)
    tx_counter: int = 0
    accepted: int = 0
    rejected: int = 0
    fees_burned: float = 0.0
    since_block: int = 0
    last_request: list[int] = field(default_factory=list)
    request_shares: list[int] = field(default_factory=list)
    _round: list[int] = field(default_factory=list)

    @property
    def m(self) -> int:
        return self.config.m


def init_state(config: ScenarioConfig) -> SimState:
    config.validate()
    network = build_network(config)
    if not network.edges:
        raise ConfigError("network has no edges")
    sheet = initial_balances(config)
    agents = [AgentState(i, sheet[i], config.gamma_r, config.gamma_s) for i in range(config.n_agents)]
    gen_seq, policy_seq, tie_seq = np.random.SeedSequence(config.seed).spawn(3)
    return SimState(
        config=config,
        network=network,
        agents=agents,
        pool=TransactionPool(config.m),
        params=PricingParams(config.p0, config.p_max, config.alpha),
        gen_rng=np.random.default_rng(gen_seq),
        policy_rng=np.random.default_rng(policy_seq),
        tie_rng=np.random.default_rng(tie_seq) if config.tie_break == "random" else None,
        last_request=[-1] * len(network.edges),
        request_shares=[0] * config.m,
    )


def generate_round_shuffle(state: SimState) -> list[int]:
    """One round: every edge index exactly once, in seeded random order."""
    return [int(k) for k in state.gen_rng.permutation(len(state.network.edges))]


def generate_uniform_edge(state: SimState) -> int:
    return int(state.gen_rng.integers(len(state.network.edges)))


def next_edge(state: SimState) -> int:
    if state.config.generation == "uniform-edge":
        return generate_uniform_edge(state)
    if not state._round:
        state._round = generate_round_shuffle(state)[::-1]
    return state._round.pop()


def _spread(shares: list[int]) -> float:
    total = sum(shares)
    if total == 0:
        return 0.0
    fr = [c / total for c in shares]
    mu = 1.0 / len(fr)
    return math.sqrt(sum((x - mu) ** 2 for x in fr) / len(fr))


def _decide(state: SimState, receiver: AgentState, sender: AgentState,
            loading: list[float]) -> tuple[int, FulfillmentResult]:
    cfg = state.config
    if cfg.policy == "best-response":
        s_i = choose_request_shard(receiver, sender.id, cfg.amount, state.pool, state.params,
                                   loading=loading, rng=state.tie_rng)
        res = choose_send_shards(sender, receiver.id, s_i, cfg.amount, state.pool, state.params,
                                 k_max=cfg.k_max, loading=loading, rng=state.tie_rng)
        return s_i, res
    s_i = random_request_shard(cfg.m, state.policy_rng)
    fixed = cfg.p0 if cfg.policy == "fixed-price" else None
    res = random_send_shards(sender, s_i, cfg.amount, loading, state.params, state.policy_rng,
                             k_max=cfg.k_max, fixed_fee=fixed)
    return s_i, res


def step(state: SimState) -> MetricSample:
    """Process one transaction attempt end to end."""
    cfg = state.config
    pool = state.pool
    edge = next_edge(state)
    i, j = state.network.edges[edge]
    receiver, sender = state.agents[i], state.agents[j]
    loading = loading_from_counts(pool.per_shard_counts, pool.total_usages)

    s_i, res = _decide(state, receiver, sender, loading)
    index = state.tx_counter
    state.tx_counter += 1
    state.since_block += 1
    fee = 0.0
    if res.accepted:
        fee = res.fee
        tx = Transaction.spread(i, j, res.shard_set, cfg.amount, cfg.m, fee)
        plan = settle(sender, receiver, tx, fee, res.funding, s_i)
        pool.append(tx)
        receiver.send_estimate(j).observe(sending_shard(plan, res.funding))
        sender.request_estimate(i).observe(s_i)
        prev = state.last_request[edge]
        if prev >= 0:
            state.request_shares[prev] -= 1
        state.request_shares[s_i] += 1
        state.last_request[edge] = s_i
        state.accepted += 1
        state.fees_burned += fee
    else:
        state.rejected += 1

    total = pool.total_usages
    counts = pool.per_shard_counts
    if total:
        usage = tuple(c / total for c in counts)
        lam_sum = sum(loading_from_counts(counts, total))
    else:
        usage = (0.0,) * cfg.m
        lam_sum = 0.0
    boundary = bool(total) and max(counts) >= cfg.slots
    sample = MetricSample(index, usage, lam_sum, pool.mean_cardinality(), fee, res.accepted,
                          len(state.blocks), boundary, _spread(state.request_shares))
    state.trace.append(sample)
    if boundary:
        state.blocks.append(assemble_block(pool, len(state.blocks)))
        state.since_block = 0
    elif state.since_block > STALL_FACTOR * cfg.m * cfg.slots:
        raise SimulationStalled(
            f"no block after {state.since_block} attempts "
            f"(accepted={state.accepted}, rejected={state.rejected}, pool={len(pool)})")
    return sample


@dataclass
class RunResult:
    config: ScenarioConfig
    network: Network
    blocks: list[Block]
    trace: list[MetricSample]
    summary: dict[str, Any]

    def write_csv(self, path: str | Path) -> None:
        write_trace_csv(self.trace, self.config.m, path)

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def block_summary(block: Block) -> dict[str, Any]:
    return {
        "index": block.index,
        "transactions": block.size,
        "efficiency": block.efficiency,
        "mean_cardinality": block.mean_cardinality,
        "balance": block.balance,
        "loading_sum": 1.0 - block.balance,
        "shard_counts": list(block.shard_counts),
    }


def summarize(state: SimState) -> dict[str, Any]:
    blocks = [block_summary(b) for b in state.blocks]
    tops = [est.top_mass for a in state.agents for est in a.send_estimates.values()]
    tops += [est.top_mass for a in state.agents for est in a.request_estimates.values()]
    return {
        "code_version": __version__,
        "config": state.config.to_dict(),
        "seed": state.config.seed,
        "topology": state.network.kind,
        "n_edges": len(state.network.edges),
        "blocks": blocks,
        "n_blocks": len(blocks),
        "total_transactions": sum(b["transactions"] for b in blocks),
        "attempts": state.tx_counter,
        "accepted": state.accepted,
        "rejected": state.rejected,
        "pending": len(state.pool),
        "fees_burned": state.fees_burned,
        "final_efficiency": blocks[-1]["efficiency"] if blocks else None,
        "final_mean_cardinality": blocks[-1]["mean_cardinality"] if blocks else None,
        "min_estimate_top_mass": min(tops) if tops else None,
    }


def run(config: ScenarioConfig) -> RunResult:
    """Simulate until ``config.blocks_target`` blocks have been assembled."""
    state = init_state(config)
    while len(state.blocks) < config.blocks_target:
        step(state)
    return RunResult(config, state.network, state.blocks, state.trace, summarize(state))


def run_state(config: ScenarioConfig) -> SimState:
    """Like :func:`run` but hands back the full final state."""
    state = init_state(config)
    while len(state.blocks) < config.blocks_target:
        step(state)
    return state


def trace_header(m: int) -> list[str]:
    return (["tx_index"] + [f"shard_usage_{s}" for s in range(m)]
            + ["loading_sum", "mean_cardinality", "fee", "accepted", "block_index",
               "block_boundary", "request_spread"])


def write_trace_csv(trace: list[MetricSample], m: int, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trace_header(m))
        for t in trace:
            w.writerow([t.tx_index, *(repr(u) for u in t.shard_usage), repr(t.loading_sum),
                        repr(t.mean_cardinality), repr(t.fee), int(t.accepted), t.block_index,
                        int(t.block_boundary), repr(t.request_spread)])


def read_trace_csv(path: str | Path) -> list[dict[str, float]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]

from __future__ import annotations

import json

import numpy as np
import pytest

from shardsim.engine import (
    SimulationStalled,
    generate_round_shuffle,
    generate_uniform_edge,
    init_state,
    read_trace_csv,
    run,
    run_state,
    step,
    trace_header,
)
from shardsim.game import EmpiricalEstimate
from shardsim.network import ConfigError, Network, ScenarioConfig
from shardsim.presets import PRESETS
from shardsim.verify import brute_force_metrics

SMALL = ScenarioConfig(n_agents=8, m=3, slots=200, blocks_target=3, seed=4, name="small")


def point(m, s):
    counts = [0] * m
    counts[s] = 1
    return EmpiricalEstimate(counts, [0.0] * m)


class TestRoundShuffle:
    def test_round_is_permutation(self):
        state = init_state(SMALL)
        assert sorted(generate_round_shuffle(state)) == list(range(len(state.network.edges)))

    def test_seeded(self):
        a, b = init_state(SMALL), init_state(SMALL)
        assert [generate_round_shuffle(a) for _ in range(3)] == [generate_round_shuffle(b) for _ in range(3)]

    def test_consecutive_rounds_differ(self):
        for seed in range(20):
            state = init_state(SMALL.replace(seed=seed))
            assert generate_round_shuffle(state) != generate_round_shuffle(state)

    def test_engine_visits_every_edge_per_round(self):
        state = init_state(SMALL.replace(policy="fixed-price"))
        n_edges = len(state.network.edges)
        for _ in range(n_edges - 1):
            step(state)
        assert state.last_request.count(-1) == 1
        step(state)
        assert -1 not in state.last_request and not state._round


class TestUniformEdge:
    def test_single_edge(self):
        state = init_state(SMALL)
        state.network = Network(2, ((1, 0),))
        assert {generate_uniform_edge(state) for _ in range(50)} == {0}

    def test_frequencies_uniform(self):
        state = init_state(PRESETS["fig5"])
        k = len(state.network.edges)
        draws = np.array([generate_uniform_edge(state) for _ in range(100_000)])
        counts = np.bincount(draws, minlength=k)
        expected = len(draws) / k
        chi2 = float(((counts - expected) ** 2 / expected).sum())
        dof = k - 1
        assert abs(chi2 - dof) < 3 * np.sqrt(2 * dof)

    def test_seeded(self):
        a, b = init_state(PRESETS["fig5"]), init_state(PRESETS["fig5"])
        assert [generate_uniform_edge(a) for _ in range(100)] == [generate_uniform_edge(b) for _ in range(100)]


class TestStep:
    def test_random_policy_cardinality(self):
        cfg = ScenarioConfig(policy="fixed-price", alpha=0.0, balance_mode="uniform", slots=10**6)
        state = init_state(cfg)
        for _ in range(20_000):
            step(state)
        assert state.pool.mean_cardinality() == pytest.approx(1.75, abs=0.02)

    def test_matched_estimates_give_local_transaction(self):
        cfg = ScenarioConfig(policy="best-response", alpha=0.001, balance_mode="uniform", m=4,
                             n_agents=4, topology="complete", slots=10**6)
        state = init_state(cfg)
        # build up some pool load first
        for _ in range(30):
            step(state)
        for a in state.agents:
            for b in range(4):
                if b != a.id:
                    a.send_estimates[b] = point(4, 2)
                    a.request_estimates[b] = point(4, 2)
        lam = np.maximum(0, np.array(state.pool.per_shard_counts) / state.pool.total_usages - 0.25)
        sample = step(state)
        tx = state.pool.transactions[-1]
        assert tx.shards == (2,)
        assert sample.fee == pytest.approx(lam[2] * cfg.p_max)

    def test_boundary_flag(self):
        cfg = SMALL.replace(slots=5, m=1, k_max=1, policy="fixed-price")
        state = init_state(cfg)
        flags = [step(state).block_boundary for _ in range(5)]
        assert flags == [False] * 4 + [True]
        assert len(state.blocks) == 1 and len(state.pool) == 0

    def test_stall_guard(self):
        cfg = SMALL.replace(initial_balance=0.0, slots=2)
        state = init_state(cfg)
        with pytest.raises(SimulationStalled):
            for _ in range(10_000):
                step(state)

    def test_zero_agents_rejected(self):
        with pytest.raises(ConfigError):
            ScenarioConfig(n_agents=0)


@pytest.fixture(scope="module")
def state():
    return run_state(SMALL.replace(policy="best-response", blocks_target=4))


class TestRun:
    def test_block_accounting(self, state):
        assert sum(b.size for b in state.blocks) == state.accepted - len(state.pool)
        for b in state.blocks:
            assert max(b.shard_counts) == SMALL.slots
        assert [s.block_index for s in state.trace if s.block_boundary] == [0, 1, 2, 3]

    def test_trace_matches_recomputation(self, state):
        history = [tx for b in state.blocks for tx in b.transactions] + list(state.pool.transactions)
        rng = np.random.default_rng(0)
        picks = set(rng.choice(len(state.trace), size=min(1000, len(state.trace)), replace=False).tolist())
        pos = 0
        block_start = 0
        for k, sample in enumerate(state.trace):
            if sample.accepted:
                pos += 1
            if k in picks:
                ref = brute_force_metrics(history[block_start:pos], SMALL.m)
                np.testing.assert_allclose(sample.shard_usage, ref["usage"], atol=1e-12)
                assert sample.loading_sum == pytest.approx(sum(ref["loading"]), abs=1e-12)
                card = ref["total"] / (pos - block_start) if pos > block_start else 0.0
                assert sample.mean_cardinality == pytest.approx(card, abs=1e-12)
            if sample.block_boundary:
                block_start = pos

    def test_deterministic_summary(self):
        a, b = run(SMALL), run(SMALL)
        assert a.summary == b.summary and a.trace == b.trace
        assert run(SMALL.replace(seed=5)).trace != a.trace

    def test_artifacts_self_describing(self, tmp_path):
        result = run(SMALL)
        result.write_json(tmp_path / "r.json")
        result.write_csv(tmp_path / "r.csv")
        doc = json.loads((tmp_path / "r.json").read_text())
        assert doc["config"]["seed"] == SMALL.seed and doc["seed"] == SMALL.seed
        assert doc["topology"] == "ring" and doc["n_edges"] == 16
        rows = read_trace_csv(tmp_path / "r.csv")
        assert list(rows[0]) == trace_header(SMALL.m)
        assert len(rows) == len(result.trace)
        assert rows[-1]["block_boundary"] == 1.0


def test_estimates_converge_under_efficiency_pricing():
    state = run_state(PRESETS["fig4"])
    tops = [e.top_mass for a in state.agents for e in (*a.send_estimates.values(), *a.request_estimates.values())]
    assert state.rejected == 0
    assert min(tops) > 0.9


def test_estimates_mostly_converge_across_seeds():
    # Off the preset seed an edge can lock into a mismatch when the sender
    # holds nothing in the receiver's favoured shard; most edges still settle.
    for seed in (1, 2):
        state = run_state(PRESETS["fig4"].replace(seed=seed))
        tops = [e.top_mass for a in state.agents for e in (*a.send_estimates.values(), *a.request_estimates.values())]
        assert np.mean(np.array(tops) > 0.9) >= 0.9

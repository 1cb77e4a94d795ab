"""Network topologies, scenario configuration and initial endowments."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from .ledger import BalanceSheet

SCHEMA_VERSION = 1

TOPOLOGIES = ("ring", "path", "complete", "preferential-attachment")
POLICIES = ("random", "fixed-price", "best-response")
GENERATION_MODES = ("round-shuffle", "uniform-edge")
BALANCE_MODES = ("staggered", "uniform")
TIE_BREAKS = ("lowest", "random")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Network:
    """Directed request graph; edge (i, j) means i may request from j."""

    n: int
    edges: tuple[tuple[int, int], ...]
    kind: str = "custom"

    def __post_init__(self) -> None:
        for i, j in self.edges:
            if i == j:
                raise ConfigError(f"self-loop at agent {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ConfigError(f"edge {(i, j)} outside agent range")
        if len(set(self.edges)) != len(self.edges):
            raise ConfigError("duplicate edges")

    @property
    def neighbors(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.edges:
            out[i].append(j)
        return out

    def in_degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for _, j in self.edges:
            deg[j] += 1
        return deg

    def out_degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for i, _ in self.edges:
            deg[i] += 1
        return deg


def generate_ring(n: int) -> Network:
    if n < 3:
        raise ConfigError("ring needs n >= 3")
    edges = []
    for i in range(n):
        edges.append((i, (i - 1) % n))
        edges.append((i, (i + 1) % n))
    return Network(n, tuple(edges), "ring")


def generate_path(n: int) -> Network:
    """Line of n agents with requests in both directions: 2(n - 1) edges."""
    if n < 2:
        raise ConfigError("path needs n >= 2")
    edges = []
    for i in range(n):
        if i > 0:
            edges.append((i, i - 1))
        if i < n - 1:
            edges.append((i, i + 1))
    return Network(n, tuple(edges), "path")


def generate_complete(n: int) -> Network:
    if n < 2:
        raise ConfigError("complete graph needs n >= 2")
    return Network(n, tuple((i, j) for i in range(n) for j in range(n) if i != j), "complete")


def generate_preferential_attachment(n: int, attach_k: int, seed: int) -> Network:
    """Grow a directed graph where each newcomer requests from ``attach_k``
    existing agents drawn with probability proportional to in-degree + 1.

    Agents 0..attach_k form the seed core: agent v requests from every u < v.
    Edge count is n*k - k*(k+1)/2.
    """
    if not (n > attach_k >= 1):
        raise ConfigError("need n > attach_k >= 1")
    rng = np.random.default_rng(seed)
    edges: list[tuple[int, int]] = []
    indeg = np.zeros(n)
    for v in range(1, attach_k + 1):
        for u in range(v):
            edges.append((v, u))
            indeg[u] += 1
    for v in range(attach_k + 1, n):
        weights = indeg[:v] + 1.0
        targets = rng.choice(v, size=attach_k, replace=False, p=weights / weights.sum())
        for u in sorted(int(t) for t in targets):
            edges.append((v, u))
            indeg[u] += 1
    return Network(n, tuple(edges), "preferential-attachment")


def pa_edge_count(n: int, attach_k: int) -> int:
    return n * attach_k - attach_k * (attach_k + 1) // 2


@dataclass(frozen=True)
class ScenarioConfig:
    topology: str = "ring"
    n_agents: int = 20
    attach_k: int = 2
    m: int = 4
    slots: int = 2500
    blocks_target: int = 5
    p0: float = 0.0
    p_max: float = 1.0
    alpha: float = 0.001
    gamma_r: float = 0.0
    gamma_s: float = 0.0
    policy: str = "best-response"
    generation: str = "round-shuffle"
    balance_mode: str = "staggered"
    initial_balance: float = 1e6
    amount: float = 10.0
    seed: int = 0
    network_seed: int | None = None
    k_max: int = 2
    tie_break: str = "lowest"
    name: str = "custom"

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        def need(cond: bool, msg: str) -> None:
            if not cond:
                raise ConfigError(msg)

        need(self.topology in TOPOLOGIES, f"topology must be one of {TOPOLOGIES}")
        need(self.policy in POLICIES, f"policy must be one of {POLICIES}")
        need(self.generation in GENERATION_MODES, f"generation must be one of {GENERATION_MODES}")
        need(self.balance_mode in BALANCE_MODES, f"balance_mode must be one of {BALANCE_MODES}")
        need(self.tie_break in TIE_BREAKS, f"tie_break must be one of {TIE_BREAKS}")
        need(isinstance(self.n_agents, int) and self.n_agents > 0, "n_agents must be a positive integer")
        need(self.m >= 1, "m must be >= 1")
        need(self.slots >= 1, "slots must be >= 1")
        need(self.blocks_target >= 1, "blocks_target must be >= 1")
        need(self.amount > 0, "amount must be positive")
        need(self.initial_balance >= 0, "initial_balance must be >= 0")
        need(self.alpha >= 0, "alpha must be >= 0")
        need(self.p_max >= 0 and self.p0 >= 0, "p0 and p_max must be >= 0")
        need(0 <= self.gamma_r <= 1 and 0 <= self.gamma_s <= 1, "gamma_r, gamma_s must lie in [0, 1]")
        need(1 <= self.k_max <= max(self.m, 1), "k_max must lie in [1, m]")
        need(self.attach_k >= 1, "attach_k must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        return {"schema_version": SCHEMA_VERSION, **asdict(self)}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ScenarioConfig:
        data = dict(data)
        version = data.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version} (expected {SCHEMA_VERSION})")
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ConfigError(f"unknown scenario fields: {', '.join(unknown)}")
        for key, value in data.items():
            expected = known[key].type
            if "float" in expected and isinstance(value, int) and not isinstance(value, bool):
                data[key] = float(value)
            elif expected == "int" and not (isinstance(value, int) and not isinstance(value, bool)):
                raise ConfigError(f"field {key!r} must be an integer, got {value!r}")
            elif expected == "str" and not isinstance(value, str):
                raise ConfigError(f"field {key!r} must be a string, got {value!r}")
        return cls(**data)

    def replace(self, **changes: Any) -> ScenarioConfig:
        return ScenarioConfig.from_dict({**asdict(self), **changes})


def load_scenario(path: str | Path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: scenario must be a JSON object")
    return ScenarioConfig.from_dict(data)


def save_scenario(config: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def build_network(config: ScenarioConfig) -> Network:
    n = config.n_agents
    if config.topology == "ring":
        return generate_ring(n)
    if config.topology == "path":
        return generate_path(n)
    if config.topology == "complete":
        return generate_complete(n)
    seed = config.seed if config.network_seed is None else config.network_seed
    return generate_preferential_attachment(n, config.attach_k, seed)


def initial_balances(config: ScenarioConfig) -> BalanceSheet:
    """Staggered: agent i holds the whole endowment in shard i mod m.
    Uniform: every agent holds the endowment in every shard."""
    n, m = config.n_agents, config.m
    if config.balance_mode == "uniform":
        return BalanceSheet(np.full((n, m), config.initial_balance))
    b = np.zeros((n, m))
    b[np.arange(n), np.arange(n) % m] = config.initial_balance
    return BalanceSheet(b)

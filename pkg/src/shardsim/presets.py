"""Frozen scenario presets for the reproduction runs."""

from __future__ import annotations

from .network import ScenarioConfig

_RING = dict(
    topology="ring",
    n_agents=20,
    m=4,
    slots=2500,
    blocks_target=5,
    generation="round-shuffle",
    balance_mode="staggered",
    initial_balance=1e6,
    amount=10.0,
)

_SCALE_FREE = dict(
    topology="preferential-attachment",
    n_agents=100,
    attach_k=2,
    m=8,
    slots=12500,
    blocks_target=5,
    generation="uniform-edge",
    balance_mode="uniform",
    initial_balance=1e6,
    amount=10.0,
)

PRESETS: dict[str, ScenarioConfig] = {
    # 20-agent ring, fixed price, hash-style random shards
    "fig2": ScenarioConfig(name="fig2", policy="fixed-price", alpha=0.0, **_RING),
    # load-only pricing
    "fig3": ScenarioConfig(name="fig3", policy="best-response", alpha=0.0, tie_break="random", **_RING),
    # efficiency pricing
    "fig4": ScenarioConfig(name="fig4", policy="best-response", alpha=0.001, tie_break="random", **_RING),
    # 100-agent scale-free network, fixed price baseline
    "fig5": ScenarioConfig(name="fig5", policy="fixed-price", alpha=0.0, **_SCALE_FREE),
    "fig6": ScenarioConfig(name="fig6", policy="best-response", alpha=0.00015, tie_break="random",
                           **_SCALE_FREE),
}


def get_preset(name: str) -> ScenarioConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}") from None

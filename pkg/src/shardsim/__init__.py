"""Agent-based simulator of efficiency-priced transactions on a sharded ledger."""

__version__ = "0.1.0"

"""Experiment harness: simulation stack, experiments, CLI, plots."""

from .stack import RelayStack, StackConfig, TraceEvent, TxSummary, summarize_transactions

__all__ = [
    "RelayStack",
    "StackConfig",
    "TraceEvent",
    "TxSummary",
    "summarize_transactions",
]

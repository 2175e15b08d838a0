"""Deterministic multi-app environment engine for evaluating UI agents."""

__version__ = "0.1.0"

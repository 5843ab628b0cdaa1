"""Deterministic daily crypto backtesting with classical baselines and an LLM agent pipeline."""

__version__ = "0.1.0"

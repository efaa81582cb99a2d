"""Sandwiched Rényi divergences, conditional entropies and chain-rule checks."""

__version__ = "0.1.0"

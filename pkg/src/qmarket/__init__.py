"""Quantum-like models of information flow in a two-trader market."""

from qmarket.params import MarketInit, TimeSeries, TraderParams

__all__ = ["MarketInit", "TimeSeries", "TraderParams"]
__version__ = "0.1.0"

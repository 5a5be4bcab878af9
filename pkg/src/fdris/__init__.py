"""Multi-subarray frequency-diverse RIS simulation and weighted sum-rate optimization."""

__version__ = "0.1.0"

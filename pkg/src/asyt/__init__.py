"""Asymmetrical training of encapsulated deep photonic neural networks."""

__version__ = "0.1.0"

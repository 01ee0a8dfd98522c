"""Decoherence-based simulations of Wigner's-friend experiments."""

__version__ = "0.1.0"

"""Numerics for self-similar potential-flow shock reflection off a wedge."""

__version__ = "0.1.0"

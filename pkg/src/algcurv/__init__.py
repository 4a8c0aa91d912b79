"""Algebraic curvature tensors: generators, operators, realization, decomposition."""

__version__ = "0.1.0"

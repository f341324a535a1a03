"""Symmetry-preserving dynamical low-rank integrators for matrices and Tucker tensors."""

__version__ = "0.1.0"

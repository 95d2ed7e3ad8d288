"""Numerical analysis of Riemannian submersions from flat Kähler space."""

__version__ = "0.1.0"

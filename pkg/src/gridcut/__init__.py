"""Vertex-cut grid decomposition for fast greedy transmission switching."""

__version__ = "0.1.0"

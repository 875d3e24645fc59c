"""Computations with outer automorphisms of free groups relative to free factor systems."""

__version__ = "0.1.0"

"""Computational experiments on the stratum H(2) and on pairs of unimodular lattices."""

__version__ = "0.1.0"

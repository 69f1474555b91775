"""Temporal-retrieval evaluation, output parsing, decomposed attention and data planning."""

__version__ = "0.1.0"

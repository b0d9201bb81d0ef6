"""Finite-difference solver suite for the first corrector equation of the
small-transaction-cost portfolio problem."""

__version__ = "0.1.0"

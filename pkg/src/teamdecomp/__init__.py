"""Solver for team correlated equilibria in zero-sum extensive-form team games."""

__version__ = "0.1.0"

"""Stochastic Manakov solvers - conservative time stepping and convergence studies."""

__version__ = "0.1.0"

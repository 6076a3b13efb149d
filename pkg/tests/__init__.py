"""Tests for the stochastic Manakov solvers."""

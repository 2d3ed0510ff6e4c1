"""Laminate model, incremental solver, evolution engine and verification."""

from .engine import EvolutionEngine, EvolutionTrace, Problem
from .errors import HylamError
from .solver import IncrementSolver

__all__ = ["EvolutionEngine", "EvolutionTrace", "Problem", "HylamError", "IncrementSolver"]

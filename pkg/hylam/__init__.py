"""
hylam - quasi-static evolution of a two-layer hybrid laminate with
phase-field damage and a cohesive interface, plus a verification suite.

Version: 1.0.0
"""

__version__ = "1.0.0"
__author__ = "hylam Development Team"

from .core.cohesive import CohesiveLaw, LoadingProfile, check_law, make_quadratic_unloading, make_separable
from .core.engine import EvolutionEngine, Problem, run_evolution
from .core.materials import DamageDissipation, ElasticModulus, LayerMaterial, check_regularity_condition
from .core.solver import IncrementSolver, SolverOptions
from .utils.config import ConfigManager, parse_config

__all__ = [
    "CohesiveLaw", "LoadingProfile", "check_law", "make_quadratic_unloading", "make_separable",
    "EvolutionEngine", "Problem", "run_evolution",
    "DamageDissipation", "ElasticModulus", "LayerMaterial", "check_regularity_condition",
    "IncrementSolver", "SolverOptions", "ConfigManager", "parse_config",
]

"""Strongly-typed genetic programming core."""

from src.gp.primitives import (
    PRIMITIVES,
    PrimitiveRegistry,
    PrimitiveSignature,
    TerminalSpec,
    register_primitives,
)
from src.gp.tree import (
    Function,
    GenotypeTree,
    Individual,
    Terminal,
    check_tree,
    parse_tree,
    render,
)
from src.gp.generation import TreeGenerator, generate_tree, init_population
from src.gp.variation import subtree_crossover, subtree_mutation, tournament_select
from src.gp.evolution import EvolutionResult, evolve

__all__ = [
    "PRIMITIVES",
    "PrimitiveRegistry",
    "PrimitiveSignature",
    "TerminalSpec",
    "register_primitives",
    "Function",
    "GenotypeTree",
    "Individual",
    "Terminal",
    "check_tree",
    "parse_tree",
    "render",
    "TreeGenerator",
    "generate_tree",
    "init_population",
    "subtree_crossover",
    "subtree_mutation",
    "tournament_select",
    "EvolutionResult",
    "evolve",
]

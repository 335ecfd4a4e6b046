"""Random tree generation and ramped half-and-half initialization."""

from typing import Literal
import logging

import numpy as np

from src.config import EvolutionConfig
from src.models import GpType
from src.gp.primitives import PrimitiveRegistry, PrimitiveSignature, TerminalSpec
from src.gp.tree import Function, GenotypeTree, Individual, Node, Terminal

logger = logging.getLogger(__name__)

Method = Literal["full", "grow"]


def _pick(items: list, rng: np.random.Generator):
    return items[int(rng.integers(len(items)))]


def make_terminal(spec: TerminalSpec, rng: np.random.Generator, exclude: str | None = None) -> Terminal:
    """Draw a terminal uniformly from a channel or parameter domain."""
    if spec.is_channel:
        return Terminal(GpType.IMAGE, spec.name, spec.channel)
    choices = [v for v in spec.domain if v.label != exclude] or list(spec.domain)
    value = _pick(choices, rng)
    return Terminal(spec.gp_type, value.label, value.value)


def _random_terminal(registry: PrimitiveRegistry, gp_type: GpType, rng: np.random.Generator) -> Terminal:
    specs = registry.terminals_for(gp_type)
    if not specs:
        raise RuntimeError(f"no terminal produces {gp_type.value}")
    return make_terminal(_pick(specs, rng), rng)


def _shortest(registry: PrimitiveRegistry, candidates: list[PrimitiveSignature]) -> list[PrimitiveSignature]:
    """Primitives with the smallest (height, size) completion."""
    scored = [(registry.signature_height(s), registry.signature_size(s), s) for s in candidates]
    best = min((h, n) for h, n, _ in scored)
    return [s for h, n, s in scored if (h, n) == best]


class TreeGenerator:
    """Builds random typed subtrees against a registry."""

    def __init__(self, registry: PrimitiveRegistry):
        self.registry = registry

    def generate(
        self,
        method: Method,
        target_depth: int,
        return_type: GpType,
        rng: np.random.Generator,
        root: bool = False,
    ) -> Node:
        """
        Generate a subtree of ``return_type`` whose depth aims at ``target_depth``.

        ``full`` keeps choosing functions until the target depth, ``grow`` mixes
        terminals and functions. When no function fits the remaining depth the
        shortest legal completion is used instead.
        """
        if return_type not in self.registry.min_height:
            raise RuntimeError(f"type {return_type.value} cannot be produced by the registry")
        return self._build(method, target_depth, return_type, rng, root)

    def _build(
        self,
        method: Method,
        remaining: int,
        gp_type: GpType,
        rng: np.random.Generator,
        root: bool,
    ) -> Node:
        if gp_type.is_parameter:
            return _random_terminal(self.registry, gp_type, rng)

        functions = self.registry.root_functions() if root else self.registry.functions_for(gp_type)
        terminals = [] if root else self.registry.terminals_for(gp_type)
        feasible = [s for s in functions if self.registry.signature_height(s) <= remaining]

        if remaining <= 0 and terminals:
            return _random_terminal(self.registry, gp_type, rng)
        if not feasible:
            if terminals:
                return _random_terminal(self.registry, gp_type, rng)
            return self._expand(_pick(_shortest(self.registry, functions), rng), method, remaining, rng)

        if method == "grow" and terminals:
            slot = int(rng.integers(len(terminals) + len(feasible)))
            if slot < len(terminals):
                return make_terminal(terminals[slot], rng)
            return self._expand(feasible[slot - len(terminals)], method, remaining, rng)
        return self._expand(_pick(feasible, rng), method, remaining, rng)

    def _expand(
        self,
        sig: PrimitiveSignature,
        method: Method,
        remaining: int,
        rng: np.random.Generator,
    ) -> Function:
        children = tuple(
            self._build(method, remaining - 1, child_type, rng, root=False)
            for child_type in sig.child_types
        )
        return Function(sig.name, children)

    def generate_tree(self, method: Method, target_depth: int, rng: np.random.Generator) -> GenotypeTree:
        """Whole genotype: root drawn from the summation primitives."""
        root = self.generate(method, target_depth, GpType.PROBS, rng, root=True)
        assert isinstance(root, Function)
        return GenotypeTree(root)


def generate_tree(
    registry: PrimitiveRegistry,
    method: Method,
    target_depth: int,
    return_type: GpType,
    rng: np.random.Generator,
) -> Node | GenotypeTree:
    """Module-level helper; PROBS requests produce a complete genotype."""
    generator = TreeGenerator(registry)
    if return_type is GpType.PROBS:
        return generator.generate_tree(method, target_depth, rng)
    return generator.generate(method, target_depth, return_type, rng)


def init_population(
    config: EvolutionConfig,
    registry: PrimitiveRegistry,
    rng: np.random.Generator,
) -> list[Individual]:
    """
    Ramped half-and-half: target depths cycle through
    [init_depth_min, init_depth_max] and methods alternate full/grow.
    """
    generator = TreeGenerator(registry)
    depths = list(range(config.init_depth_min, config.init_depth_max + 1))
    population = []
    for i in range(config.population_size):
        depth = depths[i % len(depths)]
        method: Method = "full" if i % 2 == 0 else "grow"
        population.append(Individual(generator.generate_tree(method, depth, rng)))

    sizes = [ind.size for ind in population]
    logger.debug(
        "Initialized %d individuals (mean size %.1f, max depth %d)",
        len(population), float(np.mean(sizes)), max(ind.genotype.depth for ind in population),
    )
    return population

"""Selection and type-preserving variation operators."""

import logging

import numpy as np

from src.gp.generation import TreeGenerator, make_terminal
from src.gp.primitives import PrimitiveRegistry
from src.gp.tree import GenotypeTree, Individual, Terminal, node_depth, node_type

logger = logging.getLogger(__name__)


def selection_key(individual: Individual, index: int) -> tuple[float, int, int]:
    """Sort key: higher fitness first, then smaller tree, then earlier index."""
    if individual.fitness is None:
        raise RuntimeError(f"individual {index} has not been evaluated")
    return (-individual.fitness, individual.size, index)


def tournament_select(
    population: list[Individual],
    tournament_size: int,
    rng: np.random.Generator,
) -> Individual:
    """Best of ``tournament_size`` uniform draws with replacement."""
    if not population:
        raise ValueError("cannot select from an empty population")
    draws = rng.integers(0, len(population), size=tournament_size)
    winner = min((int(i) for i in draws), key=lambda i: selection_key(population[i], i))
    return population[winner]


def subtree_crossover(
    parent_a: GenotypeTree,
    parent_b: GenotypeTree,
    max_depth: int,
    retry_limit: int,
    rng: np.random.Generator,
) -> tuple[GenotypeTree, GenotypeTree]:
    """
    Swap two same-typed non-root subtrees.

    Up to ``retry_limit`` further attempts are made when no compatible node
    exists or an offspring would exceed ``max_depth``; the parents are returned
    unchanged when every attempt fails.
    """
    paths_a = parent_a.non_root_paths()
    paths_b = parent_b.non_root_paths()
    if not paths_a or not paths_b:
        return parent_a, parent_b

    for _ in range(retry_limit + 1):
        path_a = paths_a[int(rng.integers(len(paths_a)))]
        sub_a = parent_a.subtree(path_a)
        wanted = node_type(sub_a)
        compatible = [p for p in paths_b if node_type(parent_b.subtree(p)) is wanted]
        if not compatible:
            continue
        path_b = compatible[int(rng.integers(len(compatible)))]
        sub_b = parent_b.subtree(path_b)

        if len(path_a) + node_depth(sub_b) > max_depth:
            continue
        if len(path_b) + node_depth(sub_a) > max_depth:
            continue
        return parent_a.replace(path_a, sub_b), parent_b.replace(path_b, sub_a)

    logger.debug("Crossover gave up after %d attempts; returning parents", retry_limit + 1)
    return parent_a, parent_b


def subtree_mutation(
    parent: GenotypeTree,
    registry: PrimitiveRegistry,
    max_depth: int,
    rng: np.random.Generator,
) -> GenotypeTree:
    """Replace a random non-root node with a grown subtree of the same type."""
    paths = parent.non_root_paths()
    path = paths[int(rng.integers(len(paths)))]
    site = parent.subtree(path)
    gp_type = node_type(site)

    if isinstance(site, Terminal) and gp_type.is_parameter:
        key = registry.primitives[parent.subtree(path[:-1]).name].key_for(path[-1])
        spec = registry.param(key) if key else None
        if spec is not None:
            return parent.replace(path, make_terminal(spec, rng, exclude=site.label))

    budget = max_depth - len(path)
    replacement = TreeGenerator(registry).generate("grow", budget, gp_type, rng)
    return parent.replace(path, replacement)

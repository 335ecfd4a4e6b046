"""Generational evolution loop."""

from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Optional
import logging
import math
import time

import numpy as np

from src.config import EvolutionConfig, get_settings
from src.models import Dataset, FitnessReport, GenerationRecord
from src.gp.generation import init_population
from src.gp.primitives import PrimitiveRegistry, register_primitives
from src.gp.tree import GenotypeTree, Individual
from src.gp.variation import (
    selection_key,
    subtree_crossover,
    subtree_mutation,
    tournament_select,
)

logger = logging.getLogger(__name__)

# fitness_fn(genotype, dataset, seed) -> FitnessReport
FitnessFn = Callable[[GenotypeTree, Dataset, int], FitnessReport]
# start_generation(generation), called before each evaluation in the evaluating process
GenerationHook = Callable[[int], None]
# map_fn(function, iterable) -> iterable of results, e.g. builtin map or Pool.imap
MapFn = Callable[[Callable, Iterable], Iterable]

_VARIATION_STREAM = 0x5EED


@dataclass
class EvolutionResult:
    """Best individual ever seen plus the per-generation log."""
    best: Individual
    log: list[GenerationRecord] = field(default_factory=list)
    population: list[Individual] = field(default_factory=list)
    evaluations: int = 0


def individual_seed(run_seed: int, generation: int, index: int) -> int:
    """Independent 63-bit evaluation seed for one (generation, index) slot."""
    state = np.random.SeedSequence([run_seed, generation, index]).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def offspring_counts(population_size: int, config: EvolutionConfig) -> tuple[int, int, int]:
    """(elites, crossover offspring, mutation offspring) for one generation."""
    elites = min(population_size, max(1, _round_half_up(config.elitism_rate * population_size)))
    crossover = 2 * _round_half_up(config.crossover_rate * population_size / 2)
    crossover = min(crossover, population_size - elites)
    crossover -= crossover % 2
    mutation = population_size - elites - crossover
    return elites, crossover, mutation


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


class _Evaluator:
    """Picklable wrapper so process pools can map evaluations."""

    def __init__(
        self,
        fitness_fn: FitnessFn,
        dataset: Dataset,
        start_generation: Optional[GenerationHook] = None,
    ):
        self.fitness_fn = fitness_fn
        self.dataset = dataset
        self.start_generation = start_generation

    def __call__(self, job: tuple[GenotypeTree, int, int]) -> FitnessReport:
        genotype, seed, generation = job
        if self.start_generation is not None:
            self.start_generation(generation)
        try:
            return self.fitness_fn(genotype, self.dataset, seed)
        except Exception as e:  # noqa: BLE001 - any failure scores zero
            return FitnessReport(fitness=0.0, failure=f"{type(e).__name__}: {e}")


def evaluate_population(
    population: list[Individual],
    generation: int,
    config: EvolutionConfig,
    evaluator: Callable[[tuple[GenotypeTree, int, int]], FitnessReport],
    map_fn: MapFn = map,
) -> tuple[int, int]:
    """Score every unevaluated individual in place; returns (evaluated, failures)."""
    pending = [i for i, ind in enumerate(population) if not ind.evaluated]
    jobs = [
        (population[i].genotype, individual_seed(config.seed, generation, i), generation)
        for i in pending
    ]
    failures = 0
    for i, report in zip(pending, map_fn(evaluator, jobs)):
        individual = population[i]
        individual.report = report
        if report.failed:
            failures += 1
            logger.warning(
                "Fitness evaluation failed for individual %d of generation %d: %s",
                i, generation, report.failure,
            )
            individual.fitness = 0.0
        else:
            individual.fitness = report.fitness
    return len(pending), failures


def _rank(population: list[Individual]) -> list[int]:
    return sorted(range(len(population)), key=lambda i: selection_key(population[i], i))


def breed(
    population: list[Individual],
    config: EvolutionConfig,
    registry: PrimitiveRegistry,
    rng: np.random.Generator,
) -> list[Individual]:
    """Next generation: elites first, then crossover offspring, then mutants."""
    n = len(population)
    n_elite, n_cross, n_mut = offspring_counts(n, config)
    ranked = _rank(population)

    offspring = [
        Individual(population[i].genotype, population[i].fitness, population[i].report)
        for i in ranked[:n_elite]
    ]
    for _ in range(n_cross // 2):
        a = tournament_select(population, config.tournament_size, rng)
        b = tournament_select(population, config.tournament_size, rng)
        child_a, child_b = subtree_crossover(
            a.genotype, b.genotype, config.max_depth, config.crossover_retry_limit, rng
        )
        offspring.append(Individual(child_a))
        offspring.append(Individual(child_b))
    for _ in range(n_mut):
        parent = tournament_select(population, config.tournament_size, rng)
        offspring.append(Individual(subtree_mutation(parent.genotype, registry, config.max_depth, rng)))
    return offspring


def _record(population: list[Individual], generation: int, elapsed: float, failures: int) -> GenerationRecord:
    best = population[_rank(population)[0]]
    return GenerationRecord(
        generation=generation,
        best_fitness=float(best.fitness),
        mean_fitness=float(np.mean([ind.fitness for ind in population])),
        mean_tree_size=float(np.mean([ind.size for ind in population])),
        best_tree_size=best.size,
        elapsed_s=elapsed if get_settings().record_wall_time else 0.0,
        failures=failures,
    )


def _better(candidate: Individual, incumbent: Optional[Individual]) -> bool:
    if incumbent is None:
        return True
    if candidate.fitness != incumbent.fitness:
        return candidate.fitness > incumbent.fitness
    return candidate.size < incumbent.size


def evolve(
    config: EvolutionConfig,
    dataset: Dataset,
    fitness_fn: FitnessFn,
    registry: Optional[PrimitiveRegistry] = None,
    map_fn: MapFn = map,
    on_generation: Optional[Callable[[GenerationRecord], None]] = None,
    start_generation: Optional[GenerationHook] = None,
) -> EvolutionResult:
    """
    Run the generational loop.

    Generation 0 is the initial population; ``config.generations`` generations
    are evaluated and logged. With ``generations=0`` only the initial population
    is evaluated and its best returned with an empty log.

    Args:
        config: evolution parameters
        dataset: training data handed to ``fitness_fn``
        fitness_fn: scores one genotype given an evaluation seed
        registry: primitive set; built from the dataset signature when omitted
        map_fn: map used for population evaluation (e.g. a process pool's imap)
        on_generation: callback receiving every log record
        start_generation: module-level hook run in the evaluating process before
            each evaluation with its generation number (picklable for pools)
    """
    if registry is None:
        signature = dataset.signature
        registry = register_primitives(
            signature.channels, signature.num_classes, config.gabor_frequency_reading
        )

    rng = np.random.default_rng(np.random.SeedSequence([config.seed, _VARIATION_STREAM]))
    evaluator = _Evaluator(fitness_fn, dataset, start_generation)
    started = time.perf_counter()

    population = init_population(config, registry, rng)
    result = EvolutionResult(best=population[0])
    best: Optional[Individual] = None

    for generation in _generations(config.generations):
        evaluated, failures = evaluate_population(population, generation, config, evaluator, map_fn)
        result.evaluations += evaluated

        champion = population[_rank(population)[0]]
        if _better(champion, best):
            best = champion

        if config.generations > 0:
            elapsed = time.perf_counter() - started
            record = _record(population, generation, elapsed, failures)
            result.log.append(record)
            logger.info(
                "Generation %d: best=%.2f mean=%.2f size=%.1f elapsed=%.1fs",
                record.generation, record.best_fitness, record.mean_fitness,
                record.mean_tree_size, elapsed,
            )
            if on_generation is not None:
                on_generation(record)

        if generation + 1 < config.generations:
            population = breed(population, config, registry, rng)

    assert best is not None
    result.best = best
    result.population = population
    return result


def _generations(count: int) -> Iterator[int]:
    return iter(range(max(count, 1)))

"""Experiment orchestrator that runs repeated evolutions and scores their winners."""

from dataclasses import dataclass, field
from multiprocessing import Pool
from pathlib import Path
from typing import Callable, Optional
import logging
import time

from src.config import EvolutionConfig, RunConfig, get_settings
from src.data.dump import write_dump
from src.data.loaders import LoadedData, load_datasets
from src.errors import EdlgpError
from src.gp.evolution import EvolutionResult, evolve
from src.gp.primitives import register_primitives
from src.gp.tree import GenotypeTree
from src.models import Dataset, GenerationRecord
from src.output.reports import ExperimentSummary, ReportWriter, RunReport, TreeMeta
from src.pipeline.cache import get_cache, start_generation
from src.pipeline.fitness import FitnessEvaluator, retrain_and_test

logger = logging.getLogger(__name__)


@dataclass
class ExperimentResult:
    """Complete result of an ``evolve`` invocation."""
    run_dir: Path
    summary: Optional[ExperimentSummary] = None
    runs: list[RunReport] = field(default_factory=list)


def run_directory(config: RunConfig) -> Path:
    """Deterministic directory name: dataset, base seed and config digest prefix."""
    name = f"{config.dataset.name}_s{config.evolution.seed}_{config.digest()[:8]}"
    return Path(config.run.output_dir) / name


def _init_worker(log_level: str) -> None:
    logging.basicConfig(level=log_level)


class ExperimentOrchestrator:
    """
    Orchestrates a full experiment.

    Pipeline:
    1. Load and subsample the datasets
    2. Write the resolved config and dataset dumps into the run directory
    3. Evolve ``repeats`` times with seeds seed+i
    4. Retrain each run's best tree on the whole training set and score the test set
    5. Write per-run artifacts and the experiment summary
    """

    def __init__(self, writer: Optional[ReportWriter] = None):
        self.writer = writer or ReportWriter()

    def run(
        self,
        config: RunConfig,
        on_generation: Optional[Callable[[int, GenerationRecord], None]] = None,
    ) -> ExperimentResult:
        """
        Run every repeat of the configured experiment.

        Config and data errors propagate before any evolution starts; failures of
        individual trees during a run are logged and scored zero.

        Args:
            config: fully resolved run configuration
            on_generation: callback receiving (repeat index, log record)
        """
        data = load_datasets(config.dataset)
        run_dir = run_directory(config)
        run_dir.mkdir(parents=True, exist_ok=True)
        self._write_inputs(config, data, run_dir)

        logger.info(
            "Experiment %s: %d repeats on %d training instances (of %d)",
            run_dir.name, config.run.repeats, len(data.train), data.full_train_size,
        )

        summary = ExperimentSummary(dataset=config.dataset.name, config_digest=config.digest())
        for index in range(config.run.repeats):
            callback = None
            if on_generation is not None:
                callback = lambda record, i=index: on_generation(i, record)  # noqa: E731
            report = self._run_once(config, data, index, run_dir, callback)
            summary.runs.append(report)

        self.writer.write_summary(summary, run_dir / "summary.json")
        return ExperimentResult(
            run_dir=run_dir,
            summary=summary,
            runs=summary.runs,
        )

    def _write_inputs(self, config: RunConfig, data: LoadedData, run_dir: Path) -> None:
        (run_dir / "config.cfg").write_text(config.to_ini(), encoding="utf-8")
        write_dump(data.train, run_dir / "train.edl")
        if data.test is not None:
            write_dump(data.test, run_dir / "test.edl")

    def _run_once(
        self,
        config: RunConfig,
        data: LoadedData,
        index: int,
        run_dir: Path,
        on_generation: Optional[Callable[[GenerationRecord], None]],
    ) -> RunReport:
        seed = config.evolution.seed + index
        evolution = config.evolution.model_copy(update={"seed": seed})
        fitness_fn = FitnessEvaluator(config.learners, evolution.cascade_oof)

        cache = get_cache()
        if cache is not None:
            cache.clear()

        logger.info("Run %d/%d with seed %d", index + 1, config.run.repeats, seed)
        started = time.perf_counter()
        result = self._evolve(evolution, data.train, fitness_fn, config.run.parallel, on_generation)
        evolution_time = time.perf_counter() - started

        best = result.best
        report = RunReport(
            index=index,
            seed=seed,
            tree=best.genotype.text,
            tree_size=best.genotype.size,
            tree_depth=best.genotype.depth,
            best_fitness=float(best.fitness),
            evolution_time=evolution_time,
            evaluations=result.evaluations,
            log=result.log,
        )
        if data.test is not None:
            self._score(report, best.genotype, config, data.train, data.test)

        meta = TreeMeta(
            seed=seed,
            signature=data.train.signature,
            config_digest=config.digest(),
            cascade_oof=evolution.cascade_oof,
            gabor_frequency_reading=evolution.gabor_frequency_reading,
            dataset=config.dataset.name,
            train_size=len(data.train),
            fitness=report.best_fitness,
            test_accuracy=report.test_accuracy,
            learners=config.learners.model_dump(),
        )
        self.writer.write_run(report, meta, run_dir / f"run_{index:02d}")
        return report

    def _evolve(
        self,
        evolution: EvolutionConfig,
        train: Dataset,
        fitness_fn: FitnessEvaluator,
        parallel: int,
        on_generation: Optional[Callable[[GenerationRecord], None]],
    ) -> EvolutionResult:
        signature = train.signature
        registry = register_primitives(
            signature.channels, signature.num_classes, evolution.gabor_frequency_reading
        )
        if parallel <= 1:
            return evolve(
                evolution, train, fitness_fn, registry,
                on_generation=on_generation, start_generation=start_generation,
            )

        with Pool(parallel, initializer=_init_worker, initargs=(get_settings().log_level,)) as pool:
            return evolve(
                evolution, train, fitness_fn, registry,
                map_fn=pool.imap, on_generation=on_generation, start_generation=start_generation,
            )

    def _score(
        self,
        report: RunReport,
        genotype: GenotypeTree,
        config: RunConfig,
        train: Dataset,
        test: Dataset,
    ) -> None:
        """Retrain on the full training set with the run seed and score the test set."""
        try:
            holdout = retrain_and_test(
                genotype, train, test, report.seed,
                cascade_oof=config.evolution.cascade_oof,
                learner_config=config.learners,
                cache=get_cache(),
            )
        except EdlgpError as e:
            logger.warning("Run %d: best tree failed on the test set: %s", report.index, e)
            return

        report.test_accuracy = holdout.accuracy
        report.per_class = holdout.per_class
        report.confusion = holdout.confusion
        report.test_time = holdout.test_time

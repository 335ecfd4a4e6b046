"""
EDLGP CLI - evolve, evaluate and inspect image classification pipelines

Features:
- Repeated seeded evolution runs with a per-generation progress bar
- Retrain-and-test of a stored tree
- Tree rendering (text, DOT, JSON) and intermediate output dumps
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from src.config import LearnerConfig, RunConfig, get_settings, load_run_config
from src.data.dump import read_dump
from src.data.loaders import load_datasets
from src.errors import ConfigError, EdlgpError, SignatureMismatch, format_path
from src.experiment_orchestrator import ExperimentOrchestrator
from src.gp.primitives import PrimitiveRegistry, register_primitives
from src.gp.tree import GenotypeTree, node_type, parse_tree
from src.models import Dataset, GenerationRecord, GpType, Split
from src.output.reports import ReportWriter, TreeMeta
from src.pipeline.cache import get_cache
from src.pipeline.executor import TreeExecutor
from src.pipeline.fitness import retrain_and_test
from src.visualization.planes import write_pgm_p2
from src.visualization.tree_render import TreeGraphGenerator

logger = logging.getLogger(__name__)


# ============================================================================
# PROGRESS BAR
# ============================================================================

class GenerationProgress:
    """
    In-place status line for an evolution experiment.

    The bar is filled to the best fitness reached in the current run; the
    counters show where the experiment is across repeats and generations.
    """

    def __init__(self, repeats: int, generations: int, width: int = 25):
        self.repeats = repeats
        self.generations = max(generations, 1)
        self.width = width
        self.best = 0.0
        self._repeat: Optional[int] = None

    def line(self, repeat: int, record: GenerationRecord) -> str:
        if repeat != self._repeat:
            self._repeat = repeat
            self.best = 0.0
        self.best = max(self.best, record.best_fitness)
        filled = min(self.width, int(round(self.width * self.best / 100.0)))
        bar = "#" * filled + "." * (self.width - filled)
        return (
            f"run {repeat + 1}/{self.repeats} "
            f"gen {record.generation + 1:>{len(str(self.generations))}}/{self.generations} "
            f"[{bar}] best {self.best:6.2f}% mean {record.mean_fitness:6.2f}% "
            f"size {record.mean_tree_size:5.1f}"
        )

    def update(self, repeat: int, record: GenerationRecord) -> None:
        sys.stdout.write("\r" + self.line(repeat, record).ljust(100))
        sys.stdout.flush()

    def close(self) -> None:
        if self._repeat is not None:
            print()


# ============================================================================
# HELPERS
# ============================================================================

def parse_overrides(extra: Sequence[str]) -> dict[str, str]:
    """
    Turn leftover ``--key value`` / ``--key=value`` arguments into config overrides.

    Raises:
        ConfigError: a token is not a flag or a flag has no value
    """
    overrides: dict[str, str] = {}
    tokens = list(extra)
    i = 0
    while i < len(tokens):
        token = tokens[i]
        if not token.startswith("--") or len(token) == 2:
            raise ConfigError(f"Unexpected argument: {token}")
        key = token[2:]
        if "=" in key:
            key, value = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise ConfigError(f"Missing value for --{key}")
            value = tokens[i + 1]
            i += 2
        overrides[key.replace("-", "_")] = value
    return overrides


def configure_logging(level: Optional[str]) -> None:
    level = (level or get_settings().log_level).upper()
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def read_meta(tree_path: Path, meta_path: Optional[Path]) -> Optional[TreeMeta]:
    """Meta file given explicitly, else ``best_tree.meta`` next to the tree, else None."""
    path = meta_path or tree_path.with_suffix(".meta")
    if not path.exists():
        if meta_path is not None:
            raise ConfigError(f"Meta file not found: {meta_path}")
        return None
    try:
        return TreeMeta.from_dict(json.loads(path.read_text(encoding="utf-8")))
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise ConfigError(f"Cannot read meta file {path}: {e}") from e


def read_tree(tree_path: Path, registry: PrimitiveRegistry) -> GenotypeTree:
    try:
        text = tree_path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read tree file {tree_path}: {e}") from e
    return parse_tree(text.strip(), registry)


def registry_for(meta: Optional[TreeMeta], data: Optional[Dataset]) -> PrimitiveRegistry:
    """Primitive set from the stored meta, else the data, else a colour 2-class default."""
    reading = meta.gabor_frequency_reading if meta else "divided"
    if meta is not None:
        signature = meta.signature
        return register_primitives(signature.channels, signature.num_classes, reading)
    if data is not None:
        return register_primitives(data.signature.channels, data.num_classes, reading)
    return register_primitives(3, 2, reading)


def load_dump_arg(path: Optional[Path], split: Split) -> Optional[Dataset]:
    return read_dump(path, split) if path is not None else None


# ============================================================================
# COMMANDS
# ============================================================================

def cmd_evolve(args: argparse.Namespace, extra: Sequence[str]) -> int:
    overrides = parse_overrides(extra)
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.per_class is not None:
        overrides["per_class"] = str(args.per_class)
    if args.parallel is not None:
        overrides["parallel"] = str(args.parallel)
    config: RunConfig = load_run_config(args.config, overrides)

    progress = None
    if get_settings().progress_bar:
        progress = GenerationProgress(config.run.repeats, config.evolution.generations)

    print(f"\nEDLGP evolve: {config.dataset.name}, {config.run.repeats} run(s)\n")
    result = ExperimentOrchestrator().run(config, progress.update if progress else None)
    if progress is not None:
        progress.close()

    writer = ReportWriter()
    if args.json:
        print(json.dumps(writer.format_summary_json(result.summary), indent=2))
    else:
        print(writer.format_summary_text(result.summary))
    print(f"\nRun directory: {result.run_dir}")
    return 0


def _evaluation_data(args: argparse.Namespace) -> tuple[Dataset, Dataset]:
    train = load_dump_arg(args.train, Split.TRAIN)
    test = load_dump_arg(args.test, Split.TEST)
    if train is None or test is None:
        if args.config is None:
            raise ConfigError("Give --train and --test dumps or a run config with -c")
        data = load_datasets(load_run_config(args.config).dataset, require_test=test is None)
        train = train if train is not None else data.train
        test = test if test is not None else data.test
    return train, test


def cmd_evaluate(args: argparse.Namespace, extra: Sequence[str]) -> int:
    if extra:
        raise ConfigError(f"Unexpected arguments: {' '.join(extra)}")
    meta = read_meta(args.tree, args.meta)
    train, test = _evaluation_data(args)

    if meta is not None and meta.signature != train.signature:
        raise SignatureMismatch(
            f"tree was evolved on {meta.signature.as_dict()}, "
            f"training data has {train.signature.as_dict()}"
        )
    genotype = read_tree(args.tree, registry_for(meta, train))
    seed = args.seed if args.seed is not None else (meta.seed if meta else 0)
    learners = LearnerConfig(**meta.learners) if meta and meta.learners else LearnerConfig()

    report = retrain_and_test(
        genotype, train, test, seed,
        cascade_oof=meta.cascade_oof if meta else True,
        learner_config=learners,
        cache=get_cache(),
    )

    writer = ReportWriter()
    out_dir = args.out or args.tree.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    confusion_path = writer.write_confusion(report.confusion, out_dir / "confusion_matrix.csv")
    print(writer.format_evaluation_text(report.accuracy, report.per_class, report.confusion))
    print(f"\nConfusion matrix: {confusion_path}")
    return 0


# Column prefix per node type: feature index, class index, row-major pixel index.
_COLUMN_PREFIX = {GpType.FEATURES: "f", GpType.PROBS: "p", GpType.IMAGE: "px"}


def write_node_csv(output: np.ndarray, kind: GpType, node_id: str, path: Path) -> Path:
    """One row per instance: node_id, instance_index, then the flattened node output."""
    matrix = output.reshape(output.shape[0], -1)
    prefix = _COLUMN_PREFIX[kind]
    frame = pd.DataFrame(matrix, columns=[f"{prefix}{j}" for j in range(matrix.shape[1])])
    frame.insert(0, "instance_index", np.arange(matrix.shape[0]))
    frame.insert(0, "node_id", node_id)
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def _dump_outputs(
    genotype: GenotypeTree,
    data: Dataset,
    meta: Optional[TreeMeta],
    features_dir: Optional[Path],
    pgm_dir: Optional[Path],
) -> None:
    """Fit on the dump, trace a prediction pass and write node outputs."""
    learners = LearnerConfig(**meta.learners) if meta and meta.learners else LearnerConfig()
    executor = TreeExecutor(learners, meta.cascade_oof if meta else True, cache=get_cache())
    phenotype, _ = executor.fit(genotype, data, seed=meta.seed if meta else 0)
    trace: dict[tuple[int, ...], np.ndarray] = {}
    executor.predict(phenotype, data, trace=trace)

    for path, output in sorted(trace.items()):
        node_id = format_path(path)
        kind = node_type(genotype.subtree(path))
        if features_dir is not None:
            features_dir.mkdir(parents=True, exist_ok=True)
            write_node_csv(np.asarray(output), kind, node_id, features_dir / f"{node_id}.csv")
        if kind is GpType.IMAGE and pgm_dir is not None and len(output):
            pgm_dir.mkdir(parents=True, exist_ok=True)
            write_pgm_p2(output[0], pgm_dir / f"{node_id}.pgm")


def cmd_inspect(args: argparse.Namespace, extra: Sequence[str]) -> int:
    if extra:
        raise ConfigError(f"Unexpected arguments: {' '.join(extra)}")
    meta = read_meta(args.tree, args.meta)
    data = load_dump_arg(args.dump_features, Split.TRAIN)
    genotype = read_tree(args.tree, registry_for(meta, data))

    generator = TreeGraphGenerator()
    graph = generator.generate(genotype)
    print(generator.to_text(graph))

    if args.dot:
        args.dot.write_text(generator.to_dot(graph), encoding="utf-8")
        print(f"\nDOT graph: {args.dot}")
    if args.json_out:
        args.json_out.write_text(json.dumps(generator.to_json(graph), indent=2), encoding="utf-8")
        print(f"Node-link JSON: {args.json_out}")

    if args.dump_pgm and data is None:
        raise ConfigError("--dump-pgm needs a dataset dump via --dump-features")
    if data is not None:
        features_dir = args.out or args.tree.parent / "features"
        _dump_outputs(genotype, data, meta, features_dir, args.dump_pgm)
        print(f"Node output matrices: {features_dir}")
        if args.dump_pgm:
            print(f"Image planes: {args.dump_pgm}")
    return 0


# ============================================================================
# MAIN CLI
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edlgp",
        description="EDLGP - evolutionary deep learning with genetic programming",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Evolve with a config file, overriding any key
  edlgp evolve -c configs/sfmnist10.cfg --seed 3 --population-size 20

  # Refit a stored tree and score it on the test set
  edlgp evaluate -t runs/x/run_00/best_tree.sexp --train runs/x/train.edl --test runs/x/test.edl

  # Render a tree and dump its intermediate outputs
  edlgp inspect -t runs/x/run_00/best_tree.sexp --dot tree.dot --dump-features runs/x/train.edl
        """,
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", help="Logging level (default from EDLGP_LOG_LEVEL)")

    subparsers = parser.add_subparsers(dest="command", help="Commands")

    evolve_parser = subparsers.add_parser(
        "evolve", help="Evolve classification pipelines", parents=[common], allow_abbrev=False,
        description="Any configuration key can be overridden with --key value.",
    )
    evolve_parser.add_argument("--config", "-c", type=Path, help="Run configuration file")
    evolve_parser.add_argument("--seed", type=int, help="Base seed; repeat i uses seed+i")
    evolve_parser.add_argument("--per-class", type=int, help="Training instances per class")
    evolve_parser.add_argument("--parallel", type=int, help="Worker processes per generation")
    evolve_parser.add_argument("--json", action="store_true", help="Print the summary as JSON")

    evaluate_parser = subparsers.add_parser(
        "evaluate", help="Retrain a tree and score the test set", parents=[common]
    )
    evaluate_parser.add_argument("--tree", "-t", type=Path, required=True, help="best_tree.sexp file")
    evaluate_parser.add_argument("--meta", type=Path, help="Meta file (default: next to the tree)")
    evaluate_parser.add_argument("--train", type=Path, help="Training set dump (.edl)")
    evaluate_parser.add_argument("--test", type=Path, help="Test set dump (.edl)")
    evaluate_parser.add_argument("--config", "-c", type=Path, help="Config used for splits not given")
    evaluate_parser.add_argument("--seed", type=int, help="Override the stored retrain seed")
    evaluate_parser.add_argument("--out", type=Path, help="Directory for confusion_matrix.csv")

    inspect_parser = subparsers.add_parser(
        "inspect", help="Render a tree and dump node outputs", parents=[common]
    )
    inspect_parser.add_argument("--tree", "-t", type=Path, required=True, help="best_tree.sexp file")
    inspect_parser.add_argument("--meta", type=Path, help="Meta file (default: next to the tree)")
    inspect_parser.add_argument("--dot", type=Path, help="Write a Graphviz DOT file")
    inspect_parser.add_argument("--json", dest="json_out", type=Path, help="Write node-link JSON")
    inspect_parser.add_argument("--dump-features", type=Path, help="Dataset dump (.edl) to trace")
    inspect_parser.add_argument("--dump-pgm", type=Path, help="Directory for IMAGE node planes")
    inspect_parser.add_argument("--out", type=Path, help="Directory for node output CSVs")

    return parser


COMMANDS = {
    "evolve": cmd_evolve,
    "evaluate": cmd_evaluate,
    "inspect": cmd_inspect,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, dispatch and map errors to exit codes."""
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)

    if not args.command:
        parser.print_help()
        return 0

    configure_logging(args.log_level)
    try:
        return COMMANDS[args.command](args, extra)
    except EdlgpError as e:
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:  # noqa: BLE001
        logger.exception("Unexpected failure")
        print(f"Error: {e}", file=sys.stderr)
        return 4


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()

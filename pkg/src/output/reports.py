"""Run artifacts and experiment summaries."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional
import json
import logging

import numpy as np
import pandas as pd

from src.models import DatasetSignature, GenerationRecord

logger = logging.getLogger(__name__)

GENERATION_COLUMNS = [
    "generation",
    "best_fitness",
    "mean_fitness",
    "mean_tree_size",
    "best_tree_size",
    "elapsed_s",
    "failures",
]


@dataclass
class TreeMeta:
    """Everything besides the genotype text needed to refit a stored tree."""
    seed: int
    signature: DatasetSignature
    config_digest: str
    cascade_oof: bool = True
    gabor_frequency_reading: str = "divided"
    dataset: str = ""
    train_size: int = 0
    fitness: Optional[float] = None
    test_accuracy: Optional[float] = None
    learners: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "signature": self.signature.as_dict(),
            "config_digest": self.config_digest,
            "cascade_oof": self.cascade_oof,
            "gabor_frequency_reading": self.gabor_frequency_reading,
            "dataset": self.dataset,
            "train_size": self.train_size,
            "fitness": self.fitness,
            "test_accuracy": self.test_accuracy,
            "learners": self.learners,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TreeMeta":
        return cls(
            seed=int(data["seed"]),
            signature=DatasetSignature(**data["signature"]),
            config_digest=data.get("config_digest", ""),
            cascade_oof=bool(data.get("cascade_oof", True)),
            gabor_frequency_reading=data.get("gabor_frequency_reading", "divided"),
            dataset=data.get("dataset", ""),
            train_size=int(data.get("train_size", 0)),
            fitness=data.get("fitness"),
            test_accuracy=data.get("test_accuracy"),
            learners=dict(data.get("learners", {})),
        )


@dataclass
class RunReport:
    """Outcome of one seeded evolution run."""
    index: int
    seed: int
    tree: str
    tree_size: int
    tree_depth: int
    best_fitness: float
    test_accuracy: Optional[float] = None
    per_class: dict[int, float] = field(default_factory=dict)
    evolution_time: float = 0.0
    test_time: float = 0.0
    evaluations: int = 0
    log: list[GenerationRecord] = field(default_factory=list)
    confusion: Optional[np.ndarray] = None
    directory: Optional[Path] = None


@dataclass
class ExperimentSummary:
    """Aggregate over repeated runs."""
    dataset: str
    config_digest: str
    runs: list[RunReport] = field(default_factory=list)

    @property
    def test_accuracies(self) -> list[float]:
        return [r.test_accuracy for r in self.runs if r.test_accuracy is not None]

    @property
    def best_run(self) -> Optional[RunReport]:
        scored = [r for r in self.runs if r.test_accuracy is not None]
        if not scored:
            return max(self.runs, key=lambda r: r.best_fitness, default=None)
        return max(scored, key=lambda r: r.test_accuracy)


class ReportWriter:
    """
    Writes run artifacts and formats summaries.

    Per run: generations.csv, best_tree.sexp, best_tree.meta and, when a test
    set was scored, confusion_matrix.csv. Per experiment: summary.json.
    """

    def write_generations(self, log: list[GenerationRecord], path: Path) -> Path:
        frame = pd.DataFrame([record.as_row() for record in log], columns=GENERATION_COLUMNS)
        frame.to_csv(path, index=False, float_format="%.6f", lineterminator="\n")
        return path

    def write_tree(self, tree_text: str, meta: TreeMeta, directory: Path) -> tuple[Path, Path]:
        sexp = directory / "best_tree.sexp"
        sexp.write_text(tree_text + "\n", encoding="utf-8")
        meta_path = directory / "best_tree.meta"
        meta_path.write_text(json.dumps(meta.to_dict(), indent=2) + "\n", encoding="utf-8")
        return sexp, meta_path

    def write_confusion(self, confusion: np.ndarray, path: Path) -> Path:
        classes = range(confusion.shape[0])
        frame = pd.DataFrame(
            confusion,
            index=pd.Index([f"true_{c}" for c in classes], name="class"),
            columns=[f"pred_{c}" for c in classes],
        )
        frame.to_csv(path, lineterminator="\n")
        return path

    def write_run(self, run: RunReport, meta: TreeMeta, directory: Path) -> Path:
        directory.mkdir(parents=True, exist_ok=True)
        self.write_generations(run.log, directory / "generations.csv")
        self.write_tree(run.tree, meta, directory)
        if run.confusion is not None:
            self.write_confusion(run.confusion, directory / "confusion_matrix.csv")
        run.directory = directory
        logger.debug("Wrote run %d artifacts to %s", run.index, directory)
        return directory

    def write_summary(self, summary: ExperimentSummary, path: Path) -> Path:
        path.write_text(json.dumps(self.format_summary_json(summary), indent=2) + "\n", encoding="utf-8")
        return path

    def format_summary_json(self, summary: ExperimentSummary) -> dict[str, Any]:
        accuracies = summary.test_accuracies
        best = summary.best_run
        aggregate = None
        if accuracies:
            aggregate = {
                "mean": float(np.mean(accuracies)),
                "std": float(np.std(accuracies)),
                "best": float(np.max(accuracies)),
            }
        return {
            "dataset": summary.dataset,
            "config_digest": summary.config_digest,
            "repeats": len(summary.runs),
            "test_accuracy": aggregate,
            "best_run": best.index if best else None,
            "runs": [
                {
                    "index": r.index,
                    "seed": r.seed,
                    "best_fitness": r.best_fitness,
                    "test_accuracy": r.test_accuracy,
                    "per_class_accuracy": {str(k): v for k, v in r.per_class.items()},
                    "tree_size": r.tree_size,
                    "tree_depth": r.tree_depth,
                    "evaluations": r.evaluations,
                    "evolution_time_s": r.evolution_time,
                    "test_time_s": r.test_time,
                    "tree": r.tree,
                }
                for r in summary.runs
            ],
        }

    def format_summary_text(self, summary: ExperimentSummary) -> str:
        lines = [
            "=== EDLGP EXPERIMENT SUMMARY ===",
            f"Dataset: {summary.dataset}",
            f"Runs:    {len(summary.runs)}",
            "",
            "RUNS:",
            "-" * 40,
        ]
        for run in summary.runs:
            test = f"{run.test_accuracy:.2f}%" if run.test_accuracy is not None else "n/a"
            lines.append(
                f"  #{run.index} seed={run.seed} fitness={run.best_fitness:.2f}% "
                f"test={test} size={run.tree_size} time={run.evolution_time:.1f}s"
            )

        accuracies = summary.test_accuracies
        if accuracies:
            lines.extend([
                "",
                f"Test accuracy: {np.mean(accuracies):.2f} +/- {np.std(accuracies):.2f} "
                f"(best {np.max(accuracies):.2f})",
            ])
        best = summary.best_run
        if best is not None:
            lines.extend(["", "BEST TREE:", "-" * 40, best.tree])
        return "\n".join(lines)

    def format_evaluation_text(
        self,
        accuracy: float,
        per_class: dict[int, float],
        confusion: np.ndarray,
    ) -> str:
        lines = [f"Test accuracy: {accuracy:.2f}%", "", "Per-class accuracy:"]
        for cls, value in per_class.items():
            lines.append(f"  class {cls}: {value:.2f}% ({int(confusion[cls].sum())} instances)")
        return "\n".join(lines)

"""Tree execution, fitness evaluation and subtree caching."""

from src.pipeline.cache import SubtreeCache, get_cache
from src.pipeline.executor import (
    PhenotypeTree,
    TreeExecutor,
    execute_fit,
    execute_predict,
)
from src.pipeline.fitness import (
    FitnessEvaluator,
    HoldoutReport,
    accuracy,
    evaluate_fitness,
    retrain_and_test,
)

__all__ = [
    "SubtreeCache",
    "get_cache",
    "PhenotypeTree",
    "TreeExecutor",
    "execute_fit",
    "execute_predict",
    "FitnessEvaluator",
    "HoldoutReport",
    "accuracy",
    "evaluate_fitness",
    "retrain_and_test",
]

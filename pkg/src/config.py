"""Configuration settings for EDLGP."""

from pathlib import Path
from functools import lru_cache
from typing import Any, Literal, Optional
import configparser
import hashlib
import io
import json

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.errors import ConfigError


class Settings(BaseSettings):
    """Process-level settings loaded from environment."""

    log_level: str = "INFO"
    progress_bar: bool = True

    # Subtree output cache
    cache_enabled: bool = True
    cache_max_entries: int = 20000
    cache_max_bytes: int = 1 << 30

    # Out-of-fold cascade augmentation
    cascade_folds: int = 3

    # Off: elapsed_s is written as 0 so identical runs give identical generations.csv
    record_wall_time: bool = False

    model_config = SettingsConfigDict(env_prefix="EDLGP_", env_file=".env", extra="ignore")


@lru_cache
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()


class LearnerConfig(BaseModel):
    """Optimizer hyperparameters of the classifier primitives."""

    model_config = ConfigDict(extra="forbid")

    lr_l2: float = 1e-4
    lr_learning_rate: float = 0.1
    lr_max_epochs: int = 500
    lr_tolerance: float = 1e-6
    svm_l2: float = 1e-4
    svm_epochs: int = 500
    forest_min_samples_split: int = 2


class EvolutionConfig(BaseModel):
    """All run parameters of the evolutionary search."""

    model_config = ConfigDict(extra="forbid")

    population_size: int = Field(100, ge=1)
    generations: int = Field(50, ge=0)
    crossover_rate: float = Field(0.5, ge=0.0)
    mutation_rate: float = Field(0.49, ge=0.0)
    elitism_rate: float = Field(0.01, ge=0.0)
    tournament_size: int = Field(5, ge=1)
    init_depth_min: int = Field(2, ge=1)
    init_depth_max: int = Field(10, ge=1)
    max_depth: int = Field(10, ge=3)
    seed: int = Field(0, ge=0, lt=2**64)
    cascade_oof: bool = True
    crossover_retry_limit: int = Field(10, ge=0)
    gabor_frequency_reading: Literal["divided", "multiplied"] = "divided"

    @model_validator(mode="after")
    def _check_consistency(self) -> "EvolutionConfig":
        total = self.crossover_rate + self.mutation_rate + self.elitism_rate
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"crossover, mutation and elitism rates must sum to 1, got {total}")
        if self.init_depth_min > self.init_depth_max:
            raise ValueError("init_depth_min must not exceed init_depth_max")
        if self.init_depth_max > self.max_depth:
            raise ValueError("init_depth_max must not exceed max_depth")
        return self


class DatasetConfig(BaseModel):
    """Where the data comes from and how it is subsampled."""

    model_config = ConfigDict(extra="forbid")

    name: str = "dataset"
    format: Literal["idx", "cifar", "pgm", "dump"] = "idx"
    train_images: Optional[Path] = None
    train_labels: Optional[Path] = None
    test_images: Optional[Path] = None
    test_labels: Optional[Path] = None
    train_batches: list[Path] = Field(default_factory=list)
    test_batches: list[Path] = Field(default_factory=list)
    train_manifest: Optional[Path] = None
    test_manifest: Optional[Path] = None
    per_class: int = Field(0, ge=0)
    test_per_class: int = Field(0, ge=0)
    subsample_seed: int = Field(0, ge=0)
    num_classes: Optional[int] = Field(None, ge=2)


class RunSection(BaseModel):
    """Experiment-level options."""

    model_config = ConfigDict(extra="forbid")

    repeats: int = Field(1, ge=1)
    output_dir: Path = Path("runs")
    parallel: int = Field(1, ge=1)


class RunConfig(BaseModel):
    """Fully resolved experiment configuration."""

    model_config = ConfigDict(extra="forbid")

    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    evolution: EvolutionConfig = Field(default_factory=EvolutionConfig)
    learners: LearnerConfig = Field(default_factory=LearnerConfig)
    run: RunSection = Field(default_factory=RunSection)

    def to_ini(self) -> str:
        """Render as the ``key = value`` file format accepted by :func:`load_run_config`."""
        parser = configparser.ConfigParser()
        for section in SECTIONS:
            values = getattr(self, section).model_dump(mode="json")
            parser[section] = {
                key: _format_value(value) for key, value in values.items() if value is not None
            }
        buffer = io.StringIO()
        parser.write(buffer)
        return buffer.getvalue()

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form."""
        payload = json.dumps(self.model_dump(mode="json"), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()


SECTIONS = ("dataset", "evolution", "learners", "run")


def _format_value(value: Any) -> str:
    if isinstance(value, list):
        return ", ".join(str(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _section_of(key: str) -> str:
    """Find which section owns a flat key."""
    owners = [
        section for section in SECTIONS
        if key in RunConfig.model_fields[section].annotation.model_fields
    ]
    if not owners:
        raise ConfigError(f"Unknown configuration key: {key}")
    return owners[0]


def _coerce(section: str, key: str, raw: str) -> Any:
    """Turn an INI string into something pydantic can validate."""
    field_info = RunConfig.model_fields[section].annotation.model_fields[key]
    if "list" in str(field_info.annotation):
        return [item.strip() for item in raw.split(",") if item.strip()]
    if raw.strip() == "" and field_info.default is None:
        return None
    return raw.strip()


def load_run_config(
    path: Optional[Path] = None,
    overrides: Optional[dict[str, str]] = None,
) -> RunConfig:
    """
    Load a run configuration file and apply ``--key value`` overrides.

    Args:
        path: INI-style file with [dataset], [evolution], [learners], [run] sections
        overrides: flat key -> raw string value; the owning section is looked up

    Raises:
        ConfigError: unreadable file, unknown key, or invalid values
    """
    raw: dict[str, dict[str, Any]] = {section: {} for section in SECTIONS}

    if path is not None:
        parser = configparser.ConfigParser()
        try:
            with open(path, encoding="utf-8") as handle:
                parser.read_file(handle)
        except (OSError, configparser.Error) as e:
            raise ConfigError(f"Cannot read config {path}: {e}") from e

        for section in parser.sections():
            if section not in raw:
                raise ConfigError(f"Unknown config section [{section}] in {path}")
            for key, value in parser[section].items():
                if key not in _fields(section):
                    raise ConfigError(f"Unknown key {key} in [{section}]")
                raw[section][key] = _coerce(section, key, value)

    for key, value in (overrides or {}).items():
        key = key.replace("-", "_")
        section = _section_of(key)
        raw[section][key] = _coerce(section, key, value)

    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {e}") from e


def _fields(section: str) -> set[str]:
    return set(RunConfig.model_fields[section].annotation.model_fields)

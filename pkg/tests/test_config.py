"""Tests for run configuration loading and settings."""

import pytest
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.config import EvolutionConfig, RunConfig, Settings, load_run_config
from src.errors import ConfigError

CONFIG = """
[dataset]
name = unit
format = cifar
train_batches = a.bin, b.bin
per_class = 10

[evolution]
population_size = 20
generations = 5
seed = 42

[learners]
lr_max_epochs = 50

[run]
repeats = 2
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "unit.cfg"
    path.write_text(CONFIG)
    return path


class TestLoading:
    def test_sections_and_defaults(self, config_file):
        config = load_run_config(config_file)
        assert config.dataset.format == "cifar"
        assert config.dataset.train_batches == [Path("a.bin"), Path("b.bin")]
        assert config.evolution.population_size == 20
        assert config.evolution.tournament_size == 5
        assert config.evolution.max_depth == 10
        assert config.learners.lr_max_epochs == 50
        assert config.run.repeats == 2

    def test_no_file_gives_defaults(self):
        config = load_run_config()
        assert config.evolution.population_size == 100
        assert config.evolution.generations == 50
        assert (config.evolution.crossover_rate, config.evolution.mutation_rate,
                config.evolution.elitism_rate) == (0.5, 0.49, 0.01)

    def test_overrides_find_their_section(self, config_file):
        config = load_run_config(config_file, {"seed": "7", "per-class": "3", "svm_epochs": "20"})
        assert config.evolution.seed == 7
        assert config.dataset.per_class == 3
        assert config.learners.svm_epochs == 20

    def test_unknown_override(self):
        with pytest.raises(ConfigError, match="Unknown configuration key"):
            load_run_config(overrides={"mutation": "0.1"})

    def test_unknown_key_in_file(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("[evolution]\npopulation = 5\n")
        with pytest.raises(ConfigError, match="population"):
            load_run_config(path)

    def test_unknown_section(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("[server]\nport = 1\n")
        with pytest.raises(ConfigError):
            load_run_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_run_config(tmp_path / "absent.cfg")

    def test_invalid_value(self):
        with pytest.raises(ConfigError) as exc:
            load_run_config(overrides={"population_size": "zero"})
        assert exc.value.exit_code == 2


class TestValidation:
    def test_rates_must_sum_to_one(self):
        with pytest.raises(ConfigError):
            load_run_config(overrides={"mutation_rate": "0.3"})

    def test_rates_can_be_rebalanced(self):
        config = load_run_config(overrides={"crossover_rate": "0.8", "mutation_rate": "0.19"})
        assert config.evolution.crossover_rate == 0.8

    def test_init_depth_order(self):
        with pytest.raises(ValueError):
            EvolutionConfig(init_depth_min=6, init_depth_max=4)

    def test_init_depth_within_max(self):
        with pytest.raises(ValueError):
            EvolutionConfig(init_depth_max=12, max_depth=10)

    def test_gabor_reading(self):
        assert load_run_config(overrides={"gabor_frequency_reading": "multiplied"}) \
            .evolution.gabor_frequency_reading == "multiplied"
        with pytest.raises(ConfigError):
            load_run_config(overrides={"gabor_frequency_reading": "halved"})


class TestSerialisation:
    def test_ini_round_trip(self, config_file, tmp_path):
        config = load_run_config(config_file)
        written = tmp_path / "written.cfg"
        written.write_text(config.to_ini())
        assert load_run_config(written) == config

    def test_digest_tracks_content(self, config_file):
        a = load_run_config(config_file)
        b = load_run_config(config_file)
        c = load_run_config(config_file, {"seed": "43"})
        assert a.digest() == b.digest()
        assert a.digest() != c.digest()
        assert len(a.digest()) == 64

    def test_defaults_round_trip(self, tmp_path):
        written = tmp_path / "defaults.cfg"
        written.write_text(RunConfig().to_ini())
        assert load_run_config(written) == RunConfig()


class TestSettings:
    def test_defaults(self, monkeypatch):
        for name in ("EDLGP_RECORD_WALL_TIME", "EDLGP_CACHE_MAX_BYTES"):
            monkeypatch.delenv(name, raising=False)
        settings = Settings(_env_file=None)
        assert settings.record_wall_time is False
        assert settings.cache_max_bytes == 1 << 30

    def test_environment_override(self, monkeypatch):
        monkeypatch.setenv("EDLGP_CACHE_MAX_BYTES", "4096")
        monkeypatch.setenv("EDLGP_RECORD_WALL_TIME", "true")
        settings = Settings(_env_file=None)
        assert settings.cache_max_bytes == 4096
        assert settings.record_wall_time is True

"""Tests for configuration management."""

import json
import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from hylam.core.errors import ConfigError
from hylam.utils.config import ConfigManager, RunConfig, emit_config, merge_defaults, parse_config


class TestConfigManager:
    """Test ConfigManager loading and saving."""

    def test_defaults(self):
        """Test the documented default values."""
        config = ConfigManager()

        assert config.data["geometry"] == {"L": 1.0, "n_elems": 32}
        assert config.data["solver"]["tol_grad"] == 1e-8
        assert config.data["solver"]["strict"] is False
        assert config.data["verification"]["eb_tolerance"] == 1e-6
        assert config.data["verification"]["refine_partitions"] == [25, 50, 100, 200]
        assert config.data["verification"]["lipschitz_growth"] == 1.5
        assert config.data["verification"]["cross_level_factor"] == 10.0
        assert config.data["verification"]["history_tolerance"] == 1e-8
        assert config.data["seed"] == 0

    def test_load_merges_over_defaults(self, config_file):
        """Test that loading keeps defaults for keys the file leaves out."""
        data = ConfigManager(config_file).load()

        assert data["geometry"]["n_elems"] == 32
        assert data["solver"]["max_outer_iters"] == 200
        assert data["output"]["verbosity"] == 0

    def test_missing_file(self, temp_dir):
        """Test that a missing file raises ConfigError."""
        with pytest.raises(ConfigError) as exc_info:
            ConfigManager(os.path.join(temp_dir, "absent.json")).load()

        assert "file not found" in str(exc_info.value)

    def test_invalid_json(self, temp_dir):
        """Test that malformed JSON raises ConfigError."""
        path = os.path.join(temp_dir, "broken.json")
        with open(path, "w") as f:
            f.write("{not json")

        with pytest.raises(ConfigError):
            ConfigManager(path).load()

    def test_top_level_must_be_object(self, temp_dir):
        """Test that a JSON list is refused."""
        path = os.path.join(temp_dir, "list.json")
        with open(path, "w") as f:
            json.dump([1, 2], f)

        with pytest.raises(ConfigError):
            ConfigManager(path).load()

    def test_save(self, temp_dir):
        """Test that save writes sorted JSON."""
        path = os.path.join(temp_dir, "saved.json")
        config = ConfigManager(path)
        config.save()

        with open(path) as f:
            assert json.load(f) == config.data

    def test_step_control_merges_key_by_key(self):
        """Test that nested step control keeps unspecified defaults."""
        data = merge_defaults({"solver": {"step_control": {"shrink": 0.25}}}, ConfigManager()._get_defaults())

        assert data["solver"]["step_control"] == {"initial_step": 1.0, "shrink": 0.25, "sufficient_decrease": 1e-4}
        assert data["time"] == {"T": 1.0, "n_steps": 50}


class TestRunConfig:
    """Test validation and construction of domain objects."""

    def test_builds_problem(self, sample_config):
        """Test that a valid configuration yields a runnable problem."""
        config = RunConfig.from_dict(sample_config)
        problem = config.problem()

        assert problem.mesh.n_elems == 32
        assert problem.partition.n_steps == 50
        assert problem.snapshot_steps == (0, 25, 50)
        np.testing.assert_allclose(problem.initial_u[0], problem.mesh.affine(0.0))
        assert config.verbosity == 0

    def test_damage_out_of_range(self, sample_config):
        """Test that initial damage 1.5 is reported under initial.alpha."""
        sample_config["initial"] = {"alpha": 1.5}

        with pytest.raises(ConfigError) as exc_info:
            RunConfig.from_dict(sample_config)

        assert any(e.startswith("initial.alpha: damage must lie in [0, 1]") for e in exc_info.value.errors)

    def test_ambiguous_law(self, sample_config):
        """Test that two cohesive families are refused."""
        sample_config["cohesive"] = {"parabolic": {"c": 1, "k": 1}, "exponential": {"c": 1, "k": 1}}

        with pytest.raises(ConfigError) as exc_info:
            RunConfig.from_dict(sample_config)

        assert exc_info.value.errors == ["cohesive: ambiguous cohesive family, got exponential, parabolic"]

    def test_every_error_is_collected(self, sample_config):
        """Test that independent problems are all reported at once."""
        sample_config["geometry"] = {"L": -1.0, "n_elems": 32}
        sample_config["layers"] = sample_config["layers"][:1]
        sample_config["seed"] = -3
        sample_config["colour"] = "blue"

        with pytest.raises(ConfigError) as exc_info:
            RunConfig.from_dict(sample_config)

        errors = exc_info.value.errors
        assert "colour: unknown section" in errors
        assert any(e.startswith("geometry.L") for e in errors)
        assert "layers: exactly two layer blocks required" in errors
        assert any(e.startswith("seed:") for e in errors)

    def test_lipschitz_growth_below_one(self, sample_config):
        """Test that a growth factor below one is refused."""
        sample_config["verification"] = {"lipschitz_growth": 0.5, "cross_level_factor": 0.0}

        with pytest.raises(ConfigError) as exc_info:
            RunConfig.from_dict(sample_config)

        errors = exc_info.value.errors
        assert "verification.lipschitz_growth: must be a number >= 1" in errors
        assert "verification.cross_level_factor: must be a positive number" in errors

    def test_strict_must_be_boolean(self, sample_config):
        """Test that solver.strict only accepts true or false."""
        sample_config["solver"] = {"strict": "yes"}

        with pytest.raises(ConfigError) as exc_info:
            RunConfig.from_dict(sample_config)

        assert exc_info.value.errors == ["solver.strict: expected true or false, got 'yes'"]

    def test_strict_reaches_solver(self, sample_config):
        """Test that solver.strict is carried into the solver options."""
        sample_config["solver"] = {"strict": True}

        assert RunConfig.from_dict(sample_config).solver.strict is True

    def test_missing_law(self, sample_config):
        """Test that the cohesive section is mandatory."""
        del sample_config["cohesive"]

        with pytest.raises(ConfigError) as exc_info:
            RunConfig.from_dict(sample_config)

        assert "cohesive: missing" in exc_info.value.errors

    def test_incompatible_initial_displacement(self, sample_config):
        """Test that u(L) must match u_bar(0)."""
        sample_config["initial"] = {"u1": {"affine": [0.0, 0.3]}}

        with pytest.raises(ConfigError) as exc_info:
            RunConfig.from_dict(sample_config)

        assert any(e.startswith("initial.u1: end values") for e in exc_info.value.errors)

    def test_tabulated_time(self, sample_config):
        """Test an explicit list of times."""
        sample_config["time"] = {"times": [0.0, 0.1, 0.5, 1.0]}
        sample_config["output"]["snapshot_steps"] = [0, 3]

        config = RunConfig.from_dict(sample_config)

        assert config.partition.n_steps == 3

    def test_snapshot_index_out_of_range(self, sample_config):
        """Test that snapshot indices must exist in the partition."""
        sample_config["output"]["snapshot_steps"] = [51]

        with pytest.raises(ConfigError):
            RunConfig.from_dict(sample_config)

    def test_round_trip(self, sample_config, temp_dir):
        """Test parse(emit(config)) == config."""
        config = RunConfig.from_dict(sample_config)
        path = os.path.join(temp_dir, "emitted.json")
        with open(path, "w") as f:
            f.write(emit_config(config))

        assert parse_config(path) == config
        assert emit_config(parse_config(path)) == emit_config(config)

    def test_with_value(self, sample_config):
        """Test dotted-path overrides, list indices included."""
        config = RunConfig.from_dict(sample_config)

        changed = config.with_value("layers.0.modulus.power.a", 48.0)

        assert changed.layers[0].modulus.params["a"] == 48.0
        assert config.layers[0].modulus.params["a"] == 96.0
        assert changed != config

    def test_with_value_revalidates(self, sample_config):
        """Test that overrides go through validation."""
        config = RunConfig.from_dict(sample_config)

        with pytest.raises(ConfigError):
            config.with_value("geometry.n_elems", 0)

    def test_with_value_unknown_path(self, sample_config):
        """Test that unknown paths are refused."""
        config = RunConfig.from_dict(sample_config)

        with pytest.raises(ConfigError) as exc_info:
            config.with_value("geometry.width", 2.0)

        assert exc_info.value.errors[0].startswith("sweep.path: 'geometry.width'")

    def test_seed_and_concurrency_reach_solver(self, sample_config):
        """Test that seed and concurrency configure the restart streams."""
        sample_config["seed"] = 7
        sample_config["concurrency"] = 3

        config = RunConfig.from_dict(sample_config)

        assert config.solver.rng_seed == 7
        assert config.solver.workers == 3
        assert config.problem().concurrency == 3

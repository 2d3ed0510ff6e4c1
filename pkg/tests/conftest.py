"""Pytest configuration and shared fixtures."""

import copy
import json
import os
import sys
import tempfile
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from hylam.core.cohesive import LoadingProfile, make_quadratic_unloading
from hylam.core.discretization import Mesh
from hylam.core.materials import DamageDissipation, ElasticModulus, LayerMaterial


HOMOGENEOUS_CONFIG = {
    "geometry": {"L": 1.0, "n_elems": 32},
    "layers": [
        {"modulus": {"power": {"a": 96.0, "b": 0.5}}, "dissipation": {"polynomial": {"w1": 10.0, "w2": 1.0}}},
        {"modulus": {"power": {"a": 96.0, "b": 0.5}}, "dissipation": {"polynomial": {"w1": 10.0, "w2": 1.0}}},
    ],
    "cohesive": {"parabolic": {"c": 1.0, "k": 1.0}},
    "load": {"linear_ramp": {"rate": 0.1}},
    "time": {"T": 1.0, "n_steps": 50},
    "output": {"snapshot_steps": [0, 25, 50], "snapshot_all": False, "verbosity": 0},
    "seed": 0,
}


@pytest.fixture
def temp_dir():
    """Provide a temporary directory for test files."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield tmpdir


@pytest.fixture
def sample_config():
    """Provide a configuration dictionary for the homogeneous ramp."""
    return copy.deepcopy(HOMOGENEOUS_CONFIG)


@pytest.fixture
def config_file(temp_dir, sample_config):
    """Write the sample configuration to disk and return its path."""
    path = os.path.join(temp_dir, "config.json")
    with open(path, "w", encoding="utf-8") as f:
        json.dump(sample_config, f, indent=4)
    return path


@pytest.fixture
def reference_layer():
    """Hardening layer E = 96 (1 + y)^(-1/2) with w = 10 y + y^2 / 2."""
    return LayerMaterial(ElasticModulus.power(96.0, 0.5), DamageDissipation.polynomial(10.0, 1.0))


@pytest.fixture
def reference_layers(reference_layer):
    """Two identical reference layers."""
    return (reference_layer, reference_layer)


@pytest.fixture
def parabolic_law():
    """Quadratic-unloading law on psi = z (2 - z), capped at 1."""
    return make_quadratic_unloading(LoadingProfile.parabolic_capped(1.0, 1.0))


@pytest.fixture
def small_mesh():
    """Unit bar with eight elements."""
    return Mesh(1.0, 8)

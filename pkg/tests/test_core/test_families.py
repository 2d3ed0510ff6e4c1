"""Tests for the family registries used by configuration files."""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from hylam.core.cohesive import CohesiveLaw
from hylam.core.errors import ConfigError
from hylam.core.families import (
    DissipationFamily,
    LawFamily,
    LoadFamily,
    ModulusFamily,
    build_layer,
)


class TestFamilyRegistry:
    """Test lookup and block validation."""

    def test_get_all_and_get_family(self):
        """Test registry listing and case-insensitive lookup."""
        names = [family["name"] for family in LawFamily.get_all()]

        assert names == ["parabolic", "exponential", "custom", "separable"]
        assert LawFamily.get_family("PARABOLIC")["name"] == "parabolic"
        assert LawFamily.get_family("unknown") is None

    def test_build_parabolic(self):
        """Test building a law from a one-key block."""
        law = LawFamily.build({"parabolic": {"c": 1.0, "k": 2.0}})

        assert isinstance(law, CohesiveLaw)
        assert law.delta_bar == 2.0

    def test_ambiguous_block(self):
        """Test that two family keys are reported as ambiguous."""
        errors = LawFamily.validate({"parabolic": {"c": 1, "k": 1}, "exponential": {"c": 1, "k": 1}}, "cohesive")

        assert errors == ["cohesive: ambiguous cohesive family, got exponential, parabolic"]

    def test_missing_block(self):
        """Test that an empty block names the available families."""
        errors = LawFamily.validate({}, "cohesive")

        assert len(errors) == 1
        assert errors[0].startswith("cohesive: missing cohesive family")
        assert "separable" in errors[0]

    def test_unknown_family(self):
        """Test that unknown family names are refused."""
        errors = ModulusFamily.validate({"quadratic": {"a": 1}}, "layers[0].modulus")

        assert errors[0].startswith("layers[0].modulus: unknown modulus family 'quadratic'")

    def test_required_and_unknown_parameters(self):
        """Test that every parameter problem is collected."""
        errors = LawFamily.validate({"parabolic": {"c": 1.0, "q": 3}}, "cohesive")

        assert "cohesive.parabolic.q: unknown parameter" in errors
        assert "cohesive.parabolic.k: required parameter missing" in errors

    def test_defaults_fill_optional_parameters(self):
        """Test that optional parameters take their defaults."""
        dissipation = DissipationFamily.build({"polynomial": {}})

        assert dissipation.params == {"w1": 0.5, "w2": 1.0}

    def test_domain_errors_are_prefixed(self):
        """Test that construction errors carry the block path."""
        with pytest.raises(ConfigError) as exc_info:
            ModulusFamily.build({"power": {"a": -1.0, "b": 0.5}}, "layers[1].modulus")

        assert exc_info.value.errors[0].startswith("layers[1].modulus.power: ")

    def test_load_triangle(self):
        """Test building a triangle load with defaults."""
        load = LoadFamily.build({"triangle": {"peak_time": 0.5, "peak_value": 1.0, "end_time": 1.0}})

        assert float(load(1.0)) == 0.0


class TestSeparableFamily:
    """Test nested component blocks."""

    def test_build_separable(self):
        """Test phi1 = y^2 and phi2 = min(z, 1)."""
        law = LawFamily.build({"separable": {"phi1": {"power": {"c": 1.0}},
                                             "phi2": {"capped_linear": {"c": 1.0, "k": 1.0}}}})

        assert law.kind == "separable"
        assert float(law.phi(0.5, 2.0)) == pytest.approx(1.25)

    def test_component_errors_are_nested(self):
        """Test that component errors keep the full path."""
        errors = LawFamily.validate({"separable": {"phi1": {"power": {}}, "phi2": {"constant": {"c": 1.0}}}},
                                    "cohesive")

        assert errors == ["cohesive.separable.phi1.power.c: required parameter missing"]


class TestBuildLayer:
    """Test layer construction."""

    def test_build_layer(self):
        """Test a complete layer block."""
        layer = build_layer({"modulus": {"power": {"a": 96.0, "b": 0.5}},
                             "dissipation": {"linear": {"w1": 1.0}}}, "layers[0]")

        assert layer.modulus.family_tag == "power"
        assert layer.dissipation.mu == 0.0

    def test_layer_errors_are_collected(self):
        """Test that missing and unknown keys are all reported."""
        with pytest.raises(ConfigError) as exc_info:
            build_layer({"modulus": {"power": {"a": 1.0}}, "colour": "red"}, "layers[0]")

        errors = exc_info.value.errors
        assert "layers[0].colour: unknown key" in errors
        assert "layers[0].dissipation: missing" in errors
        assert "layers[0].modulus.power.b: required parameter missing" in errors

    def test_layer_must_be_object(self):
        """Test that a non-object layer is refused."""
        with pytest.raises(ConfigError):
            build_layer([1, 2], "layers[0]")

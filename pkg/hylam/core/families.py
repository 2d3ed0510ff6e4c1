"""Registries of the parametric families accepted in configuration files.

A family block is a one-key object ``{"<family>": {<params>}}``. Each
registry lists its families with defaults (``REQUIRED`` marks mandatory
parameters) and builds domain objects from a block.
"""

from __future__ import annotations

from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from .cohesive import CohesiveLaw, LoadingProfile, make_quadratic_unloading, make_separable
from .errors import ConfigError, HylamError
from .loading import LoadProgram
from .materials import DamageDissipation, ElasticModulus, LayerMaterial

REQUIRED = object()


def _zero():
    return (lambda y: np.zeros_like(np.asarray(y, dtype=float)),
            lambda y: np.zeros_like(np.asarray(y, dtype=float)))


def _power(c, p):
    if c < 0 or p < 1:
        raise ValueError(f"power component needs c >= 0 and p >= 1, got c={c!r}, p={p!r}")
    return (lambda y: c * np.asarray(y, dtype=float) ** p,
            lambda y: c * p * np.asarray(y, dtype=float) ** (p - 1.0))


def _exponential(c, k):
    profile = LoadingProfile.exponential(c, k)
    return profile.psi, profile.psi_prime


def _capped_linear(c, k):
    if c < 0 or k <= 0:
        raise ValueError(f"capped_linear component needs c >= 0 and k > 0, got c={c!r}, k={k!r}")
    return (lambda y: c * np.minimum(np.asarray(y, dtype=float), k),
            lambda y: np.where(np.asarray(y, dtype=float) < k, c, 0.0))


def _constant(c):
    return (lambda y: np.full_like(np.asarray(y, dtype=float), c),
            lambda y: np.zeros_like(np.asarray(y, dtype=float)))


def _tabulated_component(z, values):
    profile = LoadingProfile.tabulated(z, values)
    return profile.psi, profile.psi_prime


class FamilyRegistry:
    """Base registry: lookup, validation and construction of family blocks."""

    KIND = "family"
    FAMILIES: List[Dict[str, Any]] = []

    @classmethod
    def get_all(cls):
        """Get all registered families."""
        return cls.FAMILIES

    @classmethod
    def get_family(cls, name):
        """Get a family by name (case-insensitive)."""
        for family in cls.FAMILIES:
            if family["name"].lower() == str(name).lower():
                return family
        return None

    @classmethod
    def names(cls) -> List[str]:
        return [family["name"] for family in cls.FAMILIES]

    @classmethod
    def unpack(cls, block, path: str) -> Tuple[Optional[Dict[str, Any]], Dict[str, Any], List[str]]:
        """Split a one-key block into (family, merged params, errors)."""
        if not isinstance(block, dict):
            return None, {}, [f"{path}: expected a one-key object naming the {cls.KIND} family"]
        if not block:
            return None, {}, [f"{path}: missing {cls.KIND} family (one of {', '.join(cls.names())})"]
        if len(block) > 1:
            return None, {}, [f"{path}: ambiguous {cls.KIND} family, got {', '.join(sorted(block))}"]
        name, params = next(iter(block.items()))
        family = cls.get_family(name)
        if family is None:
            return None, {}, [f"{path}: unknown {cls.KIND} family {name!r} (one of {', '.join(cls.names())})"]
        if params is None:
            params = {}
        if not isinstance(params, dict):
            return family, {}, [f"{path}.{name}: parameters must be an object"]
        errors = []
        for key in sorted(set(params) - set(family["params"])):
            errors.append(f"{path}.{name}.{key}: unknown parameter")
        merged = {}
        for key, default in family["params"].items():
            if key in params:
                merged[key] = params[key]
            elif default is REQUIRED:
                errors.append(f"{path}.{name}.{key}: required parameter missing")
            else:
                merged[key] = default
        return family, merged, errors

    @classmethod
    def build(cls, block, path: str = ""):
        """Construct the domain object described by ``block``.

        Raises:
            ConfigError: listing every problem found, prefixed with ``path``.
        """
        family, params, errors = cls.unpack(block, path or cls.KIND)
        if errors:
            raise ConfigError(errors)
        where = f"{path or cls.KIND}.{family['name']}"
        try:
            return family["build"](**params)
        except ConfigError as exc:
            raise ConfigError([f"{where}.{message}" for message in exc.errors]) from exc
        except (HylamError, ValueError, TypeError) as exc:
            raise ConfigError([f"{where}: {exc}"]) from exc

    @classmethod
    def validate(cls, block, path: str) -> List[str]:
        """Every error ``build`` would raise, as a list."""
        try:
            cls.build(block, path)
        except ConfigError as exc:
            return exc.errors
        return []


class ComponentFamily(FamilyRegistry):
    """Scalar components phi1(y), phi2(z) of a separable law; builds (fn, derivative)."""

    KIND = "component"
    FAMILIES = [
        {"name": "zero", "description": "identically zero", "params": {}, "build": _zero},
        {"name": "power", "description": "c * y^p with p >= 1", "params": {"c": REQUIRED, "p": 2.0},
         "build": _power},
        {"name": "exponential", "description": "c (1 - exp(-k z))", "params": {"c": REQUIRED, "k": REQUIRED},
         "build": _exponential},
        {"name": "capped_linear", "description": "c * min(z, k)", "params": {"c": REQUIRED, "k": REQUIRED},
         "build": _capped_linear},
        {"name": "constant", "description": "constant c", "params": {"c": REQUIRED}, "build": _constant},
        {"name": "tabulated", "description": "monotone interpolant of samples",
         "params": {"z": REQUIRED, "values": REQUIRED}, "build": _tabulated_component},
    ]


def _separable(phi1, phi2):
    errors = []
    parts = []
    for name, block in (("phi1", phi1), ("phi2", phi2)):
        try:
            parts.append(ComponentFamily.build(block, name))
        except ConfigError as exc:
            errors.extend(exc.errors)
    if errors:
        raise ConfigError(errors)
    (f1, d1), (f2, d2) = parts
    return make_separable(f1, f2, d1, d2)


class LawFamily(FamilyRegistry):
    """Cohesive laws of the interface."""

    KIND = "cohesive"
    FAMILIES = [
        {"name": "parabolic", "description": "quadratic unloading on psi = c z (2k - z), capped at k",
         "params": {"c": REQUIRED, "k": REQUIRED},
         "build": lambda c, k: make_quadratic_unloading(LoadingProfile.parabolic_capped(c, k))},
        {"name": "exponential", "description": "quadratic unloading on psi = c (1 - exp(-k z))",
         "params": {"c": REQUIRED, "k": REQUIRED},
         "build": lambda c, k: make_quadratic_unloading(LoadingProfile.exponential(c, k))},
        {"name": "custom", "description": "quadratic unloading on a tabulated psi",
         "params": {"z": REQUIRED, "psi": REQUIRED},
         "build": lambda z, psi: make_quadratic_unloading(LoadingProfile.tabulated(z, psi))},
        {"name": "separable", "description": "phi(y, z) = phi1(y) + phi2(z)",
         "params": {"phi1": REQUIRED, "phi2": REQUIRED}, "build": _separable},
    ]


class ModulusFamily(FamilyRegistry):
    KIND = "modulus"
    FAMILIES = [
        {"name": "power", "description": "a (1 + y)^(-b)", "params": {"a": REQUIRED, "b": REQUIRED},
         "build": ElasticModulus.power},
        {"name": "tabulated", "description": "interpolated E(y) on [0, 1]", "params": {"y": REQUIRED, "E": REQUIRED},
         "build": lambda y, E: ElasticModulus.tabulated(y, E)},
    ]


class DissipationFamily(FamilyRegistry):
    KIND = "dissipation"
    FAMILIES = [
        {"name": "polynomial", "description": "w1 y + w2 y^2 / 2", "params": {"w1": 0.5, "w2": 1.0},
         "build": DamageDissipation.polynomial},
        {"name": "linear", "description": "w1 y", "params": {"w1": REQUIRED}, "build": DamageDissipation.linear},
        {"name": "tabulated", "description": "interpolated w(y) on [0, 1]", "params": {"y": REQUIRED, "w": REQUIRED},
         "build": lambda y, w: DamageDissipation.tabulated(y, w)},
    ]


class LoadFamily(FamilyRegistry):
    KIND = "load"
    FAMILIES = [
        {"name": "linear_ramp", "description": "start + rate t", "params": {"rate": REQUIRED, "start": 0.0},
         "build": LoadProgram.linear_ramp},
        {"name": "triangle", "description": "up to a peak, then back down",
         "params": {"peak_time": REQUIRED, "peak_value": REQUIRED, "end_time": REQUIRED,
                    "end_value": 0.0, "start": 0.0},
         "build": LoadProgram.triangle},
        {"name": "tabulated", "description": "piecewise linear through [t, u] samples",
         "params": {"samples": REQUIRED}, "build": LoadProgram.tabulated},
    ]


def build_layer(block, path: str) -> LayerMaterial:
    """LayerMaterial from ``{"modulus": {...}, "dissipation": {...}}``."""
    if not isinstance(block, dict):
        raise ConfigError([f"{path}: expected an object with modulus and dissipation"])
    errors = []
    parts = {}
    registries: Dict[str, Callable] = {"modulus": ModulusFamily, "dissipation": DissipationFamily}
    for key in sorted(set(block) - set(registries)):
        errors.append(f"{path}.{key}: unknown key")
    for key, registry in registries.items():
        if key not in block:
            errors.append(f"{path}.{key}: missing")
            continue
        try:
            parts[key] = registry.build(block[key], f"{path}.{key}")
        except ConfigError as exc:
            errors.extend(exc.errors)
    if errors:
        raise ConfigError(errors)
    return LayerMaterial(parts["modulus"], parts["dissipation"])

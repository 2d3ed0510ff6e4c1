"""Run configuration: JSON file, defaults, validation and canonical emission."""

from __future__ import annotations

import copy
import json
import math
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..core.cohesive import CohesiveLaw
from ..core.discretization import Mesh
from ..core.engine import Problem
from ..core.errors import ConfigError
from ..core.families import LawFamily, LoadFamily, build_layer
from ..core.loading import LoadProgram, TimePartition
from ..core.materials import LayerMaterial
from ..core.solver import SolverOptions, StepControl

SECTIONS = ("geometry", "layers", "cohesive", "load", "time", "solver", "initial", "output",
            "verification", "sweep", "seed", "concurrency")
MERGED_SECTIONS = ("geometry", "solver", "initial", "output", "verification", "sweep")
BOUNDARY_TOLERANCE = 1e-12


class ConfigManager:
    """Loads a run configuration file over the documented defaults."""

    def __init__(self, config_file=None):
        """
        Initialize config manager.

        Args:
            config_file (str, optional): Path to the JSON configuration file.
        """
        self.config_file = config_file
        self.data = self._get_defaults()

    def _get_defaults(self):
        """Get default configuration values."""
        return {
            "geometry": {"L": 1.0, "n_elems": 32},
            "solver": {
                "max_outer_iters": 200,
                "max_inner_iters": 2000,
                "tol_energy": 1e-12,
                "tol_grad": 1e-8,
                "n_restarts": 0,
                "restart_amplitude": 0.1,
                "strict": False,
                "step_control": {"initial_step": 1.0, "shrink": 0.5, "sufficient_decrease": 1e-4},
            },
            "initial": {"u": "boundary_affine", "alpha": 0.0},
            "output": {"snapshot_steps": [], "snapshot_all": False, "verbosity": 1},
            "verification": {
                "eb_tolerance": 1e-6,
                "stability_tolerance": 1e-6,
                "n_test_fields": 16,
                "law_grid_resolution": 64,
                "law_tolerance": 1e-9,
                "refine_partitions": [25, 50, 100, 200],
                "history_tolerance": 1e-8,
                "lipschitz_growth": 1.5,
                "cross_level_factor": 10.0,
            },
            "sweep": {"path": None, "values": []},
            "seed": 0,
            "concurrency": 1,
        }

    def load(self):
        """
        Load configuration from file, merged over the defaults.

        Returns:
            dict: Configuration data

        Raises:
            ConfigError: if the file cannot be read or is not a JSON object.
        """
        if not self.config_file or not os.path.exists(self.config_file):
            raise ConfigError([f"config: file not found: {self.config_file}"])
        try:
            with open(self.config_file, "r", encoding="utf-8") as f:
                raw = json.load(f)
        except (OSError, ValueError) as e:
            raise ConfigError([f"config: cannot read {self.config_file}: {e}"]) from e
        if not isinstance(raw, dict):
            raise ConfigError(["config: top level must be an object"])
        self.data = merge_defaults(raw, self._get_defaults())
        return self.data

    def save(self):
        """Save configuration to file."""
        if self.config_file:
            with open(self.config_file, "w", encoding="utf-8") as f:
                json.dump(self.data, f, indent=4, sort_keys=True)


def merge_defaults(raw: Dict[str, Any], defaults: Dict[str, Any]) -> Dict[str, Any]:
    """Overlay ``raw`` on ``defaults``; plain sections merge key by key, family blocks replace."""
    data = copy.deepcopy(defaults)
    for key, value in raw.items():
        if key in MERGED_SECTIONS and isinstance(value, dict) and isinstance(data.get(key), dict):
            section = data[key]
            for inner, inner_value in value.items():
                if inner == "step_control" and isinstance(inner_value, dict) and isinstance(section.get(inner), dict):
                    section[inner].update(copy.deepcopy(inner_value))
                else:
                    section[inner] = copy.deepcopy(inner_value)
        else:
            data[key] = copy.deepcopy(value)
    time = data.get("time")
    if time is None:
        data["time"] = {"T": 1.0, "n_steps": 50}
    elif isinstance(time, dict) and "times" not in time:
        time.setdefault("T", 1.0)
        time.setdefault("n_steps", 50)
    return data


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _field(spec, mesh: Mesh, path: str, boundary: Optional[float], errors: List[str]) -> Optional[np.ndarray]:
    """Nodal values of an initial-field spec: constant, affine, tabulated or boundary_affine."""
    if spec == "boundary_affine":
        if boundary is None:
            errors.append(f"{path}: boundary_affine is only valid for displacements")
            return None
        return mesh.affine(boundary)
    if _is_number(spec):
        return mesh.constant(float(spec))
    if isinstance(spec, dict) and len(spec) == 1:
        kind, values = next(iter(spec.items()))
        if kind == "affine":
            if isinstance(values, list) and len(values) == 2 and all(_is_number(v) for v in values):
                return values[0] + (values[1] - values[0]) * mesh.nodes / mesh.L
            errors.append(f"{path}.affine: expected [value at 0, value at L]")
            return None
        if kind == "tabulated":
            if isinstance(values, list) and len(values) == mesh.n_nodes and all(_is_number(v) for v in values):
                return np.array(values, dtype=float)
            errors.append(f"{path}.tabulated: expected {mesh.n_nodes} nodal values")
            return None
    errors.append(f"{path}: expected a number, {{\"affine\": [a, b]}} or {{\"tabulated\": [...]}}")
    return None


@dataclass
class RunConfig:
    """Validated configuration; equality compares the canonical data only."""

    data: Dict[str, Any]
    mesh: Mesh = field(compare=False)
    layers: Tuple[LayerMaterial, LayerMaterial] = field(compare=False)
    law: CohesiveLaw = field(compare=False)
    load: LoadProgram = field(compare=False)
    partition: TimePartition = field(compare=False)
    solver: SolverOptions = field(compare=False)
    initial_u: Tuple[np.ndarray, np.ndarray] = field(compare=False)
    initial_alpha: Tuple[np.ndarray, np.ndarray] = field(compare=False)

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @property
    def concurrency(self) -> int:
        return int(self.data["concurrency"])

    @property
    def output(self) -> Dict[str, Any]:
        return self.data["output"]

    @property
    def verification(self) -> Dict[str, Any]:
        return self.data["verification"]

    @property
    def sweep(self) -> Dict[str, Any]:
        return self.data["sweep"]

    @property
    def verbosity(self) -> int:
        return int(self.output["verbosity"])

    def problem(self) -> Problem:
        return Problem(
            self.mesh, self.layers, self.law, self.load, self.partition, self.solver,
            self.initial_u, self.initial_alpha,
            tuple(int(k) for k in self.output["snapshot_steps"]), bool(self.output["snapshot_all"]),
            self.concurrency,
        )

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "RunConfig":
        """Validate ``raw`` (merged over defaults) and build every domain object.

        Raises:
            ConfigError: with every validation message found.
        """
        data = merge_defaults(raw, ConfigManager()._get_defaults())
        errors: List[str] = []
        for key in sorted(set(data) - set(SECTIONS)):
            errors.append(f"{key}: unknown section")

        mesh = None
        geometry = data["geometry"]
        if not isinstance(geometry, dict):
            errors.append("geometry: expected an object")
        else:
            for key in sorted(set(geometry) - {"L", "n_elems"}):
                errors.append(f"geometry.{key}: unknown key")
            L, n_elems = geometry.get("L"), geometry.get("n_elems")
            if not (_is_number(L) and L > 0):
                errors.append(f"geometry.L: must be a positive number, got {L!r}")
            if not (_is_int(n_elems) and n_elems >= 1):
                errors.append(f"geometry.n_elems: must be a positive integer, got {n_elems!r}")
            if not any(e.startswith("geometry.") for e in errors):
                mesh = Mesh(float(L), int(n_elems))

        layers = []
        raw_layers = data.get("layers")
        if raw_layers is None:
            errors.append("layers: missing (two layer blocks required)")
        elif not isinstance(raw_layers, list) or len(raw_layers) != 2:
            errors.append("layers: exactly two layer blocks required")
        else:
            for i, block in enumerate(raw_layers):
                try:
                    layers.append(build_layer(block, f"layers.{i}"))
                except ConfigError as exc:
                    errors.extend(exc.errors)

        law = _build(LawFamily, data.get("cohesive"), "cohesive", errors)
        load = _build(LoadFamily, data.get("load"), "load", errors)
        partition = _partition(data["time"], errors)
        solver = _solver_options(data, errors)

        initial_u = initial_alpha = None
        if mesh is not None:
            initial_u, initial_alpha = _initial(data["initial"], mesh, load, errors)

        _check_output(data["output"], partition, errors)
        _check_verification(data["verification"], errors)
        _check_sweep(data["sweep"], errors)
        if not _is_int(data["seed"]) or data["seed"] < 0:
            errors.append(f"seed: must be a nonnegative integer, got {data['seed']!r}")
        if not _is_int(data["concurrency"]) or data["concurrency"] < 1:
            errors.append(f"concurrency: must be a positive integer, got {data['concurrency']!r}")

        if errors:
            raise ConfigError(errors)
        return cls(data, mesh, tuple(layers), law, load, partition, solver, initial_u, initial_alpha)

    def with_value(self, path: str, value) -> "RunConfig":
        """Copy with the dotted ``path`` (list indices allowed) set to ``value``."""
        data = copy.deepcopy(self.data)
        keys = path.split(".")
        node = data
        try:
            for key in keys[:-1]:
                node = node[int(key)] if isinstance(node, list) else node[key]
            last = keys[-1]
            if isinstance(node, list):
                node[int(last)] = value
            else:
                if last not in node:
                    raise KeyError(last)
                node[last] = value
        except (KeyError, IndexError, ValueError, TypeError) as exc:
            raise ConfigError([f"sweep.path: {path!r} does not name a configuration value ({exc})"]) from exc
        return RunConfig.from_dict(data)


def _build(registry, block, path: str, errors: List[str]):
    if block is None:
        errors.append(f"{path}: missing")
        return None
    try:
        return registry.build(block, path)
    except ConfigError as exc:
        errors.extend(exc.errors)
        return None


def _partition(block, errors: List[str]) -> Optional[TimePartition]:
    if not isinstance(block, dict):
        errors.append("time: expected an object")
        return None
    if "times" in block:
        extra = sorted(set(block) - {"times"})
        if extra:
            errors.append(f"time: 'times' excludes {', '.join(extra)}")
        times = block["times"]
        if not (isinstance(times, list) and all(_is_number(t) for t in times)):
            errors.append("time.times: expected a list of numbers")
            return None
        try:
            return TimePartition.tabulated(times)
        except ValueError as exc:
            errors.append(f"time.times: {exc}")
            return None
    for key in sorted(set(block) - {"T", "n_steps"}):
        errors.append(f"time.{key}: unknown key")
    T, n = block.get("T"), block.get("n_steps")
    ok = True
    if not (_is_number(T) and T > 0):
        errors.append(f"time.T: must be a positive number, got {T!r}")
        ok = False
    if not (_is_int(n) and n >= 1):
        errors.append(f"time.n_steps: must be a positive integer, got {n!r}")
        ok = False
    return TimePartition.uniform(float(T), int(n)) if ok else None


def _solver_options(data, errors: List[str]) -> Optional[SolverOptions]:
    block = data["solver"]
    if not isinstance(block, dict):
        errors.append("solver: expected an object")
        return None
    known = {"max_outer_iters", "max_inner_iters", "tol_energy", "tol_grad", "n_restarts", "restart_amplitude",
             "step_control", "strict"}
    for key in sorted(set(block) - known):
        errors.append(f"solver.{key}: unknown key")
    step = block.get("step_control", {})
    if not isinstance(step, dict):
        errors.append("solver.step_control: expected an object")
        return None
    for key in sorted(set(step) - {"initial_step", "shrink", "sufficient_decrease", "max_backtracks"}):
        errors.append(f"solver.step_control.{key}: unknown key")
    for key in ("max_outer_iters", "max_inner_iters", "n_restarts"):
        if not _is_int(block.get(key)):
            errors.append(f"solver.{key}: must be an integer, got {block.get(key)!r}")
    for key in ("tol_energy", "tol_grad", "restart_amplitude"):
        if not _is_number(block.get(key)):
            errors.append(f"solver.{key}: must be a number, got {block.get(key)!r}")
    if not isinstance(block.get("strict"), bool):
        errors.append(f"solver.strict: expected true or false, got {block.get('strict')!r}")
    if any(e.startswith("solver") for e in errors):
        return None
    try:
        control = StepControl(**step)
    except (TypeError, ValueError) as exc:
        errors.append(f"solver.step_control: {exc}")
        return None
    try:
        return SolverOptions(
            max_outer_iters=block["max_outer_iters"],
            max_inner_iters=block["max_inner_iters"],
            tol_energy=float(block["tol_energy"]),
            tol_grad=float(block["tol_grad"]),
            n_restarts=block["n_restarts"],
            restart_amplitude=float(block["restart_amplitude"]),
            strict=block["strict"],
            step_control=control,
            rng_seed=data["seed"] if _is_int(data["seed"]) else 0,
            workers=data["concurrency"] if _is_int(data["concurrency"]) and data["concurrency"] >= 1 else 1,
            verbosity=int(data["output"].get("verbosity", 1)) if isinstance(data["output"], dict) else 1,
        )
    except ValueError as exc:
        errors.append(f"solver: {exc}")
        return None


def _initial(block, mesh: Mesh, load: Optional[LoadProgram], errors: List[str]):
    if not isinstance(block, dict):
        errors.append("initial: expected an object")
        return None, None
    for key in sorted(set(block) - {"u", "alpha", "u1", "u2", "alpha1", "alpha2"}):
        errors.append(f"initial.{key}: unknown key")
    boundary = float(load(0.0)) if load is not None else None
    u_default = block.get("u", "boundary_affine")
    a_default = block.get("alpha", 0.0)
    fields = {}
    for name, default, is_u in (("u1", u_default, True), ("u2", u_default, True),
                                ("alpha1", a_default, False), ("alpha2", a_default, False)):
        explicit = name in block
        spec = block[name] if explicit else default
        path = f"initial.{name}" if explicit else f"initial.{'u' if is_u else 'alpha'}"
        if is_u and spec == "boundary_affine" and boundary is None:
            fields[name] = None
            continue
        values = _field(spec, mesh, path, boundary if is_u else None, errors)
        fields[name] = values
        if values is None:
            continue
        if is_u and boundary is not None:
            if abs(values[0]) > BOUNDARY_TOLERANCE or abs(values[-1] - boundary) > BOUNDARY_TOLERANCE:
                message = f"{path}: end values ({values[0]!r}, {values[-1]!r}) incompatible with (0, {boundary!r})"
                if message not in errors:
                    errors.append(message)
        if not is_u and (np.min(values) < 0.0 or np.max(values) > 1.0):
            message = f"{path}: damage must lie in [0, 1], got range [{np.min(values)!r}, {np.max(values)!r}]"
            if message not in errors:
                errors.append(message)
    if any(fields[name] is None for name in fields):
        return None, None
    return (fields["u1"], fields["u2"]), (fields["alpha1"], fields["alpha2"])


def _check_output(block, partition: Optional[TimePartition], errors: List[str]):
    if not isinstance(block, dict):
        errors.append("output: expected an object")
        return
    for key in sorted(set(block) - {"snapshot_steps", "snapshot_all", "verbosity"}):
        errors.append(f"output.{key}: unknown key")
    steps = block.get("snapshot_steps")
    if not (isinstance(steps, list) and all(_is_int(k) for k in steps)):
        errors.append("output.snapshot_steps: expected a list of integers")
    elif partition is not None and any(k < 0 or k > partition.n_steps for k in steps):
        errors.append(f"output.snapshot_steps: indices must lie in [0, {partition.n_steps}]")
    if not isinstance(block.get("snapshot_all"), bool):
        errors.append("output.snapshot_all: expected true or false")
    if block.get("verbosity") not in (0, 1, 2):
        errors.append(f"output.verbosity: must be 0, 1 or 2, got {block.get('verbosity')!r}")


def _check_verification(block, errors: List[str]):
    if not isinstance(block, dict):
        errors.append("verification: expected an object")
        return
    known = {"eb_tolerance", "stability_tolerance", "n_test_fields", "law_grid_resolution", "law_tolerance",
             "refine_partitions", "history_tolerance", "lipschitz_growth", "cross_level_factor"}
    for key in sorted(set(block) - known):
        errors.append(f"verification.{key}: unknown key")
    for key in ("eb_tolerance", "stability_tolerance", "law_tolerance", "history_tolerance", "cross_level_factor"):
        if not (_is_number(block.get(key)) and block[key] > 0):
            errors.append(f"verification.{key}: must be a positive number")
    if not (_is_number(block.get("lipschitz_growth")) and block["lipschitz_growth"] >= 1.0):
        errors.append("verification.lipschitz_growth: must be a number >= 1")
    if not (_is_int(block.get("n_test_fields")) and block["n_test_fields"] >= 0):
        errors.append("verification.n_test_fields: must be a nonnegative integer")
    if not (_is_int(block.get("law_grid_resolution")) and block["law_grid_resolution"] >= 8):
        errors.append("verification.law_grid_resolution: must be an integer >= 8")
    parts = block.get("refine_partitions")
    if not (isinstance(parts, list) and parts and all(_is_int(n) and n >= 1 for n in parts)
            and all(b > a for a, b in zip(parts, parts[1:]))):
        errors.append("verification.refine_partitions: expected an increasing list of positive integers")


def _check_sweep(block, errors: List[str]):
    if not isinstance(block, dict):
        errors.append("sweep: expected an object")
        return
    for key in sorted(set(block) - {"path", "values"}):
        errors.append(f"sweep.{key}: unknown key")
    if block.get("path") is not None and not isinstance(block.get("path"), str):
        errors.append("sweep.path: expected a dotted string or null")
    if not isinstance(block.get("values"), list):
        errors.append("sweep.values: expected a list")


def parse_config(path) -> RunConfig:
    """Read, merge and validate a configuration file.

    Raises:
        ConfigError: I/O problems or every schema violation found.
    """
    return RunConfig.from_dict(ConfigManager(path).load())


def emit_config(config: RunConfig) -> str:
    """Canonical JSON text of a configuration (sorted keys, 4-space indent)."""
    return json.dumps(config.data, sort_keys=True, indent=4) + "\n"

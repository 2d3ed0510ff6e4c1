"""Result files: trace ledger, nodal snapshots, manifest and reports.

Floats are written with ``repr`` so a reloaded trace reproduces every
recorded value bit for bit. Nothing written here carries a timestamp.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..core.discretization import Mesh, SystemState, element_damage, element_slopes, stress_field
from ..core.engine import EXTRA_COLUMNS, TRACE_COLUMNS, EvolutionTrace
from ..core.errors import HylamError
from ..core.materials import LayerMaterial
from ..core.verification import TraceTable
from .system import PathManager

NODE_COLUMNS = ["x", "u1", "u2", "alpha1", "alpha2", "slip", "delta_h", "gamma"]
ELEMENT_COLUMNS = ["x_mid", "strain1", "strain2", "alpha1_mid", "alpha2_mid", "sigma1", "sigma2"]


class ExportError(HylamError):
    """A result file is missing or malformed."""


def _cell(value):
    if isinstance(value, (bool, np.bool_)):
        return int(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_csv(path, fieldnames: Sequence[str], rows: Iterable[Dict[str, Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(fieldnames), extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _cell(row.get(k, "")) for k in fieldnames})
    return path


def read_csv(path) -> List[Dict[str, str]]:
    path = Path(path)
    if not path.exists():
        raise ExportError(f"missing file: {path}")
    with path.open("r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


def _to_float(text: str, where: str) -> float:
    if text in ("True", "False"):
        return 1.0 if text == "True" else 0.0
    try:
        return float(text)
    except (TypeError, ValueError) as exc:
        raise ExportError(f"{where}: not a number: {text!r}") from exc


def write_trace(path, trace: EvolutionTrace) -> Path:
    """trace.csv: the required ledger columns first, then the extended ones."""
    return write_csv(path, TRACE_COLUMNS + EXTRA_COLUMNS, trace.rows())


def read_trace(path) -> TraceTable:
    """Reload a trace file into a ``TraceTable``.

    Raises:
        ExportError: missing file, missing required column or a non-numeric cell.
    """
    rows = read_csv(path)
    if not rows:
        raise ExportError(f"{path}: empty trace")
    missing = [name for name in TRACE_COLUMNS if name not in rows[0]]
    if missing:
        raise ExportError(f"{path}: missing columns {', '.join(missing)}")
    parsed = [
        {name: _to_float(value, f"{path}:{i + 2}:{name}") for name, value in row.items() if value != ""}
        for i, row in enumerate(rows)
    ]
    names = [name for name in rows[0] if all(name in row for row in parsed)]
    return TraceTable({name: np.array([row[name] for row in parsed], dtype=float) for name in names})


def write_snapshot(directory, k: int, state: SystemState, layers: Sequence[LayerMaterial]) -> Path:
    """nodes.csv, elements.csv and meta.json for one step."""
    directory = Path(directory)
    mesh = state.mesh
    slip = state.slip
    nodes = [
        {"x": mesh.nodes[j], "u1": state.u1[j], "u2": state.u2[j], "alpha1": state.alpha1[j],
         "alpha2": state.alpha2[j], "slip": slip[j], "delta_h": state.delta_h[j], "gamma": state.gamma[j]}
        for j in range(mesh.n_nodes)
    ]
    write_csv(directory / "nodes.csv", NODE_COLUMNS, nodes)
    s1, s2 = stress_field(state, layers)
    e1, e2 = element_slopes(mesh, state.u1), element_slopes(mesh, state.u2)
    a1, a2 = element_damage(state.alpha1), element_damage(state.alpha2)
    mid = 0.5 * (mesh.nodes[:-1] + mesh.nodes[1:])
    elements = [
        {"x_mid": mid[e], "strain1": e1[e], "strain2": e2[e], "alpha1_mid": a1[e], "alpha2_mid": a2[e],
         "sigma1": s1[e], "sigma2": s2[e]}
        for e in range(mesh.n_elems)
    ]
    write_csv(directory / "elements.csv", ELEMENT_COLUMNS, elements)
    write_json(directory / "meta.json", {"k": int(k), "t": float(state.t), "L": mesh.L, "n_elems": mesh.n_elems})
    return directory


def read_snapshot(directory) -> Tuple[int, SystemState]:
    """Rebuild (k, state) from a snapshot directory."""
    directory = Path(directory)
    meta_path = directory / "meta.json"
    if not meta_path.exists():
        raise ExportError(f"missing file: {meta_path}")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    mesh = Mesh(float(meta["L"]), int(meta["n_elems"]))
    rows = read_csv(directory / "nodes.csv")
    if len(rows) != mesh.n_nodes:
        raise ExportError(f"{directory}: expected {mesh.n_nodes} nodes, found {len(rows)}")
    cols = {name: np.array([_to_float(row[name], f"{directory}/nodes.csv:{name}") for row in rows])
            for name in NODE_COLUMNS}
    state = SystemState(mesh, cols["u1"], cols["u2"], cols["alpha1"], cols["alpha2"],
                        cols["delta_h"], cols["gamma"], float(meta["t"]))
    return int(meta["k"]), state


def write_snapshots(out_dir, trace: EvolutionTrace, layers: Sequence[LayerMaterial]) -> List[Path]:
    return [write_snapshot(PathManager.snapshot_dir(out_dir, k), k, state, layers)
            for k, state in sorted(trace.snapshots.items())]


def read_snapshots(out_dir) -> Dict[int, SystemState]:
    """Every snapshot under ``out_dir/snapshots``; empty when there are none."""
    root = Path(PathManager.snapshot_root(out_dir))
    if not root.is_dir():
        return {}
    snapshots = {}
    for directory in sorted(p for p in root.iterdir() if p.is_dir()):
        k, state = read_snapshot(directory)
        snapshots[k] = state
    return snapshots


def write_json(path, obj: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=4, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def write_manifest(out_dir, config_text: str, files: Sequence, seed: int, version: str,
                   environment: Dict[str, Any], extra: Optional[Dict[str, Any]] = None) -> Path:
    """manifest.json with the config hash, file hashes, seed and environment."""
    out_dir = Path(out_dir)
    hashes = {Path(os.path.relpath(f, out_dir)).as_posix(): sha256_file(f) for f in files}
    manifest = {
        "version": version,
        "seed": int(seed),
        "config_sha256": hashlib.sha256(config_text.encode("utf-8")).hexdigest(),
        "environment": environment,
        "files": dict(sorted(hashes.items())),
    }
    if extra:
        manifest.update(extra)
    return write_json(out_dir / "manifest.json", manifest)

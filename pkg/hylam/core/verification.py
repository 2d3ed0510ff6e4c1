"""Verification suite.

Residuals are computed from exported data only: a ``TraceTable`` of ledger
columns and, when available, nodal snapshots. The brute-force oracle and
the refinement studies re-run the model independently of the ledger.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from .cohesive import CohesiveLaw, check_law
from .discretization import (
    SystemState,
    cohesive_nodal_force,
    damage_nodal_gradient,
    elastic_nodal_force,
    field_energy,
)
from .engine import EXTRA_COLUMNS, TRACE_COLUMNS, EvolutionTrace, Problem, RefinementLevel, UniformBounds, refine_study
from .errors import OracleError
from .loading import TimePartition
from .materials import LayerMaterial, check_regularity_condition
from .residuals import (
    KKTTriple,
    StabilityResidual,
    history_cutoff,
    kkt_triple,
    stability_residual,
    stress_constancy_residual,
    truncated_gap,
)
from .solver import IncrementResult, warm_start

__all__ = [
    "TraceTable", "EnergyBalance", "CheckResult", "ResidualReport", "OracleResult", "HistoryStudy",
    "energy_balance_residual", "stress_constancy_residual", "kkt_residuals", "stability_residual",
    "brute_force_increment_oracle", "history_equivalence_study", "build_report",
]

ORACLE_CAP = 8
ORACLE_STARTS = 10_000
RECORD_MATCH = 1e-12
HISTORY_TOLERANCE = 1e-8
LIPSCHITZ_GROWTH = 1.5
CROSS_LEVEL_FACTOR = 10.0


@dataclass
class TraceTable:
    """Ledger columns as float arrays, in step order."""

    columns: Dict[str, np.ndarray]

    @classmethod
    def from_trace(cls, trace: EvolutionTrace) -> "TraceTable":
        return cls({name: trace.column(name) for name in TRACE_COLUMNS + EXTRA_COLUMNS})

    @classmethod
    def from_rows(cls, rows: Sequence[Dict[str, object]]) -> "TraceTable":
        names = list(rows[0]) if rows else TRACE_COLUMNS
        return cls({name: np.array([float(row[name]) for row in rows], dtype=float) for name in names})

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def __contains__(self, name: str) -> bool:
        return name in self.columns

    def __len__(self) -> int:
        return len(self.columns["k"])


@dataclass
class EnergyBalance:
    residuals: np.ndarray
    signed: np.ndarray
    lemma_excess: Optional[np.ndarray] = None

    @property
    def max(self) -> float:
        return float(np.max(self.residuals)) if self.residuals.size else 0.0


def energy_balance_residual(table: TraceTable) -> EnergyBalance:
    """|total_k - total_0 - W_k| per step, its signed version and the one-sided excess."""
    total = table["E"] + table["D"] + table["K"]
    signed = total - total[0] - table["W"]
    excess = None
    if "W_left" in table and "R_quad" in table:
        excess = total - total[0] - table["W_left"] - table["R_quad"]
    return EnergyBalance(np.abs(signed), signed, excess)


def kkt_residuals(snapshots: Dict[int, SystemState], layers: Sequence[LayerMaterial]) -> Dict[int, KKTTriple]:
    """KKT triple for every step k whose snapshot and predecessor snapshot are both present."""
    return {
        k: kkt_triple(snapshots[k - 1].damages, snapshots[k], layers)
        for k in sorted(snapshots)
        if k - 1 in snapshots
    }


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    location: str = ""
    detail: str = ""


@dataclass
class ResidualReport:
    """Outcome of every check plus the per-step residual columns."""

    checks: List[CheckResult]
    steps: np.ndarray
    eb_residual: np.ndarray
    stress_residual: np.ndarray
    kkt: Dict[int, KKTTriple] = field(default_factory=dict)
    stability: Optional[StabilityResidual] = None
    history_gap: float = 0.0
    settings: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def check(self, name: str) -> CheckResult:
        for item in self.checks:
            if item.name == name:
                return item
        raise KeyError(name)

    def failures(self) -> List[str]:
        return [check.name for check in self.checks if not check.passed]

    def to_text(self) -> str:
        lines = ["verification report", ""]
        for key in sorted(self.settings):
            lines.append(f"{key}: {self.settings[key]!r}")
        lines.append("")
        for item in self.checks:
            status = "PASS" if item.passed else "FAIL"
            where = f" at {item.location}" if item.location else ""
            lines.append(f"{item.name:<24} {status:<5} worst={item.worst!r}{where}")
            if item.detail:
                lines.append(f"    {item.detail}")
        lines.append("")
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"

    def rows(self) -> List[Dict[str, object]]:
        rows = []
        for i, k in enumerate(self.steps.astype(int)):
            triple = self.kkt.get(int(k))
            rows.append({
                "k": int(k),
                "eb_residual": float(self.eb_residual[i]),
                "stress_residual": float(self.stress_residual[i]),
                "kkt_min_increment": triple.min_increment if triple else 0.0,
                "kkt_min_gradient": triple.min_gradient if triple else 0.0,
                "kkt_complementarity": triple.complementarity if triple else 0.0,
            })
        return rows


def _argmax_location(values: np.ndarray, steps: np.ndarray) -> Tuple[float, str]:
    if values.size == 0:
        return 0.0, ""
    i = int(np.argmax(values))
    return float(values[i]), f"k={int(steps[i])}"


def build_report(table: TraceTable, layers: Sequence[LayerMaterial], law: CohesiveLaw,
                 snapshots: Optional[Dict[int, SystemState]] = None, problem: Optional[Problem] = None,
                 eb_tolerance: float = 1e-6, tol_grad: float = 1e-8, stability_tolerance: float = 1e-6,
                 n_test_fields: int = 16, seed: int = 0, study: Optional[HistoryStudy] = None) -> ResidualReport:
    """Run every check the exported data allow.

    Checks without the data they need (snapshots, problem) are skipped. A
    finished ``study`` adds its refinement checks to the report.
    """
    snapshots = snapshots or {}
    steps = table["k"]
    checks: List[CheckResult] = []
    total = table["E"] + table["D"] + table["K"]
    scale = 1.0 + np.abs(total)

    balance = energy_balance_residual(table)
    worst, where = _argmax_location(balance.residuals, steps)
    mismatch = np.abs(balance.residuals - table["eb_residual"]) if "eb_residual" in table else np.zeros_like(total)
    bad_record = mismatch > RECORD_MATCH * scale
    detail = f"tolerance {eb_tolerance!r}"
    if np.any(bad_record):
        detail += f"; recorded column disagrees at k={int(steps[np.argmax(bad_record)])}"
    checks.append(CheckResult("eb_residual", worst <= eb_tolerance and not np.any(bad_record), worst, where, detail))

    if balance.lemma_excess is not None:
        worst, where = _argmax_location(balance.lemma_excess / scale, steps)
        checks.append(CheckResult("energy_inequality", worst <= 1e-10, worst, where,
                                  "total_k - total_0 - left work - quadrature remainder (relative)"))

    n_elems = problem.mesh.n_elems if problem is not None else None
    stress = table["stress_residual"].copy()
    if snapshots:
        for i, k in enumerate(steps.astype(int)):
            if int(k) in snapshots:
                stress[i] = stress_constancy_residual(snapshots[int(k)], layers)
    if n_elems is not None:
        h = problem.mesh.h
        bound = 10.0 * h * (np.abs(table["sigma_integral"]) / problem.mesh.L + 1.0) if "sigma_integral" in table \
            else np.full_like(stress, 10.0 * h)
        ratio = stress / bound
        worst, where = _argmax_location(ratio, steps)
        checks.append(CheckResult("stress_residual", worst <= 1.0, float(np.max(stress)), where,
                                  "max deviation of sigma_1 + sigma_2 over 10 h (mean |sum sigma| + 1)"))

    kkt = kkt_residuals(snapshots, layers) if snapshots else {}
    if kkt:
        inc = min(t.min_increment for t in kkt.values())
        grad = min(t.min_gradient for t in kkt.values())
        comp_ratio = max(
            t.complementarity / max(float(np.max(np.abs(snapshots[k].alpha1 - snapshots[k - 1].alpha1))),
                                    float(np.max(np.abs(snapshots[k].alpha2 - snapshots[k - 1].alpha2))), 1e-300)
            if t.complementarity > 0 else 0.0
            for k, t in kkt.items()
        )
        checks.append(CheckResult("kkt_increment", inc >= 0.0, inc, "", "min nodal damage increment"))
        checks.append(CheckResult("kkt_gradient", grad >= -tol_grad, grad, "", f"tolerance {tol_grad!r}"))
        checks.append(CheckResult("kkt_complementarity", comp_ratio <= tol_grad * (1.0 + 1e-9), comp_ratio, "",
                                  "max |g * dalpha| / max |dalpha|"))
    elif "kkt_alpha_residual" in table:
        worst, where = _argmax_location(table["kkt_alpha_residual"], steps)
        checks.append(CheckResult("kkt_recorded", worst <= tol_grad, worst, where, "recorded KKT summary"))

    stability = None
    if snapshots:
        last = max(snapshots)
        stability = stability_residual(snapshots[last], law, layers, n_test_fields, seed)
        checks.append(CheckResult("stability_residual", stability.worst <= stability_tolerance, stability.worst,
                                  f"k={last}", f"cutoff {stability.cutoff!r}; {stability.n_random} random fields, "
                                               f"{stability.n_hats} hats"))

    gap = float(np.max(table["max_gamma_minus_dh"])) if "max_gamma_minus_dh" in table else 0.0
    if snapshots and all(k in snapshots for k in range(int(steps[-1]) + 1)):
        running = snapshots[0].delta_h.copy()
        for k in range(1, int(steps[-1]) + 1):
            running = np.maximum(running, snapshots[k].slip)
            gap = max(gap, truncated_gap(law, snapshots[k].gamma, running))
    checks.append(CheckResult("history_gap", gap <= HISTORY_TOLERANCE, gap, "", "max |gamma ^ dbar - dh ^ dbar|"))

    if snapshots:
        ordered = [snapshots[k] for k in sorted(snapshots)]
        worst_drop = 0.0
        for before, after in zip(ordered, ordered[1:]):
            for name in ("alpha1", "alpha2", "delta_h"):
                worst_drop = max(worst_drop, float(np.max(getattr(before, name) - getattr(after, name))))
        checks.append(CheckResult("irreversibility", worst_drop <= 0.0, worst_drop, "", "largest decrease"))
        if problem is not None:
            bounds = UniformBounds.for_problem(problem)
            for state in ordered:
                bounds.observe(state)
            for name, (observed, bound, ok) in bounds.checks().items():
                checks.append(CheckResult(f"bound_{name}", ok, observed, "", f"bound {bound!r} x {bounds.slack!r}"))

    if study is not None:
        checks.extend(study.checks())

    settings = {"eb_tolerance": eb_tolerance, "tol_grad": tol_grad, "stability_tolerance": stability_tolerance,
                "history_cutoff": history_cutoff(law), "n_test_fields": float(n_test_fields)}
    return ResidualReport(checks, steps, balance.residuals, stress, kkt, stability, gap, settings)


# ---------------------------------------------------------------------- oracle


@dataclass
class OracleResult(IncrementResult):
    n_starts: int = 0
    n_subspaces: int = 0
    free_coordinates: int = 0


def brute_force_increment_oracle(prev: SystemState, boundary_value: float, layers: Sequence[LayerMaterial],
                                 law: CohesiveLaw, n_starts: int = ORACLE_STARTS, seed: int = 0,
                                 max_free: int = ORACLE_CAP) -> OracleResult:
    """Multi-start L-BFGS-B over the admissible set of one increment.

    Free coordinates are the interior displacements of both layers and the
    damage values whose floor is below 1. Every subset of zero-history
    interior nodes is also searched with u1 = u2 imposed there, so stuck
    minimizers sit in the interior of some subspace. The best energy wins,
    ties broken by start order.

    Raises:
        OracleError: more than ``max_free`` free coordinates.
    """
    mesh = prev.mesh
    template = warm_start(prev, boundary_value)
    gamma_floor = prev.delta_h.copy()
    lower = (prev.alpha1.copy(), prev.alpha2.copy())
    n = mesh.n_nodes
    interior = np.arange(1, n - 1)
    free_a1 = np.flatnonzero(lower[0] < 1.0)
    free_a2 = np.flatnonzero(lower[1] < 1.0)
    n_free = 2 * interior.size + free_a1.size + free_a2.size
    if n_free > max_free:
        raise OracleError(f"oracle limited to {max_free} free coordinates, problem has {n_free}")

    def finish(u1, u2, a1, a2, starts, subspaces) -> OracleResult:
        state = template.copy()
        state.u1, state.u2, state.alpha1, state.alpha2 = u1, u2, a1, a2
        state.delta_h = np.maximum(gamma_floor, state.slip)
        state.gamma = state.delta_h.copy()
        energy = field_energy(mesh, layers, law, u1, u2, a1, a2, gamma_floor)
        return OracleResult(state, energy, 0, True, n_starts=starts, n_subspaces=subspaces, free_coordinates=n_free)

    if n_free == 0:
        return finish(template.u1, template.u2, template.alpha1, template.alpha2, 0, 0)

    stickable = [int(j) for j in interior if gamma_floor[j] == 0.0]
    subspaces = [frozenset(c) for r in range(len(stickable) + 1) for c in itertools.combinations(stickable, r)]
    span = 2.0 * max(abs(boundary_value), float(np.max(np.abs(prev.u1))), float(np.max(np.abs(prev.u2))), 1e-3)
    rng = np.random.default_rng(seed)
    per_space = max(1, math.ceil(n_starts / len(subspaces)))

    best = None
    for stuck in subspaces:
        only1 = [int(j) for j in interior if j not in stuck]
        shared = sorted(stuck)
        n_u = 2 * len(only1) + len(shared)

        def unpack(x, only1=only1, shared=shared):
            u1, u2 = template.u1.copy(), template.u2.copy()
            a1, a2 = template.alpha1.copy(), template.alpha2.copy()
            m = len(only1)
            u1[only1] = x[:m]
            u2[only1] = x[m:2 * m]
            u1[shared] = u2[shared] = x[2 * m:n_u]
            a1[free_a1] = x[n_u:n_u + free_a1.size]
            a2[free_a2] = x[n_u + free_a1.size:]
            return u1, u2, a1, a2

        def fun(x, only1=only1, shared=shared):
            u1, u2, a1, a2 = unpack(x)
            energy = field_energy(mesh, layers, law, u1, u2, a1, a2, gamma_floor)
            force = cohesive_nodal_force(mesh, law, u1 - u2, gamma_floor)
            coh = force.smooth + np.sign(u1 - u2) * force.threshold
            g1 = elastic_nodal_force(mesh, layers[0], u1, a1) + coh
            g2 = elastic_nodal_force(mesh, layers[1], u2, a2) - coh
            ga1 = damage_nodal_gradient(mesh, layers[0], u1, a1)
            ga2 = damage_nodal_gradient(mesh, layers[1], u2, a2)
            grad = np.concatenate((g1[only1], g2[only1], g1[shared] + g2[shared], ga1[free_a1], ga2[free_a2]))
            return energy, grad

        bounds = [(None, None)] * n_u + [(float(lower[0][j]), 1.0) for j in free_a1] \
            + [(float(lower[1][j]), 1.0) for j in free_a2]
        lo_u, hi_u = min(0.0, boundary_value) - span, max(0.0, boundary_value) + span
        start0 = np.concatenate((template.u1[only1], template.u2[only1], 0.5 * (template.u1[shared] + template.u2[shared]),
                                 template.alpha1[free_a1], template.alpha2[free_a2]))
        for i in range(per_space):
            if i == 0:
                x0 = start0
            else:
                x0 = np.concatenate((rng.uniform(lo_u, hi_u, n_u),
                                     rng.uniform(lower[0][free_a1], 1.0),
                                     rng.uniform(lower[1][free_a2], 1.0)))
            out = minimize(fun, x0, jac=True, method="L-BFGS-B", bounds=bounds,
                           options={"ftol": 1e-15, "gtol": 1e-10, "maxiter": 1000})
            candidate = unpack(out.x)
            energy = field_energy(mesh, layers, law, *candidate, gamma_floor)
            if best is None or energy < best[0]:
                best = (energy, candidate)
    return finish(*best[1], per_space * len(subspaces), len(subspaces))


# ------------------------------------------------------------------- history


@dataclass
class HistoryLevel:
    n: int
    gap: float
    cross_level_gap: float
    cross_level_bound: float = math.inf
    lipschitz_modulus: Optional[float] = None


@dataclass
class HistoryStudy:
    """Per-level history gaps plus the refinement runs behind them.

    ``passed`` requires the gap to be non-increasing in n and below
    ``tolerance`` at the finest level, every cross-level gap within its
    time-step bound, and the Lipschitz-in-load modulus to grow by at most
    ``lipschitz_growth`` between consecutive levels where it was measured.
    """

    levels: List[HistoryLevel]
    warnings: List[str]
    tolerance: float = HISTORY_TOLERANCE
    refinement: List[RefinementLevel] = field(default_factory=list)
    lipschitz_growth: float = LIPSCHITZ_GROWTH

    def rows(self) -> List[Dict[str, object]]:
        """One summary row per level: refinement measurements plus history gaps."""
        rows = []
        for level, run in zip(self.levels, self.refinement):
            row = run.summary()
            row["gap"] = level.gap
            row["cross_level_gap"] = level.cross_level_gap
            row["cross_level_bound"] = level.cross_level_bound
            rows.append(row)
        return rows

    @property
    def non_increasing(self) -> bool:
        gaps = [level.gap for level in self.levels]
        return all(b <= a + self.tolerance for a, b in zip(gaps, gaps[1:]))

    @property
    def cross_level_ok(self) -> bool:
        return all(level.cross_level_gap <= level.cross_level_bound + self.tolerance for level in self.levels)

    @property
    def lipschitz_ok(self) -> bool:
        moduli = [level.lipschitz_modulus for level in self.levels]
        if any(m is not None and not math.isfinite(m) for m in moduli):
            return False
        pairs = [(a, b) for a, b in zip(moduli, moduli[1:]) if a is not None and b is not None]
        return all(b <= self.lipschitz_growth * a + self.tolerance for a, b in pairs)

    def checks(self) -> List[CheckResult]:
        """The study as report lines."""
        worst_gap = self.levels[-1].gap if self.levels else math.nan
        gap_detail = f"tolerance {self.tolerance!r}, levels {[level.n for level in self.levels]}"
        excess = [level.cross_level_gap - level.cross_level_bound for level in self.levels]
        where = int(np.argmax(excess)) if excess else None
        moduli = [level.lipschitz_modulus for level in self.levels if level.lipschitz_modulus is not None]
        growth = max((b / a for a, b in zip(moduli, moduli[1:]) if a > 0), default=0.0)
        gap_ok = bool(self.levels) and self.non_increasing and worst_gap <= self.tolerance
        return [
            CheckResult("refined_history_gap", gap_ok,
                        worst_gap, f"n={self.levels[-1].n}" if self.levels else "", gap_detail),
            CheckResult("cross_level_gap", self.cross_level_ok, max(excess, default=0.0),
                        "" if where is None else f"n={self.levels[where].n}", "gap minus time-step bound"),
            CheckResult("lipschitz_growth", self.lipschitz_ok, growth, "",
                        f"allowed factor {self.lipschitz_growth!r}" if moduli else "not measured (margin <= 0)"),
        ]

    @property
    def passed(self) -> bool:
        return bool(self.levels) and all(check.passed for check in self.checks())


def _cross_level_gap(law: CohesiveLaw, coarse: EvolutionTrace, fine: EvolutionTrace) -> float:
    """Largest truncated distance between coarse histories and the fine piecewise-constant interpolant."""
    partition = TimePartition(fine.times)
    worst = 0.0
    for t, history in zip(coarse.times, coarse.histories):
        worst = max(worst, truncated_gap(law, history, fine.histories[partition.step_index(t)]))
    return worst


def history_equivalence_study(problem: Problem, partitions: Sequence[int], log_callback=None,
                              tolerance: float = HISTORY_TOLERANCE, lipschitz_growth: float = LIPSCHITZ_GROWTH,
                              cross_level_factor: float = CROSS_LEVEL_FACTOR) -> HistoryStudy:
    """Truncated gap between gamma and the slip history over a refinement family.

    The cross-level gap of level n is bounded by ``cross_level_factor`` times
    the load travelled in one step of its partition. Precondition failures
    (strict monotonicity constant, convexity margin) are reported as
    warnings; the study still runs.
    """
    warnings = []
    report = check_law(problem.law)
    if report.constant_ck <= 0.0:
        warnings.append("strict monotonicity probe found C_K = 0")
    budget = check_regularity_condition(problem.layers, problem.law, problem.mesh.L)
    if not budget.holds:
        warnings.append(f"convexity margin {budget.margin!r} is not positive")
    for message in warnings:
        if log_callback:
            log_callback(f"[WARN] {message}")
        else:
            print(f"[WARN] {message}")
    levels = refine_study(problem, partitions, log_callback)
    finest = levels[-1].trace
    T = problem.partition.T
    rate = problem.load.total_variation(0.0, T) / T
    out = []
    for level in levels:
        gap = float(np.max(level.trace.column("max_gamma_minus_dh")))
        bound = cross_level_factor * rate * TimePartition(level.trace.times).fineness
        out.append(HistoryLevel(level.n, gap, _cross_level_gap(problem.law, level.trace, finest), bound,
                                level.trace.lipschitz_modulus))
    return HistoryStudy(out, warnings, tolerance, refinement=levels, lipschitz_growth=lipschitz_growth)

"""Evolution engine: time stepping, history updates and the energy ledger."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .cohesive import CohesiveLaw
from .discretization import (
    Mesh,
    SystemState,
    cohesive_energy,
    damage_energy,
    elastic_energy,
    h1_norm_sq,
    h1_seminorm_sq,
    sigma_integral,
    stiffness_integral,
    total_energy,
)
from .errors import IncompatibleData, InvariantViolation
from .loading import LoadProgram, TimePartition
from .materials import LayerMaterial, check_regularity_condition
from .residuals import kkt_triple, stress_constancy_residual, truncated_gap
from .solver import IncrementResult, IncrementSolver, SolverOptions

TRACE_COLUMNS = [
    "k", "t", "E", "D", "K", "W", "eb_residual", "stress_residual", "kkt_alpha_residual",
    "max_gamma_minus_dh", "solver_iters", "converged",
]
EXTRA_COLUMNS = [
    "u_bar", "total", "W_left", "R_quad", "R_work", "lemma_excess", "sigma_integral", "stiffness",
    "kkt_min_increment", "kkt_min_gradient", "kkt_complementarity", "warm_drop", "outer_iters",
    "u_residual", "alpha_residual", "restarts_improved",
]
STABILITY_SLACK = 1e-8
BOUND_SLACK = 2.0
LEMMA_SLACK = 1e-10


@dataclass
class Problem:
    """Everything needed to run one evolution."""

    mesh: Mesh
    layers: Tuple[LayerMaterial, LayerMaterial]
    law: CohesiveLaw
    load: LoadProgram
    partition: TimePartition
    options: SolverOptions = field(default_factory=SolverOptions)
    initial_u: Optional[Tuple[np.ndarray, np.ndarray]] = None
    initial_alpha: Optional[Tuple[np.ndarray, np.ndarray]] = None
    snapshot_steps: Tuple[int, ...] = ()
    snapshot_all: bool = False
    concurrency: int = 1

    def with_partition(self, partition: TimePartition) -> "Problem":
        return replace(self, partition=partition)

    def initial_fields(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Nodal (u1, u2, alpha1, alpha2); displacements default to u_bar(0) x / L."""
        mesh = self.mesh
        if self.initial_u is None:
            u1 = u2 = mesh.affine(float(self.load(0.0)))
        else:
            u1, u2 = self.initial_u
        if self.initial_alpha is None:
            a1 = a2 = np.zeros(mesh.n_nodes)
        else:
            a1, a2 = self.initial_alpha
        return tuple(np.array(f, dtype=float) for f in (u1, u2, a1, a2))


@dataclass
class StepRecord:
    """One ledger row."""

    k: int
    t: float
    E: float
    D: float
    K: float
    W: float
    eb_residual: float
    stress_residual: float
    kkt_alpha_residual: float
    max_gamma_minus_dh: float
    solver_iters: int
    converged: bool
    u_bar: float = 0.0
    W_left: float = 0.0
    R_quad: float = 0.0
    R_work: float = 0.0
    lemma_excess: float = 0.0
    sigma_integral: float = 0.0
    stiffness: float = 0.0
    kkt_min_increment: float = 0.0
    kkt_min_gradient: float = 0.0
    kkt_complementarity: float = 0.0
    warm_drop: float = 0.0
    outer_iters: int = 0
    u_residual: float = 0.0
    alpha_residual: float = 0.0
    restarts_improved: int = 0

    @property
    def total(self) -> float:
        return self.E + self.D + self.K

    def as_row(self) -> Dict[str, object]:
        return {name: getattr(self, name) for name in TRACE_COLUMNS + EXTRA_COLUMNS}


@dataclass
class UniformBounds:
    """A-priori bounds from comparing with the fully damaged, slip-free competitor."""

    C1: float
    eps: float
    u_slope_bound: float
    alpha_slope_bound: float
    u_h1_bound: float
    holder_constant: float
    max_u_slope_sq: float = 0.0
    max_alpha_slope_sq: float = 0.0
    max_u_h1_sq: float = 0.0
    max_holder: float = 0.0
    slack: float = BOUND_SLACK

    @classmethod
    def for_problem(cls, problem: Problem) -> "UniformBounds":
        mesh = problem.mesh
        L = mesh.L
        law = problem.law
        u_sup = problem.load.sup_norm(problem.partition.T)
        one = np.array(1.0)
        elastic = sum(0.5 * float(layer.modulus.E(one)) * u_sup**2 / L for layer in problem.layers)
        dissipated = sum(float(layer.dissipation.w(one)) * L for layer in problem.layers)
        top = 2.0 * law.delta_bar if math.isfinite(law.delta_bar) and law.delta_bar > 0 else 10.0
        z = np.concatenate((np.linspace(0.0, max(top, 10.0), 2049), [1e4]))
        interface = L * float(np.max(law.phi(np.zeros_like(z), z)))
        C1 = elastic + dissipated + interface
        eps = min(layer.modulus.eps for layer in problem.layers)
        u_slope = 2.0 * C1 / eps
        return cls(C1, eps, u_slope, 2.0 * C1, (1.0 + 0.5 * L * L) * u_slope, 2.0 * math.sqrt(u_slope))

    def observe(self, state: SystemState):
        mesh = state.mesh
        for u in state.displacements:
            self.max_u_slope_sq = max(self.max_u_slope_sq, h1_seminorm_sq(mesh, u))
            self.max_u_h1_sq = max(self.max_u_h1_sq, h1_norm_sq(mesh, u))
        for alpha in state.damages:
            self.max_alpha_slope_sq = max(self.max_alpha_slope_sq, h1_seminorm_sq(mesh, alpha))
        self.max_holder = max(self.max_holder, holder_quotient(mesh, state.delta_h))

    def checks(self) -> Dict[str, Tuple[float, float, bool]]:
        """name -> (observed, bound, within slack)."""
        pairs = {
            "u_slope_sq": (self.max_u_slope_sq, self.u_slope_bound),
            "alpha_slope_sq": (self.max_alpha_slope_sq, self.alpha_slope_bound),
            "u_h1_sq": (self.max_u_h1_sq, self.u_h1_bound),
            "holder": (self.max_holder, self.holder_constant),
        }
        return {name: (obs, bound, obs <= self.slack * bound) for name, (obs, bound) in pairs.items()}

    @property
    def holds(self) -> bool:
        return all(ok for _, _, ok in self.checks().values())


def holder_quotient(mesh: Mesh, values: np.ndarray) -> float:
    """max over node pairs of |f(x) - f(y)| / sqrt|x - y|."""
    x = mesh.nodes
    dx = np.abs(x[:, None] - x[None, :])
    df = np.abs(values[:, None] - values[None, :])
    mask = dx > 0
    if not np.any(mask):
        return 0.0
    return float(np.max(df[mask] / np.sqrt(dx[mask])))


@dataclass
class InitialCheck:
    """Stability surrogate for the initial data: one relaxation step at t = 0."""

    energy: float
    relaxed_energy: float
    stable: bool
    relaxation: Optional[IncrementResult] = None

    @property
    def energy_change(self) -> float:
        return self.energy - self.relaxed_energy


@dataclass
class EvolutionTrace:
    """Per-step ledger plus the snapshots and run-level diagnostics."""

    records: List[StepRecord]
    times: np.ndarray
    snapshots: Dict[int, SystemState] = field(default_factory=dict)
    initial: Optional[InitialCheck] = None
    bounds: Optional[UniformBounds] = None
    lipschitz_modulus: Optional[float] = None
    delta_bar: float = math.inf
    histories: List[np.ndarray] = field(default_factory=list)

    @property
    def n_steps(self) -> int:
        return len(self.records) - 1

    @property
    def final(self) -> StepRecord:
        return self.records[-1]

    @property
    def remainder(self) -> float:
        """Measured R^n: quadrature part plus the largest partial-step work."""
        return self.final.R_quad + max((r.R_work for r in self.records), default=0.0)

    @property
    def max_eb_residual(self) -> float:
        return max(r.eb_residual for r in self.records)

    @property
    def max_lemma_excess(self) -> float:
        return max(r.lemma_excess for r in self.records)

    @property
    def all_converged(self) -> bool:
        return all(r.converged for r in self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def rows(self) -> List[Dict[str, object]]:
        return [r.as_row() for r in self.records]


class EvolutionEngine:
    """Runs the incremental scheme for one problem and records the ledger."""

    def __init__(self, problem: Problem, log_callback: Optional[Callable[[str], None]] = None):
        """
        Initialize the evolution engine.

        Args:
            problem (Problem): mesh, materials, law, load program and partition.
            log_callback (callable, optional): Callback function for logging
        """
        self.problem = problem
        self.log_cb = log_callback
        self.solver = IncrementSolver(problem.layers, problem.law, problem.options, log_callback=log_callback)
        self.last_detailed_error = ""

    def log(self, msg):
        """Log a message using callback or print."""
        if self.log_cb:
            self.log_cb(msg)
        else:
            print(msg)

    @property
    def verbosity(self) -> int:
        return self.problem.options.verbosity

    def initial_state(self) -> SystemState:
        """Build the initial state with delta_h = gamma = |u1 - u2|.

        Raises:
            IncompatibleData: boundary values or damage box violated.
        """
        problem = self.problem
        mesh = problem.mesh
        u1, u2, a1, a2 = problem.initial_fields()
        state = SystemState.from_fields(mesh, u1, u2, a1, a2, t=0.0)
        problems = state.violations(boundary_value=float(problem.load(0.0)), tol=1e-12)
        if problems:
            self.last_detailed_error = "; ".join(problems)
            raise IncompatibleData(self.last_detailed_error)
        return state

    def initialize(self) -> Tuple[SystemState, InitialCheck]:
        """Initial state and its stability surrogate.

        The data count as stable when one increment at t = 0 with floor
        alpha^0 lowers the energy by at most ``STABILITY_SLACK (1 + |E|)``.
        """
        state = self.initial_state()
        energy = total_energy(state, self.problem.layers, self.problem.law)
        relaxed = self.solver.solve_increment(state, float(self.problem.load(0.0)), t=0.0)
        stable = energy - relaxed.energy <= STABILITY_SLACK * (1.0 + abs(energy))
        check = InitialCheck(energy, relaxed.energy, stable, relaxed)
        if self.verbosity >= 1:
            self.log(f"[INIT] energy={energy!r} relaxed={relaxed.energy!r} stable={stable}")
        if not stable:
            self.log(f"[WARN] initial data are not stable: relaxation lowers the energy by {check.energy_change!r}")
        return state, check

    def run_evolution(self, progress_callback: Optional[Callable[[float, str], None]] = None) -> EvolutionTrace:
        """Run every increment of the partition and return the ledger.

        Raises:
            InvariantViolation: if damage or slip history ever decreases.
        """
        problem = self.problem
        layers, law, load = problem.layers, problem.law, problem.load
        L = problem.mesh.L
        times = problem.partition.times
        n = problem.partition.n_steps

        state, check = self.initialize()
        budget = check_regularity_condition(layers, law, L)
        track_states = budget.holds
        bounds = UniformBounds.for_problem(problem)
        bounds.observe(state)

        E0 = elastic_energy(state, layers)
        D0 = damage_energy(state, layers)
        K0 = cohesive_energy(state, law)
        total0 = E0 + D0 + K0
        S_prev = sigma_integral(state, layers)
        stiff_prev = stiffness_integral(state, layers)
        u_prev = float(load(0.0))
        records = [StepRecord(
            0, float(times[0]), E0, D0, K0, 0.0, 0.0, stress_constancy_residual(state, layers), 0.0, 0.0, 0, True,
            u_bar=u_prev, sigma_integral=S_prev, stiffness=stiff_prev,
        )]
        snapshots = {}
        if problem.snapshot_all or 0 in problem.snapshot_steps:
            snapshots[0] = state.copy()
        kept = [state.copy()] if track_states else []
        histories = [state.delta_h.copy()]
        raw_history = state.delta_h.copy()

        W = W_left = R_quad = 0.0
        prev = state
        for k in range(1, n + 1):
            t_prev, t = float(times[k - 1]), float(times[k])
            u_bar = float(load(t))
            result = self.solver.solve_increment(prev, u_bar, t=t)
            current = result.state
            current.t = t
            self._check_irreversibility(prev, current, k)

            raw_history = np.maximum(raw_history, current.slip)
            E = elastic_energy(current, layers)
            D = damage_energy(current, layers)
            K = cohesive_energy(current, law)
            S = sigma_integral(current, layers)
            stiff = stiffness_integral(current, layers)
            du = u_bar - u_prev
            W += du / L * 0.5 * (S_prev + S)
            W_left += du / L * S_prev
            R_quad += load.excursion_integral(t_prev, t) / L**2 * stiff_prev
            R_work = load.total_variation(t_prev, t) * abs(S_prev) / L
            total = E + D + K
            kkt = kkt_triple(prev.damages, current, layers)
            record = StepRecord(
                k, t, E, D, K, W,
                eb_residual=abs(total - total0 - W),
                stress_residual=stress_constancy_residual(current, layers),
                kkt_alpha_residual=kkt.residual,
                max_gamma_minus_dh=truncated_gap(law, current.gamma, raw_history),
                solver_iters=result.inner_iters,
                converged=result.converged,
                u_bar=u_bar, W_left=W_left, R_quad=R_quad, R_work=R_work,
                lemma_excess=total - total0 - W_left - R_quad,
                sigma_integral=S, stiffness=stiff,
                kkt_min_increment=kkt.min_increment, kkt_min_gradient=kkt.min_gradient,
                kkt_complementarity=kkt.complementarity,
                warm_drop=result.warm_energy - result.energy,
                outer_iters=result.outer_iters,
                u_residual=result.u_residual, alpha_residual=result.alpha_residual,
                restarts_improved=result.restarts_improved,
            )
            records.append(record)
            if record.lemma_excess > LEMMA_SLACK * (1.0 + abs(total)):
                self.log(f"[WARN] step {k}: energy exceeds initial energy + work + remainder by {record.lemma_excess!r}")
            if not result.converged:
                self.last_detailed_error = self.solver.last_detailed_error
            if self.verbosity >= 1:
                self.log(f"[STEP {k}] outer={result.outer_iters} energy={total!r} "
                         f"residual={max(result.u_residual, result.alpha_residual):.3e}")
            if problem.snapshot_all or k in problem.snapshot_steps:
                snapshots[k] = current.copy()
            if track_states:
                kept.append(current.copy())
            histories.append(current.delta_h.copy())
            bounds.observe(current)
            if progress_callback:
                progress_callback(100.0 * k / n, f"step {k}/{n}")
            prev = current
            S_prev, stiff_prev, u_prev = S, stiff, u_bar

        modulus = lipschitz_in_load(kept, load) if track_states else None
        return EvolutionTrace(records, times.copy(), snapshots, check, bounds, modulus, law.delta_bar, histories)

    def _check_irreversibility(self, prev: SystemState, current: SystemState, k: int):
        for name in ("alpha1", "alpha2", "delta_h"):
            before, after = getattr(prev, name), getattr(current, name)
            if np.any(after < before):
                node = int(np.argmin(after - before))
                self.last_detailed_error = (f"{name} decreased at step {k}, node {node}: "
                                            f"{before[node]!r} -> {after[node]!r}")
                raise InvariantViolation(self.last_detailed_error)


def lipschitz_in_load(states: Sequence[SystemState], load: LoadProgram) -> float:
    """max over step pairs of ||state_k - state_j||_{H1} / int_{t_j}^{t_k} |du_bar/dt|."""
    worst = 0.0
    for j in range(len(states)):
        for k in range(j + 1, len(states)):
            variation = load.total_variation(states[j].t, states[k].t)
            if variation <= 0.0:
                continue
            mesh = states[k].mesh
            dist = sum(
                h1_norm_sq(mesh, getattr(states[k], name) - getattr(states[j], name))
                for name in ("u1", "u2", "alpha1", "alpha2")
            )
            worst = max(worst, math.sqrt(dist) / variation)
    return worst


def initialize(problem: Problem, log_callback=None) -> Tuple[SystemState, InitialCheck]:
    return EvolutionEngine(problem, log_callback).initialize()


def run_evolution(problem: Problem, log_callback=None, progress_callback=None) -> EvolutionTrace:
    return EvolutionEngine(problem, log_callback).run_evolution(progress_callback)


@dataclass
class RefinementLevel:
    n: int
    trace: EvolutionTrace

    @property
    def max_eb_residual(self) -> float:
        return self.trace.max_eb_residual

    @property
    def remainder(self) -> float:
        return self.trace.remainder

    def summary(self) -> Dict[str, object]:
        trace = self.trace
        return {
            "n": self.n,
            "max_eb_residual": trace.max_eb_residual,
            "remainder": trace.remainder,
            "max_lemma_excess": trace.max_lemma_excess,
            "max_stress_residual": float(np.max(trace.column("stress_residual"))),
            "max_gamma_minus_dh": float(np.max(trace.column("max_gamma_minus_dh"))),
            "lipschitz_modulus": trace.lipschitz_modulus,
            "converged": trace.all_converged,
        }


def refine_study(problem: Problem, partitions: Sequence[int], log_callback=None) -> List[RefinementLevel]:
    """Run the same problem on uniform partitions with the given step counts.

    Levels run on ``problem.concurrency`` threads; results keep the order of
    ``partitions``.
    """
    partitions = [int(n) for n in partitions]
    if any(b <= a for a, b in zip(partitions, partitions[1:])):
        raise ValueError(f"partitions must be increasing, got {partitions}")
    T = problem.partition.T

    def level(n: int) -> RefinementLevel:
        engine = EvolutionEngine(problem.with_partition(TimePartition.uniform(T, n)), log_callback)
        trace = engine.run_evolution()
        if problem.options.verbosity >= 1:
            engine.log(f"[REFINE] n={n} max_eb={trace.max_eb_residual!r} R={trace.remainder!r}")
        return RefinementLevel(n, trace)

    if problem.concurrency > 1:
        with ThreadPoolExecutor(max_workers=problem.concurrency) as executor:
            return list(executor.map(level, partitions))
    return [level(n) for n in partitions]

"""Incremental minimization: one time step of the staggered scheme.

The displacement block is solved by proximal gradient descent, the damage
block by projected gradient descent, both with Barzilai-Borwein trial steps
and monotone backtracking. The two blocks alternate until neither moves.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .cohesive import CohesiveLaw
from .discretization import (
    SystemState,
    cohesive_nodal_force,
    damage_nodal_gradient,
    elastic_nodal_force,
    field_energy,
)
from .errors import IncompatibleData, InvalidBound, NonConvergence
from .materials import LayerMaterial

ROUNDOFF = 1e-14
STEP_FLOOR = 1e-14
STEP_CEILING = 1e14
IMPROVEMENT = 1e-12


@dataclass(frozen=True)
class StepControl:
    """Backtracking parameters shared by both subproblems."""

    initial_step: float = 1.0
    shrink: float = 0.5
    sufficient_decrease: float = 1e-4
    max_backtracks: int = 80

    def __post_init__(self):
        if not self.initial_step > 0:
            raise ValueError(f"initial_step must be positive, got {self.initial_step!r}")
        if not 0.0 < self.shrink < 1.0:
            raise ValueError(f"shrink must lie in (0, 1), got {self.shrink!r}")
        if not 0.0 < self.sufficient_decrease < 0.5:
            raise ValueError(f"sufficient_decrease must lie in (0, 0.5), got {self.sufficient_decrease!r}")


@dataclass(frozen=True)
class SolverOptions:
    max_outer_iters: int = 200
    max_inner_iters: int = 2000
    tol_energy: float = 1e-12
    tol_grad: float = 1e-8
    n_restarts: int = 0
    restart_amplitude: float = 0.1
    step_control: StepControl = field(default_factory=StepControl)
    rng_seed: int = 0
    workers: int = 1
    verbosity: int = 0
    strict: bool = False

    def __post_init__(self):
        if not (self.tol_energy > 0 and self.tol_grad > 0):
            raise ValueError("solver tolerances must be positive")
        if self.max_outer_iters < 1 or self.max_inner_iters < 1:
            raise ValueError("iteration budgets must be at least 1")
        if self.n_restarts < 0:
            raise ValueError("n_restarts must be >= 0")
        if self.restart_amplitude < 0:
            raise ValueError("restart_amplitude must be >= 0")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class SubproblemResult:
    """Outcome of one block solve."""

    values: Tuple[np.ndarray, np.ndarray]
    iterations: int
    residual: float
    converged: bool
    energies: List[float] = field(default_factory=list)


@dataclass
class IncrementResult:
    """Discrete minimizer of one increment.

    ``energy`` is the total energy of ``state`` whose histories already
    include the new slip; ``warm_energy`` is the energy of the affinely
    shifted previous state that the result must not exceed.
    """

    state: SystemState
    energy: float
    outer_iters: int
    converged: bool
    restarts_improved: int = 0
    u_residual: float = 0.0
    alpha_residual: float = 0.0
    warm_energy: float = float("nan")
    inner_iters: int = 0
    energy_trace: List[float] = field(default_factory=list)


def warm_start(prev: SystemState, boundary_value: float) -> SystemState:
    """Previous state with both displacements shifted by (u_bar_new - u_bar_prev) x / L."""
    mesh = prev.mesh
    shift = mesh.affine(boundary_value - prev.u_bar)
    state = prev.copy()
    for u in (state.u1, state.u2):
        u += shift
        u[0] = 0.0
        u[-1] = boundary_value
    return state


def slip_prox(v1: np.ndarray, v2: np.ndarray, tau: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Proximal map of sum tau/2 |u1 - u2|: mean kept, slip soft-thresholded by tau."""
    mean = 0.5 * (v1 + v2)
    d = v1 - v2
    d = np.sign(d) * np.maximum(np.abs(d) - tau, 0.0)
    return mean + 0.5 * d, mean - 0.5 * d


def u_stationarity(g1: np.ndarray, g2: np.ndarray, threshold: np.ndarray, s: np.ndarray) -> float:
    """Sup-norm of the minimal subgradient on interior nodes.

    ``g1``, ``g2`` are gradients of the smooth part; ``threshold`` weights
    the kink |u1 - u2| at each node.
    """
    g1, g2, thr, s = g1[1:-1], g2[1:-1], threshold[1:-1], s[1:-1]
    if g1.size == 0:
        return 0.0
    sign = np.sign(s)
    xi = np.where(s == 0.0, np.clip(0.5 * (g2 - g1), -thr, thr), thr * sign)
    return float(max(np.max(np.abs(g1 + xi)), np.max(np.abs(g2 - xi))))


def projected_gradient(alpha: np.ndarray, g: np.ndarray, lower: np.ndarray) -> np.ndarray:
    """Gradient projected on the tangent cone of the box [lower, 1]."""
    r = np.where(alpha <= lower, np.minimum(g, 0.0), g)
    r = np.where(alpha >= 1.0, np.maximum(r, 0.0), r)
    return np.where(lower >= 1.0, 0.0, r)


class IncrementSolver:
    """Alternate minimization of the incremental energy for fixed materials and law."""

    def __init__(self, layers: Sequence[LayerMaterial], law: CohesiveLaw,
                 options: Optional[SolverOptions] = None, log_callback: Optional[Callable[[str], None]] = None):
        """
        Args:
            layers: the two layer materials.
            law: cohesive law of the interface.
            options: solver options (defaults when omitted).
            log_callback: receives log lines; ``print`` when omitted.
        """
        if len(layers) != 2:
            raise ValueError("exactly two layers are required")
        self.layers = tuple(layers)
        self.law = law
        self.options = options or SolverOptions()
        self.log_cb = log_callback
        self.last_detailed_error = ""

    def log(self, msg):
        """Log a message using callback or print."""
        if self.log_cb:
            self.log_cb(msg)
        else:
            print(msg)

    # ------------------------------------------------------------------ u-block

    def _u_parts(self, state: SystemState, u1, u2, gamma_floor):
        mesh = state.mesh
        force = cohesive_nodal_force(mesh, self.law, u1 - u2, gamma_floor)
        g1 = elastic_nodal_force(mesh, self.layers[0], u1, state.alpha1) + force.smooth
        g2 = elastic_nodal_force(mesh, self.layers[1], u2, state.alpha2) - force.smooth
        g1[0] = g1[-1] = g2[0] = g2[-1] = 0.0
        return g1, g2, force.threshold

    def u_residual(self, state: SystemState, gamma_floor: np.ndarray) -> float:
        g1, g2, thr = self._u_parts(state, state.u1, state.u2, gamma_floor)
        return u_stationarity(g1, g2, thr, state.u1 - state.u2)

    def minimize_u(self, state: SystemState, gamma_floor: np.ndarray) -> SubproblemResult:
        """Proximal gradient descent on the interior displacements with damage frozen.

        The kink threshold * |u1 - u2| is handled by the slip prox, so stuck
        nodes keep zero slip exactly.
        """
        opts = self.options
        sc = opts.step_control
        mesh = state.mesh

        def energy(a, b):
            return field_energy(mesh, self.layers, self.law, a, b, state.alpha1, state.alpha2, gamma_floor)

        u1, u2 = state.u1.copy(), state.u2.copy()
        g1, g2, thr = self._u_parts(state, u1, u2, gamma_floor)
        phi = energy(u1, u2)
        energies = [phi]
        residual = u_stationarity(g1, g2, thr, u1 - u2)
        t = sc.initial_step
        it = 0
        while residual > opts.tol_grad and it < opts.max_inner_iters:
            accepted = None
            for _ in range(sc.max_backtracks):
                n1, n2 = u1.copy(), u2.copy()
                n1[1:-1], n2[1:-1] = slip_prox(u1[1:-1] - t * g1[1:-1], u2[1:-1] - t * g2[1:-1], 2.0 * t * thr[1:-1])
                d1, d2 = n1 - u1, n2 - u2
                step_sq = float(d1 @ d1 + d2 @ d2)
                if step_sq == 0.0:
                    break
                phi_new = energy(n1, n2)
                if phi_new <= phi - sc.sufficient_decrease / t * step_sq:
                    accepted = (n1, n2, phi_new, None)
                    break
                if phi_new <= phi + ROUNDOFF * (1.0 + abs(phi)):
                    # decrease below round-off: fall back to a curvature test
                    h1, h2, _ = self._u_parts(state, n1, n2, gamma_floor)
                    if float(d1 @ (h1 - g1) + d2 @ (h2 - g2)) <= step_sq / t:
                        accepted = (n1, n2, phi_new, (h1, h2))
                        break
                t *= sc.shrink
            if accepted is None:
                break
            n1, n2, phi, grads = accepted
            h1, h2, thr = self._u_parts(state, n1, n2, gamma_floor) if grads is None else (*grads, thr)
            sy = float((n1 - u1) @ (h1 - g1) + (n2 - u2) @ (h2 - g2))
            ss = float((n1 - u1) @ (n1 - u1) + (n2 - u2) @ (n2 - u2))
            t = min(max(ss / sy, STEP_FLOOR), STEP_CEILING) if sy > 0 else sc.initial_step
            u1, u2, g1, g2 = n1, n2, h1, h2
            energies.append(phi)
            residual = u_stationarity(g1, g2, thr, u1 - u2)
            it += 1
        return SubproblemResult((u1, u2), it, residual, residual <= opts.tol_grad, energies)

    # -------------------------------------------------------------- alpha-block

    def _alpha_gradient(self, state: SystemState, a1, a2):
        mesh = state.mesh
        return (damage_nodal_gradient(mesh, self.layers[0], state.u1, a1),
                damage_nodal_gradient(mesh, self.layers[1], state.u2, a2))

    def alpha_residual(self, state: SystemState, lower: Tuple[np.ndarray, np.ndarray]) -> float:
        g1, g2 = self._alpha_gradient(state, state.alpha1, state.alpha2)
        r1 = projected_gradient(state.alpha1, g1, lower[0])
        r2 = projected_gradient(state.alpha2, g2, lower[1])
        return float(max(np.max(np.abs(r1)), np.max(np.abs(r2))))

    def minimize_alpha(self, state: SystemState, lower: Tuple[np.ndarray, np.ndarray],
                       gamma_floor: Optional[np.ndarray] = None) -> SubproblemResult:
        """Projected gradient descent on both damage fields over the box [lower, 1].

        Raises:
            InvalidBound: if a floor lies outside [0, 1].
        """
        for floor in lower:
            if np.any(floor < 0.0) or np.any(floor > 1.0):
                raise InvalidBound("damage floor must lie in [0, 1]")
        opts = self.options
        sc = opts.step_control
        mesh = state.mesh
        floor_gamma = state.gamma if gamma_floor is None else gamma_floor

        def energy(a, b):
            return field_energy(mesh, self.layers, self.law, state.u1, state.u2, a, b, floor_gamma)

        a1 = np.clip(state.alpha1, lower[0], 1.0)
        a2 = np.clip(state.alpha2, lower[1], 1.0)
        g1, g2 = self._alpha_gradient(state, a1, a2)

        def residual_of(x1, x2, h1, h2):
            return float(max(np.max(np.abs(projected_gradient(x1, h1, lower[0]))),
                             np.max(np.abs(projected_gradient(x2, h2, lower[1])))))

        phi = energy(a1, a2)
        energies = [phi]
        residual = residual_of(a1, a2, g1, g2)
        t = sc.initial_step
        it = 0
        while residual > opts.tol_grad and it < opts.max_inner_iters:
            accepted = None
            for _ in range(sc.max_backtracks):
                n1 = np.clip(a1 - t * g1, lower[0], 1.0)
                n2 = np.clip(a2 - t * g2, lower[1], 1.0)
                d1, d2 = n1 - a1, n2 - a2
                step_sq = float(d1 @ d1 + d2 @ d2)
                if step_sq == 0.0:
                    break
                phi_new = energy(n1, n2)
                if phi_new <= phi - sc.sufficient_decrease / t * step_sq:
                    accepted = (n1, n2, phi_new, None)
                    break
                if phi_new <= phi + ROUNDOFF * (1.0 + abs(phi)):
                    h1, h2 = self._alpha_gradient(state, n1, n2)
                    if float(d1 @ (h1 - g1) + d2 @ (h2 - g2)) <= step_sq / t:
                        accepted = (n1, n2, phi_new, (h1, h2))
                        break
                t *= sc.shrink
            if accepted is None:
                break
            n1, n2, phi, grads = accepted
            h1, h2 = self._alpha_gradient(state, n1, n2) if grads is None else grads
            sy = float((n1 - a1) @ (h1 - g1) + (n2 - a2) @ (h2 - g2))
            ss = float((n1 - a1) @ (n1 - a1) + (n2 - a2) @ (n2 - a2))
            t = min(max(ss / sy, STEP_FLOOR), STEP_CEILING) if sy > 0 else sc.initial_step
            a1, a2, g1, g2 = n1, n2, h1, h2
            energies.append(phi)
            residual = residual_of(a1, a2, g1, g2)
            it += 1
        return SubproblemResult((a1, a2), it, residual, residual <= opts.tol_grad, energies)

    # ------------------------------------------------------------- increments

    def _alternate(self, state: SystemState, gamma_floor: np.ndarray,
                   lower: Tuple[np.ndarray, np.ndarray]) -> IncrementResult:
        """Alternate u- and alpha-blocks from ``state`` until both are stationary."""
        opts = self.options
        mesh = state.mesh
        state = state.copy()
        energy = field_energy(mesh, self.layers, self.law, state.u1, state.u2, state.alpha1, state.alpha2, gamma_floor)
        trace = [energy]
        inner = 0
        converged = False
        u_res = a_res = float("inf")
        outer = 0
        for outer in range(1, opts.max_outer_iters + 1):
            u_step = self.minimize_u(state, gamma_floor)
            state.u1, state.u2 = u_step.values
            trace.extend(u_step.energies[1:])
            a_step = self.minimize_alpha(state, lower, gamma_floor)
            state.alpha1, state.alpha2 = a_step.values
            trace.extend(a_step.energies[1:])
            inner += u_step.iterations + a_step.iterations
            new_energy = trace[-1]
            decrease = energy - new_energy
            energy = new_energy
            u_res = self.u_residual(state, gamma_floor)
            a_res = a_step.residual
            if opts.verbosity >= 2:
                self.log(f"[SOLVER] sweep {outer}: u iters={u_step.iterations} alpha iters={a_step.iterations} "
                         f"energy={energy!r} u_res={u_res:.3e} alpha_res={a_res:.3e}")
            if decrease <= opts.tol_energy and u_res <= opts.tol_grad and a_res <= opts.tol_grad:
                converged = True
                break
        slip = state.slip
        state.delta_h = np.maximum(gamma_floor, slip)
        state.gamma = state.delta_h.copy()
        return IncrementResult(state, energy, outer, converged, 0, u_res, a_res, inner_iters=inner, energy_trace=trace)

    def solve_increment(self, prev: SystemState, boundary_value: float, t: Optional[float] = None) -> IncrementResult:
        """Minimize E + D + K[slip, delta_h v slip] for the new boundary value.

        Starts from the affinely shifted previous state, floors damage at the
        previous damage and freezes the history at ``prev.delta_h``.

        Raises:
            InvalidBound: previous damage outside [0, 1].
            IncompatibleData: non-finite boundary value.
            NonConvergence: iteration budget exhausted with ``options.strict`` set.
        """
        if not np.isfinite(boundary_value):
            raise IncompatibleData(f"boundary value must be finite, got {boundary_value!r}")
        for name in ("alpha1", "alpha2"):
            arr = getattr(prev, name)
            if np.any(arr < 0.0) or np.any(arr > 1.0):
                raise InvalidBound(f"previous {name} leaves [0, 1]")
        warm = warm_start(prev, boundary_value)
        if t is not None:
            warm.t = float(t)
        gamma_floor = prev.delta_h.copy()
        lower = (prev.alpha1.copy(), prev.alpha2.copy())
        warm_energy = field_energy(warm.mesh, self.layers, self.law, warm.u1, warm.u2,
                                   warm.alpha1, warm.alpha2, gamma_floor)
        result = self._alternate(warm, gamma_floor, lower)
        result.warm_energy = warm_energy
        if self.options.n_restarts > 0 and self.options.restart_amplitude > 0:
            result = self.global_polish(result, gamma_floor, lower)
            result.warm_energy = warm_energy
        if not result.converged:
            self.last_detailed_error = (
                f"increment at t={warm.t!r} hit the iteration budget: "
                f"u residual {result.u_residual:.3e}, alpha residual {result.alpha_residual:.3e}"
            )
            if self.options.strict:
                raise NonConvergence(self.last_detailed_error)
            self.log(f"[WARN] {self.last_detailed_error}")
        return result

    def global_polish(self, result: IncrementResult, gamma_floor: np.ndarray,
                      lower: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> IncrementResult:
        """Multi-start refinement of a converged increment.

        Each restart perturbs interior displacements by amplitude * U(-1, 1)
        and raises damage by amplitude * U(0, 1) inside the box, then re-runs
        alternate minimization. Restarts draw from independent streams
        spawned from ``rng_seed`` and may run on ``workers`` threads; the
        winner is the lowest energy, ties broken by restart index.
        """
        opts = self.options
        if opts.n_restarts < 1 or opts.restart_amplitude == 0.0:
            return result
        base = result.state
        if lower is None:
            lower = (base.alpha1.copy(), base.alpha2.copy())
        amp = opts.restart_amplitude
        streams = np.random.SeedSequence(opts.rng_seed).spawn(opts.n_restarts)

        def attempt(index: int) -> Tuple[float, int, IncrementResult]:
            rng = np.random.default_rng(streams[index])
            trial = base.copy()
            n = trial.mesh.n_nodes
            trial.u1[1:-1] += amp * rng.uniform(-1.0, 1.0, n - 2)
            trial.u2[1:-1] += amp * rng.uniform(-1.0, 1.0, n - 2)
            trial.alpha1 = np.clip(trial.alpha1 + amp * rng.uniform(0.0, 1.0, n), lower[0], 1.0)
            trial.alpha2 = np.clip(trial.alpha2 + amp * rng.uniform(0.0, 1.0, n), lower[1], 1.0)
            outcome = self._alternate(trial, gamma_floor, lower)
            return outcome.energy, index, outcome

        if opts.workers > 1:
            with ThreadPoolExecutor(max_workers=opts.workers) as executor:
                candidates = list(executor.map(attempt, range(opts.n_restarts)))
        else:
            candidates = [attempt(i) for i in range(opts.n_restarts)]

        threshold = result.energy - IMPROVEMENT * (1.0 + abs(result.energy))
        improved = sum(1 for energy, _, _ in candidates if energy < threshold)
        best_energy, best_index, best = min(candidates, key=lambda c: (c[0], c[1]))
        if opts.verbosity >= 2:
            self.log(f"[POLISH] {improved}/{opts.n_restarts} restarts improved; best #{best_index} energy={best_energy!r}")
        if best_energy >= threshold:
            return result
        best.restarts_improved = improved
        best.outer_iters += result.outer_iters
        best.inner_iters += result.inner_iters
        return best

"""Pointwise residuals of the optimality conditions.

Pure functions of nodal data; shared by the evolution ledger and the
verification suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .cohesive import CohesiveLaw
from .discretization import SystemState, damage_nodal_gradient, element_slopes, stress_field
from .materials import LayerMaterial


def stress_constancy_residual(state: SystemState, layers: Sequence[LayerMaterial]) -> float:
    """max over elements of |sigma_1 + sigma_2 - mean|."""
    s1, s2 = stress_field(state, layers)
    total = s1 + s2
    return float(np.max(np.abs(total - total.mean())))


@dataclass
class KKTTriple:
    """Discrete KKT system of the damage update.

    Attributes:
        min_increment: smallest nodal damage increment (never negative).
        min_gradient: most negative variational derivative on {alpha < 1}.
        complementarity: largest |derivative * increment| on {alpha < 1}.
    """

    min_increment: float
    min_gradient: float
    complementarity: float

    @property
    def residual(self) -> float:
        """Single nonnegative summary of the three conditions."""
        return max(0.0, -self.min_increment, -self.min_gradient, self.complementarity)

    def as_tuple(self) -> Tuple[float, float, float]:
        return self.min_increment, self.min_gradient, self.complementarity


def kkt_triple(prev_alpha: Tuple[np.ndarray, np.ndarray], state: SystemState,
               layers: Sequence[LayerMaterial]) -> KKTTriple:
    """KKT residuals with the increment alpha^k - alpha^{k-1} standing in for the rate."""
    increments = []
    gradients = []
    products = []
    for i, (before, after, u) in enumerate(zip(prev_alpha, state.damages, state.displacements)):
        delta = after - before
        increments.append(float(np.min(delta)))
        g = damage_nodal_gradient(state.mesh, layers[i], u, after)
        active = after < 1.0
        if np.any(active):
            gradients.append(float(np.min(g[active])))
            products.append(float(np.max(np.abs(g[active] * delta[active]))))
    if not gradients:
        return KKTTriple(min(0.0, min(increments)), 0.0, 0.0)
    return KKTTriple(min(increments), min(min(gradients), 0.0), max(products))


def history_cutoff(law: CohesiveLaw, relative: float = 1e-12) -> float:
    """Threshold below which the history counts as zero."""
    scale = law.delta_bar if math.isfinite(law.delta_bar) and law.delta_bar > 0 else 1.0
    return relative * scale


def stability_lhs_rhs(state: SystemState, law: CohesiveLaw, layers: Sequence[LayerMaterial],
                      v1: np.ndarray, v2: np.ndarray, cutoff: float) -> Tuple[float, float]:
    """Both sides of the first-variation inequality for the test pair (v1, v2)."""
    mesh = state.mesh
    s1, s2 = stress_field(state, layers)
    lhs = mesh.h * float(np.dot(s1, element_slopes(mesh, v1)) + np.dot(s2, element_slopes(mesh, v2)))
    s = state.u1 - state.u2
    slip = np.abs(s)
    sliding = slip > 0.0
    slope = np.where(sliding, law.d_phi_dy(slip, np.maximum(state.gamma, slip)), 0.0)
    lhs += float(np.dot(mesh.weights, slope * np.sign(s) * (v1 - v2)))
    stuck = state.gamma <= cutoff
    psi0 = float(law.psi_prime(np.array(0.0)))
    rhs = psi0 * float(np.dot(mesh.weights, np.where(stuck, np.abs(v1 - v2), 0.0)))
    return lhs, rhs


@dataclass
class StabilityResidual:
    random_excess: float
    hat_excess: float
    n_random: int
    n_hats: int
    cutoff: float

    @property
    def worst(self) -> float:
        return max(self.random_excess, self.hat_excess)


def stability_residual(state: SystemState, law: CohesiveLaw, layers: Sequence[LayerMaterial],
                       n_test_fields: int = 16, seed: int = 0, cutoff: Optional[float] = None,
                       same_displacement: bool = False) -> StabilityResidual:
    """Largest excess max(|lhs| - rhs, 0) over random unit fields and nodal hats.

    Test pairs vanish at both ends. With ``same_displacement`` the pairs
    satisfy v1 = v2.
    """
    cutoff = history_cutoff(law) if cutoff is None else cutoff
    n = state.mesh.n_nodes
    rng = np.random.default_rng(seed)

    def excess(v1, v2):
        lhs, rhs = stability_lhs_rhs(state, law, layers, v1, v2, cutoff)
        return max(abs(lhs) - rhs, 0.0)

    random_worst = 0.0
    for _ in range(int(n_test_fields)):
        v = rng.standard_normal((2, n))
        if same_displacement:
            v[1] = v[0]
        v[:, 0] = v[:, -1] = 0.0
        norm = float(np.linalg.norm(v))
        if norm == 0.0:
            continue
        v /= norm
        random_worst = max(random_worst, excess(v[0], v[1]))

    hat_worst = 0.0
    hats = 0
    zero = np.zeros(n)
    for j in range(1, n - 1):
        e = np.zeros(n)
        e[j] = 1.0
        pairs = [(e, e)] if same_displacement else [(e, zero), (zero, e)]
        for v1, v2 in pairs:
            hat_worst = max(hat_worst, excess(v1, v2))
            hats += 1
    return StabilityResidual(random_worst, hat_worst, int(n_test_fields), hats, cutoff)


def truncated_gap(law: CohesiveLaw, gamma: np.ndarray, delta_h: np.ndarray) -> float:
    """max over nodes of |gamma ^ delta_bar - delta_h ^ delta_bar|."""
    dbar = law.delta_bar
    return float(np.max(np.abs(np.minimum(gamma, dbar) - np.minimum(delta_h, dbar))))

"""Uniform 1D mesh, nodal state of the laminate and energy assembly.

Elastic terms use the element midpoint value of the damage; the dissipation
density and the interface density use nodal trapezoid weights. All
gradients are exact derivatives of the assembled sums.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .cohesive import CohesiveLaw
from .errors import InvalidBound
from .materials import LayerMaterial

NodalField = np.ndarray

HISTORY_SLACK = 1e-12


@dataclass(frozen=True)
class Mesh:
    """Uniform partition of [0, L] into ``n_elems`` elements."""

    L: float
    n_elems: int

    def __post_init__(self):
        if not (self.L > 0):
            raise ValueError(f"bar length must be positive, got {self.L!r}")
        if int(self.n_elems) != self.n_elems or self.n_elems < 1:
            raise ValueError(f"n_elems must be a positive integer, got {self.n_elems!r}")

    @property
    def h(self) -> float:
        return self.L / self.n_elems

    @property
    def n_nodes(self) -> int:
        return self.n_elems + 1

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.n_nodes)

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid weights; they sum to L."""
        w = np.full(self.n_nodes, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w

    def affine(self, value: float) -> np.ndarray:
        """Nodal values of value * x / L."""
        return value * self.nodes / self.L

    def constant(self, value: float) -> np.ndarray:
        return np.full(self.n_nodes, float(value))


@dataclass
class SystemState:
    """Nodal fields of both layers plus the interface history."""

    mesh: Mesh
    u1: NodalField
    u2: NodalField
    alpha1: NodalField
    alpha2: NodalField
    delta_h: NodalField
    gamma: NodalField
    t: float = 0.0

    @classmethod
    def from_fields(cls, mesh: Mesh, u1, u2, alpha1, alpha2, t: float = 0.0) -> "SystemState":
        """State whose histories start at the current slip."""
        u1 = np.array(u1, dtype=float)
        u2 = np.array(u2, dtype=float)
        slip = np.abs(u1 - u2)
        return cls(mesh, u1, u2, np.array(alpha1, dtype=float), np.array(alpha2, dtype=float),
                   slip.copy(), slip.copy(), float(t))

    @classmethod
    def zeros(cls, mesh: Mesh) -> "SystemState":
        z = np.zeros(mesh.n_nodes)
        return cls.from_fields(mesh, z, z, z, z)

    @property
    def slip(self) -> NodalField:
        return np.abs(self.u1 - self.u2)

    @property
    def u_bar(self) -> float:
        return float(self.u1[-1])

    @property
    def displacements(self) -> Tuple[NodalField, NodalField]:
        return self.u1, self.u2

    @property
    def damages(self) -> Tuple[NodalField, NodalField]:
        return self.alpha1, self.alpha2

    def copy(self) -> "SystemState":
        return replace(
            self,
            u1=self.u1.copy(), u2=self.u2.copy(),
            alpha1=self.alpha1.copy(), alpha2=self.alpha2.copy(),
            delta_h=self.delta_h.copy(), gamma=self.gamma.copy(),
        )

    def violations(self, boundary_value: Optional[float] = None, tol: float = 1e-12) -> List[str]:
        """Describe every broken state invariant; empty when the state is valid."""
        problems = []
        n = self.mesh.n_nodes
        for name in ("u1", "u2", "alpha1", "alpha2", "delta_h", "gamma"):
            arr = getattr(self, name)
            if arr.shape != (n,):
                problems.append(f"{name} has shape {arr.shape}, expected ({n},)")
        if problems:
            return problems
        for name in ("u1", "u2"):
            arr = getattr(self, name)
            if abs(arr[0]) > tol:
                problems.append(f"{name}(0) = {arr[0]!r} must vanish")
            if boundary_value is not None and abs(arr[-1] - boundary_value) > tol:
                problems.append(f"{name}(L) = {arr[-1]!r} must equal {boundary_value!r}")
        for name in ("alpha1", "alpha2"):
            arr = getattr(self, name)
            if arr.min() < 0.0 or arr.max() > 1.0:
                bad = int(np.argmax(np.abs(arr - np.clip(arr, 0.0, 1.0))))
                problems.append(f"{name} = {arr[bad]!r} at node {bad} is outside [0, 1]")
        slip = self.slip
        if np.any(self.delta_h < slip - tol):
            problems.append("delta_h below the current slip")
        if np.any(self.gamma < self.delta_h - tol):
            problems.append("gamma below delta_h")
        return problems


def element_slopes(mesh: Mesh, u: np.ndarray) -> np.ndarray:
    return np.diff(u) / mesh.h


def element_damage(alpha: np.ndarray) -> np.ndarray:
    return 0.5 * (alpha[:-1] + alpha[1:])


def layer_elastic_energy(mesh: Mesh, layer: LayerMaterial, u: np.ndarray, alpha: np.ndarray) -> float:
    strain = element_slopes(mesh, u)
    return 0.5 * mesh.h * float(np.sum(layer.modulus.E(element_damage(alpha)) * strain * strain))


def layer_damage_energy(mesh: Mesh, layer: LayerMaterial, alpha: np.ndarray) -> float:
    grad = element_slopes(mesh, alpha)
    return 0.5 * mesh.h * float(np.sum(grad * grad)) + float(np.dot(mesh.weights, layer.dissipation.w(alpha)))


def elastic_energy(state: SystemState, layers: Sequence[LayerMaterial]) -> float:
    """Stored elastic energy of both layers."""
    mesh = state.mesh
    return (layer_elastic_energy(mesh, layers[0], state.u1, state.alpha1)
            + layer_elastic_energy(mesh, layers[1], state.u2, state.alpha2))


def damage_energy(state: SystemState, layers: Sequence[LayerMaterial]) -> float:
    """Gradient-damage energy of both layers (gradient term plus dissipation)."""
    mesh = state.mesh
    return (layer_damage_energy(mesh, layers[0], state.alpha1)
            + layer_damage_energy(mesh, layers[1], state.alpha2))


def interface_energy(mesh: Mesh, law: CohesiveLaw, slip: np.ndarray, gamma: np.ndarray) -> float:
    return float(np.dot(mesh.weights, law.phi(slip, gamma)))


def cohesive_energy(state: SystemState, law: CohesiveLaw) -> float:
    """Interface energy with the state's own history gamma.

    Raises:
        InvalidBound: if gamma lies below the slip at some node.
    """
    slip = state.slip
    gap = slip - state.gamma
    if np.any(gap > HISTORY_SLACK):
        node = int(np.argmax(gap))
        raise InvalidBound(f"gamma below slip at node {node}: gamma={state.gamma[node]!r}, slip={slip[node]!r}")
    return interface_energy(state.mesh, law, slip, np.maximum(state.gamma, slip))


def total_energy(state: SystemState, layers: Sequence[LayerMaterial], law: CohesiveLaw) -> float:
    return elastic_energy(state, layers) + damage_energy(state, layers) + cohesive_energy(state, law)


def incremental_energy(state: SystemState, layers: Sequence[LayerMaterial], law: CohesiveLaw,
                       gamma_floor: np.ndarray) -> float:
    """E + D + K[slip, gamma_floor v slip], the functional minimized in one increment."""
    return field_energy(state.mesh, layers, law, state.u1, state.u2, state.alpha1, state.alpha2, gamma_floor)


def field_energy(mesh: Mesh, layers: Sequence[LayerMaterial], law: CohesiveLaw,
                 u1: np.ndarray, u2: np.ndarray, alpha1: np.ndarray, alpha2: np.ndarray,
                 gamma_floor: np.ndarray) -> float:
    """Incremental energy of raw nodal arrays."""
    return (layer_elastic_energy(mesh, layers[0], u1, alpha1)
            + layer_elastic_energy(mesh, layers[1], u2, alpha2)
            + layer_damage_energy(mesh, layers[0], alpha1)
            + layer_damage_energy(mesh, layers[1], alpha2)
            + float(np.dot(mesh.weights, law.slip_energy(u1 - u2, gamma_floor))))


def stress_field(state: SystemState, layers: Sequence[LayerMaterial]) -> Tuple[np.ndarray, np.ndarray]:
    """Per-element stresses sigma_i = E_i(alpha_i) u_i'."""
    mesh = state.mesh
    s1 = layers[0].modulus.E(element_damage(state.alpha1)) * element_slopes(mesh, state.u1)
    s2 = layers[1].modulus.E(element_damage(state.alpha2)) * element_slopes(mesh, state.u2)
    return s1, s2


def sigma_integral(state: SystemState, layers: Sequence[LayerMaterial]) -> float:
    """Integral over the bar of sigma_1 + sigma_2."""
    s1, s2 = stress_field(state, layers)
    return state.mesh.h * float(np.sum(s1 + s2))


def stiffness_integral(state: SystemState, layers: Sequence[LayerMaterial]) -> float:
    """Integral over the bar of E_1(alpha_1) + E_2(alpha_2) (midpoint rule)."""
    h = state.mesh.h
    return h * float(np.sum(layers[0].modulus.E(element_damage(state.alpha1))
                            + layers[1].modulus.E(element_damage(state.alpha2))))


def elastic_nodal_force(mesh: Mesh, layer: LayerMaterial, u: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Gradient of the layer's elastic energy with respect to its nodal displacements."""
    sigma = layer.modulus.E(element_damage(alpha)) * element_slopes(mesh, u)
    g = np.zeros_like(u)
    g[1:] += sigma
    g[:-1] -= sigma
    return g


def damage_nodal_gradient(mesh: Mesh, layer: LayerMaterial, u: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Gradient of the layer's elastic plus damage energy with respect to its nodal damage."""
    h = mesh.h
    strain = element_slopes(mesh, u)
    driving = 0.25 * h * layer.modulus.E_prime(element_damage(alpha)) * strain * strain
    grad = element_slopes(mesh, alpha)
    g = mesh.weights * layer.dissipation.w_prime(alpha)
    g[:-1] += driving - grad
    g[1:] += driving + grad
    return g


class CohesiveForce(NamedTuple):
    """Split of the interface contribution to the u-gradient."""

    smooth: np.ndarray
    threshold: np.ndarray
    nonsmooth: np.ndarray


def cohesive_nodal_force(mesh: Mesh, law: CohesiveLaw, s: np.ndarray, gamma_floor: np.ndarray) -> CohesiveForce:
    """Slope of the incremental interface energy in the signed slip s = u1 - u2.

    ``smooth`` is the derivative of the nodal term with the kink
    ``threshold * |s|`` removed; ``threshold`` is the weighted stick
    threshold; ``nonsmooth`` flags nodes sitting on the kink.
    """
    a = np.abs(s)
    sign = np.sign(s)
    kappa = law.stick_threshold(gamma_floor)
    slope = law.slip_slope(a, gamma_floor)
    smooth = mesh.weights * sign * (slope - kappa)
    threshold = mesh.weights * kappa
    return CohesiveForce(smooth, threshold, (a == 0.0) & (threshold > 0.0))


@dataclass
class GradientBundle:
    """Nodal gradients of the incremental energy."""

    u1: np.ndarray
    u2: np.ndarray
    alpha1: np.ndarray
    alpha2: np.ndarray
    nonsmooth: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    threshold: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def as_tuple(self):
        return self.u1, self.u2, self.alpha1, self.alpha2


def total_gradient(state: SystemState, law: CohesiveLaw, layers: Sequence[LayerMaterial],
                   gamma_floor: np.ndarray) -> GradientBundle:
    """Analytic gradient of the incremental energy.

    At nodes with nonzero slip the interface slope is sgn(s) times the
    branch slope; at flagged nonsmooth nodes (zero slip, positive threshold)
    the interface contribution is reported as 0 and the node is flagged.
    """
    mesh = state.mesh
    s = state.u1 - state.u2
    force = cohesive_nodal_force(mesh, law, s, gamma_floor)
    coh = force.smooth + np.sign(s) * force.threshold
    g_u1 = elastic_nodal_force(mesh, layers[0], state.u1, state.alpha1) + coh
    g_u2 = elastic_nodal_force(mesh, layers[1], state.u2, state.alpha2) - coh
    g_a1 = damage_nodal_gradient(mesh, layers[0], state.u1, state.alpha1)
    g_a2 = damage_nodal_gradient(mesh, layers[1], state.u2, state.alpha2)
    return GradientBundle(g_u1, g_u2, g_a1, g_a2, force.nonsmooth, force.threshold)


def h1_seminorm_sq(mesh: Mesh, values: np.ndarray) -> float:
    grad = element_slopes(mesh, values)
    return mesh.h * float(np.sum(grad * grad))


def l2_norm_sq(mesh: Mesh, values: np.ndarray) -> float:
    return float(np.dot(mesh.weights, values * values))


def h1_norm_sq(mesh: Mesh, values: np.ndarray) -> float:
    return l2_norm_sq(mesh, values) + h1_seminorm_sq(mesh, values)

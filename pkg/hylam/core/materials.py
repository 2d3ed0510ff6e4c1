"""Layer materials: damage-dependent moduli, dissipation densities and the
convexity budget that controls regularity of evolutions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, NamedTuple, Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from .cohesive import CohesiveLaw, ScalarFn, as_array_fn
from .errors import MaterialError

DIFF_STEP = 1e-5
CONSERVATIVE_MARGIN = 1e-8


def _clamped_first(fn, step=DIFF_STEP):
    def derivative(y):
        y = np.asarray(y, dtype=float)
        lo = np.clip(y - step, 0.0, 1.0 - 2.0 * step)
        return (fn(lo + 2.0 * step) - fn(lo)) / (2.0 * step)

    return derivative


def _clamped_second(fn, step=DIFF_STEP):
    def derivative(y):
        c = np.clip(np.asarray(y, dtype=float), step, 1.0 - step)
        return (fn(c + step) - 2.0 * fn(c) + fn(c - step)) / step**2

    return derivative


def _tabulated(y, values, label):
    y = np.asarray(y, dtype=float)
    values = np.asarray(values, dtype=float)
    if y.ndim != 1 or y.shape != values.shape or y.size < 2:
        raise MaterialError(f"tabulated {label} needs matching 1D arrays with at least two samples")
    if y[0] != 0.0 or y[-1] != 1.0 or np.any(np.diff(y) <= 0):
        raise MaterialError(f"tabulated {label} must cover [0, 1] with increasing abscissae")
    spline = PchipInterpolator(y, values, extrapolate=True)
    return lambda x: spline(np.asarray(x, dtype=float))


class HardeningParams(NamedTuple):
    """Hardening constants of a modulus on [0, 1]."""

    m: float
    M: float
    eps: float
    conservative: bool = False


@dataclass(frozen=True)
class ElasticModulus:
    """Young modulus as a function of the damage variable.

    Attributes:
        E: modulus on [0, 1].
        E_prime: first derivative.
        E_second: second derivative.
        family_tag: ``power`` or ``custom``.
        params: family parameters.
    """

    E: ScalarFn
    E_prime: ScalarFn
    E_second: ScalarFn
    family_tag: str
    params: Dict[str, float] = field(default_factory=dict)

    @classmethod
    def power(cls, a: float, b: float) -> "ElasticModulus":
        """E(y) = a (1 + y)^(-b) with a > 0 and 0 < b < 1 (a hardening family)."""
        if not (math.isfinite(a) and a > 0):
            raise MaterialError(f"power modulus needs a > 0, got {a!r}")
        if not (0.0 < b < 1.0):
            raise MaterialError(f"power modulus needs 0 < b < 1, got {b!r}")

        def E(y):
            return a * (1.0 + np.asarray(y, dtype=float)) ** (-b)

        def E_prime(y):
            return -a * b * (1.0 + np.asarray(y, dtype=float)) ** (-b - 1.0)

        def E_second(y):
            return a * b * (b + 1.0) * (1.0 + np.asarray(y, dtype=float)) ** (-b - 2.0)

        return cls(E, E_prime, E_second, "power", {"a": float(a), "b": float(b)})

    @classmethod
    def custom(cls, E, params: Optional[Dict[str, float]] = None) -> "ElasticModulus":
        """Modulus from a callable; derivatives by clamped central differences."""
        fn = as_array_fn(E)
        return cls(fn, _clamped_first(fn), _clamped_second(fn), "custom", dict(params or {}))

    @classmethod
    def tabulated(cls, y, values) -> "ElasticModulus":
        return cls.custom(_tabulated(y, values, "modulus"), {"samples": len(values)})

    @cached_property
    def hardening(self) -> HardeningParams:
        return hardening_params(self)

    @property
    def eps(self) -> float:
        return self.hardening.eps

    @property
    def m(self) -> float:
        return self.hardening.m

    @property
    def M(self) -> float:
        return self.hardening.M


@dataclass(frozen=True)
class DamageDissipation:
    """Dissipated energy density w and its uniform convexity parameter mu."""

    w: ScalarFn
    w_prime: ScalarFn
    mu: float
    family_tag: str
    params: Dict[str, float] = field(default_factory=dict)

    @classmethod
    def polynomial(cls, w1: float = 0.5, w2: float = 1.0) -> "DamageDissipation":
        """w(y) = w1 y + w2 y^2 / 2, uniformly convex with mu = w2."""
        if w1 < 0 or w2 < 0:
            raise MaterialError(f"polynomial dissipation needs w1, w2 >= 0, got {w1!r}, {w2!r}")

        def w(y):
            y = np.asarray(y, dtype=float)
            return w1 * y + 0.5 * w2 * y * y

        def w_prime(y):
            return w1 + w2 * np.asarray(y, dtype=float)

        return cls(w, w_prime, float(w2), "polynomial", {"w1": float(w1), "w2": float(w2)})

    @classmethod
    def linear(cls, w1: float) -> "DamageDissipation":
        if w1 < 0:
            raise MaterialError(f"linear dissipation needs w1 >= 0, got {w1!r}")

        def w(y):
            return w1 * np.asarray(y, dtype=float)

        def w_prime(y):
            return np.full_like(np.asarray(y, dtype=float), w1)

        return cls(w, w_prime, 0.0, "linear", {"w1": float(w1)})

    @classmethod
    def custom(cls, w, mu: Optional[float] = None, params=None) -> "DamageDissipation":
        """Dissipation from a callable; mu defaults to the smallest second-difference quotient."""
        fn = as_array_fn(w)
        if mu is None:
            y = np.linspace(0.0, 1.0, 257)
            h = y[1] - y[0]
            v = fn(y)
            mu = max(0.0, float(np.min((v[2:] - 2.0 * v[1:-1] + v[:-2]) / h**2)))
        return cls(fn, _clamped_first(fn), float(mu), "custom", dict(params or {}))

    @classmethod
    def tabulated(cls, y, values) -> "DamageDissipation":
        return cls.custom(_tabulated(y, values, "dissipation"), params={"samples": len(values)})

    def check_convexity(self, grid_resolution: int = 64, tolerance: float = 1e-10) -> bool:
        """Three-point test w(mid) <= avg - mu/8 |a-b|^2 on all grid pairs, and w >= 0."""
        y = np.linspace(0.0, 1.0, grid_resolution + 1)
        A, B = y[:, None], y[None, :]
        excess = self.w(0.5 * (A + B)) - 0.5 * (self.w(A) + self.w(B)) + self.mu / 8.0 * (A - B) ** 2
        return bool(np.max(excess) <= tolerance and np.min(self.w(y)) >= -tolerance)


@dataclass(frozen=True)
class LayerMaterial:
    modulus: ElasticModulus
    dissipation: DamageDissipation


def hardening_params(modulus: ElasticModulus, grid_resolution: int = 256, closed_form: bool = True) -> HardeningParams:
    """Hardening constants (m, M, eps) of a modulus.

    Args:
        modulus: modulus to analyse.
        grid_resolution: intervals of the probe grid on [0, 1].
        closed_form: use the exact expressions for the power family.

    Returns:
        HardeningParams: m = min(E''E/2 - E'^2), M = max E'', eps = min E,
        plus a flag when the grid value of m is within 1e-8 of zero.

    Raises:
        MaterialError: if E <= 0 somewhere on the probe grid.
    """
    y = np.linspace(0.0, 1.0, int(grid_resolution) + 1)
    E = modulus.E(y)
    if np.any(E <= 0) or not np.all(np.isfinite(E)):
        bad = int(np.argmin(E))
        raise MaterialError(f"modulus must be positive on [0, 1]; E({y[bad]!r}) = {E[bad]!r}")
    if closed_form and modulus.family_tag == "power":
        a, b = modulus.params["a"], modulus.params["b"]
        m = 0.5 * a * a * b * (1.0 - b) / 4.0 ** (1.0 + b)
        return HardeningParams(m, a * b * (1.0 + b), a * 2.0 ** (-b), False)
    E1 = modulus.E_prime(y)
    E2 = modulus.E_second(y)
    m = float(np.min(0.5 * E2 * E - E1 * E1))
    return HardeningParams(m, float(np.max(E2)), float(np.min(E)), abs(m) <= CONSERVATIVE_MARGIN)


@dataclass
class ConvexityBudget:
    """Parameter budget m/M - lambda L^2 / pi^2 of the regularity condition."""

    m_over_M: float
    mu: float
    lam: float
    L: float
    margin: float
    per_layer: List[HardeningParams]
    improved_stability: float

    @property
    def poincare(self) -> float:
        return self.L**2 / math.pi**2

    @property
    def holds(self) -> bool:
        return self.margin > 0.0

    def to_dict(self) -> Dict[str, object]:
        return {
            "m_over_M": self.m_over_M,
            "mu": self.mu,
            "lambda": self.lam,
            "L": self.L,
            "poincare": self.poincare,
            "margin": self.margin,
            "holds": self.holds,
            "improved_stability": self.improved_stability,
            "layers": [p._asdict() for p in self.per_layer],
        }


def check_regularity_condition(
    layers: Sequence[LayerMaterial], law: CohesiveLaw, L: float, grid_resolution: int = 256
) -> ConvexityBudget:
    """Evaluate the condition min(m_i/M_i) > lambda L^2 / pi^2.

    A layer with M > 0 contributes m/M, negative when m < 0. A layer with
    M <= 0 has no curvature to divide by and contributes min(m, 0).
    """
    params = [hardening_params(layer.modulus, grid_resolution) for layer in layers]
    ratios = [p.m / p.M if p.M > 0 else min(p.m, 0.0) for p in params]
    ratio = min(ratios)
    mu = min(layer.dissipation.mu for layer in layers)
    margin = ratio - law.lam * L**2 / math.pi**2
    improved = min(margin, 0.5 * min(mu, 1.0))
    return ConvexityBudget(ratio, mu, law.lam, float(L), margin, params, improved)

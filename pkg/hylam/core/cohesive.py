"""Cohesive interface laws.

A law is a density ``phi(y, z)`` on the triangle ``0 <= y <= z`` where ``y`` is
the current slip and ``z`` the largest slip seen so far. Along the diagonal it
reduces to the loading profile ``psi``. Laws are immutable and their
evaluation is vectorized over numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import LawError

UNBOUNDED = math.inf

ScalarFn = Callable[[np.ndarray], np.ndarray]
PairFn = Callable[[np.ndarray, np.ndarray], np.ndarray]

FD_STEP = 1e-6
SECOND_DIFF_STEP = 1e-4
FAR_SLIP = 1e4
PROBE_CAP = 10.0


def as_array_fn(fn) -> ScalarFn:
    """Wrap a scalar callable so it accepts and returns float arrays."""

    def call(x):
        arr = np.asarray(x, dtype=float)
        try:
            out = np.asarray(fn(arr), dtype=float)
        except (TypeError, ValueError):
            out = np.vectorize(fn, otypes=[float])(arr)
        if out.shape != arr.shape:
            out = np.broadcast_to(out, arr.shape).astype(float)
        return out

    return call


def central_difference(fn: ScalarFn, step: float = FD_STEP, lower: float = 0.0) -> ScalarFn:
    """First derivative by central differences, one-sided next to ``lower``."""

    def derivative(x):
        x = np.asarray(x, dtype=float)
        lo = np.maximum(x - step, lower)
        hi = lo + 2.0 * step
        return (fn(hi) - fn(lo)) / (hi - lo)

    return derivative


def second_difference(fn: ScalarFn, step: float = SECOND_DIFF_STEP, lower: float = 0.0) -> ScalarFn:
    """Second derivative by a three-point stencil kept inside ``[lower, inf)``."""

    def derivative(x):
        x = np.asarray(x, dtype=float)
        c = np.maximum(x, lower + step)
        return (fn(c + step) - 2.0 * fn(c) + fn(c - step)) / step**2

    return derivative


def estimate_delta_bar(psi: ScalarFn, z_far: float = FAR_SLIP) -> float:
    """Smallest slip beyond which ``psi`` is constant, or ``UNBOUNDED``."""
    far = float(psi(np.array(z_far)))
    if float(psi(np.array(0.5 * z_far))) != far:
        return UNBOUNDED
    if float(psi(np.array(0.0))) == far:
        return 0.0
    lo, hi = 0.0, 0.5 * z_far
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(psi(np.array(mid))) == far:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    return hi


def estimate_lambda(psi: ScalarFn, delta_bar: float, levels: int = 10) -> float:
    """Largest second-difference quotient of ``psi`` on a dyadic grid, inflated by 10%."""
    top = delta_bar if math.isfinite(delta_bar) else PROBE_CAP
    if top <= 0.0:
        return 0.0
    z = np.linspace(0.0, top, 2**levels + 1)
    h = z[1] - z[0]
    values = psi(z)
    quotients = np.abs(values[2:] - 2.0 * values[1:-1] + values[:-2]) / h**2
    return 1.1 * float(quotients.max()) if quotients.size else 0.0


@dataclass(frozen=True)
class LoadingProfile:
    """Diagonal function psi of a cohesive law.

    Attributes:
        psi: energy per unit interface length as a function of the slip.
        psi_prime: first derivative.
        psi_second: second derivative where defined.
        lam: semiconvexity parameter, at least sup |psi''| on [0, delta_bar).
        delta_bar: limit slip after which psi is constant, possibly UNBOUNDED.
        family_tag: ``parabolic_capped``, ``exponential`` or ``custom``.
        params: family parameters, echoed in reports.
    """

    psi: ScalarFn
    psi_prime: ScalarFn
    psi_second: ScalarFn
    lam: float
    delta_bar: float
    family_tag: str
    params: Dict[str, float] = field(default_factory=dict)

    @classmethod
    def parabolic_capped(cls, c: float, k: float) -> "LoadingProfile":
        """psi(z) = c z (2k - z) up to k, then c k^2."""
        _require_positive(c=c, k=k)

        def psi(z):
            z = np.asarray(z, dtype=float)
            return np.where(z < k, c * z * (2.0 * k - z), c * k * k)

        def psi_prime(z):
            z = np.asarray(z, dtype=float)
            return np.where(z < k, 2.0 * c * (k - z), 0.0)

        def psi_second(z):
            z = np.asarray(z, dtype=float)
            return np.where(z < k, -2.0 * c, 0.0)

        return cls(psi, psi_prime, psi_second, 2.0 * c, float(k), "parabolic_capped", {"c": c, "k": k})

    @classmethod
    def exponential(cls, c: float, k: float) -> "LoadingProfile":
        """psi(z) = c (1 - exp(-k z)); never reaches its supremum."""
        _require_positive(c=c, k=k)

        def psi(z):
            return c * (1.0 - np.exp(-k * np.asarray(z, dtype=float)))

        def psi_prime(z):
            return c * k * np.exp(-k * np.asarray(z, dtype=float))

        def psi_second(z):
            return -c * k * k * np.exp(-k * np.asarray(z, dtype=float))

        return cls(psi, psi_prime, psi_second, c * k * k, UNBOUNDED, "exponential", {"c": c, "k": k})

    @classmethod
    def custom(
        cls,
        psi,
        psi_prime=None,
        psi_second=None,
        lam: Optional[float] = None,
        delta_bar: Optional[float] = None,
        params: Optional[Dict[str, float]] = None,
    ) -> "LoadingProfile":
        """Profile from a user callable; missing pieces are estimated numerically."""
        psi = as_array_fn(psi)
        psi_prime = as_array_fn(psi_prime) if psi_prime is not None else central_difference(psi)
        psi_second = as_array_fn(psi_second) if psi_second is not None else second_difference(psi)
        if delta_bar is None:
            delta_bar = estimate_delta_bar(psi)
        if lam is None:
            lam = estimate_lambda(psi, delta_bar)
        if lam < 0:
            raise LawError(f"lambda must be nonnegative, got {lam}")
        return cls(psi, psi_prime, psi_second, float(lam), float(delta_bar), "custom", dict(params or {}))

    @classmethod
    def tabulated(cls, z, psi) -> "LoadingProfile":
        """Monotone PCHIP interpolant of samples, constant after the last one.

        Ending the table with two equal values gives a flat end slope, so the
        profile stays C^1 across the last sample.
        """
        z = np.asarray(z, dtype=float)
        values = np.asarray(psi, dtype=float)
        if z.ndim != 1 or z.shape != values.shape or z.size < 2:
            raise LawError("tabulated profile needs matching 1D z/psi arrays with at least two samples")
        if z[0] != 0.0 or np.any(np.diff(z) <= 0):
            raise LawError("tabulated profile must start at z=0 and be strictly increasing in z")
        spline = PchipInterpolator(z, values, extrapolate=False)
        slope = spline.derivative()
        curvature = spline.derivative(2)
        last_z, last_value = float(z[-1]), float(values[-1])

        def psi_fn(x):
            x = np.asarray(x, dtype=float)
            return np.where(x >= last_z, last_value, np.nan_to_num(spline(np.clip(x, 0.0, last_z))))

        def prime_fn(x):
            x = np.asarray(x, dtype=float)
            return np.where(x >= last_z, 0.0, np.nan_to_num(slope(np.clip(x, 0.0, last_z))))

        def second_fn(x):
            x = np.asarray(x, dtype=float)
            return np.where(x >= last_z, 0.0, np.nan_to_num(curvature(np.clip(x, 0.0, last_z))))

        return cls.custom(psi_fn, prime_fn, second_fn, params={"samples": int(z.size)})

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.delta_bar)


def _require_positive(**values):
    for name, value in values.items():
        if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
            raise LawError(f"parameter {name} must be a positive number, got {value!r}")


def _probe_top(delta_bar: float) -> float:
    if math.isfinite(delta_bar):
        return min(2.0 * delta_bar, PROBE_CAP) if delta_bar > 0 else 1.0
    return PROBE_CAP


@dataclass(frozen=True)
class CohesiveLaw:
    """Loading-unloading density with its partial derivatives.

    Evaluation truncates both arguments at ``delta_bar``; ``raw_*`` hold the
    untruncated formulas.
    """

    profile: LoadingProfile
    kind: str
    raw_phi: PairFn
    raw_dy: PairFn
    raw_dz: PairFn

    @property
    def delta_bar(self) -> float:
        return self.profile.delta_bar

    @property
    def lam(self) -> float:
        return self.profile.lam

    def truncate(self, y, z) -> Tuple[np.ndarray, np.ndarray]:
        y, z = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(z, dtype=float))
        if self.profile.bounded:
            return np.minimum(y, self.delta_bar), np.minimum(z, self.delta_bar)
        return y, z

    def phi(self, y, z) -> np.ndarray:
        return self.raw_phi(*self.truncate(y, z))

    def d_phi_dy(self, y, z) -> np.ndarray:
        yt, zt = self.truncate(y, z)
        out = self.raw_dy(yt, zt)
        if self.profile.bounded:
            out = np.where(np.asarray(y) >= self.delta_bar, 0.0, out)
        return out

    def d_phi_dz(self, y, z) -> np.ndarray:
        yt, zt = self.truncate(y, z)
        out = self.raw_dz(yt, zt)
        if self.profile.bounded:
            out = np.where(np.asarray(z) >= self.delta_bar, 0.0, out)
        return out

    def psi(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.profile.bounded:
            z = np.minimum(z, self.delta_bar)
        return self.profile.psi(z)

    def psi_prime(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        out = self.profile.psi_prime(z)
        if self.profile.bounded:
            out = np.where(z >= self.delta_bar, 0.0, out)
        return out

    def slip_energy(self, s, gamma_floor) -> np.ndarray:
        """phi(|s|, gamma_floor v |s|): the incremental interface density."""
        a = np.abs(np.asarray(s, dtype=float))
        return self.phi(a, np.maximum(gamma_floor, a))

    def slip_slope(self, a, gamma_floor) -> np.ndarray:
        """Derivative of ``slip_energy`` in |s| for |s| = a > 0.

        Loading branch (a >= gamma_floor) follows psi', unloading follows
        d_phi_dy at the frozen history.
        """
        a = np.asarray(a, dtype=float)
        g = np.broadcast_to(np.asarray(gamma_floor, dtype=float), a.shape)
        return np.where(a >= g, self.psi_prime(a), self.d_phi_dy(a, np.maximum(g, a)))

    def stick_threshold(self, gamma_floor) -> np.ndarray:
        """Right slope of ``slip_energy`` at s = 0: psi'(0) without history."""
        g = np.asarray(gamma_floor, dtype=float)
        return np.where(g > 0.0, self.d_phi_dy(np.zeros_like(g), g), self.psi_prime(np.zeros_like(g)))


def _quadratic_pieces(profile: LoadingProfile) -> Tuple[PairFn, PairFn, PairFn]:
    psi, dpsi, d2psi = profile.psi, profile.psi_prime, profile.psi_second
    slope_at_zero = float(dpsi(np.array(0.0)))

    def split(y, z):
        y, z = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(z, dtype=float))
        positive = z > 0.0
        return y, positive, np.where(positive, z, 1.0)

    def phi(y, z):
        y, positive, zs = split(y, z)
        d = dpsi(zs)
        return np.where(positive, 0.5 * d / zs * y * y + psi(zs) - 0.5 * zs * d, 0.0)

    def dy(y, z):
        y, positive, zs = split(y, z)
        return np.where(positive, dpsi(zs) * y / zs, 0.0)

    def dz(y, z):
        y, positive, zs = split(y, z)
        ratio = y / zs
        return np.where(positive, 0.5 * (dpsi(zs) - zs * d2psi(zs)) * (1.0 - ratio * ratio), 0.5 * slope_at_zero)

    return phi, dy, dz


def make_quadratic_unloading(profile: LoadingProfile) -> CohesiveLaw:
    """Law with quadratic unloading towards the origin from every history point.

    Raises:
        LawError: if psi(0) != 0 or psi' is negative at a probe point.
    """
    z = np.linspace(0.0, _probe_top(profile.delta_bar), 257)
    if abs(float(profile.psi(np.array(0.0)))) > 1e-12:
        raise LawError("loading profile must vanish at zero slip")
    slopes = profile.psi_prime(z)
    if np.any(slopes < -1e-12):
        bad = int(np.argmin(slopes))
        raise LawError(f"loading profile decreases at z={z[bad]!r} (psi'={slopes[bad]!r})")
    phi, dy, dz = _quadratic_pieces(profile)
    return CohesiveLaw(profile, "quadratic_unloading", phi, dy, dz)


def make_separable(phi1, phi2, phi1_prime=None, phi2_prime=None) -> CohesiveLaw:
    """Law phi(y, z) = phi1(y) + phi2(z).

    Raises:
        LawError: if phi2 decreases or phi1 is negative on the probe grid.
    """
    f1 = as_array_fn(phi1)
    f2 = as_array_fn(phi2)
    d1 = as_array_fn(phi1_prime) if phi1_prime is not None else central_difference(f1)
    d2 = as_array_fn(phi2_prime) if phi2_prime is not None else central_difference(f2)
    z = np.linspace(0.0, PROBE_CAP, 1025)
    if np.any(np.diff(f2(z)) < -1e-12):
        raise LawError("phi2 must be non-decreasing on the probe grid")
    if np.any(f1(z) < -1e-12):
        raise LawError("phi1 must be nonnegative on the probe grid")

    def psi(x):
        return f1(x) + f2(x)

    def psi_prime(x):
        return d1(x) + d2(x)

    profile = LoadingProfile.custom(psi, psi_prime, second_difference(psi))

    def phi(y, zz):
        y, zz = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(zz, dtype=float))
        return f1(y) + f2(zz)

    def dy(y, zz):
        y, zz = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(zz, dtype=float))
        return d1(y)

    def dz(y, zz):
        y, zz = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(zz, dtype=float))
        return d2(zz)

    return CohesiveLaw(profile, "separable", phi, dy, dz)


@dataclass
class AssumptionEntry:
    """One line of an assumption report."""

    name: str
    status: str
    worst_value: float
    location: Tuple[float, ...]
    detail: str = ""
    required: bool = True

    @property
    def passed(self) -> bool:
        return self.status != "fail"


@dataclass
class AssumptionReport:
    """Grid-based certificate of the structural assumptions on a law."""

    kind: str
    family_tag: str
    grid_resolution: int
    tolerance: float
    entries: List[AssumptionEntry]
    constant_ck: float
    lambda_estimate: float

    def entry(self, name: str) -> AssumptionEntry:
        for item in self.entries:
            if item.name == name:
                return item
        raise KeyError(name)

    @property
    def passed(self) -> bool:
        return all(item.passed for item in self.entries if item.required)

    def failures(self) -> List[AssumptionEntry]:
        return [item for item in self.entries if not item.passed]

    def to_text(self) -> str:
        lines = [
            f"law: {self.kind} ({self.family_tag})",
            f"grid_resolution: {self.grid_resolution}",
            f"tolerance: {self.tolerance!r}",
            f"lambda_estimate: {self.lambda_estimate!r}",
            f"C_K: {self.constant_ck!r}",
            "",
        ]
        for item in self.entries:
            flag = "" if item.required else " (optional)"
            loc = ", ".join(repr(float(v)) for v in item.location)
            lines.append(f"{item.name:<20} {item.status.upper():<8} worst={item.worst_value!r} at ({loc}){flag}")
            if item.detail:
                lines.append(f"    {item.detail}")
        lines.append("")
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"


def _worst(values: np.ndarray, mask: np.ndarray, coords, mode: str = "max"):
    """Return (worst value, coordinates) of ``values`` restricted to ``mask``."""
    if not np.any(mask):
        return 0.0, tuple(0.0 for _ in coords)
    masked = np.where(mask, values, -np.inf if mode == "max" else np.inf)
    idx = np.unravel_index(np.argmax(masked) if mode == "max" else np.argmin(masked), masked.shape)
    return float(masked[idx]), tuple(float(np.broadcast_to(c, masked.shape)[idx]) for c in coords)


def check_law(law: CohesiveLaw, grid_resolution: int = 64, tolerance: float = 1e-9) -> AssumptionReport:
    """Probe a law for the structural assumptions of the interface model.

    Args:
        law: law to certify.
        grid_resolution: number of intervals per probe axis (>= 8).
        tolerance: absolute slack granted to every inequality.

    Returns:
        AssumptionReport: one entry per assumption; failures are entries,
        never exceptions.
    """
    if grid_resolution < 8:
        raise ValueError("grid_resolution must be at least 8")
    res = int(grid_resolution)
    tol = float(tolerance)
    dbar = law.delta_bar
    top = _probe_top(dbar)
    z = np.linspace(0.0, top, res + 1)
    theta = np.linspace(0.0, 1.0, res + 1)
    Y = theta[:, None] * z[None, :]
    Z = np.broadcast_to(z[None, :], Y.shape)
    P = law.phi(Y, Z)
    custom = law.kind == "separable" or law.profile.family_tag == "custom"
    entries: List[AssumptionEntry] = []

    entries.append(AssumptionEntry(
        "phi1", "assumed" if custom else "pass", 0.0, (0.0, 0.0),
        "lower semicontinuity cannot be probed for custom input" if custom else "continuous by construction",
    ))

    far = np.array([1e4 * top, 1e6 * top])
    far_vals = law.phi(np.zeros(2), far)
    sup0 = float(np.max(law.phi(np.zeros_like(z), z)))
    growth = abs(float(far_vals[1] - far_vals[0]))
    ok = np.all(np.isfinite(far_vals)) and growth <= tol * max(1.0, abs(float(far_vals[1])))
    entries.append(AssumptionEntry("phi2", "pass" if ok else "fail", max(sup0, float(far_vals[1])), (0.0, float(far[1])),
                                   f"phi(0, z) bounded; tail growth {growth!r}"))

    # phi(y, .) non-decreasing on [y, inf): rows are fixed y = z_i
    M = law.phi(z[:, None], np.broadcast_to(z[None, :], (res + 1, res + 1)))
    idx_i, idx_j = np.indices((res + 1, res))
    valid = idx_j >= idx_i
    steps = M[:, 1:] - M[:, :-1]
    worst, loc = _worst(steps, valid, (z[:, None], z[None, :-1]), mode="min")
    entries.append(AssumptionEntry("phi3", "pass" if worst >= -tol else "fail", worst, loc,
                                   "min increment of phi(y, .) along z >= y"))

    sub = z[:: max(1, res // 16)]
    Ms = law.phi(sub[:, None], np.broadcast_to(sub[None, :], (sub.size, sub.size)))
    mixed = Ms[:-1, :-1] - Ms[:-1, 1:] - Ms[1:, :-1] + Ms[1:, 1:]
    ii, jj = np.indices(mixed.shape)
    valid = ii + 1 <= jj
    worst, loc = _worst(np.abs(mixed), valid, (sub[:-1, None], sub[None, :-1]))
    entries.append(AssumptionEntry("phi4", "pass" if worst <= tol else "fail", worst, loc,
                                   "separability: mixed second difference", required=False))

    A = z[:, None]
    B = z[None, :]
    mid = law.psi(0.5 * (A + B))
    avg = 0.5 * (law.psi(A) + law.psi(B))
    excess = mid - avg - law.lam / 8.0 * (A - B) ** 2
    worst, loc = _worst(excess, np.ones_like(excess, dtype=bool), (A, B))
    entries.append(AssumptionEntry("phi5", "pass" if worst <= tol else "fail", worst, loc,
                                   f"lambda-convexity of psi with lambda={law.lam!r}"))
    worst_c, loc_c = _worst(mid - avg, np.ones_like(excess, dtype=bool), (A, B), mode="min")
    entries.append(AssumptionEntry("concave", "pass" if worst_c >= -tol else "fail", worst_c, loc_c,
                                   "midpoint concavity of psi", required=law.kind == "quadratic_unloading"))

    below = z < dbar if math.isfinite(dbar) else np.ones_like(z, dtype=bool)
    curvature = np.abs(law.profile.psi_second(z))
    lam_est, lam_loc = _worst(curvature, below, (z,))
    entries.append(AssumptionEntry("lambda", "pass" if law.lam >= lam_est - tol else "fail", lam_est, lam_loc,
                                   f"sup |psi''| on [0, delta_bar); configured lambda={law.lam!r}"))

    first = P[1:, :] - P[:-1, :]
    second = P[2:, :] - 2.0 * P[1:-1, :] + P[:-2, :]
    positive_z = np.broadcast_to(z[None, :] > 0, first.shape)
    w1, l1 = _worst(first, positive_z, (Y[:-1, :], Z[:-1, :]), mode="min")
    w2, l2 = _worst(second, np.broadcast_to(z[None, :] > 0, second.shape), (Y[1:-1, :], Z[1:-1, :]), mode="min")
    worst, loc = (w1, l1) if w1 <= w2 else (w2, l2)
    entries.append(AssumptionEntry("phi6", "pass" if worst >= -tol else "fail", worst, loc,
                                   "phi(., z) non-decreasing and convex on [0, z]"))

    zp = z[z > 0]
    diag_slope = np.abs(law.d_phi_dy(zp, zp) - law.psi_prime(zp))
    zero_slope = np.abs(law.d_phi_dy(np.zeros_like(zp), zp))
    err = np.maximum(diag_slope, zero_slope)
    scale = max(1.0, float(np.max(np.abs(law.psi_prime(z)))))
    worst, loc = _worst(err, np.ones_like(err, dtype=bool), (zp,))
    entries.append(AssumptionEntry("phi7", "pass" if worst <= tol * scale else "fail", worst, loc,
                                   "d_phi_dy(z, z) = psi'(z) and d_phi_dy(0, z) = 0"))

    dy = np.abs(law.d_phi_dy(Y, Z))
    worst, loc = _worst(dy, np.ones_like(dy, dtype=bool), (Y, Z))
    entries.append(AssumptionEntry("phi8", "pass" if np.isfinite(worst) else "fail", worst, loc,
                                   "sup |d_phi_dy| on the probe triangle"))

    constant_ck, loc_ck = _strict_monotonicity(law, res, top)
    entries.append(AssumptionEntry("phi9", "pass" if constant_ck > tol else "fail", constant_ck, loc_ck,
                                   "uniform strict monotonicity of phi(y, .) away from the diagonal", required=False))

    diag = np.abs(law.phi(z, z) - law.psi(z))
    worst, loc = _worst(diag, np.ones_like(diag, dtype=bool), (z,))
    entries.append(AssumptionEntry("diagonal", "pass" if worst <= 1e-12 * scale else "fail", worst, loc,
                                   "phi(z, z) = psi(z)"))

    Yt, Zt = law.truncate(Y, Z)
    trunc = np.abs(law.raw_phi(Y, Z) - law.raw_phi(Yt, Zt))
    worst, loc = _worst(trunc, np.ones_like(trunc, dtype=bool), (Y, Z))
    entries.append(AssumptionEntry("truncation", "pass" if worst <= tol else "fail", worst, loc,
                                   "phi(y, z) = phi(y ^ delta_bar, z ^ delta_bar)"))

    worst, loc = _worst(P, np.ones_like(P, dtype=bool), (Y, Z), mode="min")
    entries.append(AssumptionEntry("nonnegative", "pass" if worst >= -tol else "fail", worst, loc, "phi >= 0"))

    worst, loc = _slip_map_convexity(law, z, res, top)
    entries.append(AssumptionEntry("slip_lambda_convex", "pass" if worst <= tol else "fail", worst, loc,
                                   "y -> phi(|y|, gamma v |y|) is lambda-convex"))

    return AssumptionReport(law.kind, law.profile.family_tag, res, tol, entries, constant_ck, lam_est)


def _strict_monotonicity(law: CohesiveLaw, res: int, top: float):
    """Empirical constant C_K on a compact set strictly inside the triangle."""
    dbar = law.delta_bar
    zb = min(dbar, top) if math.isfinite(dbar) else top
    if zb <= 0.0:
        return 0.0, (0.0, 0.0)
    eta = zb / 8.0
    ys = np.linspace(0.0, zb - 2.0 * eta, res + 1)
    zs = np.linspace(eta, zb - eta, res + 1)
    V = law.phi(ys[:, None], np.broadcast_to(zs[None, :], (ys.size, zs.size)))
    quotient = (V[:, 1:] - V[:, :-1]) / (zs[1:] - zs[:-1])[None, :]
    valid = zs[None, :-1] >= ys[:, None] + eta
    if not np.any(valid):
        return 0.0, (0.0, 0.0)
    value, loc = _worst(quotient, valid, (ys[:, None], zs[None, :-1]), mode="min")
    return max(value, 0.0), loc


def _slip_map_convexity(law: CohesiveLaw, z: np.ndarray, res: int, top: float):
    y = np.linspace(-top, top, 2 * res + 1)
    A = y[:, None]
    B = y[None, :]
    worst, loc = -np.inf, (0.0, 0.0, 0.0)
    for gamma in z[:: max(1, res // 8)]:
        f = lambda s: law.slip_energy(s, gamma)  # noqa: E731
        excess = f(0.5 * (A + B)) - 0.5 * (f(A) + f(B)) - law.lam / 8.0 * (A - B) ** 2
        idx = np.unravel_index(np.argmax(excess), excess.shape)
        if excess[idx] > worst:
            worst = float(excess[idx])
            loc = (float(gamma), float(y[idx[0]]), float(y[idx[1]]))
    return worst, loc

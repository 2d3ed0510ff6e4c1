"""Prescribed end displacement t -> u_bar(t) and time partitions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Sequence

import numpy as np


@dataclass(frozen=True)
class LoadProgram:
    """Piecewise-linear load history.

    ``linear_ramp`` extrapolates its slope for every t; the other families
    interpolate their knots and are constant outside them.
    """

    family_tag: str
    knots: np.ndarray
    values: np.ndarray
    params: Dict[str, object] = field(default_factory=dict)

    @classmethod
    def linear_ramp(cls, rate: float, start: float = 0.0) -> "LoadProgram":
        """u_bar(t) = start + rate * t."""
        return cls("linear_ramp", np.array([0.0, 1.0]), np.array([start, start + rate], dtype=float),
                   {"rate": float(rate), "start": float(start)})

    @classmethod
    def triangle(cls, peak_time: float, peak_value: float, end_time: float,
                 end_value: float = 0.0, start: float = 0.0) -> "LoadProgram":
        """Load to ``peak_value`` at ``peak_time``, then back to ``end_value`` at ``end_time``."""
        if not 0.0 < peak_time < end_time:
            raise ValueError(f"triangle needs 0 < peak_time < end_time, got {peak_time!r}, {end_time!r}")
        return cls("triangle", np.array([0.0, peak_time, end_time]),
                   np.array([start, peak_value, end_value], dtype=float),
                   {"peak_time": float(peak_time), "peak_value": float(peak_value), "end_time": float(end_time),
                    "end_value": float(end_value), "start": float(start)})

    @classmethod
    def tabulated(cls, samples: Sequence[Sequence[float]]) -> "LoadProgram":
        """Samples ``[[t0, u0], [t1, u1], ...]`` with strictly increasing times."""
        arr = np.asarray(samples, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 2:
            raise ValueError("tabulated load needs at least two [t, u] samples")
        if np.any(np.diff(arr[:, 0]) <= 0):
            raise ValueError("tabulated load times must be strictly increasing")
        return cls("tabulated", arr[:, 0].copy(), arr[:, 1].copy(), {"samples": arr.tolist()})

    @property
    def extrapolates(self) -> bool:
        return self.family_tag == "linear_ramp"

    def value(self, t):
        t = np.asarray(t, dtype=float)
        if self.extrapolates:
            rate = self.values[1] - self.values[0]
            return self.values[0] + rate * t
        return np.interp(t, self.knots, self.values)

    def __call__(self, t):
        return self.value(t)

    def _pieces(self, t0: float, t1: float) -> np.ndarray:
        """Times t0 < knots < t1 < ... cutting [t0, t1] into linear pieces."""
        inner = self.knots[(self.knots > t0) & (self.knots < t1)] if not self.extrapolates else np.empty(0)
        return np.concatenate(([t0], inner, [t1]))

    def total_variation(self, t0: float, t1: float) -> float:
        """Integral of |du_bar/dt| over [t0, t1]."""
        if t1 <= t0:
            return 0.0
        return float(np.sum(np.abs(np.diff(self.value(self._pieces(t0, t1))))))

    def excursion_integral(self, t0: float, t1: float) -> float:
        """Integral of |du_bar/dt| * |u_bar(t) - u_bar(t0)| over [t0, t1]."""
        if t1 <= t0:
            return 0.0
        v = self.value(self._pieces(t0, t1)) - float(self.value(t0))
        antiderivative = 0.5 * v * np.abs(v)
        return float(np.sum(np.abs(np.diff(antiderivative))))

    def sup_norm(self, T: float) -> float:
        """max |u_bar| on [0, T]."""
        return float(np.max(np.abs(self.value(self._pieces(0.0, T)))))


@dataclass(frozen=True)
class TimePartition:
    """Times 0 = t_0 < t_1 < ... < t_n = T."""

    times: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise ValueError("a time partition needs at least two times")
        if times[0] != 0.0:
            raise ValueError(f"time partition must start at 0, got {times[0]!r}")
        if np.any(np.diff(times) <= 0):
            raise ValueError("time partition must be strictly increasing")
        object.__setattr__(self, "times", times)

    @classmethod
    def uniform(cls, T: float, n_steps: int) -> "TimePartition":
        if n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {n_steps!r}")
        return cls(np.linspace(0.0, float(T), int(n_steps) + 1))

    @classmethod
    def tabulated(cls, times: Sequence[float]) -> "TimePartition":
        return cls(np.asarray(times, dtype=float))

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def fineness(self) -> float:
        return float(np.max(np.diff(self.times)))

    def step_index(self, t: float) -> int:
        """Index k of the piecewise-constant interpolant t in [t_k, t_{k+1})."""
        return int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, self.n_steps))

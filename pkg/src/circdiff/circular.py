"""Circular arithmetic, Bessel helpers and density primitives.

Angles are represented as plain floats (or float arrays) in the canonical
interval (-pi, pi]. Every function here is pure and vectorised where it
makes sense.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import _kernels
from .errors import DegenerateMeanError, InvalidArgumentError

TWO_PI = 2.0 * math.pi
LOG_TWO_PI = math.log(TWO_PI)

# resultant lengths below this are treated as zero in circular_mean
_RESULTANT_TOL = 1e-12


def _finite(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} must be finite")
    return arr


def _out(arr):
    # hand 0-d results back as python floats
    arr = np.asarray(arr)
    return float(arr) if arr.ndim == 0 else arr


def wrap(x):
    """Representative of ``x`` modulo 2*pi in (-pi, pi]."""
    arr = _finite(x, "angle")
    return _out(_kernels.wrap(arr))


def angular_diff(a, b):
    """Signed minimal difference ``wrap(a - b)``."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return _out(_kernels.wrap(d))


def circular_mean(angles) -> float:
    """atan2 of the summed sines and cosines.

    Raises DegenerateMeanError when the resultant vanishes (e.g. an
    antipodal pair), since the direction is then undefined.
    """
    a = np.asarray(angles, dtype=float).ravel()
    if a.size == 0:
        raise InvalidArgumentError("circular_mean of an empty sample")
    s = np.sin(a).sum()
    c = np.cos(a).sum()
    if math.hypot(s, c) <= _RESULTANT_TOL * a.size:
        raise DegenerateMeanError("resultant length is zero; mean direction undefined")
    return float(wrap(math.atan2(s, c)))


def bias_and_concentration(mu_true: float, estimates) -> tuple[float, float]:
    """Circular bias atan2(S, C) and concentration sqrt(S^2 + C^2).

    S and C are the *averages* of sin(mu - mu_hat) and cos(mu - mu_hat), so
    the concentration lies in [0, 1].
    """
    est = np.asarray(estimates, dtype=float).ravel()
    if est.size == 0:
        raise InvalidArgumentError("no estimates given")
    d = mu_true - est
    s = float(np.mean(np.sin(d)))
    c = float(np.mean(np.cos(d)))
    return math.atan2(s, c), min(1.0, math.hypot(s, c))


def log_bessel_i0(kappa):
    """log I0(kappa) without overflow (uses the exponentially scaled form)."""
    k = _finite(kappa, "kappa")
    if np.any(k < 0):
        raise InvalidArgumentError("kappa must be >= 0")
    return _out(np.log(special.i0e(k)) + k)


def bessel_ratio(kappa):
    """A(kappa) = I1(kappa) / I0(kappa), in [0, 1)."""
    k = _finite(kappa, "kappa")
    if np.any(k < 0):
        raise InvalidArgumentError("kappa must be >= 0")
    return _out(special.i1e(k) / special.i0e(k))


def log_wrapped_normal_pdf(theta, center, scale):
    scale_arr = np.asarray(scale, dtype=float)
    if np.any(~(scale_arr > 0)):
        raise InvalidArgumentError("scale must be > 0")
    d = np.asarray(theta, dtype=float) - np.asarray(center, dtype=float)
    return _out(_kernels.log_wrapped_normal(d, scale_arr))


def wrapped_normal_pdf(theta, center, scale):
    """Wrapped normal density with location ``center`` and scale ``scale``."""
    return _out(np.exp(log_wrapped_normal_pdf(theta, center, scale)))


def log_von_mises_pdf(theta, mu, kappa):
    k = _finite(kappa, "kappa")
    if np.any(k < 0):
        raise InvalidArgumentError("kappa must be >= 0")
    th = np.asarray(theta, dtype=float)
    return _out(k * np.cos(th - mu) - LOG_TWO_PI - log_bessel_i0(k))


def von_mises_pdf(theta, mu, kappa):
    """von Mises density exp(kappa cos(theta - mu)) / (2 pi I0(kappa))."""
    return _out(np.exp(log_von_mises_pdf(theta, mu, kappa)))


@dataclass(frozen=True)
class DensityGrid:
    """Density values on the uniform grid theta_j = -pi + j*dtheta, j = 1..k."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 16:
            raise InvalidArgumentError("a density grid needs at least 16 points")
        object.__setattr__(self, "values", v)

    @property
    def k(self) -> int:
        return self.values.size

    @property
    def dtheta(self) -> float:
        return TWO_PI / self.k

    @property
    def theta_grid(self) -> np.ndarray:
        return circle_grid(self.k)

    def mass(self) -> float:
        return float(self.values.sum() * self.dtheta)

    def normalized(self) -> "DensityGrid":
        return DensityGrid(self.values / self.mass())

    @classmethod
    def from_function(cls, func, k: int) -> "DensityGrid":
        return cls(np.asarray(func(circle_grid(k)), dtype=float))


def circle_grid(k: int) -> np.ndarray:
    """k uniform points on (-pi, pi], the last one at pi."""
    if k < 1:
        raise InvalidArgumentError("k must be positive")
    return -math.pi + TWO_PI * np.arange(1, k + 1) / k


def hellinger_discrete(p: DensityGrid, q: DensityGrid) -> float:
    """Hellinger distance between two gridded densities via cell masses."""
    if p.k != q.k:
        raise InvalidArgumentError(f"grid mismatch: {p.k} vs {q.k} points")
    if np.any(p.values < 0) or np.any(q.values < 0):
        raise InvalidArgumentError("densities must be nonnegative")
    w = p.dtheta
    diff = np.sqrt(p.values * w) - np.sqrt(q.values * w)
    return float(min(1.0, math.sqrt(0.5 * np.dot(diff, diff))))

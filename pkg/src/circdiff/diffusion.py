"""Circular Brownian motion and the von Mises process.

Simulation uses a wrapped Euler-Maruyama scheme. Transition densities:

* circular Brownian motion - exact wrapped normal;
* von Mises process - an analytic approximation that interpolates between
  a wrapped Gaussian at short times and the von Mises stationary law.

For the von Mises approximation write ``eps = gamma * sigma**2 * t`` with
``gamma = kappa * I1(kappa) / I0(kappa)`` and ``sqrt_q = exp(-eps / 2)``.
The Gaussian part has variance ``(1 - q) / (gamma * sqrt_q) = 2 sinh(eps/2)
/ gamma`` and the von Mises part has concentration ``kappa / (1 + sqrt_q)``.
Everything is assembled in log space so large kappa cannot overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import _kernels
from .circular import (
    LOG_TWO_PI,
    TWO_PI,
    bessel_ratio,
    circle_grid,
    log_bessel_i0,
    log_wrapped_normal_pdf,
    wrapped_normal_pdf,
)
from .errors import InvalidArgumentError, NearSingularTimeError

# sigma^2 * t below this is treated as t -> 0 (density is a point mass)
SHORT_TIME_VARIANCE = 1e-14
# below this eps the sinh form of the Gaussian variance uses its series
_EPS_SERIES = 1e-4
DEFAULT_NORM_GRID = 2048


@dataclass(frozen=True)
class CbmParams:
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidArgumentError("sigma must be a positive finite number")


@dataclass(frozen=True)
class VonMisesParams:
    """Drift -lam*sin(theta - mu), diffusion sigma; stationary kappa = 2 lam / sigma^2."""

    mu: float
    lam: float
    sigma: float

    def __post_init__(self):
        if not math.isfinite(self.mu):
            raise InvalidArgumentError("mu must be finite")
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise InvalidArgumentError("lam must be a positive finite number")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidArgumentError("sigma must be a positive finite number")
        object.__setattr__(self, "mu", float(_kernels.wrap(self.mu)))

    @property
    def kappa(self) -> float:
        return 2.0 * self.lam / self.sigma**2

    @property
    def gamma(self) -> float:
        k = self.kappa
        return k * bessel_ratio(k)

    @classmethod
    def from_kappa(cls, mu: float, kappa: float, sigma: float) -> "VonMisesParams":
        return cls(mu=mu, lam=0.5 * kappa * sigma**2, sigma=sigma)


@dataclass(frozen=True)
class AngularPath:
    times: np.ndarray
    angles: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        a = np.asarray(self.angles, dtype=float)
        if t.ndim != 1 or a.ndim != 1 or t.size != a.size:
            raise InvalidArgumentError("times and angles must be 1-d and of equal length")
        if t.size < 2:
            raise InvalidArgumentError("a path needs at least two observations")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(a))):
            raise InvalidArgumentError("times and angles must be finite")
        if np.any(np.diff(t) <= 0):
            raise InvalidArgumentError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "angles", _kernels.wrap(a))

    def __len__(self) -> int:
        return self.times.size

    @property
    def elapsed(self) -> np.ndarray:
        return np.diff(self.times)

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    @classmethod
    def regular(cls, angles, dt: float, t0: float = 0.0) -> "AngularPath":
        a = np.asarray(angles, dtype=float)
        return cls(t0 + dt * np.arange(a.size), a)


@dataclass(frozen=True)
class TpdConstants:
    gamma: float
    q: float
    norm_const: float
    log_norm_const: float = field(default=float("nan"))


def _check_sim(n: int, dt: float):
    if int(n) != n or n < 2:
        raise InvalidArgumentError("n must be an integer >= 2")
    if not (math.isfinite(dt) and dt > 0):
        raise InvalidArgumentError("dt must be positive")


def simulate_cbm(params: CbmParams, theta0: float, n: int, dt: float, seed: int) -> AngularPath:
    """n observations of wrapped Brownian motion started at theta0."""
    _check_sim(n, dt)
    z = np.random.default_rng(seed).standard_normal(int(n) - 1)
    angles = _kernels.euler_vm(float(theta0), 0.0, 0.0, params.sigma, float(dt), z)
    return AngularPath.regular(angles, dt)


def simulate_vmp(params: VonMisesParams, theta0: float, n: int, dt: float, seed: int) -> AngularPath:
    """n observations of the von Mises process via wrapped Euler-Maruyama."""
    _check_sim(n, dt)
    z = np.random.default_rng(seed).standard_normal(int(n) - 1)
    angles = _kernels.euler_vm(float(theta0), params.lam, params.mu, params.sigma, float(dt), z)
    return AngularPath.regular(angles, dt)


def _check_elapsed(elapsed):
    e = np.asarray(elapsed, dtype=float)
    if np.any(~(e > 0)) or not np.all(np.isfinite(e)):
        raise InvalidArgumentError("elapsed time must be positive and finite")
    return e


def cbm_tpd(theta_t, theta_s, elapsed, params: CbmParams):
    """Wrapped normal transition density of circular Brownian motion."""
    e = _check_elapsed(elapsed)
    return wrapped_normal_pdf(theta_t, theta_s, params.sigma * np.sqrt(e))


def cbm_log_tpd(theta_t, theta_s, elapsed, params: CbmParams):
    e = _check_elapsed(elapsed)
    return log_wrapped_normal_pdf(theta_t, theta_s, params.sigma * np.sqrt(e))


def _vm_shape(elapsed: np.ndarray, params: VonMisesParams):
    """(gamma, eps, gaussian scale, von Mises concentration) per elapsed time."""
    kappa = params.kappa
    gamma = params.gamma
    var_t = params.sigma**2 * elapsed
    eps = gamma * var_t
    with np.errstate(over="ignore"):
        var = np.where(
            eps < _EPS_SERIES,
            var_t * (1.0 + eps**2 / 24.0),
            2.0 * np.sinh(0.5 * np.maximum(eps, _EPS_SERIES)) / max(gamma, 1e-300),
        )
    scale = np.sqrt(var)
    conc = kappa / (1.0 + np.exp(-0.5 * eps))
    return gamma, eps, scale, conc


def _check_short_time(elapsed: np.ndarray, params: VonMisesParams):
    if np.any(params.sigma**2 * elapsed < SHORT_TIME_VARIANCE):
        raise NearSingularTimeError(
            "sigma^2 * elapsed is below 1e-14; use the short-time (point mass) limit"
        )


def vmp_tpd_unnormalized_log(theta_t, theta0, elapsed, params: VonMisesParams):
    """log of the unnormalised approximate von Mises transition density.

    The Gaussian factor is written as 2*pi times a wrapped normal density,
    which only rescales the image sum by a theta-independent constant and
    makes the t -> infinity limit exactly the stationary von Mises law.
    """
    e = _check_elapsed(elapsed)
    _check_short_time(e, params)
    _, eps, scale, conc = _vm_shape(e, params)
    kappa = params.kappa
    sqrt_q = np.exp(-0.5 * eps)
    weight = np.tanh(0.25 * eps)  # (1 - sqrt q) / (1 + sqrt q)
    th = np.asarray(theta_t, dtype=float)
    th0 = np.asarray(theta0, dtype=float)
    out = (
        LOG_TWO_PI
        + log_wrapped_normal_pdf(th, th0, scale)
        - weight * (LOG_TWO_PI + log_bessel_i0(kappa))
        + conc * (np.cos(th - params.mu) - sqrt_q * np.cos(th0 - params.mu))
    )
    return out if np.ndim(out) else float(out)


def vmp_tpd_unnormalized(theta_t, theta0, elapsed, params: VonMisesParams):
    return np.exp(vmp_tpd_unnormalized_log(theta_t, theta0, elapsed, params))


def trapezoid_norm_const(log_integrand, grid_points: int = DEFAULT_NORM_GRID) -> tuple[float, float]:
    """1 / integral of exp(log_integrand) over the circle, and its log.

    Composite trapezoid on a uniform periodic grid (spectrally accurate for
    smooth periodic integrands). ``log_integrand`` maps an angle array to
    log density values.
    """
    if grid_points < 256:
        raise InvalidArgumentError("grid_points must be >= 256")
    grid = circle_grid(int(grid_points))
    log_mass = logsumexp(np.asarray(log_integrand(grid), dtype=float)) + math.log(TWO_PI / grid_points)
    return math.exp(-log_mass), -log_mass


def vmp_tpd_norm_const(theta0: float, elapsed: float, params: VonMisesParams,
                       grid_points: int = DEFAULT_NORM_GRID) -> TpdConstants:
    """Normalising constant of the unnormalised density, by quadrature."""
    e = float(_check_elapsed(elapsed))
    _check_short_time(np.asarray(e), params)
    gamma = params.gamma
    c, log_c = trapezoid_norm_const(
        lambda th: vmp_tpd_unnormalized_log(th, theta0, e, params), grid_points
    )
    return TpdConstants(gamma=gamma, q=math.exp(-gamma * params.sigma**2 * e),
                        norm_const=c, log_norm_const=log_c)


def vmp_log_tpd(theta_t, theta0, elapsed, params: VonMisesParams):
    """log of the normalised approximate transition density (vectorised).

    The normaliser is evaluated through
    ``E[exp(b (cos(theta0 - mu + s Z) - 1))]`` with Z standard normal, which
    is the exact integral of the unnormalised density; it is computed by a
    log-space quadrature in the numeric kernels. Elapsed times with
    sigma^2 * t below 1e-14 fall back to the wrapped normal short-time limit.
    """
    th, th0, e = np.broadcast_arrays(
        np.asarray(theta_t, dtype=float),
        np.asarray(theta0, dtype=float),
        _check_elapsed(elapsed),
    )
    shape = th.shape
    th, th0, e = th.ravel(), th0.ravel(), e.ravel()
    _, _, scale, conc = _vm_shape(e, params)
    short = params.sigma**2 * e < SHORT_TIME_VARIANCE
    scale = np.where(short, params.sigma * np.sqrt(e), scale)
    conc = np.where(short, 0.0, conc)
    delta0 = th0 - params.mu
    log_norm = _kernels.log_smooth_norm(delta0, scale, conc)
    out = (
        _kernels.log_wrapped_normal(th - th0, scale)
        - 2.0 * conc * np.sin(0.5 * (th - params.mu)) ** 2
        - log_norm
    )
    out = out.reshape(shape)
    return out if out.ndim else float(out)


def vmp_tpd(theta_t, theta0, elapsed, params: VonMisesParams):
    """Normalised approximate transition density of the von Mises process."""
    res = np.exp(vmp_log_tpd(theta_t, theta0, elapsed, params))
    return res if np.ndim(res) else float(res)

"""Paired geometric Brownian motions with a circular-diffusion correlation.

The correlation is rho_t = cos(theta_t) where theta follows circular Brownian
motion or a von Mises process, independent of the price drivers. Given the
latent path, log-return pairs are independent bivariate normals, which gives
the conditional likelihood. Adding the transition densities of
theta = acos(rho) and the change-of-variables term yields the joint
likelihood; subtracting a roughness penalty on rho (and a concentration
penalty for the von Mises case) gives the fitting objective.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.optimize import minimize

from . import _kernels
from .diffusion import AngularPath, CbmParams, VonMisesParams, cbm_log_tpd, vmp_log_tpd
from .errors import (
    BootstrapError,
    CircDiffError,
    ClampWarning,
    DataError,
    FitError,
    InvalidArgumentError,
    SingularCovarianceError,
)
from .estimation import qv_sigma_hat
from .optimize import DfoStatus, OptimizerOptions, dfo_maximize

__all__ = [
    "RHO_EPS", "GbmLeg", "CorrProcessSpec", "RhoPath", "StochCorrFit", "StochCorrOptions",
    "BootstrapBands", "simulate_stochcorr", "simulate_prices", "log_returns", "gbm_loglik",
    "conditional_loglik", "joint_loglik", "penalized_loglik", "roughness", "pivot",
    "rolling_correlation", "fit_stochcorr", "bootstrap_rho_bands", "dfo_maximize",
    "OptimizerOptions", "DfoStatus",
]

log = logging.getLogger(__name__)

RHO_EPS = 1e-6
THETA_MIN = math.acos(1.0 - RHO_EPS)
THETA_MAX = math.acos(-1.0 + RHO_EPS)
DEFAULT_HYPER = {"cbm": (4.0, 0.0), "vmp": (10.0, 20.0)}


@dataclass(frozen=True)
class GbmLeg:
    mu: float
    sigma: float
    s0: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidArgumentError("leg sigma must be positive")
        if not (math.isfinite(self.s0) and self.s0 > 0):
            raise InvalidArgumentError("leg s0 must be positive")
        if not math.isfinite(self.mu):
            raise InvalidArgumentError("leg mu must be finite")


@dataclass(frozen=True)
class CorrProcessSpec:
    """``kind`` is "cbm" or "vmp"; ``params`` the matching parameter set."""

    kind: str
    params: CbmParams | VonMisesParams

    def __post_init__(self):
        if self.kind == "cbm" and not isinstance(self.params, CbmParams):
            raise InvalidArgumentError("cbm correlation needs CbmParams")
        if self.kind == "vmp" and not isinstance(self.params, VonMisesParams):
            raise InvalidArgumentError("vmp correlation needs VonMisesParams")
        if self.kind not in ("cbm", "vmp"):
            raise InvalidArgumentError(f"unknown correlation process {self.kind!r}")

    @property
    def kappa(self) -> float:
        return self.params.kappa if self.kind == "vmp" else 0.0


@dataclass(frozen=True)
class RhoPath:
    times: np.ndarray
    rhos: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        r = np.asarray(self.rhos, dtype=float)
        if t.shape != r.shape or r.ndim != 1:
            raise InvalidArgumentError("times and rhos must be 1-d and of equal length")
        if np.any(np.abs(r) > 1.0 - RHO_EPS + 1e-12) or not np.all(np.isfinite(r)):
            raise InvalidArgumentError("rho values must lie in [-1 + eps, 1 - eps]")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "rhos", r)

    def __len__(self):
        return self.rhos.size


def clamp_rho(rho, warn: bool = False) -> np.ndarray:
    r = np.asarray(rho, dtype=float)
    out = np.clip(r, -1.0 + RHO_EPS, 1.0 - RHO_EPS)
    if warn and np.any(out != r):
        warnings.warn("correlation pinned at the clamp boundary", ClampWarning, stacklevel=2)
    return out


@dataclass
class StochCorrFit:
    leg1: GbmLeg
    leg2: GbmLeg
    corr: CorrProcessSpec
    rho_path: RhoPath
    penalized_loglik: float = math.nan
    hyper: tuple = (0.0, 0.0)
    dt: float = 1.0 / 252
    diagnostics: dict = field(default_factory=dict)

    @property
    def rhos(self) -> np.ndarray:
        return self.rho_path.rhos

    def to_dict(self) -> dict:
        corr = {"kind": self.corr.kind, "sigma": self.corr.params.sigma}
        if self.corr.kind == "vmp":
            corr.update(mu=self.corr.params.mu, lam=self.corr.params.lam,
                        kappa=self.corr.params.kappa)
        return {
            "leg1": {"mu": self.leg1.mu, "sigma": self.leg1.sigma, "s0": self.leg1.s0},
            "leg2": {"mu": self.leg2.mu, "sigma": self.leg2.sigma, "s0": self.leg2.s0},
            "corr": corr,
            "rho_path": {"times": self.rho_path.times.tolist(), "rho": self.rhos.tolist()},
            "penalized_loglik": self.penalized_loglik,
            "hyper": {"lambda1": self.hyper[0], "lambda2": self.hyper[1]},
            "dt": self.dt,
            "diagnostics": self.diagnostics,
        }


@dataclass
class BootstrapBands:
    times: np.ndarray
    rho_hat: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float
    n_samples: int
    n_failed: int = 0

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower


# ---------------------------------------------------------------- simulation

def _check_n_dt(n, dt):
    if int(n) != n or n < 2:
        raise InvalidArgumentError("n must be an integer >= 2")
    if not (dt > 0 and math.isfinite(dt)):
        raise InvalidArgumentError("dt must be positive")


def _advance_prices(leg1: GbmLeg, leg2: GbmLeg, rho: np.ndarray, dt: float,
                    z1: np.ndarray, z2: np.ndarray):
    # exact GBM step per interval with rho frozen at the interval start
    sq = math.sqrt(dt)
    d1 = (leg1.mu - 0.5 * leg1.sigma**2) * dt + leg1.sigma * sq * z1
    w2 = rho * z1 + np.sqrt(np.clip(1.0 - rho**2, 0.0, None)) * z2
    d2 = (leg2.mu - 0.5 * leg2.sigma**2) * dt + leg2.sigma * sq * w2
    p1 = leg1.s0 * np.exp(np.concatenate([[0.0], np.cumsum(d1)]))
    p2 = leg2.s0 * np.exp(np.concatenate([[0.0], np.cumsum(d2)]))
    return p1, p2


def simulate_stochcorr(leg1: GbmLeg, leg2: GbmLeg, spec: CorrProcessSpec, n: int, dt: float,
                       seed: int, theta0: float = 0.0):
    """n price pairs plus the hidden angle path that drives rho = cos(theta)."""
    _check_n_dt(n, dt)
    rng = np.random.default_rng(seed)
    zt = rng.standard_normal(int(n) - 1)
    z1 = rng.standard_normal(int(n) - 1)
    z2 = rng.standard_normal(int(n) - 1)
    p = spec.params
    lam, mu = (p.lam, p.mu) if spec.kind == "vmp" else (0.0, 0.0)
    theta = _kernels.euler_vm(float(theta0), lam, mu, p.sigma, float(dt), zt)
    p1, p2 = _advance_prices(leg1, leg2, np.cos(theta[:-1]), dt, z1, z2)
    return p1, p2, AngularPath.regular(theta, dt)


def simulate_prices(leg1: GbmLeg, leg2: GbmLeg, rhos, dt: float, seed: int):
    """Price pairs with a given (frozen) correlation path; len(rhos) points."""
    r = np.asarray(rhos, dtype=float)
    _check_n_dt(r.size, dt)
    if np.any(np.abs(r) > 1.0):
        raise InvalidArgumentError("rho outside [-1, 1]")
    rng = np.random.default_rng(seed)
    z1 = rng.standard_normal(r.size - 1)
    z2 = rng.standard_normal(r.size - 1)
    return _advance_prices(leg1, leg2, r[:-1], dt, z1, z2)


def log_returns(prices, dt: float | None = None) -> np.ndarray:
    """log(p[i+1]) - log(p[i]). ``dt`` is accepted for symmetry and unused."""
    p = np.asarray(prices, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise DataError("need at least two prices")
    bad = np.flatnonzero(~(p > 0) | ~np.isfinite(p))
    if bad.size:
        raise DataError(f"non-positive or non-finite price at index {int(bad[0])}")
    return np.diff(np.log(p))


# --------------------------------------------------------------- likelihoods

def gbm_loglik(leg: GbmLeg, returns, dt: float) -> float:
    """Univariate normal log-likelihood of log-returns (2 pi terms dropped)."""
    r = np.asarray(returns, dtype=float)
    var = leg.sigma**2 * dt
    x = r - (leg.mu - 0.5 * leg.sigma**2) * dt
    return float(-0.5 * np.sum(x**2 / var + math.log(var)))


def _standardised(leg1, leg2, r1, r2, dt):
    u = (np.asarray(r1, float) - (leg1.mu - 0.5 * leg1.sigma**2) * dt) / (leg1.sigma * math.sqrt(dt))
    v = (np.asarray(r2, float) - (leg2.mu - 0.5 * leg2.sigma**2) * dt) / (leg2.sigma * math.sqrt(dt))
    return u, v


def _cond_terms(leg1, leg2, rho, r1, r2, dt):
    u, v = _standardised(leg1, leg2, r1, r2, dt)
    d = 1.0 - rho**2
    logdet = 2.0 * math.log(leg1.sigma * leg2.sigma * dt) + np.log(d)
    return -0.5 * ((u * u - 2.0 * rho * u * v + v * v) / d + logdet), u, v


def conditional_loglik(leg1: GbmLeg, leg2: GbmLeg, rhos, returns1, returns2, dt: float) -> float:
    """Sum of bivariate normal log-densities of the return pairs given rho.

    ``rhos`` is the correlation path on the observation grid; the return over
    [t_i, t_{i+1}] uses rho at t_i. Paths one longer than the returns (the
    usual case) and of equal length are both accepted.
    """
    r1 = np.asarray(returns1, dtype=float)
    r2 = np.asarray(returns2, dtype=float)
    if r1.shape != r2.shape:
        raise InvalidArgumentError("return series differ in length")
    rho = np.asarray(rhos, dtype=float)[: r1.size]
    if rho.size != r1.size:
        raise InvalidArgumentError("rho path is shorter than the return series")
    if np.any(np.abs(rho) >= 1.0):
        raise SingularCovarianceError("|rho| >= 1 gives a singular covariance")
    terms, _, _ = _cond_terms(leg1, leg2, rho, r1, r2, dt)
    return float(np.sum(terms))


def _pair_logp(spec: CorrProcessSpec, a, b, dt):
    """log p(b; a, dt) under the correlation process, elementwise."""
    if spec.kind == "cbm":
        return cbm_log_tpd(b, a, dt, spec.params)
    return vmp_log_tpd(b, a, dt, spec.params)


def _jacobian_terms(rho):
    return -0.5 * np.log(1.0 - rho[1:] ** 2)


def roughness(rhos) -> float:
    d = np.diff(np.asarray(rhos, dtype=float))
    return float(np.dot(d, d))


def _parts(fit: StochCorrFit, r1, r2, dt):
    rho = fit.rhos
    cond = conditional_loglik(fit.leg1, fit.leg2, rho, r1, r2, dt)
    theta = np.arccos(rho)
    trans = float(np.sum(_pair_logp(fit.corr, theta[:-1], theta[1:], dt)))
    jac = float(np.sum(_jacobian_terms(rho)))
    return cond, trans, jac


def joint_loglik(fit: StochCorrFit, returns1, returns2, dt: float) -> float:
    """Conditional likelihood + transition terms of acos(rho) + Jacobian."""
    return sum(_parts(fit, returns1, returns2, dt))


def penalized_loglik(fit: StochCorrFit, returns1, returns2, dt: float,
                     lambda1: float, lambda2: float) -> float:
    """joint_loglik - lambda1 * (T/dt) * sum(diff(rho)^2) - lambda2 * kappa."""
    if lambda1 < 0 or lambda2 < 0:
        raise InvalidArgumentError("penalty weights must be >= 0")
    if fit.corr.kind == "cbm":
        lambda2 = 0.0
    n_steps = len(fit.rho_path) - 1
    return (joint_loglik(fit, returns1, returns2, dt)
            - lambda1 * n_steps * roughness(fit.rhos)
            - lambda2 * fit.corr.kappa)


# ------------------------------------------------------------------- fitting

def rolling_correlation(returns1, returns2, window: int = 20) -> np.ndarray:
    """Pearson correlation over centred windows, one value per observation.

    Returns n + 1 values for n returns (the observation grid). Positions
    without a full window take the nearest available value.
    """
    r1 = np.asarray(returns1, dtype=float)
    r2 = np.asarray(returns2, dtype=float)
    if r1.size < window:
        raise DataError(f"need at least {window} returns for the rolling initializer")
    a = sliding_window_view(r1, window)
    b = sliding_window_view(r2, window)
    a = a - a.mean(axis=1, keepdims=True)
    b = b - b.mean(axis=1, keepdims=True)
    den = np.sqrt(np.sum(a * a, axis=1) * np.sum(b * b, axis=1))
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.where(den > 0, np.sum(a * b, axis=1) / den, 0.0)
    out = np.empty(r1.size + 1)
    first = window // 2
    out[first:first + c.size] = c
    out[:first] = c[0]
    out[first + c.size:] = c[-1]
    return out


@dataclass
class StochCorrOptions:
    """Controls for :func:`fit_stochcorr`.

    ``sigma_floor`` keeps the correlation-process volatility away from zero
    once the fitted path becomes flat. ``knot_step`` > 1 makes the path
    piecewise linear in theta on every knot_step-th observation.
    ``jacobian=False`` drops the change-of-variables term from the fitting
    objective (a diagnostic variant; reported likelihoods always include it).
    """

    max_rounds: int = 20
    tol: float = 1e-6
    window: int = 20
    sigma_floor: float = 1e-3
    knot_step: int = 1
    maxiter: int = 2000
    fd_step: float = 1e-5
    jacobian: bool = True


def _n_globals(kind):
    return 4 if kind == "cbm" else 6


class _Problem:
    """Penalised objective and its gradient in unconstrained-ish coordinates.

    The coordinate vector is (mu1, log sigma1, mu2, log sigma2,
    [log lam_c, mu_c,] theta_knots) with rho = cos(theta).
    """

    def __init__(self, r1, r2, dt, kind, lambda1, lambda2, opts: StochCorrOptions, knots, n):
        self.r1, self.r2, self.dt = r1, r2, dt
        self.kind = kind
        self.lambda1 = lambda1
        self.lambda2 = lambda2 if kind == "vmp" else 0.0
        self.n = n
        self.h = opts.fd_step
        self.jac_weight = 1.0 if opts.jacobian else 0.0
        self.sigma_c = opts.sigma_floor
        self.ng = _n_globals(kind)
        self.knots = knots
        if knots.size != n:
            grid = np.arange(n)
            self.W = np.stack([np.interp(grid, knots, e) for e in np.eye(knots.size)], axis=1)
        else:
            self.W = None

    def theta(self, z):
        tk = z[self.ng:]
        return tk if self.W is None else self.W @ tk

    def corr(self, z) -> CorrProcessSpec:
        if self.kind == "cbm":
            return CorrProcessSpec("cbm", CbmParams(self.sigma_c))
        return CorrProcessSpec("vmp", VonMisesParams(z[5], math.exp(z[4]), self.sigma_c))

    def unpack(self, z):
        return GbmLeg(z[0], math.exp(z[1])), GbmLeg(z[2], math.exp(z[3])), self.corr(z)

    def _trans(self, corr, a, b):
        return _pair_logp(corr, a, b, self.dt)

    def value_grad(self, z):
        dt, h = self.dt, self.h
        leg1, leg2, corr = self.unpack(z)
        theta = self.theta(z)
        rho = np.cos(theta)
        r = rho[:-1]
        cond, u, v = _cond_terms(leg1, leg2, r, self.r1, self.r2, dt)
        dd = 1.0 - r * r
        jac = _jacobian_terms(rho)
        d = np.diff(rho)
        a, b = theta[:-1], theta[1:]
        trans = self._trans(corr, a, b)
        val = (np.sum(cond) + np.sum(trans) + self.jac_weight * np.sum(jac)
               - self.lambda1 * (self.n - 1) * np.dot(d, d) - self.lambda2 * corr.kappa)

        g = np.zeros_like(z)
        sq = math.sqrt(dt)
        eu = (u - r * v) / dd
        ev = (v - r * u) / dd
        g[0] = np.sum(eu) * sq / leg1.sigma
        g[1] = np.sum(-eu * (leg1.sigma * sq - u) - 1.0)
        g[2] = np.sum(ev) * sq / leg2.sigma
        g[3] = np.sum(-ev * (leg2.sigma * sq - v) - 1.0)
        if self.kind == "vmp":
            for j in (4, 5):
                zp, zm = z.copy(), z.copy()
                zp[j] += h
                zm[j] -= h
                g[j] = (np.sum(self._trans(self.corr(zp), a, b))
                        - np.sum(self._trans(self.corr(zm), a, b))) / (2 * h)
            g[4] -= self.lambda2 * corr.kappa

        quad = u * u - 2.0 * r * u * v + v * v
        g_rho = np.zeros(self.n)
        g_rho[:-1] = (u * v * dd - r * quad) / dd**2 + r / dd
        g_rho[1:] += self.jac_weight * rho[1:] / (1.0 - rho[1:] ** 2)
        pen_w = 2.0 * self.lambda1 * (self.n - 1)
        g_rho[1:] -= pen_w * d
        g_rho[:-1] += pen_w * d
        da = (self._trans(corr, a + h, b) - self._trans(corr, a - h, b)) / (2 * h)
        db = (self._trans(corr, a, b + h) - self._trans(corr, a, b - h)) / (2 * h)
        g_th = -np.sin(theta) * g_rho
        g_th[:-1] += da
        g_th[1:] += db
        g[self.ng:] = g_th if self.W is None else self.W.T @ g_th
        return float(val), g


def _leg_start(r, dt):
    var = float(np.var(r)) / dt
    return float(np.mean(r)) / dt + 0.5 * var, math.sqrt(max(var, 1e-12))


def _knots(n, step):
    idx = np.arange(0, n, step)
    if idx[-1] != n - 1:
        idx = np.append(idx, n - 1)
    return idx


def fit_stochcorr(prices1, prices2, dt: float, kind: str = "cbm", hyper=None,
                  opts: StochCorrOptions | None = None, seed: int = 0,
                  times=None) -> StochCorrFit:
    """Penalised-likelihood fit of legs, correlation process and rho path.

    Each outer round sets the correlation-process sigma from the quadratic
    variation of acos(rho) and then maximises the penalised likelihood over
    every other coordinate at once (bounded quasi-Newton with analytic
    gradients). Rounds stop when the objective changes by less than
    ``tol * (1 + |objective|)``. The procedure is deterministic; ``seed`` is
    only recorded.
    """
    opts = opts or StochCorrOptions()
    if kind not in ("cbm", "vmp"):
        raise InvalidArgumentError(f"unknown correlation process {kind!r}")
    lambda1, lambda2 = DEFAULT_HYPER[kind] if hyper is None else hyper
    if lambda1 < 0 or lambda2 < 0:
        raise InvalidArgumentError("penalty weights must be >= 0")
    p1 = np.asarray(prices1, dtype=float)
    p2 = np.asarray(prices2, dtype=float)
    if p1.shape != p2.shape:
        raise DataError("price series have different lengths")
    if p1.size < opts.window + 2:
        raise DataError(f"need at least {opts.window + 2} observations")
    r1, r2 = log_returns(p1), log_returns(p2)
    n = p1.size
    times = dt * np.arange(n) if times is None else np.asarray(times, dtype=float)
    knots = _knots(n, max(1, int(opts.knot_step)))
    prob = _Problem(r1, r2, dt, kind, lambda1, lambda2, opts, knots, n)

    theta0 = np.clip(np.arccos(clamp_rho(rolling_correlation(r1, r2, opts.window))),
                     THETA_MIN, THETA_MAX)
    mu1, s1 = _leg_start(r1, dt)
    mu2, s2 = _leg_start(r2, dt)
    z = [mu1, math.log(s1), mu2, math.log(s2)]
    bounds = [(None, None), (math.log(1e-6), None)] * 2
    if kind == "vmp":
        mu_c = float(np.mean(theta0))
        z += [0.0, mu_c]
        bounds += [(math.log(1e-4), math.log(50.0)), (mu_c - math.pi, mu_c + math.pi)]
    z = np.concatenate([z, theta0[knots]])
    bounds += [(THETA_MIN, THETA_MAX)] * knots.size

    def neg(zz):
        val, g = prob.value_grad(zz)
        if not math.isfinite(val):
            return 1e100, np.zeros_like(zz)
        return -val, -g

    trace = []
    prev = -math.inf
    converged = False
    for rnd in range(int(opts.max_rounds)):
        qv = qv_sigma_hat(AngularPath(times, prob.theta(z)))
        prob.sigma_c = max(qv, opts.sigma_floor)
        res = minimize(neg, z, jac=True, method="L-BFGS-B", bounds=bounds,
                       options={"maxiter": int(opts.maxiter), "maxfun": 2 * int(opts.maxiter)})
        z = res.x
        obj = -float(res.fun)
        trace.append({"round": rnd + 1, "objective": obj, "sigma_c": prob.sigma_c,
                      "iterations": int(res.nit), "message": str(res.message)})
        log.debug("round %d objective %.6f sigma_c %.4g", rnd + 1, obj, prob.sigma_c)
        if abs(obj - prev) <= opts.tol * (1.0 + abs(obj)):
            converged = True
            break
        prev = obj

    leg1, leg2, corr = prob.unpack(z)
    rhos = clamp_rho(np.cos(prob.theta(z)))
    if np.any(np.abs(rhos) >= 1.0 - RHO_EPS * (1 + 1e-6)):
        warnings.warn("fitted correlation pinned at the clamp boundary", ClampWarning,
                      stacklevel=2)
    fit = StochCorrFit(
        leg1=GbmLeg(leg1.mu, leg1.sigma, float(p1[0])),
        leg2=GbmLeg(leg2.mu, leg2.sigma, float(p2[0])),
        corr=corr,
        rho_path=RhoPath(times, rhos),
        hyper=(float(lambda1), float(lambda2 if kind == "vmp" else 0.0)),
        dt=dt,
        diagnostics={"rounds": len(trace), "converged": converged, "trace": trace,
                     "seed": seed, "jacobian": bool(opts.jacobian)},
    )
    fit.penalized_loglik = penalized_loglik(fit, r1, r2, dt, *fit.hyper)
    if not math.isfinite(fit.penalized_loglik):
        raise FitError("penalised likelihood is not finite", best=fit, diagnostics=fit.diagnostics)
    return fit


# ----------------------------------------------------------------- bootstrap

def pivot(rho_a, rho_b):
    """1 - cos(acos(a) - acos(b)); in [0, 2], zero when a == b."""
    a = np.arccos(np.clip(rho_a, -1.0, 1.0))
    b = np.arccos(np.clip(rho_b, -1.0, 1.0))
    return 1.0 - np.cos(a - b)


def _refit(args):
    fit, i, seed, opts = args
    p1, p2 = simulate_prices(fit.leg1, fit.leg2, fit.rhos, fit.dt, seed + i)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClampWarning)
        try:
            boot = fit_stochcorr(p1, p2, fit.dt, fit.corr.kind, fit.hyper, opts, seed + i,
                                 times=fit.rho_path.times)
        except CircDiffError:
            return None
    return boot.rhos


def bootstrap_samples(fit: StochCorrFit, n_samples: int, seed: int,
                      opts: StochCorrOptions | None = None, workers: int = 1):
    """Refitted rho paths from datasets simulated with the fitted rho frozen.

    Returns (array of successful paths, number of failures).
    """
    if n_samples < 2:
        raise InvalidArgumentError("n_samples must be >= 2")
    jobs = [(fit, i, seed, opts) for i in range(int(n_samples))]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            paths = list(pool.map(_refit, jobs))
    else:
        paths = [_refit(j) for j in jobs]
    ok = [p for p in paths if p is not None]
    failed = len(paths) - len(ok)
    if failed > 0.2 * n_samples:
        raise BootstrapError(f"{failed} of {n_samples} bootstrap refits failed")
    return np.array(ok), failed


def bands_from_samples(fit: StochCorrFit, samples: np.ndarray, level: float,
                       n_failed: int = 0) -> BootstrapBands:
    if not 0 < level < 1:
        raise InvalidArgumentError("level must be in (0, 1)")
    rho = fit.rhos
    u = pivot(rho[None, :], samples)
    uq = np.percentile(u, 100.0 * level, axis=0)
    return BootstrapBands(
        times=fit.rho_path.times,
        rho_hat=rho,
        lower=np.maximum(-1.0, rho - uq),
        upper=np.minimum(1.0, rho + uq),
        level=level,
        n_samples=int(samples.shape[0]) + n_failed,
        n_failed=n_failed,
    )


def bootstrap_rho_bands(fit: StochCorrFit, n_samples: int, level: float = 0.95, seed: int = 0,
                        opts: StochCorrOptions | None = None, workers: int = 1) -> BootstrapBands:
    """Percentile bands rho_hat +/- U_q from the circular pivot U."""
    if not 0 < level < 1:
        raise InvalidArgumentError("level must be in (0, 1)")
    samples, failed = bootstrap_samples(fit, n_samples, seed, opts, workers)
    return bands_from_samples(fit, samples, level, failed)

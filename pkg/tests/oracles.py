"""Independent reference computations used by the tests.

Nothing here imports the package under test: each oracle is a direct,
slow transcription of a textbook formula (arbitrary precision where cheap).
"""

from __future__ import annotations

import math

import mpmath as mp
import numpy as np
from scipy.special import logsumexp
from scipy.stats import multivariate_normal, norm

mp.mp.dps = 40


def i0_series(kappa: float, terms: int = 50) -> mp.mpf:
    """I0 by its power series sum (k/2)^{2m} / (m!)^2."""
    x = mp.mpf(kappa) / 2
    return mp.fsum((x ** (2 * m)) / mp.factorial(m) ** 2 for m in range(terms))


def i1_series(kappa: float, terms: int = 60) -> mp.mpf:
    x = mp.mpf(kappa) / 2
    return mp.fsum(x ** (2 * m + 1) / (mp.factorial(m) * mp.factorial(m + 1)) for m in range(terms))


def log_i0_asymptotic(kappa: float, terms: int = 12) -> float:
    """log I0 from e^k / sqrt(2 pi k) * sum prod (2j-1)^2 / (8k)^m / m!."""
    k = mp.mpf(kappa)
    acc, term = mp.mpf(1), mp.mpf(1)
    for m in range(1, terms):
        term *= (2 * m - 1) ** 2 / (8 * k * m)
        acc += term
    return float(k - mp.log(mp.sqrt(2 * mp.pi * k)) + mp.log(acc))


def wrapped_normal_mp(x: float, scale: float, kmax: int = 60) -> float:
    s = mp.mpf(scale)
    x = mp.mpf(x)
    c = 1 / (s * mp.sqrt(2 * mp.pi))
    return float(c * mp.fsum(mp.e ** (-((x + 2 * mp.pi * k) ** 2) / (2 * s * s))
                             for k in range(-kmax, kmax + 1)))


def von_mises_mp(theta: float, mu: float, kappa: float) -> float:
    return float(mp.e ** (kappa * mp.cos(theta - mu)) / (2 * mp.pi * mp.besseli(0, kappa)))


def vm_tpd_formula(theta, theta0, t, lam, mu, sigma):
    """Literal transcription of the approximate von Mises transition density
    (unnormalised, image sum over |k| <= 20) in mpmath."""
    kappa = mp.mpf(2) * lam / sigma**2
    gamma = kappa * mp.besseli(1, kappa) / mp.besseli(0, kappa)
    q = mp.e ** (-gamma * sigma**2 * t)
    sq = mp.sqrt(q)
    img = mp.fsum(mp.e ** (-gamma * sq * (theta + 2 * mp.pi * k - theta0) ** 2 / (2 * (1 - q)))
                  for k in range(-20, 21))
    fac = (1 / (2 * mp.pi * mp.besseli(0, kappa))) ** ((1 - sq) / (1 + sq))
    ex = mp.e ** (kappa * (mp.cos(theta - mu) - sq * mp.cos(theta0 - mu)) / (1 + sq))
    return img * fac * ex


def vm_tpd_normalised_mp(theta, theta0, t, lam, mu, sigma, nodes: int = 4000) -> float:
    """Normalised by a dense periodic trapezoid in mpmath (slow, scalar)."""
    grid = [-mp.pi + 2 * mp.pi * (j + 1) / nodes for j in range(nodes)]
    total = mp.fsum(vm_tpd_formula(g, theta0, t, lam, mu, sigma) for g in grid) * 2 * mp.pi / nodes
    return float(vm_tpd_formula(theta, theta0, t, lam, mu, sigma) / total)


def log_smooth_norm_brute(delta: float, s: float, b: float, n: int = 400_001) -> float:
    """log E[exp(b(cos(delta + sZ) - 1))] by dense trapezoid sums.

    Wide normals (s > 1) are integrated over z in [-40, 40]; narrow ones on
    the circle against a 7-image wrapped normal, so a mode far out in z
    (large b, tiny s) is still resolved.
    """
    if s > 1.0:
        z = np.linspace(-40.0, 40.0, n)
        f = -0.5 * z**2 + b * (np.cos(delta + s * z) - 1.0)
        return float(logsumexp(f) + math.log(z[1] - z[0]) - 0.5 * math.log(2 * math.pi))
    x = -math.pi + 2 * math.pi * np.arange(1, n + 1) / n
    k = np.arange(-3, 4)[:, None]
    logwn = logsumexp(-0.5 * ((x - delta + 2 * math.pi * k) / s) ** 2, axis=0) \
        - math.log(s) - 0.5 * math.log(2 * math.pi)
    f = logwn - 2.0 * b * np.sin(0.5 * x) ** 2
    return float(logsumexp(f) + math.log(2 * math.pi / n))


def cn_dense(params_lam, params_mu, sigma, theta0_index, k, m, horizon):
    """Crank-Nicolson march with dense matrices built from the forward
    equation p_t = (s^2/2) p'' + (lam sin(x-mu) p)' using centred differences."""
    h = 2 * math.pi / k
    x = -math.pi + h * np.arange(1, k + 1)
    L = np.zeros((k, k))
    d = 0.5 * sigma**2 / h**2
    f = params_lam * np.sin(x - params_mu)
    for j in range(k):
        jm, jp = (j - 1) % k, (j + 1) % k
        L[j, jm] += d - f[jm] / (2 * h)
        L[j, j] += -2 * d
        L[j, jp] += d + f[jp] / (2 * h)
    dt = horizon / m
    A = np.eye(k) - 0.5 * dt * L
    B = np.eye(k) + 0.5 * dt * L
    p = np.zeros(k)
    p[theta0_index] = 1.0 / h
    step = np.linalg.solve(A, B)
    for _ in range(m):
        p = step @ p
    return p


def gbm_loglik_scipy(r, mu, sigma, dt):
    """Normal log-likelihood of log returns, 2 pi constants included."""
    return float(np.sum(norm.logpdf(r, (mu - 0.5 * sigma**2) * dt, sigma * math.sqrt(dt))))


def bivariate_loglik_scipy(r1, r2, mu1, s1, mu2, s2, rho, dt):
    out = 0.0
    m = np.array([(mu1 - 0.5 * s1**2) * dt, (mu2 - 0.5 * s2**2) * dt])
    for a, b, c in zip(r1, r2, rho):
        cov = np.array([[s1 * s1, c * s1 * s2], [c * s1 * s2, s2 * s2]]) * dt
        out += multivariate_normal.logpdf([a, b], m, cov)
    return float(out)


def hellinger_continuous(f, g, n: int = 20000) -> float:
    """sqrt(1 - integral sqrt(f g)) by a periodic trapezoid."""
    x = -math.pi + 2 * math.pi * np.arange(1, n + 1) / n
    bc = np.sum(np.sqrt(f(x) * g(x))) * 2 * math.pi / n
    return math.sqrt(max(0.0, 1.0 - bc))

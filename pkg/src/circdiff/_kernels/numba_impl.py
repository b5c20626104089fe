"""numba-compiled kernels. Same signatures and results as :mod:`.numpy_impl`."""

from __future__ import annotations

import math

import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi
LOG_SQRT_2PI = 0.5 * math.log(TWO_PI)
WN_DIRECT_MAX_SCALE = math.pi
CONCAVE_LIMIT = 0.5
_MODE_ITERS = 60


@njit(cache=True)
def _wrap1(x):
    r = math.pi - ((math.pi - x) % TWO_PI)
    if r <= -math.pi:
        r = math.pi
    return r


def wrap(x):
    # Not a hot path; delegate to numpy so scalars and arrays both work.
    from .numpy_impl import wrap as _np_wrap

    return _np_wrap(x)


@njit(cache=True)
def _euler_vm(theta0, lam, mu, sigma, dt, z):
    n = z.shape[0] + 1
    out = np.empty(n)
    th = _wrap1(theta0)
    out[0] = th
    sq = sigma * math.sqrt(dt)
    drift = lam * dt
    for i in range(n - 1):
        th = _wrap1(th - drift * math.sin(th - mu) + sq * z[i])
        out[i + 1] = th
    return out


def euler_vm(theta0, lam, mu, sigma, dt, z):
    return _euler_vm(float(theta0), float(lam), float(mu), float(sigma), float(dt),
                     np.ascontiguousarray(z, dtype=np.float64))


@njit(cache=True)
def _log_wn1(x, s):
    x = _wrap1(x)
    if s <= WN_DIRECT_MAX_SCALE:
        kmax = max(3, int(math.ceil(8.0 * s / TWO_PI)))
        # k = 0 dominates for x in (-pi, pi]
        lead = -0.5 * (x / s) ** 2
        acc = 0.0
        for k in range(-kmax, kmax + 1):
            if k == 0:
                continue
            d = x + TWO_PI * k
            acc += math.exp(-0.5 * (d / s) ** 2 - lead)
        return lead + math.log1p(acc) - math.log(s) - LOG_SQRT_2PI
    nmax = int(math.ceil(10.0 / WN_DIRECT_MAX_SCALE)) + 2
    series = 1.0
    for n in range(1, nmax + 1):
        series += 2.0 * math.exp(-0.5 * (n * s) ** 2) * math.cos(n * x)
    return math.log(series) - math.log(TWO_PI)


@njit(cache=True)
def _log_wn(x, s):
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        out[i] = _log_wn1(x[i], s[i])
    return out


def log_wrapped_normal(x, s):
    x, s = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(s, dtype=float))
    shape = x.shape
    res = _log_wn(np.ascontiguousarray(x).reshape(-1), np.ascontiguousarray(s).reshape(-1))
    return res.reshape(shape)


@njit(cache=True)
def _vers(x, b):
    # b * (cos(x) - 1) without cancellation near x = 0
    h = math.sin(0.5 * x)
    return -2.0 * b * h * h


@njit(cache=True)
def _log_smooth_mode(delta, s, b):
    h = TWO_PI / (12.0 + 10.0 * s * math.sqrt(b) + 12.0 * s)
    bs2 = b * s * s
    half = int(math.ceil(math.sqrt(90.0 / (1.0 - bs2)) / h))
    zc = 0.0
    for _ in range(_MODE_ITERS):
        zc = -b * s * math.sin(delta + s * zc)
    m = -np.inf
    for j in range(-half, half + 1):
        z = zc + h * j
        f = -0.5 * z * z + _vers(delta + s * z, b)
        if f > m:
            m = f
    acc = 0.0
    for j in range(-half, half + 1):
        z = zc + h * j
        acc += math.exp(-0.5 * z * z + _vers(delta + s * z, b) - m)
    return m + math.log(acc) + math.log(h) - LOG_SQRT_2PI


@njit(cache=True)
def _log_smooth1(delta, s, b):
    if not math.isinf(s) and b * s * s <= CONCAVE_LIMIT:
        return _log_smooth_mode(delta, s, b)
    sqb = math.sqrt(b)
    use_z = False
    h = 0.0
    half = 0
    if not math.isinf(s):
        h = TWO_PI / (12.0 + 10.0 * s * sqb + 12.0 * s)
        zmax = math.sqrt(4.0 * b + 90.0)
        # compare as floats: math.ceil gives int64 here and zmax / h
        # overflows it for huge s
        nz = 2.0 * np.ceil(zmax / h) + 1.0
        nc = np.ceil(9.0 / s + 9.0 * sqb) + 16.0
        use_z = nz <= nc
        if use_z:
            half = int(math.ceil(zmax / h))
    if use_z:
        # two passes: max then sum, for a stable log-sum-exp
        m = -np.inf
        for j in range(-half, half + 1):
            z = h * j
            f = -0.5 * z * z + _vers(delta + s * z, b)
            if f > m:
                m = f
        acc = 0.0
        for j in range(-half, half + 1):
            z = h * j
            f = -0.5 * z * z + _vers(delta + s * z, b)
            acc += math.exp(f - m)
        return m + math.log(acc) + math.log(h) - LOG_SQRT_2PI
    npts = int(math.ceil(9.0 * sqb)) + 16
    if not math.isinf(s):
        npts = int(math.ceil(9.0 / s + 9.0 * sqb)) + 16
    fs = np.empty(npts)
    m = -np.inf
    for j in range(npts):
        x = -math.pi + TWO_PI * (j + 1) / npts
        f = _log_wn1(x, s) + _vers(delta + x, b)
        fs[j] = f
        if f > m:
            m = f
    acc = 0.0
    for j in range(npts):
        acc += math.exp(fs[j] - m)
    return m + math.log(acc) + math.log(TWO_PI / npts)


@njit(cache=True)
def _log_smooth(delta, s, b):
    out = np.empty(delta.shape[0])
    for i in range(delta.shape[0]):
        out[i] = _log_smooth1(delta[i], s[i], b[i])
    return out


def log_smooth_norm(delta, s, b):
    return _log_smooth(np.ascontiguousarray(delta, dtype=np.float64),
                       np.ascontiguousarray(s, dtype=np.float64),
                       np.ascontiguousarray(b, dtype=np.float64))


@njit(cache=True)
def _cn_march(lo, di, up, elo, edi, eup, p0, nsteps, record, dtheta):
    k = di.shape[0]
    # Sherman-Morrison split A = T + u v^T with T tridiagonal (non-cyclic).
    alpha = up[k - 1]  # A[k-1, 0]
    beta = lo[0]  # A[0, k-1]
    gam = -di[0]
    bb = di.copy()
    bb[0] = di[0] - gam
    bb[k - 1] = di[k - 1] - alpha * beta / gam
    # Thomas factorization of T, reused every step.
    cp = np.empty(k)
    den = np.empty(k)
    den[0] = bb[0]
    cp[0] = up[0] / den[0]
    for i in range(1, k):
        den[i] = bb[i] - lo[i] * cp[i - 1]
        cp[i] = up[i] / den[i]
    z = np.zeros(k)
    u = np.zeros(k)
    u[0] = gam
    u[k - 1] = alpha
    # solve T z = u
    z[0] = u[0] / den[0]
    for i in range(1, k):
        z[i] = (u[i] - lo[i] * z[i - 1]) / den[i]
    for i in range(k - 2, -1, -1):
        z[i] -= cp[i] * z[i + 1]
    vz = z[0] + beta / gam * z[k - 1]
    if 1.0 + vz == 0.0:
        raise ZeroDivisionError("singular cyclic system")

    p = p0.copy()
    rhs = np.empty(k)
    y = np.empty(k)
    snaps = np.empty((record.shape[0], k))
    masses = np.empty(nsteps)
    neg = np.empty(nsteps)
    r = 0
    while r < record.shape[0] and record[r] == 0:
        snaps[r] = p
        r += 1
    for step in range(1, nsteps + 1):
        rhs[0] = edi[0] * p[0] + elo[0] * p[k - 1] + eup[0] * p[1]
        for i in range(1, k - 1):
            rhs[i] = edi[i] * p[i] + elo[i] * p[i - 1] + eup[i] * p[i + 1]
        rhs[k - 1] = edi[k - 1] * p[k - 1] + elo[k - 1] * p[k - 2] + eup[k - 1] * p[0]
        y[0] = rhs[0] / den[0]
        for i in range(1, k):
            y[i] = (rhs[i] - lo[i] * y[i - 1]) / den[i]
        for i in range(k - 2, -1, -1):
            y[i] -= cp[i] * y[i + 1]
        fac = (y[0] + beta / gam * y[k - 1]) / (1.0 + vz)
        tot = 0.0
        ng = 0.0
        for i in range(k):
            v = y[i] - fac * z[i]
            p[i] = v
            tot += v
            if v < 0.0:
                ng -= v
        masses[step - 1] = tot * dtheta
        neg[step - 1] = ng * dtheta
        while r < record.shape[0] and record[r] == step:
            snaps[r] = p
            r += 1
    return snaps, masses, neg


def cn_march(lo, di, up, elo, edi, eup, p0, nsteps, record, dtheta):
    arrs = [np.ascontiguousarray(a, dtype=np.float64) for a in (lo, di, up, elo, edi, eup, p0)]
    rec = np.ascontiguousarray(record, dtype=np.int64)
    return _cn_march(*arrs, int(nsteps), rec, float(dtheta))

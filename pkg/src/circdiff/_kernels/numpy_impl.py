"""Pure-numpy reference kernels.

These are the fallback path when numba is unavailable or disabled with
``CIRCDIFF_BACKEND=numpy``. Signatures match :mod:`.numba_impl` exactly.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu
from scipy.special import logsumexp

TWO_PI = 2.0 * math.pi
LOG_SQRT_2PI = 0.5 * math.log(TWO_PI)

# Below this scale the wrapped normal is summed over images; above it the
# dual (Fourier) series converges in a handful of terms.
WN_DIRECT_MAX_SCALE = math.pi
# Chunk size (elements) for the observation x node matrices.
_CHUNK = 4_000_000


def wrap(x):
    """Map to (-pi, pi]. Works on scalars and arrays."""
    r = math.pi - np.mod(math.pi - np.asarray(x, dtype=float), TWO_PI)
    return np.where(r <= -math.pi, math.pi, r)


def euler_vm(theta0, lam, mu, sigma, dt, z):
    """Wrapped Euler-Maruyama path of the von Mises SDE (lam=0 gives CBM)."""
    n = z.shape[0] + 1
    out = np.empty(n)
    out[0] = float(wrap(theta0))
    sq = sigma * math.sqrt(dt)
    if lam == 0.0:
        # Increments do not depend on the state: wrap once at each prefix.
        out[1:] = wrap(out[0] + np.cumsum(sq * z))
        return out
    th = out[0]
    drift = lam * dt
    for i, zi in enumerate(z.tolist()):
        th = th - drift * math.sin(th - mu) + sq * zi
        y = (math.pi - th) % TWO_PI
        th = math.pi - y
        if th <= -math.pi:
            th = math.pi
        out[i + 1] = th
    return out


def _n_images(s):
    return np.maximum(3, np.ceil(8.0 * s / TWO_PI)).astype(int)


def log_wrapped_normal(x, s):
    """log of the wrapped normal density WN(x; 0, s) (x any real, s > 0)."""
    x, s = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(s, dtype=float))
    x = wrap(x)
    out = np.empty(x.shape)
    small = s <= WN_DIRECT_MAX_SCALE
    if np.any(small):
        xs, ss = x[small], s[small]
        kmax = int(_n_images(ss).max())
        k = np.arange(-kmax, kmax + 1)
        d = xs[..., None] + TWO_PI * k
        expo = -0.5 * (d / ss[..., None]) ** 2
        out[small] = logsumexp(expo, axis=-1) - np.log(ss) - LOG_SQRT_2PI
    big = ~small
    if np.any(big):
        xb, sb = x[big], s[big]
        nmax = int(np.ceil(10.0 / WN_DIRECT_MAX_SCALE)) + 2
        n = np.arange(1, nmax + 1)
        with np.errstate(over="ignore"):
            w = np.exp(-0.5 * (n * sb[..., None]) ** 2)
        series = 1.0 + 2.0 * np.sum(w * np.cos(n * xb[..., None]), axis=-1)
        out[big] = np.log(series) - math.log(TWO_PI)
    return out


# When b * s^2 is at most this, the integrand in the normal variable is
# strictly log-concave and a short window around its mode suffices.
CONCAVE_LIMIT = 0.5
_MODE_ITERS = 60


def _smooth_nodes(s, b):
    """Pick the cheaper exact quadrature for E[exp(b(cos(d + sZ) - 1))].

    Returns (kind, h, half_width, npts): "m" is trapezoid in the normal
    variable on a window centred at the integrand's mode, "z" the same on a
    fixed symmetric window, "c" a periodic grid on the circle.
    """
    if math.isinf(s):
        return "c", None, None, int(math.ceil(9.0 * math.sqrt(b))) + 16
    h = TWO_PI / (12.0 + 10.0 * s * math.sqrt(b) + 12.0 * s)
    bs2 = b * s * s
    if bs2 <= CONCAVE_LIMIT:
        # curvature <= -(1 - b s^2): beyond this the integrand is < e^-45 of the peak
        half = math.sqrt(90.0 / (1.0 - bs2))
        return "m", h, half, 2 * int(math.ceil(half / h)) + 1
    zmax = math.sqrt(4.0 * b + 90.0)
    nz = 2 * int(math.ceil(zmax / h)) + 1
    nc = int(math.ceil(9.0 / s + 9.0 * math.sqrt(b))) + 16
    if nz <= nc:
        return "z", h, zmax, nz
    return "c", None, None, nc


def _smooth_mode(delta, s, b):
    # fixed point z = -b s sin(delta + s z); a contraction when b s^2 < 1
    z = np.zeros_like(delta)
    for _ in range(_MODE_ITERS):
        z = -b * s * np.sin(delta + s * z)
    return z


def _log_smooth_group(delta, s, b):
    kind, h, zmax, npts = _smooth_nodes(s, b)
    if kind == "m":
        half = (npts - 1) // 2
        offs = h * np.arange(-half, half + 1)
        const = math.log(h) - LOG_SQRT_2PI
        out = np.empty(delta.shape[0])
        step = max(1, _CHUNK // npts)
        for lo in range(0, delta.shape[0], step):
            d = delta[lo:lo + step]
            z = _smooth_mode(d, s, b)[:, None] + offs
            f = -0.5 * z**2 - 2.0 * b * np.sin(0.5 * (d[:, None] + s * z)) ** 2
            out[lo:lo + step] = logsumexp(f, axis=1) + const
        return out
    if kind == "z":
        half = (npts - 1) // 2
        nodes = h * np.arange(-half, half + 1)
        base = -0.5 * nodes**2
        shift = s * nodes
        const = math.log(h) - LOG_SQRT_2PI
    else:
        nodes = -math.pi + TWO_PI * np.arange(1, npts + 1) / npts
        base = log_wrapped_normal(nodes, s)
        shift = nodes
        const = math.log(TWO_PI / npts)
    out = np.empty(delta.shape[0])
    step = max(1, _CHUNK // npts)
    for lo in range(0, delta.shape[0], step):
        d = delta[lo:lo + step, None]
        f = base - 2.0 * b * np.sin(0.5 * (d + shift)) ** 2
        out[lo:lo + step] = logsumexp(f, axis=1) + const
    return out


def log_smooth_norm(delta, s, b):
    """log E[exp(b (cos(delta + s Z) - 1))], Z standard normal, elementwise.

    ``delta``, ``s`` and ``b`` are 1-d arrays of equal length. Evaluated in
    log space so the result keeps full relative accuracy even when the
    expectation underflows.
    """
    delta = np.asarray(delta, dtype=float)
    s = np.asarray(s, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.empty(delta.shape[0])
    pairs = np.stack([s, b], axis=1)
    uniq, inv = np.unique(pairs, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    for g, (sg, bg) in enumerate(uniq):
        idx = np.flatnonzero(inv == g)
        out[idx] = _log_smooth_group(delta[idx], float(sg), float(bg))
    return out


def cn_march(lo, di, up, elo, edi, eup, p0, nsteps, record, dtheta):
    """Advance ``A p_{n+1} = B p_n`` on a periodic grid.

    ``A`` and ``B`` are cyclic tridiagonal with sub/main/super diagonals
    ``(lo, di, up)`` and ``(elo, edi, eup)``; ``lo[0]`` couples row 0 to the
    last column and ``up[-1]`` couples the last row to column 0.

    Returns (snapshots, masses, neg_masses) where ``snapshots[j]`` is the raw
    state after ``record[j]`` steps, ``masses[i]`` the grid mass after step
    ``i + 1`` and ``neg_masses[i]`` the mass carried by negative values.
    """
    k = di.shape[0]
    rows = np.arange(k)
    a = sparse.csc_matrix(
        (
            np.concatenate([di, lo, up]),
            (np.concatenate([rows, rows, rows]),
             np.concatenate([rows, (rows - 1) % k, (rows + 1) % k])),
        ),
        shape=(k, k),
    )
    lu = splu(a)
    p = p0.astype(float).copy()
    snaps = np.empty((len(record), k))
    masses = np.empty(nsteps)
    neg = np.empty(nsteps)
    # ``record`` is sorted ascending; repeated step numbers are allowed.
    record = [int(s) for s in record]
    r = 0
    while r < len(record) and record[r] == 0:
        snaps[r] = p
        r += 1
    for i in range(1, nsteps + 1):
        rhs = edi * p + elo * np.roll(p, 1) + eup * np.roll(p, -1)
        p = lu.solve(rhs)
        masses[i - 1] = p.sum() * dtheta
        neg[i - 1] = -p[p < 0].sum() * dtheta
        while r < len(record) and record[r] == i:
            snaps[r] = p
            r += 1
    return snaps, masses, neg

"""Time the numba kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--scale 1.0]

Each kernel runs once per backend before timing so numba compilation is
excluded. The last column is the largest absolute difference between the
two backends' outputs.
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from circdiff._kernels import get_backend
from circdiff.diffusion import VonMisesParams
from circdiff.pde import _dirac, forward_operator


def _cases(scale: float):
    rng = np.random.default_rng(0)

    n_path = int(1_000_000 * scale)
    z = rng.standard_normal(n_path)
    yield "euler_vm", f"n={n_path}", lambda kb: kb.euler_vm(0.3, 2.0, math.pi / 2, 1.0, 0.01, z)

    n_obs = int(10_000 * scale)
    delta = rng.uniform(-math.pi, math.pi, n_obs)
    s = rng.uniform(0.02, 3.0, n_obs)
    b = rng.uniform(0.1, 40.0, n_obs)
    yield "log_smooth_norm", f"n={n_obs}", lambda kb: kb.log_smooth_norm(delta, s, b)

    x = rng.uniform(-math.pi, math.pi, 10 * n_obs)
    scales = rng.uniform(0.01, 5.0, 10 * n_obs)
    yield "log_wrapped_normal", f"n={10 * n_obs}", lambda kb: kb.log_wrapped_normal(x, scales)

    k, m = 3000, max(2, int(2000 * scale))
    lo, di, up = forward_operator(VonMisesParams.from_kappa(math.pi / 4, 2.0, 2.0), k)
    half = 0.5 * (0.1 / m)
    h = 2 * math.pi / k
    args = (-half * lo, 1.0 - half * di, -half * up, half * lo, 1.0 + half * di, half * up,
            _dirac(0.0, k), m, np.array([m], dtype=np.int64), h)
    yield "cn_march", f"k={k} m={m}", lambda kb: kb.cn_march(*args)[0]


def _best(fn, repeat):
    out = fn()
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best, np.asarray(out)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--scale", type=float, default=1.0, help="multiply problem sizes")
    args = ap.parse_args(argv)

    nb, npy = get_backend("numba"), get_backend("numpy")
    print(f"{'kernel':<20}{'size':<16}{'numba s':>10}{'numpy s':>10}{'speedup':>9}{'max diff':>11}")
    for name, size, call in _cases(args.scale):
        t_nb, out_nb = _best(lambda: call(nb), args.repeat)
        t_np, out_np = _best(lambda: call(npy), args.repeat)
        diff = float(np.max(np.abs(out_nb - out_np)))
        print(f"{name:<20}{size:<16}{t_nb:>10.4f}{t_np:>10.4f}{t_np / t_nb:>9.1f}{diff:>11.2e}")


if __name__ == "__main__":
    main()

"""Derivative-free box-constrained maximisation (thin wrapper over scipy)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import InvalidArgumentError

# value handed to the minimiser when the objective is not finite
_BAD = 1e100


@dataclass
class OptimizerOptions:
    """Stopping rules shared by every derivative-free fit.

    ``xtol`` is the final trust-region radius, ``max_evals`` the evaluation
    budget and ``rhobeg`` the initial radius (in the optimiser's coordinates).
    ``method`` is "cobyla" (linear models) or "cobyqa" (quadratic models).
    """

    xtol: float = 1e-6
    max_evals: int = 2000
    rhobeg: float = 1.0
    method: str = "cobyla"


@dataclass
class DfoStatus:
    converged: bool
    n_evals: int
    message: str


def dfo_maximize(objective, x0, bounds, opts: OptimizerOptions | None = None):
    """Maximise ``objective`` inside a box without derivatives.

    Returns ``(x_best, value_best, status)``. The best point seen is always
    returned, even when the budget runs out (reported via ``status``).
    """
    opts = opts or OptimizerOptions()
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    lo = np.array([-np.inf if b[0] is None else b[0] for b in bounds], dtype=float)
    hi = np.array([np.inf if b[1] is None else b[1] for b in bounds], dtype=float)
    if lo.size != x0.size:
        raise InvalidArgumentError("bounds and x0 have different lengths")
    if np.any(x0 < lo) or np.any(x0 > hi):
        raise InvalidArgumentError("x0 lies outside the bounds")

    best = {"x": x0.copy(), "f": -math.inf, "n": 0}

    def neg(x):
        x = np.clip(x, lo, hi)
        val = float(objective(x))
        best["n"] += 1
        if not math.isfinite(val):
            return _BAD
        if val > best["f"]:
            best["f"] = val
            best["x"] = x.copy()
        return -val

    box = list(zip(lo, hi))
    method = opts.method.lower()
    if method == "cobyla":
        res = minimize(neg, x0, method="COBYLA", bounds=box,
                       options={"rhobeg": opts.rhobeg, "tol": opts.xtol,
                                "maxiter": int(opts.max_evals)})
        converged = res.status == 1 or bool(res.success)
    elif method == "cobyqa":
        res = minimize(neg, x0, method="COBYQA", bounds=box,
                       options={"initial_tr_radius": opts.rhobeg,
                                "final_tr_radius": opts.xtol,
                                "maxfev": int(opts.max_evals)})
        converged = bool(res.success)
    else:
        raise InvalidArgumentError(f"unknown method {opts.method!r}")
    if best["n"] == 0 or not math.isfinite(best["f"]):
        return best["x"], best["f"], DfoStatus(False, best["n"], "objective never finite")
    return best["x"], best["f"], DfoStatus(converged, best["n"], str(res.message))

"""``circdiff`` command-line front end.

Every subcommand takes an optional ``--config`` file (YAML or JSON) whose
keys mirror the long flag names (dashes or underscores); flags given on the
command line win over the file. Exit codes: 0 success, 2 configuration
error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import itertools
import logging
import math
import os
import sys
import warnings
from datetime import date, timedelta
from pathlib import Path

import numpy as np
import yaml

from . import io
from .diffusion import AngularPath, CbmParams, VonMisesParams, simulate_cbm, simulate_vmp
from .errors import (
    CircDiffError,
    ClampWarning,
    ConfigError,
    DataError,
    InvalidArgumentError,
)
from .estimation import (
    StudyConfig,
    bootstrap_circular,
    fit_cbm,
    fit_vmp,
    replicate_study,
    write_report_csv,
)
from .pde import REFERENCE_TIMES, reference_grid, validate_tpd, write_validation_csv
from .stochcorr import (
    DEFAULT_HYPER,
    CorrProcessSpec,
    GbmLeg,
    StochCorrOptions,
    bootstrap_rho_bands,
    fit_stochcorr,
    simulate_prices,
    simulate_stochcorr,
)

log = logging.getLogger("circdiff")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
TRADING_DAY = 1.0 / 252


# -------------------------------------------------------------- config utils

def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}", field="config") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"not valid YAML/JSON: {exc}", field="config") from exc
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError("top level must be a mapping", field="config")
    return {str(k).replace("-", "_"): v for k, v in doc.items()}


def merge(args: argparse.Namespace, defaults: dict) -> dict:
    """defaults <- config file <- explicit flags."""
    cfg = dict(defaults)
    cfg.update(load_config(args.config))
    for k, v in vars(args).items():
        if k in ("config", "command", "func", "verbose") or v is None:
            continue
        cfg[k] = v
    return cfg


def _num(cfg, key, kind=float, positive=False, allow_none=False):
    v = cfg.get(key)
    if v is None:
        if allow_none:
            return None
        raise ConfigError("is required", field=key)
    try:
        out = kind(v)
    except (TypeError, ValueError):
        raise ConfigError(f"expected a number, got {v!r}", field=key) from None
    if kind is int and out != v and not isinstance(v, str):
        raise ConfigError(f"expected an integer, got {v!r}", field=key)
    if isinstance(out, float) and not math.isfinite(out):
        raise ConfigError("must be finite", field=key)
    if positive and not out > 0:
        raise ConfigError("must be positive", field=key)
    return out


def _choice(cfg, key, options):
    v = cfg.get(key)
    if v not in options:
        raise ConfigError(f"must be one of {', '.join(options)}; got {v!r}", field=key)
    return v


def _list(cfg, key, kind=float, positive=False):
    v = cfg.get(key)
    vals = v if isinstance(v, (list, tuple)) else [v]
    return [_num({key: x}, key, kind, positive) for x in vals]


def _workers(cfg) -> int:
    w = cfg.get("workers")
    if w is None:
        return os.cpu_count() or 1
    return _num(cfg, "workers", int, positive=True)


def _output(cfg, key="output") -> Path:
    v = cfg.get(key)
    if not v:
        raise ConfigError("an output path is required", field=key)
    return Path(v)


# ------------------------------------------------------------------ simulate

SIMULATE_DEFAULTS = {"process": "cbm", "sigma": 1.0, "lam": 1.0, "mu": 0.0, "n": 1000,
                     "dt": None, "theta0": None, "seed": 0, "replications": None,
                     "units": "radians"}


def cmd_simulate(args) -> int:
    cfg = merge(args, SIMULATE_DEFAULTS)
    if "lambda" in cfg and args.lam is None:
        cfg["lam"] = cfg["lambda"]
    process = _choice(cfg, "process", ("cbm", "vmp", "stochcorr"))
    out = _output(cfg)
    seed = _num(cfg, "seed", int)
    if process == "stochcorr":
        return _simulate_prices(cfg, out, seed)
    if cfg.get("dt") is None:
        cfg["dt"] = 0.05
    sigma = _num(cfg, "sigma", positive=True)
    mu = _num(cfg, "mu")
    lam = _num(cfg, "lam", positive=True) if process == "vmp" else 0.0
    theta0 = _num(cfg, "theta0", allow_none=True)

    if cfg.get("replications") is not None:
        reps = _num(cfg, "replications", int, positive=True)
        cells = list(itertools.product(_list(cfg, "n", int, True), _list(cfg, "dt", float, True)))
        reports = []
        for n, dt in cells:
            sc = StudyConfig(process=process, sigma=sigma, n=n, dt=dt, replications=reps,
                             seed=seed, mu=mu, lam=lam if process == "vmp" else 1.0,
                             theta0=theta0, workers=_workers(cfg))
            rep = replicate_study(sc)
            reports.append(rep)
            print(f"n={n} dt={dt}: E[sigma-sigma_hat]={rep.sigma_bias:.5f} "
                  f"sd={rep.sigma_sd:.5f} failures={rep.failures}")
        write_report_csv(reports, out)
        print(f"wrote {len(reports)} report row(s) to {out}")
        return EXIT_OK

    n = _num(cfg, "n", int, positive=True)
    dt = _num(cfg, "dt", positive=True)
    units = _choice(cfg, "units", ("radians", "degrees"))
    if n < 2:
        raise ConfigError("must be >= 2", field="n")
    start = theta0 if theta0 is not None else (mu if process == "vmp" else 0.0)
    if process == "cbm":
        path = simulate_cbm(CbmParams(sigma), start, n, dt, seed)
    else:
        path = simulate_vmp(VonMisesParams(mu, lam, sigma), start, n, dt, seed)
    angles = np.rad2deg(path.angles) if units == "degrees" else path.angles
    io.write_angle_series(out, path.times, angles)
    print(f"wrote {len(path)} observations to {out}")
    return EXIT_OK


def _leg(cfg, key, default):
    raw = cfg.get(key) or default
    if not isinstance(raw, dict):
        raise ConfigError("must be a mapping with mu, sigma, s0", field=key)
    try:
        return GbmLeg(float(raw.get("mu", 0.0)), float(raw.get("sigma", 0.2)),
                      float(raw.get("s0", 100.0)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), field=key) from None


def _simulate_prices(cfg, out, seed) -> int:
    leg1 = _leg(cfg, "leg1", {"mu": 0.05, "sigma": 0.2, "s0": 100.0})
    leg2 = _leg(cfg, "leg2", {"mu": 0.02, "sigma": 0.3, "s0": 50.0})
    n = _num(cfg, "n", int, positive=True)
    dt = _num({"dt": cfg["dt"] if cfg.get("dt") is not None else TRADING_DAY}, "dt",
              positive=True)
    if cfg.get("rho") is not None:
        rho = _num(cfg, "rho")
        if not -1.0 < rho < 1.0:
            raise ConfigError("must lie strictly inside (-1, 1)", field="rho")
        p1, p2 = simulate_prices(leg1, leg2, np.full(n, rho), dt, seed)
    else:
        corr = cfg.get("corr") or {"kind": "cbm", "sigma": 1.0}
        if not isinstance(corr, dict):
            raise ConfigError("must be a mapping", field="corr")
        kind = _choice(corr, "kind", ("cbm", "vmp"))
        try:
            if kind == "cbm":
                spec = CorrProcessSpec("cbm", CbmParams(float(corr.get("sigma", 1.0))))
            else:
                spec = CorrProcessSpec("vmp", VonMisesParams(
                    float(corr.get("mu", math.pi / 2)), float(corr.get("lam", 2.0)),
                    float(corr.get("sigma", 1.0))))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), field="corr") from None
        theta_start = float(corr.get("theta0", spec.params.mu if kind == "vmp" else math.pi / 2))
        p1, p2, _ = simulate_stochcorr(leg1, leg2, spec, n, dt, seed, theta0=theta_start)
    start = date.fromisoformat(str(cfg.get("start_date", "2000-01-03")))
    dates = [start + timedelta(days=i) for i in range(n)]
    io.write_price_series(out, dates, p1, p2)
    print(f"wrote {n} price rows to {out}")
    return EXIT_OK


# ------------------------------------------------------------- validate-tpd

VALIDATE_DEFAULTS = {"k": 3000, "m": 20000, "theta0": 0.0, "reading": "kappa",
                     "times": list(REFERENCE_TIMES), "cells": None}


def _cells(cfg):
    cells = cfg.get("cells")
    if cells is None:
        return reference_grid(_choice(cfg, "reading", ("kappa", "literal")))
    if not isinstance(cells, list) or not cells:
        raise ConfigError("must be a non-empty list of {kappa|lambda, sigma, mu}", field="cells")
    out = []
    for i, c in enumerate(cells):
        fld = f"cells[{i}]"
        if not isinstance(c, dict):
            raise ConfigError("must be a mapping", field=fld)
        try:
            sigma, mu = float(c["sigma"]), float(c["mu"])
            if "kappa" in c:
                out.append(VonMisesParams.from_kappa(mu, float(c["kappa"]), sigma))
            else:
                out.append(VonMisesParams(mu, float(c.get("lambda", c.get("lam"))), sigma))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad cell ({exc})", field=fld) from None
    return out


def cmd_validate_tpd(args) -> int:
    cfg = merge(args, VALIDATE_DEFAULTS)
    out = _output(cfg)
    k = _num(cfg, "k", int, positive=True)
    m = _num(cfg, "m", int, positive=True)
    if k < 16:
        raise ConfigError("must be >= 16", field="k")
    theta0 = _num(cfg, "theta0")
    times = _list(cfg, "times", float, positive=True)
    params = _cells(cfg)
    rows = validate_tpd(params, theta0, times, k=k, m=m, workers=_workers(cfg), keep_going=True)
    write_validation_csv(rows, out)
    failed = [r for r in rows if r.error]
    good = [r.hellinger for r in rows if not r.error]
    worst = max(good) if good else float("nan")
    for r in failed:
        print(f"cell kappa={r.kappa:g} sigma={r.sigma:g} mu={r.mu:.4f} t={r.t:g} failed: {r.error}",
              file=sys.stderr)
    print(f"max hellinger: {worst:.6g} over {len(rows)} rows ({len(failed)} failed); wrote {out}")
    return EXIT_NUMERIC if failed else EXIT_OK


# ------------------------------------------------------------- fit-circular

FIT_CIRCULAR_DEFAULTS = {"process": "vmp", "units": "radians", "bootstrap": 0, "level": 0.95,
                         "seed": 0}


def cmd_fit_circular(args) -> int:
    cfg = merge(args, FIT_CIRCULAR_DEFAULTS)
    process = _choice(cfg, "process", ("cbm", "vmp"))
    units = _choice(cfg, "units", ("radians", "degrees"))
    out = _output(cfg)
    level = _num(cfg, "level", positive=True)
    if not level < 1:
        raise ConfigError("must be in (0, 1)", field="level")
    n_boot = _num(cfg, "bootstrap", int)
    if not cfg.get("input"):
        raise ConfigError("an input file is required", field="input")
    times, angles, _ = io.read_angle_series(cfg["input"], units)
    if len(angles) < 3:
        raise DataError("need at least three observations")
    dt = _num(cfg, "dt", positive=True, allow_none=True)
    if dt is not None:
        times = dt * np.arange(len(angles))
    path = AngularPath(times, angles)
    fit = fit_cbm(path) if process == "cbm" else fit_vmp(path)
    payload = fit.to_dict()
    payload["mean_dt"] = path.duration / (len(path) - 1)
    payload["units"] = "radians"
    if n_boot:
        payload["bootstrap"] = bootstrap_circular(fit, path, n_boot, level,
                                                  _num(cfg, "seed", int), workers=_workers(cfg))
    io.write_json(out, "circular_fit", payload)
    msg = f"sigma_hat={fit.sigma_hat:.6g}"
    if process == "vmp":
        msg += f" lambda_hat={fit.lambda_hat:.6g} mu_hat={fit.mu_hat:.6g}"
    print(f"{msg} loglik={fit.loglik:.6g}; wrote {out}")
    return EXIT_OK


# ----------------------------------------------------------- fit-stochcorr

FIT_STOCHCORR_DEFAULTS = {"process": "cbm", "bootstrap": 500, "level": 0.95, "seed": 0,
                          "knot_step": 1, "jacobian": True}


def _load_prices(cfg):
    if cfg.get("input"):
        return io.read_price_series(cfg["input"])
    if cfg.get("input1") and cfg.get("input2"):
        return io.inner_join(io.read_single_price_series(cfg["input1"]),
                             io.read_single_price_series(cfg["input2"]))
    raise ConfigError("give input (date,price1,price2) or input1 and input2", field="input")


def cmd_fit_stochcorr(args) -> int:
    cfg = merge(args, FIT_STOCHCORR_DEFAULTS)
    kind = _choice(cfg, "process", ("cbm", "vmp"))
    out = _output(cfg)
    bands_path = Path(cfg["bands"]) if cfg.get("bands") else out.with_suffix(".bands.csv")
    l1_default, l2_default = DEFAULT_HYPER[kind]
    lambda1 = _num({"lambda1": cfg.get("lambda1", l1_default)}, "lambda1")
    lambda2 = _num({"lambda2": cfg.get("lambda2", l2_default)}, "lambda2")
    if lambda1 < 0 or lambda2 < 0:
        raise ConfigError("penalty weights must be >= 0", field="lambda1" if lambda1 < 0 else "lambda2")
    dt = _num({"dt": cfg.get("dt", TRADING_DAY)}, "dt", positive=True)
    n_boot = _num(cfg, "bootstrap", int)
    level = _num(cfg, "level", positive=True)
    if not level < 1:
        raise ConfigError("must be in (0, 1)", field="level")
    seed = _num(cfg, "seed", int)
    if not isinstance(cfg.get("jacobian"), bool):
        raise ConfigError("must be true or false", field="jacobian")
    opts = StochCorrOptions(knot_step=_num(cfg, "knot_step", int, positive=True),
                            jacobian=cfg["jacobian"])

    dates, p1, p2 = _load_prices(cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ClampWarning)
        fit = fit_stochcorr(p1, p2, dt, kind, (lambda1, lambda2), opts, seed)
    clamped = any(issubclass(w.category, ClampWarning) for w in caught)
    if clamped:
        print("warning: fitted correlation pinned at the clamp boundary", file=sys.stderr)
    payload = fit.to_dict()
    payload["dates"] = [d.isoformat() for d in dates]
    payload["clamp_warning"] = clamped
    lower = upper = None
    if n_boot:
        bands = bootstrap_rho_bands(fit, n_boot, level, seed, opts, _workers(cfg))
        lower, upper = bands.lower, bands.upper
        payload["bootstrap"] = {"n_samples": bands.n_samples, "n_failed": bands.n_failed,
                                "level": level, "seed": seed}
    io.write_json(out, "stochcorr_fit", payload)
    io.write_bands_csv(bands_path, dates, fit.rhos, lower, upper)
    print(f"leg sigmas {fit.leg1.sigma:.4g}/{fit.leg2.sigma:.4g}, mean rho_hat "
          f"{float(np.mean(fit.rhos)):.4f}; wrote {out} and {bands_path}")
    return EXIT_OK


# -------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="circdiff", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--config", help="YAML or JSON file of option values")
        sp.add_argument("--workers", type=int, help="worker processes (default: CPU count)")
        sp.add_argument("-o", "--output", help="output file")
        if seed:
            sp.add_argument("--seed", type=int, help="master random seed (default 0)")

    s = sub.add_parser("simulate", help="simulate a path, a price pair or a replication study")
    common(s)
    s.add_argument("--process", choices=("cbm", "vmp", "stochcorr"), help="default cbm")
    s.add_argument("--sigma", type=float, help="diffusion coefficient (default 1)")
    s.add_argument("--lambda", dest="lam", type=float, help="drift strength, vmp only (default 1)")
    s.add_argument("--mu", type=float, help="mean direction, vmp only (default 0)")
    s.add_argument("--n", type=int, help="number of observations (default 1000)")
    s.add_argument("--dt", type=float, help="sampling interval (default 0.05; 1/252 for stochcorr)")
    s.add_argument("--theta0", type=float, help="start angle (default 0, or mu for vmp)")
    s.add_argument("--replications", type=int,
                   help="run a replication study and write the report CSV instead of a path")
    s.add_argument("--units", choices=("radians", "degrees"), help="angle units of the output")
    s.add_argument("--rho", type=float,
                   help="stochcorr only: hold the correlation constant instead of simulating it")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("validate-tpd",
                       help="compare the analytic transition density with a PDE solution")
    common(v, seed=False)
    v.add_argument("--k", type=int, help="spatial grid points (default 3000)")
    v.add_argument("--m", type=int, help="time steps to the largest time (default 20000)")
    v.add_argument("--theta0", type=float, help="start angle (default 0)")
    v.add_argument("--reading", choices=("kappa", "literal"),
                   help="reference grid variant when no cells are configured (default kappa)")
    v.add_argument("--times", type=float, nargs="+", help="default 1e-4 1e-3 1e-2 1e-1")
    v.set_defaults(func=cmd_validate_tpd)

    c = sub.add_parser("fit-circular", help="fit CBM or the von Mises process to an angle series")
    common(c)
    c.add_argument("input", nargs="?", help="CSV with columns time,angle")
    c.add_argument("--process", choices=("cbm", "vmp"), help="default vmp")
    c.add_argument("--units", choices=("radians", "degrees"), help="input angle units")
    c.add_argument("--dt", type=float,
                   help="treat observations as equally spaced by dt (default: timestamp gaps, "
                        "in days for dates)")
    c.add_argument("--bootstrap", type=int, metavar="N", help="parametric bootstrap size (default 0)")
    c.add_argument("--level", type=float, help="interval level (default 0.95)")
    c.set_defaults(func=cmd_fit_circular)

    f = sub.add_parser("fit-stochcorr", help="fit the stochastic-correlation model to a price pair")
    common(f)
    f.add_argument("input", nargs="?", help="CSV with columns date,price1,price2")
    f.add_argument("--input1", help="date,price CSV for the first leg (inner-joined on date)")
    f.add_argument("--input2", help="date,price CSV for the second leg")
    f.add_argument("--process", choices=("cbm", "vmp"), help="correlation process (default cbm)")
    f.add_argument("--lambda1", type=float, help="roughness penalty (default 4 cbm / 10 vmp)")
    f.add_argument("--lambda2", type=float, help="concentration penalty (default 0 cbm / 20 vmp)")
    f.add_argument("--dt", type=float, help="time per row in years (default 1/252)")
    f.add_argument("--bootstrap", type=int, metavar="N", help="bootstrap size, 0 to skip (default 500)")
    f.add_argument("--level", type=float, help="band level (default 0.95)")
    f.add_argument("--knot-step", type=int, help="fit theta on every k-th observation (default 1)")
    f.add_argument("--bands", help="bands CSV path (default: <output>.bands.csv)")
    f.add_argument("--no-jacobian", dest="jacobian", action="store_const", const=False,
                   help="drop the change-of-variables term from the fitting objective; without "
                        "it the rho path is not pulled towards +/-1")
    f.set_defaults(func=cmd_fit_stochcorr)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InvalidArgumentError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (CircDiffError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

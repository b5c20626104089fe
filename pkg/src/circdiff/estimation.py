"""Estimation for discretely observed circular diffusions.

sigma is always estimated from the sample quadratic variation of the wrapped
increments. For the von Mises process (lam, mu) then maximise the sum of log
approximate transition densities with sigma held at its plug-in value.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .circular import angular_diff, bias_and_concentration, circular_mean
from .diffusion import (
    AngularPath,
    CbmParams,
    VonMisesParams,
    cbm_log_tpd,
    simulate_cbm,
    simulate_vmp,
    vmp_log_tpd,
)
from .errors import (
    BootstrapError,
    CircDiffError,
    ConfigError,
    DataError,
    DegenerateMeanError,
    FitError,
    InvalidArgumentError,
)
from .optimize import OptimizerOptions, dfo_maximize

LAMBDA_MIN = 1e-4
LAMBDA_MAX = 50.0


@dataclass
class CircularFit:
    sigma_hat: float
    loglik: float
    n_obs: int
    lambda_hat: float | None = None
    mu_hat: float | None = None
    process: str = "cbm"
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def qv_sigma_hat(path: AngularPath) -> float:
    """sqrt(sum of squared wrapped increments / observation span)."""
    span = path.duration
    if not span > 0:
        raise InvalidArgumentError("path spans zero time")
    d = angular_diff(path.angles[1:], path.angles[:-1])
    return math.sqrt(float(np.dot(d, d)) / span)


def vmp_loglik(lam: float, mu: float, path: AngularPath, sigma_hat: float) -> float:
    """Sum of log transition densities along the path, sigma fixed."""
    params = VonMisesParams(mu=mu, lam=lam, sigma=sigma_hat)
    return float(np.sum(vmp_log_tpd(path.angles[1:], path.angles[:-1], path.elapsed, params)))


def cbm_loglik(path: AngularPath, sigma: float) -> float:
    return float(np.sum(cbm_log_tpd(path.angles[1:], path.angles[:-1], path.elapsed,
                                    CbmParams(sigma))))


def _sigma_or_fail(path: AngularPath) -> float:
    s = qv_sigma_hat(path)
    if s <= 0:
        raise DataError("degenerate series: zero quadratic variation (constant angles)")
    return s


def fit_cbm(path: AngularPath) -> CircularFit:
    s = _sigma_or_fail(path)
    return CircularFit(sigma_hat=s, loglik=cbm_loglik(path, s), n_obs=len(path), process="cbm")


def fit_vmp(path: AngularPath, opts: OptimizerOptions | None = None,
            lambda_max: float = LAMBDA_MAX) -> CircularFit:
    """Plug-in sigma, then maximise the likelihood over (log lam, mu).

    mu is searched in [mu0 - pi, mu0 + pi] around the sample circular mean
    and wrapped at the end, so the optimiser never sees the branch cut.
    """
    if len(path) < 3:
        raise InvalidArgumentError("need at least three observations")
    opts = opts or OptimizerOptions()
    sigma = _sigma_or_fail(path)
    try:
        mu0 = circular_mean(path.angles)
    except DegenerateMeanError:
        mu0 = 0.0

    def objective(x):
        return vmp_loglik(math.exp(x[0]), x[1], path, sigma)

    bounds = [(math.log(LAMBDA_MIN), math.log(lambda_max)), (mu0 - math.pi, mu0 + math.pi)]
    x, val, status = dfo_maximize(objective, [0.0, mu0], bounds, opts)
    lam, mu = math.exp(x[0]), float(angular_diff(x[1], 0.0))
    fit = CircularFit(sigma_hat=sigma, loglik=val, n_obs=len(path), lambda_hat=lam, mu_hat=mu,
                      process="vmp", diagnostics={"n_evals": status.n_evals,
                                                  "message": status.message})
    if not status.converged or not math.isfinite(val):
        raise FitError(f"optimizer did not converge: {status.message}", best=fit,
                       diagnostics=fit.diagnostics)
    return fit


@dataclass
class StudyConfig:
    """One cell of a simulation study."""

    process: str = "cbm"
    sigma: float = 1.0
    n: int = 1000
    dt: float = 0.05
    replications: int = 100
    seed: int = 0
    mu: float = 0.0
    lam: float = 1.0
    theta0: float | None = None
    workers: int = 1

    def __post_init__(self):
        if self.process not in ("cbm", "vmp"):
            raise ConfigError("must be 'cbm' or 'vmp'", field="process")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ConfigError("must be positive", field="sigma")
        if self.process == "vmp" and not self.lam > 0:
            raise ConfigError("must be positive", field="lambda")
        if int(self.replications) < 2:
            raise ConfigError("must be >= 2", field="replications")
        if int(self.n) < 3:
            raise ConfigError("must be >= 3", field="n")
        if not self.dt > 0:
            raise ConfigError("must be positive", field="dt")

    @property
    def start(self) -> float:
        # start von Mises paths at the mean so no burn-in is needed
        if self.theta0 is not None:
            return self.theta0
        return self.mu if self.process == "vmp" else 0.0


def simulate_replication(cfg: StudyConfig, index: int) -> AngularPath:
    seed = cfg.seed + index
    if cfg.process == "cbm":
        return simulate_cbm(CbmParams(cfg.sigma), cfg.start, cfg.n, cfg.dt, seed)
    return simulate_vmp(VonMisesParams(cfg.mu, cfg.lam, cfg.sigma), cfg.start, cfg.n, cfg.dt, seed)


def _one_replication(args):
    cfg, index, opts = args
    path = simulate_replication(cfg, index)
    try:
        if cfg.process == "cbm":
            f = fit_cbm(path)
        else:
            f = fit_vmp(path, opts)
        return f.sigma_hat, f.lambda_hat, f.mu_hat, ""
    except CircDiffError as exc:
        return math.nan, math.nan, math.nan, str(exc)


@dataclass
class ReplicationReport:
    config: StudyConfig
    sigma_hat: np.ndarray
    lambda_hat: np.ndarray
    mu_hat: np.ndarray
    failures: int = 0

    @property
    def n_ok(self) -> int:
        return int(np.sum(np.isfinite(self.sigma_hat)))

    def _err(self, true, est):
        e = true - est[np.isfinite(est)]
        if e.size == 0:
            return math.nan, math.nan
        sd = float(np.std(e, ddof=1)) if e.size > 1 else math.nan
        return float(np.mean(e)), sd

    @property
    def sigma_bias(self) -> float:
        return self._err(self.config.sigma, self.sigma_hat)[0]

    @property
    def sigma_sd(self) -> float:
        return self._err(self.config.sigma, self.sigma_hat)[1]

    @property
    def lambda_bias(self) -> float:
        return self._err(self.config.lam, self.lambda_hat)[0]

    @property
    def lambda_sd(self) -> float:
        return self._err(self.config.lam, self.lambda_hat)[1]

    def mu_bias_concentration(self) -> tuple[float, float]:
        est = self.mu_hat[np.isfinite(self.mu_hat)]
        if est.size == 0:
            return math.nan, math.nan
        return bias_and_concentration(self.config.mu, est)

    def row(self) -> dict:
        c = self.config
        out = {
            "process": c.process, "mu": c.mu, "lambda": c.lam if c.process == "vmp" else "",
            "sigma": c.sigma, "n": c.n, "dt": c.dt, "replications": c.replications,
            "failures": self.failures,
            "E[sigma-sigma_hat]": self.sigma_bias,
            "sqrt(Var[sigma-sigma_hat])": self.sigma_sd,
        }
        if c.process == "vmp":
            bias, conc = self.mu_bias_concentration()
            out.update({
                "E[lambda-lambda_hat]": self.lambda_bias,
                "sqrt(Var[lambda-lambda_hat])": self.lambda_sd,
                "Bias(mu)": bias,
                "Concentration(mu)": conc,
            })
        return out


REPORT_COLUMNS = (
    "process", "mu", "lambda", "sigma", "n", "dt", "replications", "failures",
    "E[sigma-sigma_hat]", "sqrt(Var[sigma-sigma_hat])",
    "E[lambda-lambda_hat]", "sqrt(Var[lambda-lambda_hat])", "Bias(mu)", "Concentration(mu)",
)


def replicate_study(cfg: StudyConfig, opts: OptimizerOptions | None = None) -> ReplicationReport:
    """Simulate and refit ``cfg.replications`` paths (seed + index each)."""
    jobs = [(cfg, i, opts) for i in range(int(cfg.replications))]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_one_replication, jobs))
    else:
        results = [_one_replication(j) for j in jobs]
    arr = np.array([r[:3] for r in results], dtype=float)
    failures = sum(1 for r in results if r[3])
    return ReplicationReport(config=cfg, sigma_hat=arr[:, 0], lambda_hat=arr[:, 1],
                             mu_hat=arr[:, 2], failures=failures)


def write_report_csv(reports, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS, restval="")
        w.writeheader()
        for r in reports:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.row().items()})


# ------------------------------------------------------- parametric bootstrap

def _boot_one(args):
    fit, n, dt, theta0, index, seed, opts = args
    try:
        if fit.process == "cbm":
            path = simulate_cbm(CbmParams(fit.sigma_hat), theta0, n, dt, seed + index)
            f = fit_cbm(path)
        else:
            params = VonMisesParams(fit.mu_hat, fit.lambda_hat, fit.sigma_hat)
            path = simulate_vmp(params, theta0, n, dt, seed + index)
            f = fit_vmp(path, opts)
    except CircDiffError:
        return None
    return f.sigma_hat, f.lambda_hat, f.mu_hat


def bootstrap_circular(fit: CircularFit, path: AngularPath, n_samples: int, level: float = 0.95,
                       seed: int = 0, opts: OptimizerOptions | None = None,
                       workers: int = 1) -> dict:
    """Parametric bootstrap intervals for a circular fit.

    Paths of the observed length are simulated from the fitted model on a
    regular grid with the mean observed spacing, started at the first
    observation, and refitted. sigma and lambda get plain percentile
    intervals; mu gets mu_hat +/- acos(1 - U_q) where U = 1 - cos(mu* - mu_hat).
    """
    if n_samples < 2:
        raise InvalidArgumentError("n_samples must be >= 2")
    if not 0 < level < 1:
        raise InvalidArgumentError("level must be in (0, 1)")
    dt = path.duration / (len(path) - 1)
    jobs = [(fit, len(path), dt, float(path.angles[0]), i, seed, opts) for i in range(n_samples)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            res = list(pool.map(_boot_one, jobs))
    else:
        res = [_boot_one(j) for j in jobs]
    ok = [r for r in res if r is not None]
    failed = len(res) - len(ok)
    if failed > 0.2 * n_samples:
        raise BootstrapError(f"{failed} of {n_samples} bootstrap refits failed")
    arr = np.array([[np.nan if v is None else v for v in r] for r in ok], dtype=float)
    lo, hi = 50.0 * (1.0 - level), 50.0 * (1.0 + level)
    out = {"level": level, "n_samples": n_samples, "n_failed": failed,
           "sigma": [float(np.percentile(arr[:, 0], lo)), float(np.percentile(arr[:, 0], hi))]}
    if fit.process == "vmp":
        out["lambda"] = [float(np.percentile(arr[:, 1], lo)), float(np.percentile(arr[:, 1], hi))]
        u = 1.0 - np.cos(arr[:, 2] - fit.mu_hat)
        half = math.acos(1.0 - min(float(np.percentile(u, 100.0 * level)), 2.0))
        out["mu"] = [fit.mu_hat - half, fit.mu_hat + half]
    return out

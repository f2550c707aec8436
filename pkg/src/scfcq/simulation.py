"""Monte Carlo designs with a censored outcome and an endogenous regressor.

Two designs share the latent-outcome equation

    Y* = b0 + R + X + eps,
    eps = rho/sqrt(2) * Phi^-1(V)
          + [0.4 (0.5 R + 0.5 X + 2) + sqrt(1 - rho^2)] / sqrt(2) * Phi^-1(U),

and differ in the endogenous regressor: ``DGP-I`` has R = 1 + Z1 + X +
Phi^-1(V), ``DGP-II`` scales that error by 0.5 (2 + 0.5 X + 0.5 Z1).
The intercept b0 is calibrated so that 30% of the latent outcomes are
nonpositive.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.special import ndtri

from .errors import NoBracket, ScfcqError, TooManyFailures
from .estimator import Dataset, ScfcqConfig, estimate_path, fit_uncensored, trim
from .first_stage import FirstStageConfig, fit_control

DGP_I = "DGP-I"
DGP_II = "DGP-II"
REPORT_TAUS = (0.9, 0.7, 0.5, 0.3)
MC_COLUMNS = ("dgp", "n", "G", "basis", "tau", "coef", "bias", "rmse", "failures")


@dataclass(frozen=True)
class DgpSpec:
    variant: str = DGP_I
    rho: float = 0.5
    gamma: tuple = (1.0, 1.0, 1.0)
    slopes: tuple = (1.0, 1.0)
    beta0: float | None = None
    censor_target: float = 0.30

    def __post_init__(self):
        if self.variant not in (DGP_I, DGP_II):
            raise ValueError(f"unknown DGP variant {self.variant!r}")
        if not -1 < self.rho < 1:
            raise ValueError("rho must lie in (-1, 1)")
        if not 0 < self.censor_target < 1:
            raise ValueError("censor_target must lie in (0, 1)")

    def calibrated(self):
        """Copy with ``beta0`` filled in by calibration when missing."""
        if self.beta0 is not None:
            return self
        return replace(self, beta0=calibrate_beta0(self))


@dataclass
class Truths:
    V: np.ndarray
    U: np.ndarray
    ystar: np.ndarray
    X: np.ndarray
    Z1: np.ndarray
    R: np.ndarray


def _draw(n, spec, rng, beta0):
    x = rng.standard_normal(n)
    z1 = rng.standard_normal(n)
    v = rng.uniform(size=n)
    u = rng.uniform(size=n)
    g0, g1, g2 = spec.gamma
    alpha, beta1 = spec.slopes
    err_r = ndtri(v)
    if spec.variant == DGP_II:
        err_r = 0.5 * (2.0 + 0.5 * x + 0.5 * z1) * err_r
    r = g0 + g1 * z1 + g2 * x + err_r
    rho = spec.rho
    eps = rho / math.sqrt(2) * ndtri(v) + (
        0.4 * (0.5 * r + 0.5 * x + 2.0) + math.sqrt(1 - rho**2)
    ) / math.sqrt(2) * ndtri(u)
    ystar = beta0 + alpha * r + beta1 * x + eps
    return x, z1, v, u, r, ystar


def generate(n, spec, rng):
    """Draw one sample; returns ``(Dataset, Truths)``.

    The dataset has X = [1, x], Z = [x, z1] and y = max(Y*, 0).
    """
    if n < 10:
        raise ValueError("n must be at least 10")
    spec = spec.calibrated()
    x, z1, v, u, r, ystar = _draw(n, spec, rng, spec.beta0)
    ds = Dataset(
        y=np.maximum(ystar, 0.0),
        X=np.column_stack([np.ones(n), x]),
        R=r,
        Z=np.column_stack([x, z1]),
        x_names=("const", "x"),
    )
    return ds, Truths(v, u, ystar, x, z1, r)


def censoring_share(spec, beta0, n=10**6, seed=20240601):
    rng = np.random.default_rng(seed)
    *_, ystar = _draw(n, spec, rng, 0.0)
    return float(np.mean(ystar + beta0 <= 0))


@lru_cache(maxsize=32)
def _calibrate(spec_key, tolerance, n, seed):
    spec = DgpSpec(**dict(spec_key))
    rng = np.random.default_rng(seed)
    *_, s = _draw(n, spec, rng, 0.0)
    lo, hi = -50.0, 50.0
    share = lambda b: float(np.mean(s + b <= 0))
    if not share(lo) > spec.censor_target > share(hi):
        raise NoBracket(f"censoring share does not bracket {spec.censor_target} on [{lo}, {hi}]")
    # common random numbers make the share monotone in b0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if share(mid) > spec.censor_target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-9:
            break
    b0 = 0.5 * (lo + hi)
    if abs(share(b0) - spec.censor_target) > tolerance:
        raise NoBracket(f"bisection ended {abs(share(b0) - spec.censor_target):.4f} off target")
    return b0


def calibrate_beta0(spec, tolerance=0.002, n=10**6, seed=20240601):
    """Bisect on b0 so that the share of Y* <= 0 matches ``censor_target``."""
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    key = asdict(replace(spec, beta0=None))
    return _calibrate(tuple(sorted(key.items())), tolerance, n, seed)


def true_effects(tau):
    """(alpha(tau), beta1(tau)); identical for both designs."""
    if not 0 < tau < 1:
        raise ValueError("tau must lie in (0, 1)")
    a = 1.0 + float(ndtri(tau)) / (5.0 * math.sqrt(2.0))
    return a, a


def latent_quantile(truths, spec, tau):
    """Conditional tau-quantile of Y* given (X, R, V) for every observation."""
    spec = spec.calibrated()
    rho = spec.rho
    alpha, beta1 = spec.slopes
    x, r = truths.X, truths.R
    scale = (0.4 * (0.5 * r + 0.5 * x + 2.0) + math.sqrt(1 - rho**2)) / math.sqrt(2)
    return spec.beta0 + alpha * r + beta1 * x + rho / math.sqrt(2) * ndtri(truths.V) + scale * ndtri(tau)


def replication_rng(seed, index):
    """Independent stream for replication ``index`` of master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def default_first_stage(spec):
    # the DGP-II scale 2 + 0.5x + 0.5z1 turns negative with small probability
    return FirstStageConfig(clamp_sigma=spec.variant == DGP_II)


@dataclass
class McReport:
    rows: list
    estimates: np.ndarray
    failures: int
    config: dict = field(default_factory=dict)

    def lookup(self, tau, coef):
        for row in self.rows:
            if row["coef"] == coef and abs(row["tau"] - tau) < 1e-9:
                return row
        raise KeyError((tau, coef))

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(MC_COLUMNS)
            for row in self.rows:
                w.writerow(
                    [
                        self.config["dgp"],
                        self.config["n"],
                        self.config["G"],
                        self.config["basis"],
                        repr(row["tau"]),
                        row["coef"],
                        repr(row["bias"]),
                        repr(row["rmse"]),
                        self.failures,
                    ]
                )


def _one_replication(args):
    g, n, spec, scfcq_cfg, fs_cfg, seed, taus, method = args
    rng = replication_rng(seed, g)
    ds, _ = generate(n, spec, rng)
    try:
        cv = fit_control(ds.R, ds.Z, fs_cfg)
        ds = trim(ds, scfcq_cfg.trim_fraction)
        k = ds.k_x
        if method == "naive":
            thetas = [fit_uncensored(ds, cv.v_hat, t, scfcq_cfg) for t in taus]
        else:
            path = estimate_path(ds, cv.v_hat, scfcq_cfg)
            thetas = [path.at(t) for t in taus]
    except ScfcqError:
        return g, None
    # (alpha, beta1) per report quantile; beta1 is the slope on x
    return g, np.array([[th[k], th[1]] for th in thetas])


def _map(fn, jobs, workers):
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return [fn(j) for j in jobs]


def default_workers():
    return int(os.environ.get("SCFCQ_WORKERS", "1"))


def run_mc(
    G,
    n,
    spec=DgpSpec(),
    scfcq_cfg=ScfcqConfig(),
    first_stage_cfg=None,
    seed=12345,
    report_taus=REPORT_TAUS,
    method="scfcq",
    workers=None,
    same_seed=False,
):
    """Bias and RMSE of (alpha, beta1) over G replications.

    ``same_seed=True`` reuses replication 0's stream for every replication
    (test hook).  Failed replications are excluded; more than 5% failures
    raise ``TooManyFailures``.
    """
    if G < 2:
        raise ValueError("G must be at least 2")
    spec = spec.calibrated()
    fs_cfg = first_stage_cfg or default_first_stage(spec)
    workers = default_workers() if workers is None else workers
    jobs = [
        (0 if same_seed else g, n, spec, scfcq_cfg, fs_cfg, seed, tuple(report_taus), method)
        for g in range(G)
    ]
    results = _map(_one_replication, jobs, workers)
    est = np.full((G, len(report_taus), 2), np.nan)
    failures = 0
    for idx, (_, out) in enumerate(results):
        if out is None:
            failures += 1
        else:
            est[idx] = out
    if failures > 0.05 * G:
        raise TooManyFailures(f"{failures} of {G} replications failed")
    ok = ~np.isnan(est[:, 0, 0])
    rows = []
    for j, tau in enumerate(report_taus):
        truth = true_effects(tau)
        for c, name in enumerate(("alpha", "beta1")):
            dev = est[ok, j, c] - truth[c]
            m = int(ok.sum())
            rows.append(
                {
                    "tau": float(tau),
                    "coef": name,
                    "bias": math.fsum(dev) / m,
                    "rmse": math.sqrt(math.fsum(dev * dev) / m),
                    "reps": m,
                    "failures": failures,
                }
            )
    config = {
        "dgp": spec.variant,
        "n": n,
        "G": G,
        "basis": scfcq_cfg.m_basis.label(),
        "seed": seed,
        "beta0": spec.beta0,
        "method": method,
    }
    return McReport(rows, est, failures, config)

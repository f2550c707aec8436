"""Multiplier bootstrap for the coefficient path.

Each draw multiplies every second-step objective weight by an i.i.d.
standard exponential variable and reruns the whole sequential recursion.
The control variable is held fixed across draws.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DrawFailed, PathAborted, TooManyFailures
from .estimator import ScfcqConfig, estimate_path


@dataclass(frozen=True)
class BootstrapConfig:
    draws: int = 999
    seed: int = 0
    weight_law: str = "standard-exponential"
    ci_level: float = 0.95
    reuse_selectors: bool = False
    unit_weights: bool = False  # test hook: every multiplier equal to one

    def __post_init__(self):
        if self.draws < 2:
            raise ValueError("draws must be at least 2")
        if not 0 < self.ci_level < 1:
            raise ValueError("ci_level must lie in (0, 1)")
        if self.weight_law != "standard-exponential":
            raise ValueError(f"unsupported weight law {self.weight_law!r}")


@dataclass
class BootstrapResult:
    grid: np.ndarray
    coef_names: tuple
    draws: np.ndarray  # (T, grid, K_X + 1); failed draws are NaN
    se: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    ci_level: float
    failed: list = field(default_factory=list)  # DrawFailed records

    @property
    def n_ok(self):
        return int(np.sum(~np.isnan(self.draws[:, 0, 0])))


def draw_weights(n, rng):
    return rng.standard_exponential(n)


def draw_rng(seed, t):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(t)]))


def _one_draw(args):
    t, dataset, v_hat, cfg, boot, selectors, k = args
    w = np.ones(dataset.n) if boot.unit_weights else draw_weights(dataset.n, draw_rng(boot.seed, t))
    try:
        path = estimate_path(dataset, v_hat, cfg, weights=w, selectors=selectors)
    except PathAborted as exc:
        return t, None, exc.index
    return t, path.theta[:, : k + 1], None


def bootstrap_path(dataset, v_hat, scfcq_cfg=ScfcqConfig(), boot_cfg=BootstrapConfig(), point=None, workers=1):
    """Run ``boot_cfg.draws`` weighted-bootstrap replications of the path.

    ``point`` is the point-estimate path; it is required only when
    ``boot_cfg.reuse_selectors`` is set, in which case its subsample
    indicators replace the within-draw threshold updates.
    """
    selectors = None
    if boot_cfg.reuse_selectors:
        if point is None:
            point = estimate_path(dataset, v_hat, scfcq_cfg)
        selectors = point.selection
    grid = scfcq_cfg.grid()
    k = dataset.k_x
    jobs = [(t, dataset, v_hat, scfcq_cfg, boot_cfg, selectors, k) for t in range(boot_cfg.draws)]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_one_draw, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_one_draw(j) for j in jobs]

    draws = np.full((boot_cfg.draws, grid.size, k + 1), np.nan)
    failed = []
    for t, theta, where in results:
        if theta is None:
            failed.append(DrawFailed(t, where))
        else:
            draws[t] = theta
    if len(failed) > 0.1 * boot_cfg.draws:
        raise TooManyFailures(f"{len(failed)} of {boot_cfg.draws} bootstrap draws failed")
    ok = draws[~np.isnan(draws[:, 0, 0])]
    a = 1.0 - boot_cfg.ci_level
    se = ok.std(axis=0, ddof=1) if ok.shape[0] > 1 else np.zeros(ok.shape[1:])
    lo, hi = np.quantile(ok, [a / 2, 1 - a / 2], axis=0)
    return BootstrapResult(grid, tuple(dataset.x_names) + ("alpha",), draws, se, lo, hi, boot_cfg.ci_level, failed)


def summarize(result, path):
    """Flat rows (tau, coef, estimate, se, ci_lo, ci_hi)."""
    rows = []
    for l, tau in enumerate(result.grid):
        for j, name in enumerate(result.coef_names):
            rows.append(
                {
                    "tau": float(tau),
                    "coef": name,
                    "estimate": float(path.theta[l, j]),
                    "se": float(result.se[l, j]),
                    "ci_lo": float(result.ci_lo[l, j]),
                    "ci_hi": float(result.ci_hi[l, j]),
                }
            )
    return rows

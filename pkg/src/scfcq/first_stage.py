"""Control variable estimation: the conditional CDF rank of R given Z.

Two routes are available.  The parametric route fits location and scale by
series quantile regressions of R on an additive polynomial in Z and maps
the standardized residual through a known error CDF.  The local-linear route
reuses that location/scale standardization but replaces the known CDF with
a kernel-weighted local-linear smoother of the residual empirical CDF.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import ndtr, ndtri

from .basis import additive_polynomial
from .errors import BandwidthTooSmall, InsufficientSubsample, QuantileCrossing
from .quantile_core import rq

PARAMETRIC = "parametric-F"
LOCAL_LINEAR = "local-linear"


@dataclass(frozen=True)
class FirstStageConfig:
    mode: str = PARAMETRIC
    v_center: float = 0.5
    v_pair: tuple = (0.25, 0.75)
    error_cdf: Callable = ndtr
    error_ppf: Callable = ndtri
    z_degree: int = 1
    bandwidth_rule: float = 1.0
    clamp_sigma: bool = False

    def __post_init__(self):
        if self.mode not in (PARAMETRIC, LOCAL_LINEAR):
            raise ValueError(f"unknown first-stage mode {self.mode!r}")
        v1, v2 = self.v_pair
        if not 0 < v1 < v2 < 1:
            raise ValueError(f"need 0 < v1 < v2 < 1, got {self.v_pair}")
        if not 0 < self.v_center < 1:
            raise ValueError("v_center must lie in (0, 1)")
        if self.bandwidth_rule <= 0:
            raise ValueError("bandwidth_rule must be positive")
        if self.z_degree < 1:
            raise ValueError("z_degree must be at least 1")


@dataclass
class ControlVariables:
    v_hat: np.ndarray
    gamma_center: np.ndarray
    sigma_hat: np.ndarray
    mode: str
    gamma_pair: tuple = ()
    std_resid: np.ndarray = field(default=None, repr=False)
    bandwidth: float = np.nan


def clamp_unit(v, n):
    lo = 1.0 / (2 * n)
    return np.clip(v, lo, 1.0 - lo)


def _location_scale(R, Z, cfg):
    R = np.asarray(R, dtype=float).ravel()
    P = additive_polynomial(Z, cfg.z_degree)
    n, J = P.shape
    if n <= 5 * J:
        raise InsufficientSubsample(f"first stage needs n > {5 * J}, got {n}")
    v1, v2 = cfg.v_pair
    g_c = rq(R, P, cfg.v_center).coef
    g_1 = rq(R, P, v1).coef
    g_2 = rq(R, P, v2).coef
    spread = P @ (g_2 - g_1)
    sigma = spread / (cfg.error_ppf(v2) - cfg.error_ppf(v1))
    bad = np.flatnonzero(sigma <= 0)
    if bad.size:
        if not cfg.clamp_sigma:
            raise QuantileCrossing(
                f"{bad.size} observations with nonpositive scale estimate", indices=bad
            )
        floor = 1e-6 * np.std(R)
        if floor <= 0:
            raise QuantileCrossing("R has no variation", indices=bad)
        sigma = np.maximum(sigma, floor)
    h = P @ g_c
    return h, sigma, g_c, (g_1, g_2)


def fit_parametric(R, Z, cfg=FirstStageConfig()):
    """V_i = F((R_i - h(Z_i)) / sigma(Z_i)), clamped to [1/2n, 1 - 1/2n]."""
    h, sigma, g_c, pair = _location_scale(R, Z, cfg)
    e = (np.asarray(R, dtype=float).ravel() - h) / sigma
    v = clamp_unit(cfg.error_cdf(e), e.size)
    return ControlVariables(v, g_c, sigma, PARAMETRIC, pair, e)


def _local_linear_cdf(e, bandwidth, chunk=512, min_mass=5):
    """Local-linear smooth of the mid-rank empirical CDF of ``e``.

    The bandwidth is widened pointwise to reach the ``min_mass``-th nearest
    neighbour, so isolated tail residuals still get a local fit.
    """
    n = e.size
    if n < min_mass:
        raise BandwidthTooSmall(f"need at least {min_mass} residuals, got {n}")
    ranks = np.searchsorted(np.sort(e), e, side="left")
    target = (ranks + 0.5) / n
    out = np.empty(n)
    for start in range(0, n, chunk):
        ei = e[start : start + chunk, None]
        d = e[None, :] - ei
        reach = np.partition(np.abs(d), min_mass - 1, axis=1)[:, min_mass - 1]
        h = np.maximum(bandwidth, reach * (1.0 + 1e-9))[:, None]
        u = d / h
        k = np.where(np.abs(u) < 1.0, 0.75 * (1.0 - u * u), 0.0)
        s0 = k.sum(axis=1)
        s1 = (k * d).sum(axis=1)
        s2 = (k * d * d).sum(axis=1)
        t0 = k @ target
        t1 = (k * d) @ target
        det = s0 * s2 - s1 * s1
        bad = ~(det > 1e-14 * s0 * s2) | (s2 <= 0)
        if np.any(bad):
            i = start + int(np.argmax(bad))
            raise BandwidthTooSmall(f"degenerate local design at observation {i} (no spread in residuals)")
        out[start : start + chunk] = (s2 * t0 - s1 * t1) / det
    return out


def fit_local_linear(R, Z, cfg=FirstStageConfig(mode=LOCAL_LINEAR)):
    R = np.asarray(R, dtype=float).ravel()
    n = R.size
    if n < 100:
        raise InsufficientSubsample(f"local-linear first stage needs n >= 100, got {n}")
    h, sigma, g_c, pair = _location_scale(R, Z, cfg)
    e = (R - h) / sigma
    sd = np.std(e)
    if not sd > 0:
        raise BandwidthTooSmall("standardized residuals have zero spread")
    bw = 1.06 * sd * n ** (-0.2) * cfg.bandwidth_rule
    v = clamp_unit(_local_linear_cdf(e, bw), n)
    return ControlVariables(v, g_c, sigma, LOCAL_LINEAR, pair, e, bw)


def fit_control(R, Z, cfg=FirstStageConfig()):
    if cfg.mode == LOCAL_LINEAR:
        return fit_local_linear(R, Z, cfg)
    return fit_parametric(R, Z, cfg)


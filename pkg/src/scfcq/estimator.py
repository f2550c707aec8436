"""Sequential control-function censored quantile estimator.

The recursion starts at a high quantile ``tau0`` where censoring does not
bind and walks down a quantile grid.  At each step the previous fit picks
the observations whose fitted latent quantile clears a data-driven
threshold; the current quantile is fitted on that subsample, the threshold
is refreshed from the new fit with a smaller quantile, and the fit is
repeated on the refreshed subsample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .basis import BasisSpec, build_design
from .errors import (
    DegenerateDesign,
    InsufficientSubsample,
    NoPositiveFits,
    PathAborted,
)
from .quantile_core import DEFAULT_TOL, RegressionProblem, solve


@dataclass(frozen=True)
class ScfcqConfig:
    tau0: float = 0.99
    tauL: float = 0.3
    step: float = 0.01
    q0: float = 0.10
    q1: float = 0.03
    trim_fraction: float = 0.01
    m_basis: BasisSpec = BasisSpec("polynomial", 3)
    selector: bool = True
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if not 0 < self.tauL < self.tau0 < 1:
            raise ValueError(f"need 0 < tauL < tau0 < 1, got ({self.tauL}, {self.tau0})")
        if not 0 < self.step <= self.tau0 - self.tauL + 1e-12:
            raise ValueError("step must lie in (0, tau0 - tauL]")
        if not 0 <= self.q1 <= self.q0 < 1:
            raise ValueError(f"need 0 <= q1 <= q0 < 1, got ({self.q1}, {self.q0})")
        if not 0 <= self.trim_fraction <= 0.1:
            raise ValueError("trim_fraction must lie in [0, 0.1]")
        if tuple(self.m_basis.support) != (0.0, 1.0):
            raise ValueError("the control-function basis must live on [0, 1]")

    def grid(self):
        """Decreasing grid tau0, tau0 - step, ..., ending exactly at tauL."""
        k = int(math.floor((self.tau0 - self.tauL) / self.step + 1e-9))
        pts = [round(self.tau0 - i * self.step, 12) for i in range(k + 1)]
        if pts[-1] > self.tauL + 1e-12:
            pts.append(self.tauL)
        return np.array(pts)


@dataclass
class Dataset:
    y: np.ndarray
    X: np.ndarray
    R: np.ndarray
    Z: np.ndarray
    T: np.ndarray = None
    x_names: tuple = ()

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).ravel()
        n = self.y.size
        self.X = np.asarray(self.X, dtype=float).reshape(n, -1)
        self.R = np.asarray(self.R, dtype=float).ravel()
        self.Z = np.asarray(self.Z, dtype=float).reshape(n, -1)
        self.T = np.ones(n, dtype=bool) if self.T is None else np.asarray(self.T, dtype=bool)
        if self.R.size != n or self.T.size != n:
            raise ValueError("y, X, R, Z and T must have the same number of rows")
        if np.any(self.y < 0):
            raise ValueError("outcomes must be censored at zero (y >= 0)")
        if not self.x_names:
            self.x_names = tuple(f"x{j}" for j in range(self.X.shape[1]))

    @property
    def n(self):
        return self.y.size

    @property
    def k_x(self):
        return self.X.shape[1]

    def has_intercept(self):
        X = self.X
        return bool(np.any(np.all(X == X[:1], axis=0) & (X[0] != 0)))


def _continuous(col):
    return np.unique(col).size > 2


def trim(dataset, fraction):
    """Set T_i = 0 when any continuous column of (X, R, Z) falls outside
    its central ``1 - fraction`` order-statistic band.

    With distinct values each column loses ``floor(n * fraction / 2)``
    observations per tail.  Binary and constant columns never trim.
    """
    if not 0 <= fraction <= 0.1:
        raise ValueError("fraction must lie in [0, 0.1]")
    n = dataset.n
    T = np.ones(n, dtype=bool)
    k = int(math.floor(n * fraction / 2 + 1e-9))
    if k > 0:
        cols = np.column_stack([dataset.X, dataset.R, dataset.Z])
        for col in cols.T:
            if not _continuous(col):
                continue
            srt = np.sort(col)
            T &= (col >= srt[k]) & (col <= srt[n - 1 - k])
    return Dataset(dataset.y, dataset.X, dataset.R, dataset.Z, T, dataset.x_names)


def threshold(fitted, q):
    """Lower order statistic ``ceil(m * q)`` of the m positive fitted values.

    Values within rounding of zero (a censored row interpolated by the
    fit) do not count as positive.
    """
    fitted = np.asarray(fitted, dtype=float)
    eps = 1e-10 * np.max(np.abs(fitted)) if fitted.size else 0.0
    pos = np.sort(fitted[fitted > eps])
    if pos.size == 0:
        raise NoPositiveFits("no strictly positive fitted values")
    idx = max(int(math.ceil(pos.size * q - 1e-9)), 1)
    return float(pos[idx - 1])


def select(fitted, T, eta):
    """D_i = T_i * 1{fitted_i > eta}; ties are excluded."""
    return np.asarray(T, dtype=bool) & (np.asarray(fitted) > eta)


@dataclass
class SeriesDesign:
    """Second-step regressors [X | R | P_J(V)].

    When X carries an intercept the first basis column is dropped from the
    regression (both bases span the constants) and its coefficient is
    reported as zero, so ``theta`` always has length K_X + 1 + J.
    """

    W: np.ndarray
    k_x: int
    spec: BasisSpec
    drop_first: bool

    @classmethod
    def build(cls, dataset, v_hat, spec):
        P = build_design(v_hat, spec)
        drop = dataset.has_intercept()
        W = np.column_stack([dataset.X, dataset.R, P[:, 1:] if drop else P])
        return cls(W, dataset.k_x, spec, drop)

    @property
    def dim(self):
        return self.k_x + 1 + self.spec.dim

    def expand(self, coef):
        if self.drop_first:
            j = self.k_x + 1
            return np.r_[coef[:j], 0.0, coef[j:]]
        return np.asarray(coef, dtype=float)

    def reduce(self, theta):
        if self.drop_first:
            j = self.k_x + 1
            return np.r_[theta[:j], theta[j + 1 :]]
        return np.asarray(theta, dtype=float)

    def fitted(self, theta):
        return self.W @ self.reduce(theta)


def fit_at(y, design, tau, weights, tol=DEFAULT_TOL):
    """One weighted series quantile regression; returns (theta, fit)."""
    weights = np.asarray(weights, dtype=float)
    need = 3 * design.dim
    have = int(np.count_nonzero(weights > 0))
    if have < need:
        raise InsufficientSubsample(f"{have} weight-positive rows, need at least {need}")
    fit = solve(RegressionProblem(y, design.W, weights, tau), tol=tol)
    return design.expand(fit.coef), fit


@dataclass
class CoefficientPath:
    grid: np.ndarray
    theta: np.ndarray
    k_x: int
    m_basis: BasisSpec
    x_names: tuple = ()
    eta_pass1: np.ndarray = None
    eta_pass2: np.ndarray = None
    n_pass1: np.ndarray = None
    n_pass2: np.ndarray = None
    status: list = field(default_factory=list)
    selection: list = field(default_factory=list, repr=False)

    @property
    def beta(self):
        return self.theta[:, : self.k_x]

    @property
    def alpha(self):
        return self.theta[:, self.k_x]

    @property
    def delta(self):
        return self.theta[:, self.k_x + 1 :]

    def index(self, tau):
        """Nearest grid index to ``tau``."""
        return int(np.argmin(np.abs(self.grid - tau)))

    def at(self, tau):
        return self.theta[self.index(tau)]

    def coef_names(self):
        return tuple(self.x_names) + ("alpha",)

    def truncate(self, length):
        return CoefficientPath(
            self.grid[:length],
            self.theta[:length],
            self.k_x,
            self.m_basis,
            self.x_names,
            self.eta_pass1[:length],
            self.eta_pass2[:length],
            self.n_pass1[:length],
            self.n_pass2[:length],
            self.status[:length],
            self.selection[:length],
        )


def estimate_path(dataset, v_hat, cfg=ScfcqConfig(), weights=None, oracle_fitted=None, selectors=None):
    """Run the sequential recursion over ``cfg.grid()``.

    Parameters
    ----------
    dataset : Dataset
        Trimming must already be applied (``dataset.T``).
    v_hat : array
        Estimated control variable in (0, 1).
    weights : array, optional
        Multiplicative observation weights (bootstrap multipliers).
    oracle_fitted : callable, optional
        ``oracle_fitted(tau)`` returns the latent tau-quantile for every
        observation; when given it replaces the fitted values used for
        subsample selection.  Simulation diagnostics only.
    selectors : sequence of (D1, D2), optional
        Precomputed selection indicators per grid point (index 0 unused);
        thresholds are then not recomputed.

    Raises
    ------
    PathAborted
        When a threshold has no positive fitted values or a subsample is
        too small; ``err.partial`` holds the path up to the previous point.
    """
    grid = cfg.grid()
    design = SeriesDesign.build(dataset, v_hat, cfg.m_basis)
    y, T = dataset.y, dataset.T
    mult = np.ones(dataset.n) if weights is None else np.asarray(weights, dtype=float)
    base = mult * T

    L = grid.size
    theta = np.full((L, design.dim), np.nan)
    eta1 = np.full(L, np.nan)
    eta2 = np.full(L, np.nan)
    n1 = np.zeros(L, dtype=int)
    n2 = np.zeros(L, dtype=int)
    status = []
    selection = [None]

    def partial(length):
        path = CoefficientPath(
            grid, theta, design.k_x, cfg.m_basis, dataset.x_names, eta1, eta2, n1, n2, status, selection
        )
        return path.truncate(length)

    if np.count_nonzero(T & (y > 0)) < 3 * design.dim:
        raise PathAborted(0, InsufficientSubsample("too few uncensored observations at tau0"), None)
    try:
        theta[0], fit = fit_at(y, design, grid[0], base, cfg.tol)
    except (InsufficientSubsample, DegenerateDesign) as exc:
        raise PathAborted(0, exc, None) from exc
    n1[0] = n2[0] = int(np.count_nonzero(base > 0))
    status.append(fit.status)

    def latent(th, tau):
        return oracle_fitted(tau) if oracle_fitted is not None else design.fitted(th)

    for l in range(1, L):
        tau = grid[l]
        try:
            if not cfg.selector:
                d1 = d2 = T
            elif selectors is not None:
                d1, d2 = selectors[l]
            else:
                fitted = latent(theta[l - 1], grid[l - 1])
                eta1[l] = threshold(fitted[T], cfg.q0)
                d1 = select(fitted, T, eta1[l])
            n1[l] = int(np.count_nonzero(d1 & (mult > 0)))
            th_tilde, _ = fit_at(y, design, tau, base * d1, cfg.tol)
            if cfg.selector and selectors is None:
                fitted = latent(th_tilde, tau)
                eta2[l] = threshold(fitted[T], cfg.q1)
                d2 = select(fitted, T, eta2[l])
            n2[l] = int(np.count_nonzero(d2 & (mult > 0)))
            theta[l], fit = fit_at(y, design, tau, base * d2, cfg.tol)
        except (NoPositiveFits, InsufficientSubsample, DegenerateDesign) as exc:
            raise PathAborted(l, exc, partial(l)) from exc
        status.append(fit.status)
        selection.append((d1, d2))
    return partial(L)


def fit_uncensored(dataset, v_hat, tau, cfg=ScfcqConfig()):
    """Plain series fit with weights T, valid for tau >= tau0."""
    design = SeriesDesign.build(dataset, v_hat, cfg.m_basis)
    return fit_at(dataset.y, design, tau, dataset.T.astype(float), cfg.tol)[0]


def predict(theta, x, r, v, k_x, m_basis):
    """Latent and observed conditional quantiles at (x, r, v)."""
    theta = np.asarray(theta, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    latent = float(x @ theta[:k_x] + r * theta[k_x] + build_design([v], m_basis)[0] @ theta[k_x + 1 :])
    return latent, max(latent, 0.0)


def m_hat(v, tau, path):
    """Control-function estimate P_J(v)'delta at the grid point nearest tau."""
    P = build_design(np.atleast_1d(v), path.m_basis)
    out = P @ path.delta[path.index(tau)]
    return out if np.ndim(v) else float(out[0])

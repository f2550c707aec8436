"""Weighted linear quantile regression.

The solver is a primal-dual interior point method on the dual of the
quantile regression LP (the Frisch-Newton scheme with Mehrotra
predictor-corrector steps), followed by a purification step that snaps the
interior solution onto an interpolating vertex whenever that vertex is at
least as good.  Observation weights are handled by row scaling, which is
exact because the check function is positively homogeneous.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import DegenerateDesign, NoConvergence

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 50

CONVERGED = "converged"
MAX_ITERATIONS = "max-iterations"
DEGENERATE = "degenerate"


def check_loss(u, tau):
    """Check function ``(tau - 1{u < 0}) * u``, elementwise."""
    u = np.asarray(u, dtype=float)
    return (tau - (u < 0)) * u


@dataclass
class RegressionProblem:
    y: np.ndarray
    X: np.ndarray
    w: np.ndarray
    tau: float

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).ravel()
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim == 1:
            self.X = self.X[:, None]
        n = self.y.shape[0]
        self.w = np.ones(n) if self.w is None else np.asarray(self.w, dtype=float).ravel()
        if self.X.shape[0] != n or self.w.shape[0] != n:
            raise ValueError("y, X and w must have the same number of rows")
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must lie in (0, 1), got {self.tau}")
        if np.any(self.w < 0) or not np.all(np.isfinite(self.w)):
            raise ValueError("weights must be finite and nonnegative")

    @property
    def p(self):
        return self.X.shape[1]

    def objective(self, coef):
        return float(np.sum(self.w * check_loss(self.y - self.X @ coef, self.tau)))


@dataclass
class QuantileFit:
    coef: np.ndarray
    tau: float
    residuals: np.ndarray
    status: str
    iterations: int
    gap: float
    objective: float = field(default=np.nan)


@njit(cache=True)
def _bound(v, dv):
    step = 1e20
    for i in range(v.shape[0]):
        if dv[i] < 0.0:
            cand = -v[i] / dv[i]
            if cand < step:
                step = cand
    return step


@njit(cache=True)
def _gram(X, q):
    n, p = X.shape
    Q = np.zeros((p, p))
    for i in range(n):
        qi = q[i]
        for j in range(p):
            xij = X[i, j] * qi
            for k in range(j + 1):
                Q[j, k] += xij * X[i, k]
    top = 0.0
    for j in range(p):
        top = max(top, Q[j, j])
        for k in range(j):
            Q[k, j] = Q[j, k]
    # a tiny ridge keeps the Newton system solvable once most q_i underflow
    for j in range(p):
        Q[j, j] += 1e-13 * top + 1e-300
    return Q


@njit(cache=True)
def _frisch_newton(X, y, tau, tol, max_iter):
    """Interior point iterations on the dual LP.

    Solves min c'x s.t. X'x = (1 - tau) X'1, 0 <= x <= 1 with c = -y.
    The regression coefficients are minus the equality multipliers.
    """
    n, p = X.shape
    beta = 0.99995
    c = -y
    x = np.full(n, 1.0 - tau)
    s = 1.0 - x
    b = X.T @ x

    scale = 1.0 + np.sum(np.abs(y))
    eps0 = 1e-6 * (1.0 + np.max(np.abs(y)))

    dual = np.linalg.solve(X.T @ X, X.T @ c)
    r = c - X @ dual
    z = np.empty(n)
    w = np.empty(n)
    for i in range(n):
        z[i] = max(r[i], 0.0)
        w[i] = max(-r[i], 0.0)
        if abs(r[i]) < eps0:
            z[i] += eps0
            w[i] += eps0

    gap = c @ x - dual @ b + np.sum(w)
    it = 0
    while gap > tol * scale and it < max_iter:
        it += 1
        q = 1.0 / (z / x + w / s)
        r = z - w
        Q = _gram(X, q)
        rhs = X.T @ (q * r)
        dy = np.linalg.solve(Q, rhs)
        dx = q * (X @ dy - r)
        ds = -dx
        dz = -z * (dx / x + 1.0)
        dw = -w * (ds / s + 1.0)
        fp = min(beta * min(_bound(x, dx), _bound(s, ds)), 1.0)
        fd = min(beta * min(_bound(w, dw), _bound(z, dz)), 1.0)
        if min(fp, fd) < 1.0:
            mu = z @ x + w @ s
            g = (z + fd * dz) @ (x + fp * dx) + (w + fd * dw) @ (s + fp * ds)
            mu = mu * (g / mu) ** 3 / (2.0 * n)
            xinv = 1.0 / x
            sinv = 1.0 / s
            dxdz = dx * dz * xinv
            dsdw = ds * dw * sinv
            xi = mu * (xinv - sinv)
            rhs = rhs + X.T @ (q * (dxdz - dsdw - xi))
            dy = np.linalg.solve(Q, rhs)
            dx = q * (X @ dy + xi - r - dxdz + dsdw)
            ds = -dx
            dz = mu * xinv - z - xinv * z * dx - dxdz
            dw = mu * sinv - w - sinv * w * ds - dsdw
            fp = min(beta * min(_bound(x, dx), _bound(s, ds)), 1.0)
            fd = min(beta * min(_bound(w, dw), _bound(z, dz)), 1.0)
        x = x + fp * dx
        s = s + fp * ds
        dual = dual + fd * dy
        w = w + fd * dw
        z = z + fd * dz
        gap = c @ x - dual @ b + np.sum(w)
    return -dual, it, gap / scale


def _purify(X, y, coef):
    """Row indices of an interpolating full-rank set near ``coef`` (or None)."""
    n, p = X.shape
    order = np.argsort(np.abs(y - X @ coef), kind="stable")
    rows = []
    for i in order[: 5 * p + 50]:
        trial = rows + [i]
        if np.linalg.matrix_rank(X[trial]) == len(trial):
            rows = trial
            if len(rows) == p:
                return rows
    return None


def _exchange(X, y, tau, rows, max_pivots):
    """Exchange-method descent between interpolating vertices.

    Each pivot releases one basic row along the edge with the steepest
    negative directional derivative and moves to the minimiser of the
    piecewise-linear objective on that edge, where a new row enters.  The
    objective strictly decreases, so the walk cannot cycle.
    """
    n, p = X.shape
    rows = list(rows)
    coef = np.linalg.solve(X[rows], y[rows])
    eps = 1e-13 * (1.0 + np.max(np.abs(y)))
    for _ in range(max_pivots):
        r = y - X @ coef
        r[rows] = 0.0
        zero = np.abs(r) <= eps
        B_inv = np.linalg.inv(X[rows])
        best = None
        for k in range(p):
            for s in (1.0, -1.0):
                d = s * B_inv[:, k]
                g = X @ d
                # slope of sum rho(r_i - t g_i) at t = 0+
                du = -g
                slope = np.where(zero, np.where(du > 0, tau, tau - 1.0), np.where(r > 0, tau, tau - 1.0)) @ du
                if slope < -eps and (best is None or slope < best[0]):
                    best = (slope, k, d, g)
        if best is None:
            return coef, rows, True
        slope, k, d, g = best
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(~zero & (g != 0), r / g, -1.0)
        cand = np.flatnonzero(t > 0)
        if cand.size == 0:
            return coef, rows, False  # unbounded edge cannot occur for a full-rank design
        cand = cand[np.argsort(t[cand], kind="stable")]
        acc = slope + np.cumsum(np.abs(g[cand]))
        j = cand[int(np.argmax(acc >= 0))] if np.any(acc >= 0) else cand[-1]
        coef = coef + t[j] * d
        rows[k] = int(j)
        coef = np.linalg.solve(X[rows], y[rows])
    return coef, rows, False


def _weighted_rank(X):
    if X.shape[0] == 0:
        return 0
    return int(np.linalg.matrix_rank(X))


def solve(problem, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, strict=False):
    """Minimise ``sum_i w_i rho_tau(y_i - x_i'c)`` over ``c``.

    Zero-weight rows are dropped before factorisation.  Raises
    ``DegenerateDesign`` when the weight-positive rows do not span the
    columns.  When the iteration budget runs out the fit is returned with
    ``status == "max-iterations"``; pass ``strict=True`` to raise
    ``NoConvergence`` instead.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    y, X, w, tau = problem.y, problem.X, problem.w, problem.tau
    n, p = X.shape
    keep = w > 0
    Xk = X[keep] * w[keep, None]
    yk = y[keep] * w[keep]
    if _weighted_rank(Xk) < p:
        raise DegenerateDesign(
            f"weighted design has rank {_weighted_rank(Xk)} < {p} columns "
            f"({int(keep.sum())} weight-positive rows)"
        )

    # column scaling keeps the normal equations well conditioned
    colscale = np.sqrt(np.mean(Xk**2, axis=0))
    colscale[colscale == 0] = 1.0
    ysc = np.max(np.abs(yk))
    ysc = ysc if ysc > 0 else 1.0
    Xs = np.ascontiguousarray(Xk / colscale)
    ys = yk / ysc

    if Xs.shape[0] == p:
        coef_s = np.linalg.solve(Xs, ys)
        iters, gap = 0, 0.0
    else:
        try:
            coef_s, iters, gap = _frisch_newton(Xs, ys, float(tau), float(tol), int(max_iter))
        except np.linalg.LinAlgError:
            # fall back to pure exchange descent from the least-squares fit
            coef_s = np.linalg.lstsq(Xs, ys, rcond=None)[0]
            iters, gap = 0, np.inf
        rows = _purify(Xs, ys, coef_s)
        if rows is not None:
            budget = 10 * p + 20 if np.isfinite(gap) else 50 * Xs.shape[0]
            vertex, _, optimal = _exchange(Xs, ys, tau, rows, max_pivots=budget)
            if optimal and not np.isfinite(gap):
                coef_s, gap = vertex, 0.0
            f_ip = np.sum(check_loss(ys - Xs @ coef_s, tau))
            f_v = np.sum(check_loss(ys - Xs @ vertex, tau))
            if f_v <= f_ip + 1e-12 * (1.0 + abs(f_ip)):
                coef_s = vertex
    coef = coef_s * ysc / colscale
    status = CONVERGED if gap <= tol else MAX_ITERATIONS
    resid = y - X @ coef
    fit = QuantileFit(
        coef=coef,
        tau=tau,
        residuals=resid,
        status=status,
        iterations=int(iters),
        gap=float(gap),
        objective=float(np.sum(w * check_loss(resid, tau))),
    )
    if strict and status != CONVERGED:
        raise NoConvergence(f"duality gap {gap:.3g} > {tol:g} after {iters} iterations", fit)
    return fit


def rq(y, X, tau, w=None, **kwargs):
    """Shorthand for ``solve(RegressionProblem(y, X, w, tau))``."""
    return solve(RegressionProblem(y, X, w, tau), **kwargs)


@dataclass
class OptimalityReport:
    passed: bool
    column_excess: np.ndarray
    n_zero: int
    vertex_check: bool | None = None

    def __bool__(self):
        return self.passed


def certify_optimality(fit, problem, slack=1e-7, zero_tol=1e-9):
    """Check the subgradient conditions for ``fit`` on ``problem``.

    For each column j the weighted score ``sum_i w_i x_ij psi_i`` must be
    absorbable by the zero-residual rows.  When exactly p rows interpolate
    and they are linearly independent, the stronger vertex condition
    (multipliers of the basic rows inside [0, 1]) is also checked.
    """
    y, X, w, tau = problem.y, problem.X, problem.w, problem.tau
    r = y - X @ fit.coef
    scale = 1.0 + np.max(np.abs(y)) if y.size else 1.0
    keep = w > 0
    zero = keep & (np.abs(r) <= zero_tol * scale)
    psi = tau - (r < 0)
    score = (w * psi * ~zero) @ X
    absorb = (w * zero) @ np.abs(X)
    colnorm = np.abs(w) @ np.abs(X) + 1.0
    excess = np.abs(score) - absorb
    passed = bool(np.all(excess <= slack * colnorm))

    vertex = None
    n_zero = int(zero.sum())
    if passed and n_zero == X.shape[1]:
        Xh = X[zero] * w[zero, None]
        if np.linalg.matrix_rank(Xh) == X.shape[1]:
            # score + Xh'(tau - a) = 0, need a in [0, 1]
            a = tau + np.linalg.solve(Xh.T, score)
            vertex = bool(np.all((a >= -slack) & (a <= 1 + slack)))
            passed = vertex
    return OptimalityReport(passed=passed, column_excess=excess, n_zero=n_zero, vertex_check=vertex)

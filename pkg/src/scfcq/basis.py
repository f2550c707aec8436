"""Series bases for the control function and the first-stage location."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline

from .errors import OutOfSupport

POLYNOMIAL = "polynomial"
BSPLINE = "cubic-bspline"

_SLACK = 1e-10


@dataclass(frozen=True)
class BasisSpec:
    """Univariate basis.

    ``order_param`` is the polynomial degree for ``kind="polynomial"`` and
    the number of equally spaced inner knots for ``kind="cubic-bspline"``.
    """

    kind: str = POLYNOMIAL
    order_param: int = 3
    support: tuple = (0.0, 1.0)

    def __post_init__(self):
        if self.kind not in (POLYNOMIAL, BSPLINE):
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if int(self.order_param) != self.order_param or self.order_param < 0:
            raise ValueError("order_param must be a nonnegative integer")
        lo, hi = self.support
        if not lo < hi:
            raise ValueError(f"support needs lo < hi, got {self.support}")

    @property
    def dim(self):
        if self.kind == POLYNOMIAL:
            return self.order_param + 1
        return self.order_param + 4

    def knots(self):
        lo, hi = self.support
        inner = np.linspace(lo, hi, self.order_param + 2)[1:-1]
        return np.r_[[lo] * 4, inner, [hi] * 4]

    @classmethod
    def parse(cls, text, support=(0.0, 1.0)):
        """Parse ``"poly:3"`` or ``"bspline:3"``."""
        kind, _, order = text.partition(":")
        kinds = {"poly": POLYNOMIAL, "polynomial": POLYNOMIAL, "bspline": BSPLINE, "cubic-bspline": BSPLINE}
        if kind not in kinds or not order.isdigit():
            raise ValueError(f"basis must look like 'poly:3' or 'bspline:3', got {text!r}")
        return cls(kinds[kind], int(order), tuple(support))

    def label(self):
        return f"{'poly' if self.kind == POLYNOMIAL else 'bspline'}:{self.order_param}"


def _check_support(values, spec):
    lo, hi = spec.support
    slack = _SLACK * (hi - lo)
    bad = np.flatnonzero((values < lo - slack) | (values > hi + slack) | ~np.isfinite(values))
    if bad.size:
        i = int(bad[0])
        raise OutOfSupport(f"value {values[i]!r} at index {i} outside [{lo}, {hi}]", index=i)
    return np.clip(values, lo, hi)


def build_design(values, spec):
    """Row i is ``eval_basis(values[i], spec)``; shape ``(n, spec.dim)``."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        return np.zeros((0, spec.dim))
    values = _check_support(values, spec)
    if spec.kind == POLYNOMIAL:
        return np.vander(values, spec.dim, increasing=True)
    return BSpline.design_matrix(values, spec.knots(), 3).toarray()


def eval_basis(v, spec):
    return build_design(np.atleast_1d(float(v)), spec)[0]


def additive_polynomial(Z, degree=1):
    """Intercept plus per-column powers ``z_k, z_k**2, ..., z_k**degree``.

    No interaction terms; powers above one are skipped for binary columns.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    cols = [np.ones(Z.shape[0])]
    binary = [np.isin(Z[:, k], (0.0, 1.0)).all() for k in range(Z.shape[1])]
    for d in range(1, degree + 1):
        cols.extend(Z[:, k] ** d for k in range(Z.shape[1]) if d == 1 or not binary[k])
    return np.column_stack(cols)

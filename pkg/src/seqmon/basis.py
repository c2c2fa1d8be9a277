"""Covariate feature maps: linear with intercept, and additive cubic B-splines.

The additive spline map stacks an intercept with one cubic B-spline block per
covariate. Each block drops its first function so the design stays full rank
alongside the intercept, giving ``q = 1 + d * (m + 3)`` for ``m`` interior
knots per covariate.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels

CLAMP_TOL = 1e-9
DEGREE = 3


class BasisKind(str, Enum):
    LINEAR = "linear"
    SPLINE = "spline"


@dataclass(frozen=True)
class BasisSpec:
    """Immutable description of a feature map.

    Attributes:
        kind: linear or additive cubic spline.
        dim_x: number of covariates ``d``.
        q: output dimension.
        support: per-covariate closed interval ``(lo, hi)``; linear bases may
            use infinite bounds.
        knots: per-covariate interior knots (spline only).
    """

    kind: BasisKind
    dim_x: int
    q: int
    support: tuple
    knots: tuple = ()

    def full_knots(self, j):
        """Clamped knot vector of covariate ``j`` (boundary knots repeated)."""
        lo, hi = self.support[j]
        return np.concatenate(
            [np.full(DEGREE + 1, lo), np.asarray(self.knots[j], dtype=float), np.full(DEGREE + 1, hi)]
        )

    def full_block(self, j, values):
        """All ``m + 4`` B-splines of covariate ``j``, before dropping one."""
        values = np.ascontiguousarray(values, dtype=float)
        t = self.full_knots(j)
        out = np.empty((values.shape[0], t.shape[0] - DEGREE - 1))
        kernels.bspline_basis(values, t, DEGREE, out)
        return out

    def _checked(self, X):
        X = np.array(X, dtype=float, ndmin=2)
        if X.shape[1] != self.dim_x:
            raise ValueError(f"expected {self.dim_x} covariates, got {X.shape[1]}")
        if not np.all(np.isfinite(X)):
            raise ValueError("covariates must be finite")
        lo = np.array([s[0] for s in self.support], dtype=float)
        hi = np.array([s[1] for s in self.support], dtype=float)
        if np.any(X < lo - CLAMP_TOL) or np.any(X > hi + CLAMP_TOL):
            raise ValueError("covariate outside basis support")
        return np.clip(X, lo, hi)

    def eval_many(self, X):
        """Feature matrix of shape (n, q) for covariate rows ``X`` of shape (n, d)."""
        X = self._checked(X)
        n = X.shape[0]
        out = np.empty((n, self.q))
        out[:, 0] = 1.0
        if self.kind is BasisKind.LINEAR:
            out[:, 1:] = X
            return out
        width = len(self.knots[0]) + DEGREE
        for j in range(self.dim_x):
            block = self.full_block(j, X[:, j])
            out[:, 1 + j * width : 1 + (j + 1) * width] = block[:, 1:]
        return out

    def eval(self, x):
        """Feature vector of one covariate vector."""
        return self.eval_many(np.reshape(np.asarray(x, dtype=float), (1, -1)))[0]

    def to_dict(self):
        d = {"kind": self.kind.value, "dim_x": self.dim_x, "support": [list(s) for s in self.support]}
        if self.kind is BasisKind.SPLINE:
            d["knots"] = len(self.knots[0])
        return d

    @classmethod
    def from_dict(cls, d):
        kind = BasisKind(d["kind"])
        if kind is BasisKind.LINEAR:
            return make_linear(int(d["dim_x"]), support=d.get("support"))
        return make_additive_cubic_spline(int(d["dim_x"]), int(d["knots"]), d["support"])


def _normalize_support(d, support):
    if support is None:
        return tuple((-np.inf, np.inf) for _ in range(d))
    arr = np.asarray(support, dtype=float)
    if arr.shape == (2,):
        arr = np.tile(arr, (d, 1))
    if arr.shape != (d, 2):
        raise ValueError(f"support must be one interval or {d} intervals")
    return tuple((float(lo), float(hi)) for lo, hi in arr)


def make_linear(d, support=None):
    """Linear basis ``(1, x_1, ..., x_d)``."""
    if d < 0:
        raise ValueError("d must be nonnegative")
    return BasisSpec(BasisKind.LINEAR, d, d + 1, _normalize_support(d, support))


def make_additive_cubic_spline(d, internal_knots, support=(-2.0, 2.0)):
    """Additive cubic B-spline basis with equally spaced interior knots.

    The ``m`` interior knots of covariate ``j`` sit at
    ``lo + (hi - lo) * i / (m + 1)`` for ``i = 1..m``.
    """
    if d < 1:
        raise ValueError("spline basis needs d >= 1")
    if internal_knots < 1:
        raise ValueError("spline basis needs at least one interior knot")
    sup = _normalize_support(d, support)
    m = int(internal_knots)
    knots = []
    for lo, hi in sup:
        if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
            raise ValueError(f"degenerate support interval ({lo}, {hi})")
        knots.append(tuple(lo + (hi - lo) * i / (m + 1) for i in range(1, m + 1)))
    return BasisSpec(BasisKind.SPLINE, d, 1 + d * (m + DEGREE), sup, tuple(knots))


def eval_basis(spec, x):
    return spec.eval(x)

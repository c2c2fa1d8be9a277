"""Per-arm streaming sufficient statistics and stage-wise sandwich blocks."""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .linalg import sym_pinv


@dataclass(frozen=True)
class Observation:
    x: tuple
    a: int
    y: float

    def __post_init__(self):
        if self.a not in (0, 1):
            raise ValueError(f"arm must be 0 or 1, got {self.a!r}")
        if not np.isfinite(self.y) or not np.all(np.isfinite(self.x)):
            raise ValueError("observation must be finite")


def as_batch(observations):
    """Stack a list of observations into ``(X, a, y)`` arrays."""
    obs = list(observations)
    if not obs:
        return np.empty((0, 0)), np.empty(0, dtype=np.int64), np.empty(0)
    X = np.array([o.x for o in obs], dtype=float, ndmin=2)
    return X, np.array([o.a for o in obs], dtype=np.int64), np.array([o.y for o in obs], dtype=float)


def check_batch(phi, arms, y):
    phi = np.ascontiguousarray(phi, dtype=float)
    arms = np.ascontiguousarray(arms, dtype=np.int64)
    y = np.ascontiguousarray(y, dtype=float)
    if phi.ndim != 2 or arms.shape != (phi.shape[0],) or y.shape != (phi.shape[0],):
        raise ValueError("batch arrays have inconsistent shapes")
    if arms.size and not np.all((arms == 0) | (arms == 1)):
        raise ValueError("arms must be 0 or 1")
    if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(y))):
        raise ValueError("batch contains non-finite values")
    return phi, arms, y


class ArmState:
    """Running averages, coefficients and sandwich accumulators for both arms.

    ``sigma[a]`` and ``gamma[a]`` are the running means of ``1(A=a) phi phi^T``
    and ``1(A=a) phi y`` over all ``n`` observations. ``cum_sandwich[a]`` sums
    the stage blocks ``S_a^-1 [sum phi phi^T r^2] S_a^-1`` of closed stages,
    each computed with that stage's refreshed coefficients.
    """

    def __init__(self, q):
        self.q = int(q)
        self.n = 0
        self.sigma = np.zeros((2, q, q))
        self.gamma = np.zeros((2, q))
        self.beta = np.zeros((2, q))
        self.sigma_inv = np.zeros((2, q, q))
        self.rank = [0, 0]
        self.cum_sandwich = np.zeros((2, q, q))
        self.stage_sandwich = np.zeros((2, q, q))
        self.stage_count = 0

    def ingest(self, phi, arms, y):
        """Stream a batch through the running-average recursion.

        Coefficients are not refreshed here.
        """
        phi, arms, y = check_batch(phi, arms, y)
        if phi.shape[0] and phi.shape[1] != self.q:
            raise ValueError(f"expected {self.q} features, got {phi.shape[1]}")
        self.n = kernels.stream_update(self.sigma, self.gamma, phi, arms, y, self.n)
        self.stage_count += phi.shape[0]

    def ingest_one(self, spec, obs):
        self.ingest(spec.eval(obs.x)[None, :], [obs.a], [obs.y])

    def refresh_coefficients(self):
        """Recompute ``beta[a] = pinv(sigma[a]) gamma[a]`` for both arms."""
        for a in (0, 1):
            self.sigma_inv[a], self.rank[a] = sym_pinv(self.sigma[a])
            self.beta[a] = self.sigma_inv[a] @ self.gamma[a]
        return self.beta[0].copy(), self.beta[1].copy()

    @property
    def full_rank(self):
        return self.rank[0] == self.q and self.rank[1] == self.q

    @property
    def contrast(self):
        return self.beta[1] - self.beta[0]

    def stage_accumulate(self, phi, arms, y):
        """Add the sandwich increments of a batch to the open stage."""
        phi, arms, y = check_batch(phi, arms, y)
        for a in (0, 1):
            mask = arms == a
            if not mask.any():
                continue
            rows = phi[mask]
            resid = y[mask] - rows @ self.beta[a]
            scores = (rows @ self.sigma_inv[a]) * resid[:, None]
            block = scores.T @ scores
            self.stage_sandwich[a] += 0.5 * (block + block.T)

    def stage_close(self):
        self.cum_sandwich += self.stage_sandwich
        self.stage_sandwich[:] = 0.0
        self.stage_count = 0

    def variance_many(self, phi):
        """Bootstrap-consistent variance of ``phi^T (beta_1 - beta_0)`` per row."""
        phi = np.atleast_2d(np.asarray(phi, dtype=float))
        if self.n == 0:
            return np.zeros(phi.shape[0])
        total = self.cum_sandwich[0] + self.cum_sandwich[1]
        v = np.einsum("ij,jk,ik->i", phi, total, phi) / float(self.n) ** 2
        return np.maximum(v, 0.0)

    def variance_at(self, phi_x):
        return float(self.variance_many(np.reshape(phi_x, (1, -1)))[0])

    def copy(self):
        other = ArmState(self.q)
        other.__dict__.update({k: (v.copy() if isinstance(v, (np.ndarray, list)) else v) for k, v in self.__dict__.items()})
        return other

    _ARRAYS = ("sigma", "gamma", "beta", "sigma_inv", "cum_sandwich", "stage_sandwich")

    def to_dict(self):
        d = {"q": self.q, "n": self.n, "stage_count": self.stage_count, "rank": list(self.rank)}
        for name in self._ARRAYS:
            d[name] = getattr(self, name)
        return d

    @classmethod
    def from_dict(cls, d):
        state = cls(int(d["q"]))
        state.n = int(d["n"])
        state.stage_count = int(d["stage_count"])
        state.rank = [int(r) for r in d["rank"]]
        for name in cls._ARRAYS:
            arr = np.array(d[name], dtype=float)
            if arr.shape != getattr(state, name).shape:
                raise ValueError(f"checkpoint field {name} has shape {arr.shape}")
            setattr(state, name, np.ascontiguousarray(arr))
        return state

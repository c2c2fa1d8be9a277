"""Treatment-assignment policies: complete randomization and epsilon-greedy."""

from dataclasses import dataclass

import numpy as np

from . import kernels


@dataclass(frozen=True)
class RandomPolicy:
    p: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError("p must be in (0, 1)")

    def to_dict(self):
        return {"kind": "random", "p": self.p}


@dataclass(frozen=True)
class EpsilonGreedyPolicy:
    """Greedy arm with probability ``1 - epsilon`` after ``burn_in`` samples."""

    epsilon: float = 0.3
    burn_in: int = 50

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must be in (0, 1)")
        if self.burn_in < 1:
            raise ValueError("burn_in must be at least 1")

    def to_dict(self):
        return {"kind": "epsilon_greedy", "epsilon": self.epsilon, "burn_in": self.burn_in}


def policy_from_dict(d):
    d = dict(d)
    kind = d.pop("kind")
    if kind == "random":
        return RandomPolicy(**d)
    if kind == "epsilon_greedy":
        return EpsilonGreedyPolicy(**d)
    raise ValueError(f"unknown policy kind {kind!r}")


@dataclass(frozen=True)
class PolicySnapshot:
    """Frozen view of the fitted contrast used for greedy decisions.

    ``contrast`` is ``None`` when either arm's Gram matrix is rank deficient,
    in which case the greedy sign is undefined.
    """

    basis: object
    contrast: object
    n: int

    @classmethod
    def from_state(cls, state, basis):
        state.refresh_coefficients()
        contrast = state.contrast.copy() if state.full_rank else None
        return cls(basis, contrast, state.n)


def propensity(policy, x, snapshot=None):
    """Probability of assigning arm 1 at covariates ``x``."""
    if isinstance(policy, RandomPolicy):
        return policy.p
    if snapshot is None or snapshot.n < policy.burn_in or snapshot.contrast is None:
        return 0.5
    score = float(snapshot.basis.eval(x) @ snapshot.contrast)
    return 1.0 - policy.epsilon if score > 0.0 else policy.epsilon


def greedy_arm(policy, x, snapshot=None):
    """Arm with the larger assignment probability; ties go to arm 0."""
    return 1 if propensity(policy, x, snapshot) > 0.5 else 0


def assign(policy, x, snapshot, rng):
    """Draw an arm. Returns ``(arm, propensity of arm 1)``."""
    p = propensity(policy, x, snapshot)
    return int(rng.random() < p), p


class GreedyTracker:
    """Online epsilon-greedy allocator for simulated streams.

    Keeps per-arm least-squares fits updated after every observation. Before
    both arms have a nonsingular Gram matrix the fits are accumulated as raw
    sums; afterwards inverse Gram matrices are updated by rank-one steps in
    the compiled kernel.
    """

    def __init__(self, policy, q):
        self.policy = policy
        self.q = int(q)
        self.n = 0
        self.counts = [0, 0]
        self.gram = np.zeros((2, q, q))
        self.moment = np.zeros((2, q))
        self.P = None
        self.beta = None

    @property
    def ready(self):
        return self.P is not None

    def _try_init(self):
        if min(self.counts) < self.q:
            return
        try:
            chol = [np.linalg.cholesky(self.gram[a]) for a in (0, 1)]
        except np.linalg.LinAlgError:
            return
        eye = np.eye(self.q)
        self.P = np.empty((2, self.q, self.q))
        for a in (0, 1):
            L_inv = np.linalg.solve(chol[a], eye)
            self.P[a] = L_inv.T @ L_inv
        self.beta = np.einsum("aij,aj->ai", self.P, self.moment)

    def _p1(self, row):
        if isinstance(self.policy, RandomPolicy):
            return self.policy.p
        if self.n < self.policy.burn_in or not self.ready:
            return 0.5
        score = row @ self.beta[1] - row @ self.beta[0]
        return 1.0 - self.policy.epsilon if score > 0.0 else self.policy.epsilon

    def run(self, phi, u, y0, y1):
        """Assign a batch; arm 1 iff ``u < propensity``.

        Returns:
            (arms, propensities of arm 1, observed rewards)
        """
        phi = np.ascontiguousarray(phi, dtype=float)
        u = np.ascontiguousarray(u, dtype=float)
        y0 = np.ascontiguousarray(y0, dtype=float)
        y1 = np.ascontiguousarray(y1, dtype=float)
        m = phi.shape[0]
        arms = np.empty(m, dtype=np.int64)
        props = np.empty(m)
        ys = np.empty(m)
        if isinstance(self.policy, RandomPolicy):
            arms[:] = u < self.policy.p
            props[:] = self.policy.p
            ys[:] = np.where(arms == 1, y1, y0)
            self.n += m
            return arms, props, ys
        i = 0
        while i < m and not (self.ready and self.n >= self.policy.burn_in):
            row = phi[i]
            p1 = self._p1(row)
            a = int(u[i] < p1)
            yi = y1[i] if a else y0[i]
            arms[i], props[i], ys[i] = a, p1, yi
            if self.ready:
                k = self.P[a] @ row
                denom = 1.0 + row @ k
                self.beta[a] += k * ((yi - row @ self.beta[a]) / denom)
                self.P[a] -= np.outer(k, k) / denom
            else:
                self.gram[a] += np.outer(row, row)
                self.moment[a] += row * yi
                self.counts[a] += 1
                self._try_init()
            self.n += 1
            i += 1
        if i < m:
            kernels.greedy_run(phi[i:], u[i:], y0[i:], y1[i:], self.P, self.beta,
                               float(self.policy.epsilon), arms[i:], props[i:], ys[i:])
            self.n += m - i
        return arms, props, ys

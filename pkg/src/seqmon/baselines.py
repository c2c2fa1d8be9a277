"""Competing sequential tests: a law-of-iterated-logarithm boundary and the
always-valid mixture SPRT on the raw difference in means."""

import math

import numpy as np

from .qte import GridSpec, MonitorDecision, Reservoir, StagedMonitor, Verdict, fixed_grid, _RESERVOIR_SALT
from .stream import ArmState


def lil_bound(state, phi_grid):
    """Anytime bound on ``sup_x phi(x)^T (b1 - b0)`` under the null.

    ``max ||phi(x)|| * sqrt(2 log log N / N) * sqrt(score_sq / N)`` where
    ``score_sq`` sums ``||S_a^-1 phi_i r_i||^2`` over all observations using
    each stage's coefficients, i.e. the trace of the cumulative sandwich.
    """
    n = state.n
    if n < 3:
        raise ValueError("LIL bound needs at least 3 observations")
    phi_grid = np.atleast_2d(phi_grid)
    radius = float(np.max(np.linalg.norm(phi_grid, axis=1)))
    score_sq = float(np.trace(state.cum_sandwich[0]) + np.trace(state.cum_sandwich[1]))
    return radius * math.sqrt(2.0 * math.log(math.log(n)) / n) * math.sqrt(max(score_sq, 0.0) / n)


class LilMonitor(StagedMonitor):
    """Rejects when the unnormalized supremum contrast exceeds the LIL bound."""

    method = "LIL"

    def __init__(self, basis, *, horizon=None, seed=0, grid=GridSpec()):
        super().__init__(basis, None, horizon)
        self.grid_spec = grid
        self.seed = int(seed) & ((1 << 64) - 1)
        self.state = ArmState(basis.q)
        self._fixed = fixed_grid(basis, grid.resolution) if grid.source == "fixed" else None
        self.reservoir = Reservoir(grid.size, basis.dim_x, self.seed ^ _RESERVOIR_SALT)

    @property
    def n(self):
        return self.state.n

    def _run_stage(self, X, phi, arms, y):
        st = self.state
        st.ingest(phi, arms, y)
        if self._fixed is None:
            self.reservoir.offer(X)
        st.refresh_coefficients()
        st.stage_accumulate(phi, arms, y)
        st.stage_close()
        grid = self._fixed if self._fixed is not None else self.reservoir.grid()
        phi_grid = self.basis.eval_many(grid.points)
        vals = phi_grid @ st.contrast
        i = int(np.argmax(vals))
        stat = float(vals[i])
        k = self.stage + 1
        if st.n < 3:
            return MonitorDecision(self.method, k, st.n, stat, math.inf, Verdict.CONTINUE, degenerate=True)
        bound = lil_bound(st, phi_grid)
        verdict = Verdict.REJECT if stat > bound else Verdict.CONTINUE
        return MonitorDecision(self.method, k, st.n, stat, bound, verdict,
                               argmax_x=tuple(float(v) for v in grid.points[i]))

    def to_dict(self):
        return {"stage": self.stage, "terminated": self.terminated, "seed": self.seed,
                "horizon": self.horizon,
                "grid": {"source": self.grid_spec.source, "size": self.grid_spec.size,
                         "resolution": self.grid_spec.resolution},
                "state": self.state.to_dict(),
                "reservoir": {"points": self.reservoir.points, "seen": self.reservoir.seen}}

    @classmethod
    def from_dict(cls, d, basis, spending=None):
        mon = cls(basis, horizon=d.get("horizon"), seed=int(d["seed"]), grid=GridSpec(**d["grid"]))
        mon.stage = int(d["stage"])
        mon.terminated = bool(d["terminated"])
        mon.state = ArmState.from_dict(d["state"])
        pts = np.array(d["reservoir"]["points"], dtype=float).reshape(mon.reservoir.points.shape)
        mon.reservoir.points = np.ascontiguousarray(pts)
        mon.reservoir.seen = int(d["reservoir"]["seen"])
        return mon


class AvtState:
    """Per-arm counts, sums and sums of squares of the rewards."""

    def __init__(self, tau2=1.0):
        if not tau2 > 0:
            raise ValueError("tau2 must be positive")
        self.tau2 = float(tau2)
        self.count = np.zeros(2, dtype=np.int64)
        self.sum_y = np.zeros(2)
        self.sum_y2 = np.zeros(2)

    def ingest(self, arms, y):
        for a in (0, 1):
            ya = y[arms == a]
            self.count[a] += ya.size
            self.sum_y[a] += ya.sum()
            self.sum_y2[a] += ya @ ya

    def means(self):
        return self.sum_y / self.count

    def pooled_variance(self):
        n0, n1 = (int(c) for c in self.count)
        ss = self.sum_y2 - self.sum_y**2 / self.count
        return max(float(ss.sum()), 0.0) / (n0 + n1 - 2)

    def to_dict(self):
        return {"tau2": self.tau2, "count": self.count, "sum_y": self.sum_y, "sum_y2": self.sum_y2}

    @classmethod
    def from_dict(cls, d):
        st = cls(float(d["tau2"]))
        st.count = np.array(d["count"], dtype=np.int64).reshape(2)
        st.sum_y = np.array(d["sum_y"], dtype=float).reshape(2)
        st.sum_y2 = np.array(d["sum_y2"], dtype=float).reshape(2)
        return st


def avt_log_statistic(state):
    """Log of the normal-mixture likelihood ratio for the mean difference.

    ``v = s^2 (1/n0 + 1/n1)`` is the variance of the difference in means and
    ``tau2`` the mixture variance.
    """
    if state.count.min() < 2:
        raise ValueError("each arm needs at least two observations")
    n0, n1 = (int(c) for c in state.count)
    ybar = state.means()
    diff = float(ybar[0] - ybar[1])
    v = state.pooled_variance() * (1.0 / n0 + 1.0 / n1)
    tau2 = state.tau2
    if v == 0.0:
        return math.inf if diff != 0.0 else -math.inf
    return 0.5 * math.log(v / (v + tau2)) + tau2 * diff * diff / (2.0 * v * (v + tau2))


def avt_statistic(state):
    log_lam = avt_log_statistic(state)
    if log_lam > 709.0:
        return math.inf
    return math.exp(log_lam)


class AvtMonitor(StagedMonitor):
    """Always-valid test; rejects when the mixture ratio reaches ``1/alpha``
    and the treatment arm has the larger mean."""

    method = "AVT"

    def __init__(self, alpha=0.05, *, tau2=1.0, horizon=None):
        super().__init__(None, None, horizon)
        self.alpha = float(alpha)
        self.state = AvtState(tau2)

    @property
    def n(self):
        return int(self.state.count.sum())

    def _run_stage(self, X, phi, arms, y):
        st = self.state
        st.ingest(arms, y)
        k = self.stage + 1
        threshold = 1.0 / self.alpha
        if st.count.min() < 2:
            return MonitorDecision(self.method, k, self.n, 0.0, threshold, Verdict.CONTINUE, degenerate=True)
        log_lam = avt_log_statistic(st)
        ybar = st.means()
        favors_treatment = ybar[1] > ybar[0]
        reject = favors_treatment and log_lam >= math.log(threshold)
        return MonitorDecision(self.method, k, self.n, avt_statistic(st), threshold,
                               Verdict.REJECT if reject else Verdict.CONTINUE)

    def to_dict(self):
        return {"stage": self.stage, "terminated": self.terminated, "alpha": self.alpha,
                "horizon": self.horizon, "state": self.state.to_dict()}

    @classmethod
    def from_dict(cls, d, basis=None, spending=None):
        mon = cls(float(d["alpha"]), horizon=d.get("horizon"))
        mon.stage = int(d["stage"])
        mon.terminated = bool(d["terminated"])
        mon.state = AvtState.from_dict(d["state"])
        return mon

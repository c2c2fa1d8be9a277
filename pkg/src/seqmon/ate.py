"""Sequential test for a positive average treatment effect.

The statistic is the covariate-averaged contrast ``phibar^T (b1 - b0)``. Its
bootstrap copy adds, once per stage, a scalar Gaussian term scaled by the
within-stage spread of the fitted effects, which carries the sampling
variability of the covariate mean.
"""

import math

import numpy as np

from .qte import (
    BootstrapEnsemble,
    MonitorDecision,
    StagedMonitor,
    Verdict,
    bootstrap_stage_update,
    solve_boundary,
    stage_normals,
)
from .stream import ArmState


class AteState:
    """``ArmState`` plus the running covariate mean and effect-spread accumulators."""

    def __init__(self, q):
        self.arms = ArmState(q)
        self.phi_bar = np.zeros(q)
        self.phi_hat = 0.0
        self.phi_hat_cum = 0.0

    @property
    def n(self):
        return self.arms.n

    def ingest(self, phi, arms, y):
        n_old = self.arms.n
        self.arms.ingest(phi, arms, y)
        self.phi_bar = (n_old * self.phi_bar + phi.sum(axis=0)) / self.arms.n

    def accumulate_spread(self, phi):
        effects = (phi - self.phi_bar) @ self.arms.contrast
        self.phi_hat += float(effects @ effects)

    def close(self):
        self.arms.stage_close()
        self.phi_hat_cum += self.phi_hat
        self.phi_hat = 0.0

    def bootstrap_variance(self):
        """Conditional variance of one bootstrap statistic given the data."""
        pb = self.phi_bar
        total = self.arms.cum_sandwich[0] + self.arms.cum_sandwich[1]
        return (float(pb @ total @ pb) + self.phi_hat_cum) / float(self.n) ** 2

    def to_dict(self):
        return {"arms": self.arms.to_dict(), "phi_bar": self.phi_bar,
                "phi_hat": self.phi_hat, "phi_hat_cum": self.phi_hat_cum}

    @classmethod
    def from_dict(cls, d):
        st = cls(int(d["arms"]["q"]))
        st.arms = ArmState.from_dict(d["arms"])
        st.phi_bar = np.array(d["phi_bar"], dtype=float).reshape(st.arms.q)
        st.phi_hat = float(d["phi_hat"])
        st.phi_hat_cum = float(d["phi_hat_cum"])
        return st


def ate_statistic(state):
    return float(state.phi_bar @ state.arms.contrast)


def ate_bootstrap_stage_update(ens, extra, state, N_k, m):
    """Advance the coefficient paths and the scalar mean-variability path.

    ``extra`` (one entry per path) is updated in place.
    """
    bootstrap_stage_update(ens, state.arms, N_k, m)
    e2 = stage_normals(ens.seed, ens.stage, ens.B, ens.q, tag=1, shape=(ens.B,))
    extra *= 1.0 - m / N_k
    extra += math.sqrt(state.phi_hat) * e2 / N_k
    return e2


class AteMonitor(StagedMonitor):
    method = "BAT-ATE"

    def __init__(self, basis, spending, *, B=2000, seed=0):
        super().__init__(basis, spending)
        self.seed = int(seed) & ((1 << 64) - 1)
        self.state = AteState(basis.q)
        self.ensemble = BootstrapEnsemble(B, basis.q, self.seed)
        self.extra = np.zeros(self.ensemble.B)

    @property
    def n(self):
        return self.state.n

    def _run_stage(self, X, phi, arms, y):
        st, ens = self.state, self.ensemble
        m = y.size
        st.ingest(phi, arms, y)
        st.arms.refresh_coefficients()
        stat = ate_statistic(st)
        st.accumulate_spread(phi)
        st.arms.stage_accumulate(phi, arms, y)
        ate_bootstrap_stage_update(ens, self.extra, st, st.n, m)
        st.close()

        spend = self.spending(st.n)
        surv = ens.survivors
        boot = ens.contrast[surv] @ st.phi_bar + self.extra[surv]
        z, ens.survivors = solve_boundary(boot, surv, ens.B, spend)
        verdict = Verdict.REJECT if stat > z else Verdict.CONTINUE
        return MonitorDecision(self.method, self.stage + 1, st.n, stat, z, verdict, spend, len(ens.survivors))

    def to_dict(self):
        return {"stage": self.stage, "terminated": self.terminated, "seed": self.seed,
                "state": self.state.to_dict(), "ensemble": self.ensemble.to_dict(), "extra": self.extra}

    @classmethod
    def from_dict(cls, d, basis, spending):
        mon = cls(basis, spending, B=int(d["ensemble"]["B"]), seed=int(d["seed"]))
        mon.stage = int(d["stage"])
        mon.terminated = bool(d["terminated"])
        mon.state = AteState.from_dict(d["state"])
        mon.ensemble = BootstrapEnsemble.from_dict(d["ensemble"])
        mon.extra = np.array(d["extra"], dtype=float).reshape(mon.ensemble.B)
        return mon

"""Simulation lab: data-generating processes, trial runner and Monte-Carlo
aggregation for the QTE and ATE suites."""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .ate import AteMonitor
from .baselines import AvtMonitor, LilMonitor
from .basis import make_additive_cubic_spline, make_linear
from .policies import EpsilonGreedyPolicy, GreedyTracker, RandomPolicy
from .qte import GridSpec, QteMonitor
from .spending import SpendingFunction

METHODS = ("BAT-QTE", "BAT-ATE", "LIL", "AVT")
DESIGNS = ("random", "adaptive")


@dataclass(frozen=True)
class Dgp:
    """``Y*(a) = 1 + (x1 - x2)/2 + a tau(x) + eps`` with truncated correlated normals.

    ``tau(x) = phi_delta((x1 + x2)/sqrt 2) * x3^2`` where ``phi_delta(u)`` is
    ``delta u^2 / 3`` (scenario 1) or ``delta cos(pi u)`` (scenario 2).
    """

    scenario: int = 1
    delta: float = 0.0
    noise_sd: float = 0.5
    d: int = 3
    bound: float = 2.0
    corr_base: float = 0.5

    def __post_init__(self):
        if self.scenario not in (1, 2):
            raise ValueError("scenario must be 1 or 2")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if self.d < 3:
            raise ValueError("the outcome model uses three covariates")

    @property
    def covariance(self):
        idx = np.arange(self.d)
        return self.corr_base ** np.abs(idx[:, None] - idx[None, :])

    def gen_covariates(self, rng, size=None):
        L = np.linalg.cholesky(self.covariance)
        shape = (1 if size is None else size, self.d)
        X = rng.standard_normal(shape) @ L.T
        X = np.clip(X, -self.bound, self.bound)
        return X[0] if size is None else X

    def tau(self, X):
        X = np.atleast_2d(X)
        u = (X[:, 0] + X[:, 1]) / math.sqrt(2.0)
        if self.scenario == 1:
            phi_u = self.delta * u**2 / 3.0
        else:
            phi_u = self.delta * np.cos(math.pi * u)
        return phi_u * X[:, 2] ** 2

    def q0(self, X, a):
        X = np.atleast_2d(X)
        return 1.0 + (X[:, 0] - X[:, 1]) / 2.0 + a * self.tau(X)

    def sigma2(self, X, a):
        return np.full(np.atleast_2d(X).shape[0], self.noise_sd**2)

    def gen_outcome(self, X, a, rng):
        X = np.atleast_2d(X)
        return self.q0(X, a) + self.noise_sd * rng.standard_normal(X.shape[0])

    def oracle_propensity(self, X, epsilon):
        """``pi*(1, x)`` of the epsilon-greedy policy under the true effects."""
        return np.where(self.tau(X) > 0.0, 1.0 - epsilon, epsilon)


@dataclass(frozen=True)
class TrialConfig:
    """One simulation cell.

    The schedule is ``n_first`` samples before the first look and ``2 * batch``
    per later look, ``stages`` looks in total.
    """

    method: str = "BAT-QTE"
    scenario: int = 1
    delta: float = 0.0
    design: str = "random"
    n_first: int = 2000
    batch: int = 200
    stages: int = 5
    B: int = 2000
    alpha: float = 0.05
    spending: str = "pocock"
    theta: float = 1.0
    gamma: float = 1.0
    epsilon: float = 0.3
    burn_in: int = 50
    p_random: float = 0.5
    basis: str = "spline"
    knots: int = 4
    grid_source: str = "reservoir"
    grid_size: int = 512
    grid_resolution: int = 41
    noise_sd: float = 0.5
    tau2: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.design not in DESIGNS:
            raise ValueError(f"unknown design {self.design!r}")
        if self.basis not in ("spline", "linear"):
            raise ValueError(f"unknown basis {self.basis!r}")
        if self.n_first < 1 or self.batch < 1 or self.stages < 1:
            raise ValueError("schedule sizes must be positive")
        if self.method in ("BAT-QTE", "LIL") and self.basis != "spline" and self.grid_source == "fixed":
            raise ValueError("fixed grids need a bounded (spline) basis")

    @property
    def horizon(self):
        return self.n_first + (self.stages - 1) * 2 * self.batch

    def stage_sizes(self):
        return [self.n_first] + [2 * self.batch] * (self.stages - 1)

    def dgp(self):
        return Dgp(self.scenario, self.delta, self.noise_sd)

    def make_basis(self):
        if self.basis == "linear":
            return make_linear(3)
        return make_additive_cubic_spline(3, self.knots, (-2.0, 2.0))

    def make_policy(self):
        if self.design == "random":
            return RandomPolicy(self.p_random)
        return EpsilonGreedyPolicy(self.epsilon, self.burn_in)

    def make_monitor(self):
        basis = self.make_basis()
        grid = GridSpec(self.grid_source, self.grid_size, self.grid_resolution)
        if self.method == "AVT":
            return AvtMonitor(self.alpha, tau2=self.tau2, horizon=self.horizon)
        if self.method == "LIL":
            return LilMonitor(basis, horizon=self.horizon, seed=self.seed, grid=grid)
        spending = SpendingFunction(self.spending, self.alpha, float(self.horizon), self.theta, self.gamma)
        if self.method == "BAT-ATE":
            return AteMonitor(basis, spending, B=self.B, seed=self.seed)
        return QteMonitor(basis, spending, B=self.B, seed=self.seed, grid=grid)


def qte_config(**kw):
    """QTE-suite defaults: spline basis, noise 0.5, 2000 samples before the first look."""
    base = dict(method="BAT-QTE", basis="spline", noise_sd=0.5, n_first=2000)
    base.update(kw)
    return TrialConfig(**base)


def ate_config(**kw):
    """ATE-suite defaults: linear basis, noise 1.0, 1000 samples before the first look."""
    base = dict(method="BAT-ATE", basis="linear", noise_sd=1.0, n_first=1000)
    base.update(kw)
    return TrialConfig(**base)


@dataclass
class TrialResult:
    rejected: bool
    stop_n: int
    stop_stage: int
    decisions: list = field(default_factory=list)
    stream: tuple = None


def _streams(seed):
    ss = np.random.SeedSequence(int(seed) & ((1 << 64) - 1))
    return [np.random.Generator(np.random.PCG64(s)) for s in ss.spawn(3)]


def run_trial(cfg, record=False):
    """Simulate one trial over the full schedule, stopping at the first rejection.

    With ``record=True`` the observed stream ``(stage, X, arms, y)`` is kept on
    the result.
    """
    dgp = cfg.dgp()
    basis = cfg.make_basis()
    monitor = cfg.make_monitor()
    tracker = GreedyTracker(cfg.make_policy(), basis.q)
    cov_rng, noise_rng, assign_rng = _streams(cfg.seed)
    recorded = []
    for k, m in enumerate(cfg.stage_sizes(), start=1):
        X = dgp.gen_covariates(cov_rng, m)
        eps = dgp.noise_sd * noise_rng.standard_normal(m)
        y0 = dgp.q0(X, 0) + eps
        y1 = dgp.q0(X, 1) + eps
        u = assign_rng.random(m)
        phi = basis.eval_many(X) if tracker.policy.__class__ is EpsilonGreedyPolicy else np.empty((m, basis.q))
        arms, _, y = tracker.run(phi, u, y0, y1)
        if record:
            recorded.append((k, X, arms, y))
        decision = monitor.interim(X, arms, y)
        if decision.rejected:
            return TrialResult(True, decision.n, k, monitor.decisions, tuple(recorded) if record else None)
    return TrialResult(False, monitor.n, cfg.stages, monitor.decisions, tuple(recorded) if record else None)


@dataclass
class Aggregate:
    rej_prob: float
    se_rej: float
    mean_stop: float
    se_stop: float
    R: int


def aggregate(results):
    """Rejection rate and mean stopping size with their Monte-Carlo standard errors."""
    R = len(results)
    if R < 2:
        raise ValueError("need at least two replications")
    rej = np.array([r.rejected for r in results], dtype=float)
    stops = np.array([r.stop_n for r in results], dtype=float)
    p = float(rej.mean())
    return Aggregate(p, math.sqrt(p * (1.0 - p) / R), float(stops.mean()),
                     float(stops.std(ddof=1) / math.sqrt(R)), R)


def _run_one(args):
    cfg, keep = args
    from threadpoolctl import threadpool_limits

    with threadpool_limits(1):
        res = run_trial(cfg)
    if not keep:
        res.decisions = []
    return res


def run_trials(cfg, R, threads=1, keep_decisions=False):
    """Run replications ``r = 0..R-1`` with seeds ``cfg.seed + r``, in order."""
    jobs = [(replace(cfg, seed=cfg.seed + r), keep_decisions) for r in range(R)]
    if threads <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_run_one, jobs, chunksize=max(1, R // (4 * threads))))


def run_monte_carlo(cfg, R, threads=1):
    if R < 2:
        raise ValueError("need at least two replications")
    return aggregate(run_trials(cfg, R, threads))


def config_dict(cfg):
    return asdict(cfg)

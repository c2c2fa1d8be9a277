"""Sequential test for a qualitative treatment effect.

At each interim stage the monitor computes the studentized supremum
``sqrt(N) * max_x phi(x)^T (b1 - b0) / se(x)`` over a finite covariate grid,
propagates ``B`` multiplier-bootstrap coefficient paths with one Gaussian
vector per (stage, draw, arm), and sets the stage boundary as an upper
percentile of the surviving bootstrap suprema so that the fraction of pruned
paths tracks the alpha-spending schedule.
"""

import itertools
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import kernels
from .linalg import psd_sqrt
from .stream import ArmState, check_batch

_MASK64 = (1 << 64) - 1
_RESERVOIR_SALT = 0x5EED_0F_5A3B1E


class MonitorTerminated(RuntimeError):
    """Raised when a stage is submitted to a monitor that already stopped."""


class Verdict(str, Enum):
    CONTINUE = "Continue"
    REJECT = "Reject"


@dataclass
class MonitorDecision:
    method: str
    stage: int
    n: int
    statistic: float
    boundary: float
    verdict: Verdict
    spend_target: float = math.nan
    survivors: int = -1
    argmax_x: tuple = None
    degenerate: bool = False

    @property
    def rejected(self):
        return self.verdict is Verdict.REJECT


# --------------------------------------------------------------------------
# supremum grid


@dataclass(frozen=True)
class GridSpec:
    """How the supremum grid is built.

    ``reservoir`` keeps a uniform sample of ``size`` observed covariates;
    ``fixed`` is a Cartesian grid with ``resolution`` points per covariate
    spanning the basis support.
    """

    source: str = "reservoir"
    size: int = 512
    resolution: int = 41

    def __post_init__(self):
        if self.source not in ("reservoir", "fixed"):
            raise ValueError(f"grid source must be 'reservoir' or 'fixed', got {self.source!r}")
        if self.size < 1 or self.resolution < 1:
            raise ValueError("grid size and resolution must be positive")


@dataclass
class SupGrid:
    points: np.ndarray
    source: str


def fixed_grid(basis, resolution):
    axes = []
    for lo, hi in basis.support:
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise ValueError("fixed grid needs a bounded basis support")
        axes.append(np.linspace(lo, hi, resolution))
    if not axes:
        return SupGrid(np.zeros((1, 0)), "fixed")
    pts = np.array(list(itertools.product(*axes)), dtype=float)
    return SupGrid(pts, "fixed")


class Reservoir:
    """Uniform reservoir of observed covariate rows, keyed by a seed."""

    def __init__(self, size, d, seed):
        self.points = np.zeros((int(size), int(d)))
        self.seen = 0
        self.seed = int(seed) & _MASK64

    def offer(self, X):
        X = np.ascontiguousarray(X, dtype=float)
        self.seen = kernels.reservoir_offer(self.points, self.seen, X, self.seed)

    def grid(self):
        return SupGrid(self.points[: min(self.seen, self.points.shape[0])].copy(), "reservoir")


# --------------------------------------------------------------------------
# bootstrap ensemble


def stage_normals(seed, stage, B, q, tag=0, shape=None):
    """Standard normals for one stage, keyed by (seed, stage, tag).

    Row ``b`` holds the draws of bootstrap path ``b``; the generator is
    counter-based, so the block depends only on the key.
    """
    key = (int(seed) & _MASK64) | ((int(stage) * 4 + int(tag)) << 64)
    gen = np.random.Generator(np.random.Philox(key=key))
    return gen.standard_normal(shape if shape is not None else (B, 2, q))


class BootstrapEnsemble:
    """``B`` multiplier-bootstrap coefficient paths and the survivor set."""

    def __init__(self, B, q, seed):
        if B < 1:
            raise ValueError("B must be positive")
        self.B = int(B)
        self.q = int(q)
        self.seed = int(seed) & _MASK64
        self.stage = 0
        self.beta_boot = np.zeros((self.B, 2, self.q))
        self.survivors = np.arange(self.B)

    @property
    def contrast(self):
        return self.beta_boot[:, 1, :] - self.beta_boot[:, 0, :]

    def to_dict(self):
        return {
            "B": self.B,
            "q": self.q,
            "seed": self.seed,
            "stage": self.stage,
            "beta_boot": self.beta_boot,
            "survivors": self.survivors,
        }

    @classmethod
    def from_dict(cls, d):
        ens = cls(int(d["B"]), int(d["q"]), int(d["seed"]))
        ens.stage = int(d["stage"])
        ens.beta_boot = np.ascontiguousarray(np.array(d["beta_boot"], dtype=float).reshape(ens.B, 2, ens.q))
        ens.survivors = np.array(d["survivors"], dtype=np.int64).reshape(-1)
        return ens


def bootstrap_stage_update(ens, state, N_k, m):
    """Advance every bootstrap path by one stage.

    ``beta_boot <- (1 - m/N_k) beta_boot + N_k^-1 sqrt(stage block) e`` with a
    fresh Gaussian ``e`` per (stage, path, arm). Must run before the stage is
    closed. Returns the draws used.
    """
    if m > N_k:
        raise ValueError(f"stage size {m} exceeds cumulative count {N_k}")
    ens.stage += 1
    e = stage_normals(ens.seed, ens.stage, ens.B, ens.q)
    decay = 1.0 - m / N_k
    ens.beta_boot *= decay
    for a in (0, 1):
        root = psd_sqrt(state.stage_sandwich[a])
        ens.beta_boot[:, a, :] += (e[:, a, :] @ root) / N_k
    return e


def _studentized_grid(state, phi_grid):
    se = np.sqrt(state.variance_many(phi_grid))
    valid = np.flatnonzero(se > 0.0)
    return phi_grid[valid] / se[valid, None], valid


def sup_statistic(state, phi_grid):
    """Studentized supremum ``max_x phi(x)^T (b1 - b0) / se(x)`` over grid rows.

    Grid rows with zero standard error are skipped; ties go to the first row.

    Returns:
        (S, index of the maximizing grid row)

    Raises:
        ValueError: if every grid row has zero standard error.
    """
    scaled, valid = _studentized_grid(state, np.atleast_2d(phi_grid))
    if valid.size == 0:
        raise ValueError("degenerate variance: every grid point has zero standard error")
    vals = scaled @ state.contrast
    i = int(np.argmax(vals))
    return float(vals[i]), int(valid[i])


def bootstrap_sup(ens, state, phi_grid):
    """``sqrt(N)`` times the studentized supremum of each surviving path."""
    scaled, valid = _studentized_grid(state, np.atleast_2d(phi_grid))
    if valid.size == 0:
        raise ValueError("degenerate variance: every grid point has zero standard error")
    contrast = ens.contrast[ens.survivors]
    return math.sqrt(state.n) * np.max(contrast @ scaled.T, axis=1)


def solve_boundary(stats, survivors, B, spend_now):
    """Stage boundary from the surviving bootstrap statistics.

    The new spend level is ``p = (alpha(t_k) - |I^c|/B) / (1 - |I^c|/B)``,
    clipped to [0, 1]. The boundary is the ``ceil(p |I|)``-th largest surviving
    statistic (``+inf`` when that rank is zero) and paths strictly above it
    are pruned.

    Returns:
        (boundary, remaining survivor indices)
    """
    stats = np.asarray(stats, dtype=float)
    survivors = np.asarray(survivors)
    size = survivors.shape[0]
    if size == 0:
        raise ValueError("no surviving bootstrap paths")
    if stats.shape != (size,):
        raise ValueError("one statistic per survivor is required")
    spent = (B - size) / B
    p = min(max((spend_now - spent) / (1.0 - spent), 0.0), 1.0)
    # 1e-9 absorbs round-off in p * size so exact ranks are not bumped up
    rank = min(math.ceil(p * size - 1e-9), size)
    if rank <= 0:
        return math.inf, survivors
    z = float(np.partition(stats, size - rank)[size - rank])
    return z, survivors[stats <= z]


# --------------------------------------------------------------------------
# monitors


class StagedMonitor:
    """Shared stage bookkeeping: schedule checks, termination, decision log."""

    method = "?"

    def __init__(self, basis, spending, horizon=None):
        self.basis = basis
        self.spending = spending
        self.horizon = spending.T if spending is not None else horizon
        self.stage = 0
        self.terminated = False
        self.decisions = []

    @property
    def n(self):
        raise NotImplementedError

    def _prepare(self, X, arms, y):
        if self.terminated:
            raise MonitorTerminated(f"{self.method} monitor already rejected at stage {self.stage}")
        y = np.ascontiguousarray(y, dtype=float).reshape(-1)
        if y.size == 0:
            raise ValueError("empty stage batch")
        X = np.array(X, dtype=float, ndmin=2)
        if X.size == 0:
            X = np.zeros((y.size, 0))
        elif X.shape[0] != y.size:
            X = X.reshape(y.size, -1)
        n_next = self.n + y.size
        if self.horizon is not None and n_next > self.horizon:
            raise ValueError(f"sample count {n_next} exceeds the horizon {self.horizon:g}")
        phi = self.basis.eval_many(X) if self.basis is not None else None
        if phi is not None:
            phi, arms, y = check_batch(phi, arms, y)
        else:
            arms = np.ascontiguousarray(arms, dtype=np.int64)
            if arms.shape != y.shape or not np.all((arms == 0) | (arms == 1)):
                raise ValueError("arms must be 0 or 1, one per observation")
            if not np.all(np.isfinite(y)):
                raise ValueError("batch contains non-finite values")
        return X, phi, arms, y

    def interim(self, X, arms, y):
        """Run one interim analysis on a stage batch and return the decision."""
        X, phi, arms, y = self._prepare(X, arms, y)
        decision = self._run_stage(X, phi, arms, y)
        self.stage = decision.stage
        self.decisions.append(decision)
        if decision.rejected:
            self.terminated = True
        return decision

    def _run_stage(self, X, phi, arms, y):
        raise NotImplementedError


class QteMonitor(StagedMonitor):
    """Bootstrap-assisted sequential test of ``H0: phi(x)^T (b1 - b0) <= 0 for all x``."""

    method = "BAT-QTE"

    def __init__(self, basis, spending, *, B=2000, seed=0, grid=GridSpec()):
        super().__init__(basis, spending)
        self.grid_spec = grid
        self.seed = int(seed) & _MASK64
        self.state = ArmState(basis.q)
        self.ensemble = BootstrapEnsemble(B, basis.q, self.seed)
        self._fixed = fixed_grid(basis, grid.resolution) if grid.source == "fixed" else None
        self.reservoir = Reservoir(grid.size, basis.dim_x, self.seed ^ _RESERVOIR_SALT)

    @property
    def n(self):
        return self.state.n

    def current_grid(self):
        return self._fixed if self._fixed is not None else self.reservoir.grid()

    def _run_stage(self, X, phi, arms, y):
        state, ens = self.state, self.ensemble
        m = y.size
        state.ingest(phi, arms, y)
        if self._fixed is None:
            self.reservoir.offer(X)
        state.refresh_coefficients()
        state.stage_accumulate(phi, arms, y)
        bootstrap_stage_update(ens, state, state.n, m)
        state.stage_close()

        k = self.stage + 1
        spend = self.spending(state.n)
        grid = self.current_grid()
        phi_grid = self.basis.eval_many(grid.points)
        root_n = math.sqrt(state.n)
        try:
            s, idx = sup_statistic(state, phi_grid)
        except ValueError:
            warnings.warn(f"stage {k}: all grid points have zero standard error", RuntimeWarning, stacklevel=3)
            return MonitorDecision(self.method, k, state.n, 0.0, math.inf, Verdict.CONTINUE,
                                   spend, len(ens.survivors), None, True)
        stat = root_n * s
        boot = bootstrap_sup(ens, state, phi_grid)
        z, ens.survivors = solve_boundary(boot, ens.survivors, ens.B, spend)
        verdict = Verdict.REJECT if stat > z else Verdict.CONTINUE
        return MonitorDecision(self.method, k, state.n, stat, z, verdict, spend,
                               len(ens.survivors), tuple(float(v) for v in grid.points[idx]))

    def to_dict(self):
        return {
            "stage": self.stage,
            "terminated": self.terminated,
            "seed": self.seed,
            "grid": {"source": self.grid_spec.source, "size": self.grid_spec.size,
                     "resolution": self.grid_spec.resolution},
            "state": self.state.to_dict(),
            "ensemble": self.ensemble.to_dict(),
            "reservoir": {"points": self.reservoir.points, "seen": self.reservoir.seen},
        }

    @classmethod
    def from_dict(cls, d, basis, spending):
        mon = cls(basis, spending, B=int(d["ensemble"]["B"]), seed=int(d["seed"]), grid=GridSpec(**d["grid"]))
        mon.stage = int(d["stage"])
        mon.terminated = bool(d["terminated"])
        mon.state = ArmState.from_dict(d["state"])
        mon.ensemble = BootstrapEnsemble.from_dict(d["ensemble"])
        pts = np.array(d["reservoir"]["points"], dtype=float).reshape(mon.reservoir.points.shape)
        mon.reservoir.points = np.ascontiguousarray(pts)
        mon.reservoir.seen = int(d["reservoir"]["seen"])
        return mon


# --------------------------------------------------------------------------
# two-sided wrapper


def two_sided(monitor_pos, monitor_neg):
    """Union-intersection verdict: reject only when both one-sided tests have."""
    if not (monitor_pos.terminated or monitor_neg.terminated) and monitor_pos.n != monitor_neg.n:
        raise ValueError(f"stream mismatch: {monitor_pos.n} vs {monitor_neg.n} observations")
    if monitor_pos.terminated and monitor_neg.terminated:
        return Verdict.REJECT
    return Verdict.CONTINUE


@dataclass
class TwoSidedDecision:
    stage: int
    n: int
    verdict: Verdict
    positive: MonitorDecision = None
    negative: MonitorDecision = None

    @property
    def rejected(self):
        return self.verdict is Verdict.REJECT


@dataclass
class TwoSidedMonitor:
    """Feeds one stream to a monitor on ``y`` and a second one on ``-y``."""

    positive: StagedMonitor
    negative: StagedMonitor
    stage: int = 0
    decisions: list = field(default_factory=list)

    @property
    def terminated(self):
        return self.positive.terminated and self.negative.terminated

    def interim(self, X, arms, y):
        if self.terminated:
            raise MonitorTerminated("two-sided monitor already rejected")
        y = np.asarray(y, dtype=float)
        pos = self.positive.interim(X, arms, y) if not self.positive.terminated else None
        neg = self.negative.interim(X, arms, -y) if not self.negative.terminated else None
        self.stage += 1
        n = max(self.positive.n, self.negative.n)
        decision = TwoSidedDecision(self.stage, n, two_sided(self.positive, self.negative), pos, neg)
        self.decisions.append(decision)
        return decision

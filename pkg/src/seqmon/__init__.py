"""Sequential monitoring of treatment effects in online experiments.

Bootstrap-assisted group-sequential tests for qualitative (``BAT-QTE``) and
average (``BAT-ATE``) treatment effects over streaming least-squares fits,
with LIL and always-valid (AVT) baselines, epsilon-greedy allocation and a
Monte-Carlo simulation lab.
"""

from .ate import AteMonitor
from .baselines import AvtMonitor, LilMonitor
from .basis import BasisSpec, eval_basis, make_additive_cubic_spline, make_linear
from .kernels import BACKEND
from .policies import EpsilonGreedyPolicy, RandomPolicy, assign, propensity
from .qte import GridSpec, MonitorDecision, MonitorTerminated, QteMonitor, TwoSidedMonitor, Verdict
from .simlab import TrialConfig, run_monte_carlo, run_trial
from .spending import SpendingFunction
from .stream import ArmState, Observation

__version__ = "0.1.0"

__all__ = [
    "ArmState", "AteMonitor", "AvtMonitor", "BACKEND", "BasisSpec", "EpsilonGreedyPolicy",
    "GridSpec", "LilMonitor", "MonitorDecision", "MonitorTerminated", "Observation", "QteMonitor",
    "RandomPolicy", "SpendingFunction", "TrialConfig", "TwoSidedMonitor", "Verdict", "assign",
    "eval_basis", "make_additive_cubic_spline", "make_linear", "propensity", "run_monte_carlo",
    "run_trial",
]

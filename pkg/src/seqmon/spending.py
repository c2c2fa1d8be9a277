"""Alpha-spending functions."""

import math
from dataclasses import dataclass
from statistics import NormalDist

KINDS = ("pocock", "obf", "power", "exponential")


@dataclass(frozen=True)
class SpendingFunction:
    """Cumulative type-I budget ``alpha(t)`` on ``[0, T]``.

    ``pocock`` and ``obf`` are the Lan-DeMets Pocock-like and
    O'Brien-Fleming-like forms; ``power`` uses ``theta`` and ``exponential``
    uses ``gamma``.
    """

    kind: str = "pocock"
    alpha: float = 0.05
    T: float = 1.0
    theta: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown spending function {self.kind!r}; choose from {KINDS}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        if not self.T > 0:
            raise ValueError("horizon T must be positive")
        if self.kind == "power" and not self.theta > 0:
            raise ValueError("theta must be positive")
        if self.kind == "exponential" and self.gamma == 0:
            raise ValueError("gamma must be nonzero")

    def __call__(self, t):
        return alpha_spend(self, t)


def alpha_spend(f, t):
    if not 0.0 <= t <= f.T:
        raise ValueError(f"t={t} outside [0, {f.T}]")
    frac = t / f.T
    if f.kind == "pocock":
        return f.alpha * math.log(1.0 + (math.e - 1.0) * frac)
    if f.kind == "obf":
        if frac == 0.0:
            return 0.0
        z = NormalDist().inv_cdf(1.0 - f.alpha / 2.0) / math.sqrt(frac)
        # 2 - 2 Phi(z) == erfc(z / sqrt(2)), without cancellation
        return math.erfc(z / math.sqrt(2.0))
    if f.kind == "power":
        return f.alpha * frac**f.theta
    return f.alpha * (1.0 - math.exp(-f.gamma * frac)) / (1.0 - math.exp(-f.gamma))

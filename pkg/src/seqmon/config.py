"""TOML run configuration with strict key checking.

Sections: ``[run]``, ``[simulate]``, ``[basis]``, ``[monitor]``, ``[policy]``.
Every key is optional; unknown sections or keys are errors.
"""

import os
import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .basis import make_additive_cubic_spline, make_linear
from .policies import EpsilonGreedyPolicy, RandomPolicy
from .qte import GridSpec
from .simlab import METHODS, TrialConfig
from .spending import KINDS, SpendingFunction


class ConfigError(ValueError):
    """Invalid or unreadable configuration."""


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_real(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _list_of(pred):
    return lambda v: isinstance(v, list) and all(pred(x) for x in v)


def _is_schedule(v):
    return (isinstance(v, list) and len(v) == 2 and all(_is_int(x) and x > 0 for x in v))


SCHEMA = {
    "run": {
        "seed": _is_int,
        "threads": lambda v: _is_int(v) and v >= 1,
        "out": lambda v: isinstance(v, str),
        "trace": lambda v: isinstance(v, str),
    },
    "simulate": {
        "suite": lambda v: v in ("qte", "ate"),
        "replications": lambda v: _is_int(v) and v >= 2,
        "scenarios": _list_of(lambda x: x in (1, 2)),
        "designs": _list_of(lambda x: x in ("random", "adaptive")),
        "deltas": _list_of(lambda x: _is_real(x) and x >= 0),
        "schedules": _list_of(_is_schedule),
        "methods": _list_of(lambda x: x in METHODS),
        "n_first": lambda v: _is_int(v) and v >= 1,
        "noise_sd": lambda v: _is_real(v) and v > 0,
    },
    "basis": {
        "kind": lambda v: v in ("spline", "linear"),
        "knots": lambda v: _is_int(v) and v >= 1,
        "support": lambda v: isinstance(v, list) and len(v) == 2 and all(_is_real(x) for x in v) and v[0] < v[1],
    },
    "monitor": {
        "method": lambda v: v in METHODS,
        "bootstrap": lambda v: _is_int(v) and v >= 1,
        "alpha": lambda v: _is_real(v) and 0 < v < 1,
        "spending": lambda v: v in KINDS,
        "theta": lambda v: _is_real(v) and v > 0,
        "gamma": lambda v: _is_real(v) and v != 0,
        "horizon": lambda v: _is_int(v) and v >= 1,
        "grid": lambda v: v in ("reservoir", "fixed"),
        "grid_size": lambda v: _is_int(v) and v >= 1,
        "grid_resolution": lambda v: _is_int(v) and v >= 1,
        "tau2": lambda v: _is_real(v) and v > 0,
    },
    "policy": {
        "kind": lambda v: v in ("random", "epsilon_greedy"),
        "p": lambda v: _is_real(v) and 0 < v < 1,
        "epsilon": lambda v: _is_real(v) and 0 < v < 1,
        "burn_in": lambda v: _is_int(v) and v >= 1,
    },
}

SUITE_DEFAULTS = {
    "qte": {
        "methods": ["BAT-QTE"],
        "deltas": [0.0, 0.05, 0.10, 0.15],
        "schedules": [[200, 5], [20, 50]],
        "n_first": 2000,
        "noise_sd": 0.5,
        "basis": "spline",
    },
    "ate": {
        "methods": ["BAT-ATE", "AVT"],
        "deltas": [0.0, 0.10, 0.20, 0.30],
        "schedules": [[100, 5], [10, 50]],
        "n_first": 1000,
        "noise_sd": 1.0,
        "basis": "linear",
    },
}


def validate(doc):
    """Check sections, keys and value types; raises ``ConfigError``."""
    for section, body in doc.items():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        if not isinstance(body, dict):
            raise ConfigError(f"[{section}] must be a table")
        for key, value in body.items():
            check = SCHEMA[section].get(key)
            if check is None:
                raise ConfigError(f"unknown key {section}.{key}")
            if not check(value):
                raise ConfigError(f"invalid value for {section}.{key}: {value!r}")
    return doc


@dataclass
class RunConfig:
    """Parsed configuration document with section accessors."""

    doc: dict = field(default_factory=dict)

    def section(self, name):
        return self.doc.get(name, {})

    @property
    def seed(self):
        return self.section("run").get("seed", 0)

    @property
    def threads(self):
        if "threads" in self.section("run"):
            return self.section("run")["threads"]
        env = os.environ.get("SEQMON_THREADS", "")
        if env:
            try:
                n = int(env)
            except ValueError:
                raise ConfigError(f"SEQMON_THREADS must be a positive integer, got {env!r}") from None
            if n < 1:
                raise ConfigError(f"SEQMON_THREADS must be a positive integer, got {env!r}")
            return n
        return 1

    # ---- replay -------------------------------------------------------------

    def make_basis(self, d):
        b = self.section("basis")
        kind = b.get("kind", "spline")
        if kind == "linear":
            support = [tuple(b["support"])] * d if "support" in b else None
            return make_linear(d, support=support)
        lo, hi = b.get("support", [-2.0, 2.0])
        return make_additive_cubic_spline(d, b.get("knots", 4), (float(lo), float(hi)))

    def make_policy(self):
        p = self.section("policy")
        if p.get("kind", "random") == "random":
            return RandomPolicy(p.get("p", 0.5))
        return EpsilonGreedyPolicy(p.get("epsilon", 0.3), p.get("burn_in", 50))

    def make_monitor(self, d):
        """Fresh monitor for a ``d``-covariate stream."""
        from .ate import AteMonitor
        from .baselines import AvtMonitor, LilMonitor
        from .qte import QteMonitor

        m = self.section("monitor")
        method = m.get("method", "BAT-QTE")
        horizon = m.get("horizon")
        seed = self.seed
        grid = GridSpec(m.get("grid", "reservoir"), m.get("grid_size", 512), m.get("grid_resolution", 41))
        if method == "AVT":
            return AvtMonitor(m.get("alpha", 0.05), tau2=m.get("tau2", 1.0), horizon=horizon)
        basis = self.make_basis(d)
        if method == "LIL":
            return LilMonitor(basis, horizon=horizon, seed=seed, grid=grid)
        if horizon is None:
            raise ConfigError(f"{method} needs monitor.horizon (total planned sample size)")
        spending = SpendingFunction(m.get("spending", "pocock"), m.get("alpha", 0.05), float(horizon),
                                    m.get("theta", 1.0), m.get("gamma", 1.0))
        B = m.get("bootstrap", 2000)
        if method == "BAT-ATE":
            return AteMonitor(basis, spending, B=B, seed=seed)
        return QteMonitor(basis, spending, B=B, seed=seed, grid=grid)

    # ---- simulate -----------------------------------------------------------

    @property
    def replications(self):
        return self.section("simulate").get("replications", 200)

    def cells(self):
        """Simulation cells in output order: schedule, method, design, scenario, delta."""
        s = self.section("simulate")
        suite = s.get("suite", "qte")
        dflt = SUITE_DEFAULTS[suite]
        m = self.section("monitor")
        p = self.section("policy")
        b = self.section("basis")
        if "support" in b and tuple(b["support"]) != (-2, 2):
            raise ConfigError("simulations use covariates truncated to [-2, 2]; basis.support must be [-2, 2]")
        common = dict(
            n_first=s.get("n_first", dflt["n_first"]),
            noise_sd=s.get("noise_sd", dflt["noise_sd"]),
            B=m.get("bootstrap", 2000),
            alpha=m.get("alpha", 0.05),
            spending=m.get("spending", "pocock"),
            theta=m.get("theta", 1.0),
            gamma=m.get("gamma", 1.0),
            epsilon=p.get("epsilon", 0.3),
            burn_in=p.get("burn_in", 50),
            p_random=p.get("p", 0.5),
            basis=b.get("kind", dflt["basis"]),
            knots=b.get("knots", 4),
            grid_source=m.get("grid", "reservoir"),
            grid_size=m.get("grid_size", 512),
            grid_resolution=m.get("grid_resolution", 41),
            tau2=m.get("tau2", 1.0),
            seed=self.seed,
        )
        out = []
        for n, K in s.get("schedules", dflt["schedules"]):
            for method in s.get("methods", dflt["methods"]):
                for design in s.get("designs", ["random", "adaptive"]):
                    for scenario in s.get("scenarios", [1, 2]):
                        for delta in s.get("deltas", dflt["deltas"]):
                            try:
                                out.append(TrialConfig(method=method, scenario=scenario, delta=float(delta),
                                                       design=design, batch=n, stages=K, **common))
                            except ValueError as exc:
                                raise ConfigError(str(exc)) from exc
        return out


def parse(text, source="<string>"):
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    return RunConfig(validate(doc))


def load(path):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError(f"{path}: not UTF-8 text") from exc
    return parse(text, str(path))

"""Versioned JSON checkpoints for monitors and assignment policies.

Reals are written as ``%.17g`` strings and arrays as ``{dtype, shape, data}``
so that a save/load cycle reproduces every bit of the monitor state.
"""

import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from .ate import AteMonitor
from .baselines import AvtMonitor, LilMonitor
from .basis import BasisSpec
from .policies import PolicySnapshot, RandomPolicy, policy_from_dict
from .qte import QteMonitor
from .spending import SpendingFunction

FORMAT = "seqmon-checkpoint"
VERSION = 1

MONITORS = {
    "BAT-QTE": QteMonitor,
    "BAT-ATE": AteMonitor,
    "LIL": LilMonitor,
    "AVT": AvtMonitor,
}


class CheckpointError(ValueError):
    """Unreadable, corrupt or incompatible checkpoint."""


def _real(x):
    return format(float(x), ".17g")


def encode(obj):
    """Turn nested monitor state into JSON-safe values."""
    if isinstance(obj, np.ndarray):
        if obj.dtype.kind == "f":
            data = [_real(v) for v in obj.ravel()]
        elif obj.dtype.kind in "iub":
            data = [int(v) for v in obj.ravel()]
        else:
            raise TypeError(f"cannot encode array of dtype {obj.dtype}")
        return {"__array__": obj.dtype.str, "shape": list(obj.shape), "data": data}
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return {"__real__": _real(obj)}
    if isinstance(obj, dict):
        return {str(k): encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [encode(v) for v in obj]
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot encode {type(obj).__name__}")


def decode(obj):
    if isinstance(obj, dict):
        if "__real__" in obj:
            return float(obj["__real__"])
        if "__array__" in obj:
            dtype = np.dtype(obj["__array__"])
            conv = float if dtype.kind == "f" else int
            flat = np.array([conv(v) for v in obj["data"]], dtype=dtype)
            return flat.reshape(tuple(int(s) for s in obj["shape"]))
        return {k: decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [decode(v) for v in obj]
    return obj


@dataclass
class Checkpoint:
    """A monitor, the policy that drives assignment, and the last consumed log stage."""

    monitor: object
    policy: object = RandomPolicy()
    log_stage: int = None

    @property
    def method(self):
        return self.monitor.method

    @property
    def basis(self):
        return self.monitor.basis

    def arm_state(self):
        """Per-arm regression state backing greedy assignment, if the monitor keeps one."""
        state = getattr(self.monitor, "state", None)
        if isinstance(self.monitor, AteMonitor):
            return state.arms
        if isinstance(self.monitor, (QteMonitor, LilMonitor)):
            return state
        return None

    def snapshot(self):
        state = self.arm_state()
        if state is None:
            return None
        return PolicySnapshot.from_state(state.copy(), self.basis)

    def to_dict(self):
        mon = self.monitor
        return {
            "format": FORMAT,
            "version": VERSION,
            "method": mon.method,
            "basis": mon.basis.to_dict() if mon.basis is not None else None,
            "spending": asdict(mon.spending) if mon.spending is not None else None,
            "policy": self.policy.to_dict(),
            "log_stage": self.log_stage,
            "monitor": mon.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != FORMAT:
            raise CheckpointError("not a seqmon checkpoint")
        if d.get("version") != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {d.get('version')!r}")
        method = d["method"]
        if method not in MONITORS:
            raise CheckpointError(f"unknown method {method!r}")
        basis = BasisSpec.from_dict(d["basis"]) if d["basis"] is not None else None
        spending = SpendingFunction(**d["spending"]) if d["spending"] is not None else None
        monitor = MONITORS[method].from_dict(d["monitor"], basis, spending)
        log_stage = d.get("log_stage")
        return cls(monitor, policy_from_dict(d["policy"]), None if log_stage is None else int(log_stage))


def dumps(ckpt):
    return json.dumps(encode(ckpt.to_dict()), indent=1, sort_keys=True)


def loads(text):
    try:
        return Checkpoint.from_dict(decode(json.loads(text)))
    except CheckpointError:
        raise
    except (ValueError, KeyError, TypeError, AttributeError, IndexError) as exc:
        raise CheckpointError(str(exc)) from exc


def save(path, ckpt):
    """Write atomically: a crash mid-write leaves the previous file intact."""
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(dumps(ckpt))
        fh.write("\n")
    os.replace(tmp, path)


def load(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return loads(text)

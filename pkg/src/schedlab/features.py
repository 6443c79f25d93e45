"""Job-server pairing features fed to the comparator network.

One vector layout serves both comparison modes (two servers for one job, two
jobs for one server).  Features live in a registry so they can be ablated;
the registry hash is stored with trained models and sample files.
"""

from __future__ import annotations

import hashlib
import math
from typing import Callable, Sequence

import numpy as np

from .sim import SimState

FeatureFn = Callable[[SimState, int, int, int], float]


def _signed_log(x: float) -> float:
    return math.copysign(math.log1p(abs(x)), x)


def _remaining(state: SimState, job: int, server: int) -> int:
    rem = state.remaining(job, server)
    return state.demand[server][job] if rem is None else rem


def _running_sd(state: SimState, server: int) -> float:
    r = state.running[server]
    return 0.0 if r is None else float(state.scenario.sdensity[server, r])


def _f_value(state, j, i, t):
    return state.scenario.jobs[j].value / 100.0


def _f_proc(state, j, i, t):
    return state.scenario.jobs[j].proc_time / 10.0


def _f_density(state, j, i, t):
    return math.log1p(state.scenario.jobs[j].density)


def _f_time_to_deadline(state, j, i, t):
    return (state.scenario.jobs[j].deadline - t) / 10.0


def _f_remaining(state, j, i, t):
    return _remaining(state, j, i) / 10.0


def _f_slack_remaining(state, j, i, t):
    return (state.scenario.jobs[j].deadline - t) / max(_remaining(state, j, i), 1)


def _f_psi(state, j, i, t):
    return state.scenario.jobs[j].pref[i]


def _f_eta(state, j, i, t):
    sc = state.scenario
    return sc.servers[i].eta[sc.jobs[j].jtype]


def _f_sdensity(state, j, i, t):
    return math.log1p(state.scenario.sdensity[i, j])


def _f_idle(state, j, i, t):
    return 1.0 if state.running[i] is None else 0.0


def _f_running_sdensity(state, j, i, t):
    return math.log1p(_running_sd(state, i))


def _f_delta_sdensity(state, j, i, t):
    if state.running[i] == j:
        return 0.0
    return _signed_log(float(state.scenario.sdensity[i, j]) - _running_sd(state, i))


def _f_preempted_count(state, j, i, t):
    return len(state.preempted[i]) / 3.0


def _f_progress(state, j, i, t):
    if state.server_of[j] != i:
        return 0.0
    return state.progress[j] / state.demand[i][j]


def _f_is_running(state, j, i, t):
    return 1.0 if state.running[i] == j else 0.0


def _f_running_slack(state, j, i, t):
    r = state.running[i]
    if r is None:
        return 0.0
    rem = state.demand[i][r] - state.progress[r]
    return (state.scenario.jobs[r].deadline - t) / max(rem, 1)


def _f_completion_value(state, j, i, t):
    return state.scenario.completion_value[i, j] / 100.0


FEATURES: list[tuple[str, FeatureFn]] = [
    ("value", _f_value),
    ("proc_time", _f_proc),
    ("density", _f_density),
    ("time_to_deadline", _f_time_to_deadline),
    ("remaining_demand", _f_remaining),
    ("slack_remaining", _f_slack_remaining),
    ("psi", _f_psi),
    ("eta", _f_eta),
    ("server_density", _f_sdensity),
    ("server_idle", _f_idle),
    ("running_density", _f_running_sdensity),
    ("delta_density", _f_delta_sdensity),
    ("preempted_count", _f_preempted_count),
    ("progress", _f_progress),
    ("is_running", _f_is_running),
    ("running_slack", _f_running_slack),
    ("completion_value", _f_completion_value),
]


class FeatureSet:
    """Selected registry features plus a one-hot job type block."""

    def __init__(self, num_types: int, names: Sequence[str] | None = None):
        registry = dict(FEATURES)
        if names is None:
            names = [name for name, _ in FEATURES]
        unknown = [n for n in names if n not in registry]
        if unknown:
            raise KeyError(f"unknown features {unknown}")
        self.names = list(names)
        self.num_types = num_types
        self._fns = [registry[n] for n in self.names]

    @property
    def dim(self) -> int:
        return len(self.names) + self.num_types

    @property
    def hash(self) -> str:
        key = ",".join(self.names) + f";types={self.num_types}"
        return hashlib.sha256(key.encode()).hexdigest()[:16]

    def __call__(self, state: SimState, job: int, server: int, t: int | None = None) -> np.ndarray:
        t = state.t if t is None else t
        out = np.zeros(self.dim)
        for k, fn in enumerate(self._fns):
            out[k] = fn(state, job, server, t)
        jtype = state.scenario.jobs[job].jtype
        if jtype >= self.num_types:
            raise ValueError(f"job type {jtype} outside the {self.num_types}-type feature set")
        out[len(self._fns) + jtype] = 1.0
        return out

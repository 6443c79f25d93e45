"""Domain types, derived quantities and seeded scenario generation.

Time is measured in integer timesteps.  A job occupies slots in the half-open
interval ``[arrival, deadline)``: running in slot ``t`` advances its progress by
one unit, and a job whose last slot is ``t`` completes at ``t + 1``.  A job is
therefore completable on a server iff ``deadline - arrival >= server_demand``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Iterable, TextIO

import numpy as np

SCENARIO_HEADER = "schedlab-scenario v1"


@dataclass(frozen=True)
class Job:
    id: int
    arrival: int
    deadline: int
    proc_time: int
    value: float
    jtype: int
    pref: tuple[float, ...]

    def __post_init__(self):
        if self.proc_time < 1:
            raise ValueError(f"job {self.id}: proc_time must be >= 1, got {self.proc_time}")
        if self.arrival > self.deadline:
            raise ValueError(f"job {self.id}: arrival {self.arrival} after deadline {self.deadline}")
        if not self.value > 0:
            raise ValueError(f"job {self.id}: value must be positive, got {self.value}")
        if any(not 0.0 < p <= 1.0 for p in self.pref):
            raise ValueError(f"job {self.id}: preferences must lie in (0, 1]")
        if self.slack < 1.0:
            raise ValueError(f"job {self.id}: slack {self.slack:.3f} < 1, job can never complete")

    @property
    def slack(self) -> float:
        return (self.deadline - self.arrival) / self.proc_time

    @property
    def density(self) -> float:
        return value_density(self)


@dataclass(frozen=True)
class Server:
    id: int
    eta: tuple[float, ...]

    def __post_init__(self):
        if any(not 0.0 < e <= 1.0 for e in self.eta):
            raise ValueError(f"server {self.id}: efficiencies must lie in (0, 1]")


@dataclass(frozen=True)
class Scenario:
    num_types: int
    jobs: tuple[Job, ...]
    servers: tuple[Server, ...]
    t_min: int
    t_max: int

    def __post_init__(self):
        object.__setattr__(self, "jobs", tuple(self.jobs))
        object.__setattr__(self, "servers", tuple(self.servers))
        if self.num_types < 1:
            raise ValueError("num_types must be positive")
        for k, job in enumerate(self.jobs):
            if job.id != k:
                raise ValueError(f"job ids must be 0..n-1 in order, found {job.id} at {k}")
            if not self.t_min <= job.arrival or not job.deadline <= self.t_max:
                raise ValueError(f"job {job.id}: window outside horizon [{self.t_min}, {self.t_max}]")
            if len(job.pref) != len(self.servers):
                raise ValueError(f"job {job.id}: {len(job.pref)} preferences for {len(self.servers)} servers")
            if not 0 <= job.jtype < self.num_types:
                raise ValueError(f"job {job.id}: type {job.jtype} out of range")
        for k, server in enumerate(self.servers):
            if server.id != k:
                raise ValueError(f"server ids must be 0..m-1 in order, found {server.id} at {k}")
            if len(server.eta) != self.num_types:
                raise ValueError(f"server {server.id}: {len(server.eta)} efficiencies for {self.num_types} types")

    @property
    def num_jobs(self) -> int:
        return len(self.jobs)

    @property
    def num_servers(self) -> int:
        return len(self.servers)

    @cached_property
    def demand(self) -> np.ndarray:
        """``demand[i, j]``: timesteps job ``j`` needs on server ``i``."""
        return np.array(
            [[server_demand(job, server) for job in self.jobs] for server in self.servers],
            dtype=np.int64,
        ).reshape(self.num_servers, self.num_jobs)

    @cached_property
    def completion_value(self) -> np.ndarray:
        """``completion_value[i, j] = v_j * psi_j^i``."""
        return np.array(
            [[job.value * job.pref[i] for job in self.jobs] for i in range(self.num_servers)],
            dtype=np.float64,
        ).reshape(self.num_servers, self.num_jobs)

    @cached_property
    def sdensity(self) -> np.ndarray:
        """``sdensity[i, j]``: server-dependent value-density."""
        return np.array(
            [[server_value_density(job, server) for job in self.jobs] for server in self.servers],
            dtype=np.float64,
        ).reshape(self.num_servers, self.num_jobs)


def server_demand(job: Job, server: Server) -> int:
    # float division then ceil, as in the time-indexed formulation
    return int(math.ceil(job.proc_time / server.eta[job.jtype]))


def value_density(job: Job) -> float:
    return job.value / job.proc_time


def server_value_density(job: Job, server: Server) -> float:
    return value_density(job) * job.pref[server.id] * server.eta[job.jtype]


def in_window(job: Job, server: Server, t: int, mu: float, nominal: bool = False) -> bool:
    """True iff ``arrival <= t <= deadline - mu * p``.

    ``p`` is the server-dependent demand unless ``nominal`` is set, in which
    case the job's nominal processing time is used.
    """
    p = job.proc_time if nominal else server_demand(job, server)
    return job.arrival <= t <= job.deadline - mu * p


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class RandomConfig:
    """Parameters of the random scenario distribution.

    Arrivals are uniform integers over ``[t_min, t_max - reserve]`` where
    ``reserve = ceil(slack_range[1] * proc_range[1])``, so every drawn deadline
    fits the horizon.  ``eta_profile`` pins the server efficiency matrix (and
    the server count); ``fixed_psi`` pins every preference to one value.
    """

    seed: int = 0
    num_jobs: int = 40
    num_servers: int = 4
    num_types: int = 3
    proc_range: tuple[int, int] = (5, 31)
    slack_range: tuple[float, float] = (1.5, 4.0)
    value_range: tuple[float, float] = (50.0, 200.0)
    psi_range: tuple[float, float] = (0.5, 1.0)
    eta_range: tuple[float, float] = (0.5, 1.0)
    t_min: int = 0
    horizon: int = 200
    eta_profile: tuple[tuple[float, ...], ...] | None = None
    fixed_psi: float | None = None

    def __post_init__(self):
        if self.num_jobs < 0 or self.num_types < 1:
            raise ValueError("num_jobs must be >= 0 and num_types >= 1")
        if self.eta_profile is not None:
            profile = tuple(tuple(float(e) for e in row) for row in self.eta_profile)
            object.__setattr__(self, "eta_profile", profile)
            object.__setattr__(self, "num_servers", len(profile))
            if any(len(row) != self.num_types for row in profile):
                raise ValueError("eta_profile rows must have one efficiency per job type")
            if any(not 0.0 < e <= 1.0 for row in profile for e in row):
                raise ValueError("eta_profile entries must lie in (0, 1]")
        if self.num_servers < 1:
            raise ValueError("num_servers must be positive")
        lo, hi = self.proc_range
        if not 1 <= lo <= hi:
            raise ValueError(f"bad proc_range {self.proc_range}")
        lo, hi = self.slack_range
        if not 1.0 <= lo <= hi:
            raise ValueError(f"bad slack_range {self.slack_range}")
        lo, hi = self.value_range
        if not 0.0 < lo <= hi:
            raise ValueError(f"bad value_range {self.value_range}")
        for name in ("psi_range", "eta_range"):
            lo, hi = getattr(self, name)
            if not 0.0 < lo <= hi <= 1.0:
                raise ValueError(f"bad {name} {getattr(self, name)}")
        if self.fixed_psi is not None and not 0.0 < self.fixed_psi <= 1.0:
            raise ValueError("fixed_psi must lie in (0, 1]")

    @property
    def t_max(self) -> int:
        return self.t_min + self.horizon

    @property
    def reserve(self) -> int:
        return int(math.ceil(self.slack_range[1] * self.proc_range[1]))

    def with_seed(self, seed: int) -> "RandomConfig":
        return replace(self, seed=seed)


def small_config(seed: int = 0, **overrides) -> RandomConfig:
    """Desk-scale oracle setting: 12 jobs, 3 servers, horizon 60."""
    params = dict(seed=seed, num_jobs=12, num_servers=3, proc_range=(3, 12), horizon=60)
    params.update(overrides)
    return RandomConfig(**params)


def tiny_config(seed: int = 0, **overrides) -> RandomConfig:
    """Brute-force oracle setting: 6 jobs, 2 servers, horizon 20."""
    params = dict(seed=seed, num_jobs=6, num_servers=2, proc_range=(2, 4), horizon=20)
    params.update(overrides)
    return RandomConfig(**params)


def generate_scenario(cfg: RandomConfig) -> Scenario:
    """Draw a scenario; a pure function of ``cfg``.

    Draw order on a PCG64 stream seeded from ``cfg.seed`` (n jobs, m servers,
    k types): efficiencies (m*k uniforms, skipped with ``eta_profile``), then
    n processing times, n slacks, n values, n types, n arrivals, and finally
    n*m preferences (skipped with ``fixed_psi``).
    """
    arrival_hi = cfg.t_max - cfg.reserve
    if arrival_hi < cfg.t_min:
        raise ValueError(
            f"horizon too short: {cfg.horizon} timesteps cannot hold a deadline reserve of {cfg.reserve}"
        )
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed & (2**64 - 1))))
    n, m, k = cfg.num_jobs, cfg.num_servers, cfg.num_types

    if cfg.eta_profile is None:
        eta = rng.uniform(cfg.eta_range[0], cfg.eta_range[1], size=(m, k))
    else:
        eta = np.array(cfg.eta_profile, dtype=np.float64).reshape(m, k)
    proc = rng.integers(cfg.proc_range[0], cfg.proc_range[1], size=n, endpoint=True)
    slack = rng.uniform(cfg.slack_range[0], cfg.slack_range[1], size=n)
    value = rng.uniform(cfg.value_range[0], cfg.value_range[1], size=n)
    jtype = rng.integers(0, k, size=n)
    arrival = rng.integers(cfg.t_min, arrival_hi, size=n, endpoint=True)
    if cfg.fixed_psi is None:
        psi = rng.uniform(cfg.psi_range[0], cfg.psi_range[1], size=(n, m))
    else:
        psi = np.full((n, m), cfg.fixed_psi)

    servers = [Server(i, tuple(float(e) for e in eta[i])) for i in range(m)]
    jobs = []
    for j in range(n):
        a = int(arrival[j])
        p = int(proc[j])
        d = a + round_half_up(float(slack[j]) * p)
        if d > cfg.t_max:
            raise ValueError(f"horizon too short: job {j} deadline {d} exceeds t_max {cfg.t_max}")
        jobs.append(Job(j, a, d, p, float(value[j]), int(jtype[j]), tuple(float(x) for x in psi[j])))
    return Scenario(k, tuple(jobs), tuple(servers), cfg.t_min, cfg.t_max)


def _fmt(x: float) -> str:
    return repr(float(x))


def dump_scenario(scenario: Scenario, fh: TextIO) -> None:
    fh.write(SCENARIO_HEADER + "\n")
    fh.write(f"num_types {scenario.num_types}\n")
    fh.write(f"horizon {scenario.t_min} {scenario.t_max}\n")
    fh.write(f"servers {scenario.num_servers}\n")
    for s in scenario.servers:
        fh.write(f"server {s.id} eta {' '.join(_fmt(e) for e in s.eta)}\n")
    fh.write(f"jobs {scenario.num_jobs}\n")
    for j in scenario.jobs:
        fh.write(
            f"job {j.id} arrival {j.arrival} deadline {j.deadline} proc {j.proc_time} "
            f"value {_fmt(j.value)} type {j.jtype} pref {' '.join(_fmt(p) for p in j.pref)}\n"
        )


def dumps_scenario(scenario: Scenario) -> str:
    import io

    buf = io.StringIO()
    dump_scenario(scenario, buf)
    return buf.getvalue()


def _parse_job(tokens: list[str]) -> Job:
    # job <id> arrival <a> deadline <d> proc <p> value <v> type <t> pref <...>
    if tokens[0] != "job" or tokens[2::2][:6] != ["arrival", "deadline", "proc", "value", "type", "pref"]:
        raise ValueError(f"malformed job line: {' '.join(tokens)}")
    return Job(
        id=int(tokens[1]),
        arrival=int(tokens[3]),
        deadline=int(tokens[5]),
        proc_time=int(tokens[7]),
        value=float(tokens[9]),
        jtype=int(tokens[11]),
        pref=tuple(float(x) for x in tokens[13:]),
    )


def load_scenario(lines: Iterable[str]) -> Scenario:
    it = (ln.strip() for ln in lines)
    it = (ln for ln in it if ln and not ln.startswith("#"))
    header = next(it, None)
    if header != SCENARIO_HEADER:
        raise ValueError(f"not a scenario file (header {header!r})")
    num_types = t_min = t_max = None
    servers: list[Server] = []
    jobs: list[Job] = []
    for line in it:
        tokens = line.split()
        key = tokens[0]
        if key == "num_types":
            num_types = int(tokens[1])
        elif key == "horizon":
            t_min, t_max = int(tokens[1]), int(tokens[2])
        elif key in ("servers", "jobs"):
            continue
        elif key == "server":
            if tokens[2] != "eta":
                raise ValueError(f"malformed server line: {line}")
            servers.append(Server(int(tokens[1]), tuple(float(x) for x in tokens[3:])))
        elif key == "job":
            jobs.append(_parse_job(tokens))
        else:
            raise ValueError(f"unknown scenario record {key!r}")
    if num_types is None or t_min is None:
        raise ValueError("scenario file missing num_types or horizon")
    return Scenario(num_types, tuple(jobs), tuple(servers), t_min, t_max)


def loads_scenario(text: str) -> Scenario:
    return load_scenario(text.splitlines())


def scenario_from_jobs(
    jobs: Iterable[tuple],
    etas: Iterable[Iterable[float]],
    num_types: int | None = None,
    t_min: int = 0,
    t_max: int | None = None,
) -> Scenario:
    """Build a scenario from ``(arrival, deadline, proc, value, jtype, pref)`` tuples."""
    servers = tuple(Server(i, tuple(float(e) for e in eta)) for i, eta in enumerate(etas))
    built = tuple(
        Job(k, a, d, p, float(v), t, tuple(float(x) for x in pref))
        for k, (a, d, p, v, t, pref) in enumerate(jobs)
    )
    if num_types is None:
        num_types = len(servers[0].eta)
    if t_max is None:
        t_max = max((j.deadline for j in built), default=t_min)
    return Scenario(num_types, built, servers, t_min, t_max)


__all__ = [
    "Job",
    "Server",
    "Scenario",
    "RandomConfig",
    "SCENARIO_HEADER",
    "server_demand",
    "value_density",
    "server_value_density",
    "in_window",
    "round_half_up",
    "generate_scenario",
    "small_config",
    "tiny_config",
    "dump_scenario",
    "dumps_scenario",
    "load_scenario",
    "loads_scenario",
    "scenario_from_jobs",
]

"""Comparator-driven online scheduling and supervision from optimal traces."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence, TextIO

import numpy as np

from .comparator import ComparatorNet, rank_top
from .features import FeatureSet
from .model import Scenario
from .sim import Directive, SimState, Status, run
from .trace import EventKind, ScheduleTrace, START_KINDS

SAMPLES_HEADER = "# schedlab-samples v1"

Pair = tuple[int, int]  # (job, server)


class Comparator(Protocol):
    def prefer(self, state: SimState, a: Pair, b: Pair) -> float:
        """Probability that pairing ``a`` should outrank pairing ``b``."""
        ...


class NetComparator:
    def __init__(self, net: ComparatorNet, features: FeatureSet):
        if features.dim != net.x_dim:
            raise ValueError(f"feature dimension {features.dim} does not match net input {net.x_dim}")
        if net.feature_hash and net.feature_hash != features.hash:
            raise ValueError("model was trained on a different feature registry")
        self.net = net
        self.features = features

    def prefer(self, state: SimState, a: Pair, b: Pair) -> float:
        x = self.features(state, a[0], a[1])
        y = self.features(state, b[0], b[1])
        return self.net.forward(x, y)[0]


class DeltaDensityComparator:
    """Orders pairings by server-dependent density gain over the server's running job."""

    @staticmethod
    def key(state: SimState, pair: Pair) -> float:
        j, i = pair
        sd = state.scenario.sdensity
        r = state.running[i]
        if r == j:
            return 0.0
        return float(sd[i, j]) - (0.0 if r is None else float(sd[i, r]))

    def prefer(self, state: SimState, a: Pair, b: Pair) -> float:
        ka, kb = self.key(state, a), self.key(state, b)
        if ka > kb:
            return 1.0
        if ka < kb:
            return 0.0
        return 0.5


class RankingPolicy:
    """Two-phase assignment loops resolved by a pairwise comparator.

    At arrivals each unscheduled arriving job proposes its top server (idle, or
    running a job the newcomer beats); a server claimed by several jobs keeps
    the one it ranks highest and the others retry without it.  At completions
    each freed server proposes its top job among those preempted on it or
    unassigned; a job claimed by several servers picks its preferred server.
    A server takes at most one new job per event.
    """

    def __init__(self, comparator: Comparator):
        self.comparator = comparator
        self.rounds = 0

    def _prefer(self, state: SimState, a: Pair, b: Pair) -> float:
        return self.comparator.prefer(state, a, b)

    def on_arrival(self, view: SimState, jobs: Sequence[int], t: int) -> list[Directive]:
        draft = view.copy()
        m = draft.num_servers
        pending = [j for j in sorted(jobs) if any(draft.fits(j, i) for i in range(m))]
        excluded: dict[int, set[int]] = {j: set() for j in pending}
        taken: set[int] = set()
        guard = len(jobs) * m + 1
        rounds = 0
        while pending:
            rounds += 1
            if rounds > guard:
                raise RuntimeError(f"t={t}: arrival assignment loop did not terminate")
            proposals: dict[int, list[int]] = {}
            for j in pending:
                cands = []
                for i in range(m):
                    if i in taken or i in excluded[j] or not draft.fits(j, i):
                        continue
                    r = draft.running[i]
                    if r is None or self._prefer(draft, (j, i), (r, i)) > 0.5:
                        cands.append(i)
                if cands:
                    top = rank_top(cands, lambda a, b: self._prefer(draft, (j, a), (j, b)))
                    proposals.setdefault(top, []).append(j)
            if not proposals:
                break
            commits = []
            for i in sorted(proposals):
                contenders = proposals[i]
                winner = rank_top(contenders, lambda a, b: self._prefer(draft, (a, i), (b, i)))
                commits.append((winner, i))
                for j in contenders:
                    if j != winner:
                        excluded[j].add(i)
            for j, i in commits:
                draft.assign(j, i)
                taken.add(i)
                pending.remove(j)
        self.rounds += rounds
        return view.directives_from(draft)

    def on_completion(self, view: SimState, servers: Sequence[int], t: int) -> list[Directive]:
        draft = view.copy()
        idle = [i for i in sorted(servers) if draft.running[i] is None]
        excluded: dict[int, set[int]] = {i: set() for i in idle}
        guard = len(idle) * (draft.scenario.num_jobs + 1) + 1
        rounds = 0
        while idle:
            rounds += 1
            if rounds > guard:
                raise RuntimeError(f"t={t}: completion assignment loop did not terminate")
            proposals: dict[int, list[int]] = {}
            for i in idle:
                cands = [j for j in draft.candidates(i) if j not in excluded[i]]
                if cands:
                    top = rank_top(cands, lambda a, b: self._prefer(draft, (a, i), (b, i)))
                    proposals.setdefault(top, []).append(i)
            if not proposals:
                break
            commits = []
            for j in sorted(proposals):
                contenders = proposals[j]
                winner = rank_top(contenders, lambda a, b: self._prefer(draft, (j, a), (j, b)))
                commits.append((j, winner))
                for i in contenders:
                    if i != winner:
                        excluded[i].add(j)
            for j, i in commits:
                draft.assign(j, i)
                idle.remove(i)
        self.rounds += rounds
        return view.directives_from(draft)


# ---------------------------------------------------------------------------
# supervision


@dataclass(frozen=True)
class TrainingSample:
    winner: Pair
    loser: Pair
    winner_x: np.ndarray
    loser_x: np.ndarray
    scenario_id: int
    time: int
    event: str


class TraceMismatch(ValueError):
    pass


class _Replay:
    """Drives the simulator through a recorded schedule and labels each decision."""

    def __init__(self, trace: ScheduleTrace, features: FeatureSet, scenario_id: int):
        self.starts: dict[int, list[Pair]] = {}
        for e in trace.events:
            if e.kind in START_KINDS:
                self.starts.setdefault(e.time, []).append((e.job, e.server))
        self.issued: set[tuple[int, int, int]] = set()
        self.features = features
        self.scenario_id = scenario_id
        self.samples: list[TrainingSample] = []

    def _sample(self, state: SimState, win: Pair, lose: Pair, event: str) -> None:
        self.samples.append(
            TrainingSample(
                win,
                lose,
                self.features(state, *win),
                self.features(state, *lose),
                self.scenario_id,
                state.t,
                event,
            )
        )

    def _directives(self, view: SimState, t: int) -> list[Directive]:
        out = []
        for j, i in self.starts.get(t, []):
            if (t, j, i) in self.issued or view.status[j] is Status.UNARRIVED:
                continue
            self.issued.add((t, j, i))
            out.append(Directive(j, i))
        return out

    def on_completion(self, view: SimState, servers: Sequence[int], t: int) -> list[Directive]:
        directives = self._directives(view, t)
        chosen = {d.server: d.job for d in directives}
        for i in sorted(servers):
            j = chosen.get(i)
            if j is None:
                continue
            for k in sorted((view.preempted[i] | view.pool) - {j}):
                if view.fits(k, i):
                    self._sample(view, (j, i), (k, i), "completion")
            if view.status[j] is Status.UNASSIGNED:
                for k in range(view.num_servers):
                    if k != i and view.fits(j, k):
                        self._sample(view, (j, i), (j, k), "completion")
        return directives

    def on_arrival(self, view: SimState, jobs: Sequence[int], t: int) -> list[Directive]:
        directives = self._directives(view, t)
        placed = {d.job: d.server for d in directives}
        after = view.copy()
        for d in directives:
            after.assign(d.job, d.server)
        for ja in sorted(jobs):
            i = placed.get(ja)
            if i is not None:
                others = (view.preempted[i] | view.pool) - {ja}
                if view.running[i] is not None:
                    others.add(view.running[i])
                for k in sorted(others):
                    if view.fits(k, i):
                        self._sample(view, (ja, i), (k, i), "arrival")
                for k in range(view.num_servers):
                    if k != i and view.fits(ja, k):
                        self._sample(view, (ja, i), (ja, k), "arrival")
            else:
                for k in range(view.num_servers):
                    r = after.running[k]
                    if r is not None and r != ja and after.fits(ja, k):
                        self._sample(after, (r, k), (ja, k), "arrival")
        return directives


def extract_samples(
    trace: ScheduleTrace,
    scenario: Scenario,
    features: FeatureSet | None = None,
    scenario_id: int = 0,
) -> list[TrainingSample]:
    """Pairwise supervision from an optimal schedule, one batch per decision event.

    The schedule is replayed through the simulator so that features are taken
    from exactly the state an online policy would observe.  Raises
    TraceMismatch if the replay does not reproduce the recorded completions.
    """
    features = features or FeatureSet(scenario.num_types)
    if any(e.job >= scenario.num_jobs or e.server >= scenario.num_servers for e in trace.events):
        raise TraceMismatch("trace references jobs or servers absent from the scenario")
    replay = _Replay(trace, features, scenario_id)
    result = run(scenario, replay)
    if result.completed != trace.completed():
        raise TraceMismatch(
            f"replay completed {sorted(result.completed.items())}, trace records {sorted(trace.completed().items())}"
        )
    return replay.samples


def samples_to_arrays(samples: Iterable[TrainingSample]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Winner-first arrays with label 0 (first input wins)."""
    samples = list(samples)
    if not samples:
        return np.zeros((0, 0)), np.zeros((0, 0)), np.zeros(0, dtype=np.int64)
    X = np.stack([s.winner_x for s in samples])
    Y = np.stack([s.loser_x for s in samples])
    return X, Y, np.zeros(len(samples), dtype=np.int64)


def dump_samples(samples: Sequence[TrainingSample], features: FeatureSet, fh: TextIO) -> None:
    dim = features.dim
    fh.write(f"{SAMPLES_HEADER} features={features.hash} dim={dim}\n")
    cols = ["scenario", "time", "event", "winner_job", "winner_server", "loser_job", "loser_server"]
    cols += [f"w{k}" for k in range(dim)] + [f"l{k}" for k in range(dim)]
    fh.write("\t".join(cols) + "\n")
    for s in samples:
        row = [str(s.scenario_id), str(s.time), s.event, str(s.winner[0]), str(s.winner[1]), str(s.loser[0]), str(s.loser[1])]
        row += [repr(float(x)) for x in s.winner_x] + [repr(float(x)) for x in s.loser_x]
        fh.write("\t".join(row) + "\n")


def load_samples(lines: Iterable[str]) -> tuple[list[TrainingSample], str]:
    """Returns the samples and the feature-registry hash recorded in the header."""
    it = iter(lines)
    header = next(it, "").strip()
    if not header.startswith(SAMPLES_HEADER):
        raise ValueError(f"not a sample file (header {header!r})")
    meta = dict(tok.split("=", 1) for tok in header[len(SAMPLES_HEADER):].split())
    dim = int(meta["dim"])
    next(it)
    out = []
    for line in it:
        line = line.rstrip("\n")
        if not line:
            continue
        f = line.split("\t")
        vals = np.array([float(x) for x in f[7:]])
        if vals.size != 2 * dim:
            raise ValueError(f"sample row has {vals.size} features, expected {2 * dim}")
        out.append(
            TrainingSample(
                (int(f[3]), int(f[4])),
                (int(f[5]), int(f[6])),
                vals[:dim],
                vals[dim:],
                int(f[0]),
                int(f[1]),
                f[2],
            )
        )
    return out, meta["features"]


def samples_digest(samples: Sequence[TrainingSample]) -> str:
    h = hashlib.sha256()
    for s in samples:
        h.update(repr((s.winner, s.loser, s.scenario_id, s.time, s.event)).encode())
        h.update(s.winner_x.tobytes())
        h.update(s.loser_x.tobytes())
    return h.hexdigest()[:16]

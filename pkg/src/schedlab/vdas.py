"""Value-density online scheduling with threshold preemption (VDaS)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .model import in_window
from .sim import Directive, SimState, Status


@dataclass(frozen=True)
class VdasParams:
    mu: float = 0.0
    gamma: float = 1.0
    slack_min: float | None = None
    nominal_window: bool = False

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError(f"mu must be >= 0, got {self.mu}")
        if self.gamma < 1:
            raise ValueError(f"gamma must be >= 1, got {self.gamma}")
        if self.slack_min is not None and self.slack_min < 1:
            raise ValueError(f"slack_min must be >= 1, got {self.slack_min}")


def delta_value_density(state: SimState, job: int, server: int) -> float:
    """Server-dependent density of ``job`` minus that of the job running on ``server``."""
    sd = state.scenario.sdensity
    running = state.running[server]
    base = 0.0 if running is None else sd[server, running]
    return sd[server, job] - base


class VdasPolicy:
    """Online policy: argmax delta-density server choice plus threshold preemption.

    ``log`` collects ``(t, server, incumbent, challenger, incumbent_density,
    challenger_density)`` for every preemption the rule performs.
    """

    def __init__(self, params: VdasParams | None = None):
        self.params = params or VdasParams()
        self.log: list[tuple] = []

    def admissible(self, state: SimState, job: int, server: int) -> bool:
        sc = state.scenario
        jb = sc.jobs[job]
        p = self.params
        if p.slack_min is not None and jb.slack < p.slack_min:
            return False
        if not in_window(jb, sc.servers[server], state.t, p.mu, nominal=p.nominal_window):
            return False
        return state.fits(job, server)

    def threshold_preemption(self, state: SimState, server: int) -> Directive | None:
        """Apply the threshold rule on ``server`` in-place on ``state``.

        Candidates are jobs preempted on ``server`` plus the unassigned pool,
        restricted to the admission window.  Returns the directive issued, if any.
        """
        sd = state.scenario.sdensity
        best = None
        best_d = 0.0
        for j in sorted(state.preempted[server] | state.pool):
            if not self.admissible(state, j, server):
                continue
            if best is None or sd[server, j] > best_d:
                best, best_d = j, sd[server, j]
        if best is None:
            return None
        current = state.running[server]
        if current is None:
            state.assign(best, server)
            return Directive(best, server)
        current_d = sd[server, current]
        if best_d > self.params.gamma * current_d:
            self.log.append((state.t, server, current, best, current_d, best_d))
            state.assign(best, server)
            return Directive(best, server)
        return None

    def choose_server(self, state: SimState, job: int) -> int:
        deltas = [delta_value_density(state, job, i) for i in range(state.num_servers)]
        best = 0
        for i in range(1, len(deltas)):
            if deltas[i] > deltas[best]:
                best = i
        return best

    def on_arrival(self, view: SimState, jobs: Sequence[int], t: int) -> list[Directive]:
        draft = view.copy()
        for j in sorted(jobs):
            if draft.status[j] is not Status.UNASSIGNED:
                continue
            server = self.choose_server(draft, j)
            self.threshold_preemption(draft, server)
        return view.directives_from(draft)

    def on_completion(self, view: SimState, servers: Sequence[int], t: int) -> list[Directive]:
        draft = view.copy()
        sd = view.scenario.sdensity
        for i in sorted(servers):
            if draft.running[i] is None:
                resumable = [j for j in sorted(draft.preempted[i]) if draft.fits(j, i)]
                if resumable:
                    best = max(resumable, key=lambda j: (sd[i, j], -j))
                    draft.assign(best, i)
            self.threshold_preemption(draft, i)
        return view.directives_from(draft)

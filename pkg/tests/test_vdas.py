from pathlib import Path

import numpy as np
import pytest

from conftest import single
from oracles import value_density_slots
from schedlab.model import generate_scenario, in_window, load_scenario, scenario_from_jobs, small_config
from schedlab.sim import SimState, Status, run, validate_trace
from schedlab.trace import EventKind, START_KINDS
from schedlab.vdas import VdasParams, VdasPolicy, delta_value_density

FIXTURES = Path(__file__).parent / "fixtures"


class Recorder:
    def __init__(self, policy):
        self.policy = policy
        self.calls = []

    def on_arrival(self, view, jobs, t):
        out = self.policy.on_arrival(view, jobs, t)
        self.calls.append(("arrival", t, tuple((d.job, d.server) for d in out)))
        return out

    def on_completion(self, view, servers, t):
        out = self.policy.on_completion(view, servers, t)
        self.calls.append(("completion", t, tuple((d.job, d.server) for d in out)))
        return out


def load_expected(name):
    calls = []
    for line in (FIXTURES / name).read_text().splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        kind, t, *rest = line.split()
        pairs = () if rest == ["-"] else tuple(tuple(int(x) for x in tok.split(":")) for tok in rest)
        calls.append((kind, int(t), pairs))
    return calls


def load_fixture(name):
    with open(FIXTURES / name) as fh:
        return load_scenario(fh)


def test_degenerate_fixture_matches_hand_trace():
    sc = load_fixture("vdas_degenerate.scenario")
    rec = Recorder(VdasPolicy(VdasParams(mu=0.0, gamma=1.0)))
    res = run(sc, rec)
    assert rec.calls == load_expected("vdas_degenerate.expected")
    assert res.total_value == 125.0


def test_two_server_fixture_matches_hand_trace():
    sc = load_fixture("vdas_two_server.scenario")
    rec = Recorder(VdasPolicy(VdasParams(mu=0.0, gamma=2.0)))
    res = run(sc, rec)
    assert rec.calls == load_expected("vdas_two_server.expected")
    assert res.total_value == pytest.approx(127.0)
    assert res.completed == {0: 0, 1: 1, 2: 0}


def test_delta_value_density():
    sc = scenario_from_jobs(
        [(0, 40, 10, 20.0, 0, (1.0,)), (0, 40, 10, 30.0, 0, (1.0,)), (0, 40, 10, 10.0, 0, (1.0,))], [(1.0,)]
    )
    st = SimState(sc)
    st.status = [Status.UNASSIGNED] * 3
    st.pool = {0, 1, 2}
    assert delta_value_density(st, 0, 0) == 2.0
    st.assign(0, 0)
    assert delta_value_density(st, 1, 0) == pytest.approx(1.0)
    assert delta_value_density(st, 2, 0) == pytest.approx(-1.0)


def test_choose_server_is_argmax_delta():
    # densities on servers 0 and 1 are 1.0 and 2.5 for the arriving job
    sc = scenario_from_jobs([(0, 40, 10, 25.0, 0, (0.4, 1.0))], [(1.0,), (1.0,)])
    st = SimState(sc)
    st.status = [Status.UNASSIGNED]
    st.pool = {0}
    assert VdasPolicy().choose_server(st, 0) == 1


def test_choose_server_ties_go_to_lowest_index():
    sc = scenario_from_jobs([(0, 40, 10, 25.0, 0, (1.0, 1.0, 1.0))], [(0.5,), (1.0,), (1.0,)])
    st = SimState(sc)
    st.status = [Status.UNASSIGNED]
    st.pool = {0}
    assert VdasPolicy().choose_server(st, 0) == 1


def threshold_case(rho_run, rho_cand, gamma):
    sc = single([(0, 100, 10, rho_run * 10), (0, 100, 10, rho_cand * 10)])
    st = SimState(sc)
    st.status = [Status.UNASSIGNED] * 2
    st.pool = {0, 1}
    st.assign(0, 0)
    return VdasPolicy(VdasParams(gamma=gamma)).threshold_preemption(st, 0)


def test_threshold_is_strict():
    assert threshold_case(2.0, 3.1, 1.5) is not None
    assert threshold_case(2.0, 3.0, 1.5) is None


def test_idle_server_takes_any_candidate():
    sc = single([(0, 100, 10, 1.0)])
    st = SimState(sc)
    st.status = [Status.UNASSIGNED]
    st.pool = {0}
    d = VdasPolicy(VdasParams(gamma=3.0)).threshold_preemption(st, 0)
    assert (d.job, d.server) == (0, 0)


def test_gamma_below_one_rejected():
    with pytest.raises(ValueError):
        VdasParams(gamma=0.9)
    with pytest.raises(ValueError):
        VdasParams(mu=-1)


def test_completion_resumes_densest_feasible_preempted_job():
    # jobs 1 and 2 are preempted on the server with densities 1.2 and 3.4
    sc = single([(0, 100, 10, 12.0), (0, 100, 10, 34.0), (0, 100, 10, 50.0), (0, 100, 5, 1.0)])
    st = SimState(sc)
    st.status = [Status.COMPLETED, Status.PREEMPTED, Status.PREEMPTED, Status.EXPIRED]
    for j in (1, 2):
        st.server_of[j] = 0
        st.progress[j] = 2
        st.preempted[0].add(j)
    st.t = 10
    out = VdasPolicy().on_completion(st, (0,), 10)
    assert [(d.job, d.server) for d in out] == [(2, 0)]
    # an infeasible remainder is skipped
    st.t = 93
    out = VdasPolicy().on_completion(st, (0,), 93)
    assert out == []


def test_completion_pulls_from_pool():
    sc = single([(0, 100, 10, 12.0)])
    st = SimState(sc)
    st.status = [Status.UNASSIGNED]
    st.pool = {0}
    st.t = 4
    out = VdasPolicy().on_completion(st, (0,), 4)
    assert [(d.job, d.server) for d in out] == [(0, 0)]


def test_matches_slot_level_reference_on_single_server():
    rng = np.random.default_rng(7)
    for _ in range(300):
        n = int(rng.integers(2, 8))
        jobs = []
        for _ in range(n):
            p = int(rng.integers(1, 6))
            a = int(rng.integers(0, 20))
            d = a + p + int(rng.integers(0, 3 * p + 1))
            jobs.append((a, d, p, float(rng.uniform(10, 100))))
        sc = single(jobs)
        res = run(sc, VdasPolicy())
        alloc = res.trace.allocation(sc)
        got = [int(np.flatnonzero(alloc[0, t])[0]) if alloc[0, t].any() else None for t in range(alloc.shape[1] - 1)]
        assert got == value_density_slots(jobs)


def test_preemptions_only_above_threshold():
    for seed in range(60):
        sc = generate_scenario(small_config(seed))
        pol = VdasPolicy(VdasParams(mu=0.5, gamma=1.5))
        res = run(sc, pol)
        validate_trace(sc, res.trace)
        assert len(pol.log) >= res.preemptions
        for _, _, _, _, incumbent, challenger in pol.log:
            assert challenger > 1.5 * incumbent


def test_scheduled_jobs_are_inside_the_window():
    mu = 1.0
    for seed in range(60):
        sc = generate_scenario(small_config(seed))
        res = run(sc, VdasPolicy(VdasParams(mu=mu)))
        for e in res.trace.events:
            if e.kind in (EventKind.SCHEDULE, EventKind.ARRIVAL_SCHEDULE):
                assert in_window(sc.jobs[e.job], sc.servers[e.server], e.time, mu)


def test_slack_filter_rejects_tight_jobs():
    sc = single([(0, 12, 10, 100.0), (0, 40, 10, 1.0)])
    res = run(sc, VdasPolicy(VdasParams(slack_min=1.5)))
    assert res.completed == {1: 0}


GAMMAS = (1.0, 1.2, 1.5, 2.0, 3.0, 5.0)


def preemption_counts(seed):
    sc = generate_scenario(small_config(seed))
    return [run(sc, VdasPolicy(VdasParams(gamma=g))).preemptions for g in GAMMAS]


@pytest.mark.xfail(
    strict=True,
    reason="per-seed monotonicity does not hold: a higher threshold changes which jobs run "
    "and so the later candidate sets (seed 5 gives 4, 3, 3, 4, 1, 1)",
)
def test_preemptions_nonincreasing_in_gamma_per_seed():
    for seed in range(100):
        counts = preemption_counts(seed)
        assert all(b <= a for a, b in zip(counts, counts[1:])), (seed, counts)


def test_preemptions_nonincreasing_in_gamma_on_aggregate():
    totals = np.sum([preemption_counts(seed) for seed in range(200)], axis=0)
    assert all(b <= a for a, b in zip(totals, totals[1:])), totals


def test_started_jobs_never_preempted_at_infinite_threshold():
    for seed in range(30):
        sc = generate_scenario(small_config(seed))
        res = run(sc, VdasPolicy(VdasParams(gamma=1e12)))
        assert res.preemptions == 0
        assert all(e.kind is not EventKind.RESUME for e in res.trace.events)
        assert sum(e.kind in START_KINDS for e in res.trace.events) == len(res.completed)

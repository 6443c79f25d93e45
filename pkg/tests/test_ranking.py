import io

import numpy as np
import pytest

from schedlab.comparator import ComparatorNet
from schedlab.features import FeatureSet
from schedlab.model import generate_scenario, scenario_from_jobs, small_config
from schedlab.offline import solve_exact
from schedlab.ranking import (
    DeltaDensityComparator,
    NetComparator,
    RankingPolicy,
    TraceMismatch,
    dump_samples,
    extract_samples,
    load_samples,
    samples_digest,
    samples_to_arrays,
)
from schedlab.sim import SimState, Status, run, validate_trace
from schedlab.trace import START_KINDS, ScheduleTrace
from schedlab.vdas import VdasParams, VdasPolicy
from test_sim import Script


def servers(m, eta=1.0):
    return [(eta,)] * m


def jobs_on(m, specs):
    return scenario_from_jobs([(a, d, p, v, 0, (1.0,) * m) for a, d, p, v in specs], servers(m))


def pairs_at(samples, t):
    return sorted((s.winner, s.loser) for s in samples if s.time == t)


# ---------------------------------------------------------------------------
# sample extraction


def test_arrival_scheduled_samples():
    # job 0 is preempted on server 2 at t=2, job 2 waits in the pool, job 3
    # arrives at t=5 and starts on the idle server 2
    sc = jobs_on(3, [(0, 60, 10, 10.0), (2, 60, 2, 50.0), (0, 60, 5, 5.0), (5, 60, 3, 40.0)])
    trace = run(sc, Script({0: [(0, 2)], 2: [(1, 2)], 5: [(3, 2)]}, {8: [(0, 2)]})).trace
    got = pairs_at(extract_samples(trace, sc), 5)
    assert got == [((3, 2), (0, 2)), ((3, 2), (2, 2)), ((3, 2), (3, 0)), ((3, 2), (3, 1))]


def test_arrival_scheduled_over_a_runner_includes_the_runner():
    sc = jobs_on(1, [(0, 60, 10, 10.0), (3, 60, 2, 50.0)])
    trace = run(sc, Script({0: [(0, 0)], 3: [(1, 0)]}, {5: [(0, 0)]})).trace
    assert pairs_at(extract_samples(trace, sc), 3) == [((1, 0), (0, 0))]


def test_arrival_rejected_samples():
    sc = jobs_on(2, [(0, 60, 10, 10.0), (0, 60, 10, 10.0), (3, 60, 2, 50.0)])
    trace = run(sc, Script({0: [(0, 0), (1, 1)]})).trace
    samples = [s for s in extract_samples(trace, sc) if s.time == 3]
    assert sorted((s.winner, s.loser) for s in samples) == [((0, 0), (2, 0)), ((1, 1), (2, 1))]
    assert all(s.event == "arrival" for s in samples)


def test_completion_resume_without_rivals_gives_no_samples():
    sc = jobs_on(2, [(0, 60, 10, 10.0), (2, 60, 2, 50.0)])
    trace = run(sc, Script({0: [(0, 0)], 2: [(1, 0)]}, {4: [(0, 0)]})).trace
    assert pairs_at(extract_samples(trace, sc), 4) == []


def test_completion_pool_pick_samples():
    # at t=4 server 0 frees and takes job 2 from the pool over job 3
    sc = jobs_on(2, [(0, 60, 4, 10.0), (0, 60, 30, 10.0), (1, 60, 3, 10.0), (1, 60, 3, 10.0)])
    trace = run(sc, Script({0: [(0, 0), (1, 1)]}, {4: [(2, 0)]})).trace
    got = pairs_at(extract_samples(trace, sc), 4)
    assert got == [((2, 0), (2, 1)), ((2, 0), (3, 0))]


def test_winners_come_from_the_optimal_schedule():
    for seed in range(20):
        sc = generate_scenario(small_config(seed))
        fs = FeatureSet(sc.num_types)
        sol = solve_exact(sc)
        samples = extract_samples(sol.trace, sc, fs, scenario_id=seed)
        starts = {(e.time, e.job, e.server) for e in sol.trace.events if e.kind in START_KINDS}
        runs = {(t, j, i) for t, i, j in sol.trace.assignments()}
        for s in samples:
            assert s.winner_x.shape == s.loser_x.shape == (fs.dim,)
            assert s.winner != s.loser and s.scenario_id == seed
            # a winner is either started here or is a runner the newcomer did not displace
            assert (s.time, *s.winner) in starts or (s.time, *s.winner) in runs


def test_feature_set_must_cover_job_types():
    sc = generate_scenario(small_config(0))
    with pytest.raises(ValueError, match="job type"):
        extract_samples(solve_exact(sc).trace, sc, FeatureSet(1))


def test_extraction_rejects_foreign_trace():
    sc = generate_scenario(small_config(1))
    other = generate_scenario(small_config(2))
    with pytest.raises(TraceMismatch):
        extract_samples(solve_exact(other).trace, sc)
    bad = ScheduleTrace(events=list(solve_exact(sc).trace.events))
    bad.events.append(bad.events[0].__class__(0, bad.events[0].kind, sc.num_jobs + 3, 0))
    with pytest.raises(TraceMismatch):
        extract_samples(bad, sc)


def test_sample_file_round_trip_and_digest():
    sc = generate_scenario(small_config(4))
    fs = FeatureSet(sc.num_types)
    samples = extract_samples(solve_exact(sc).trace, sc, fs)
    again = extract_samples(solve_exact(sc).trace, sc, fs)
    assert samples and samples_digest(samples) == samples_digest(again)
    buf = io.StringIO()
    dump_samples(samples, fs, buf)
    back, fhash = load_samples(io.StringIO(buf.getvalue()))
    assert fhash == fs.hash
    assert samples_digest(back) == samples_digest(samples)
    X, Y, L = samples_to_arrays(back)
    assert X.shape == Y.shape == (len(samples), fs.dim)
    assert not L.any()
    with pytest.raises(ValueError):
        load_samples(["garbage\n"])


# ---------------------------------------------------------------------------
# the online policy


class Table:
    """Comparator from a fixed score per (job, server)."""

    def __init__(self, score):
        self.score = score

    def prefer(self, state, a, b):
        sa, sb = self.score.get(a, 0.0), self.score.get(b, 0.0)
        return 1.0 if sa > sb else 0.0 if sa < sb else 0.5


def arrival_state(sc, jobs):
    st = SimState(sc)
    for j in jobs:
        st.status[j] = Status.UNASSIGNED
        st.pool.add(j)
    return st


def test_single_job_takes_an_idle_server():
    sc = jobs_on(2, [(0, 60, 5, 10.0)])
    out = RankingPolicy(Table({(0, 1): 1.0})).on_arrival(arrival_state(sc, [0]), [0], 0)
    assert [(d.job, d.server) for d in out] == [(0, 1)]


def test_contending_jobs_server_decides():
    sc = jobs_on(1, [(0, 60, 5, 10.0), (0, 60, 5, 10.0)])
    out = RankingPolicy(Table({(1, 0): 2.0, (0, 0): 1.0})).on_arrival(arrival_state(sc, [0, 1]), [0, 1], 0)
    assert [(d.job, d.server) for d in out] == [(1, 0)]


def test_loser_retries_on_its_next_server():
    sc = jobs_on(2, [(0, 60, 5, 10.0), (0, 60, 5, 10.0)])
    score = {(0, 0): 3.0, (1, 0): 4.0, (0, 1): 1.0, (1, 1): 1.0}
    out = RankingPolicy(Table(score)).on_arrival(arrival_state(sc, [0, 1]), [0, 1], 0)
    assert sorted((d.job, d.server) for d in out) == [(0, 1), (1, 0)]


def test_job_losing_everywhere_stays_in_pool():
    sc = jobs_on(1, [(0, 60, 30, 10.0), (0, 60, 5, 10.0)])
    st = arrival_state(sc, [0, 1])
    st.assign(0, 0)
    out = RankingPolicy(Table({(0, 0): 2.0, (1, 0): 1.0})).on_arrival(st, [1], 0)
    assert out == []
    res = run(jobs_on(1, [(0, 60, 30, 10.0), (1, 10, 5, 10.0)]), RankingPolicy(Table({(0, 0): 2.0, (1, 0): 1.0})))
    assert res.completed == {0: 0}


def test_completion_servers_propose_and_job_chooses():
    sc = jobs_on(2, [(0, 60, 5, 10.0), (0, 60, 5, 10.0)])
    st = arrival_state(sc, [0, 1])
    score = {(0, 0): 5.0, (0, 1): 6.0, (1, 0): 1.0, (1, 1): 1.0}
    out = RankingPolicy(Table(score)).on_completion(st, [0, 1], 0)
    assert sorted((d.job, d.server) for d in out) == [(0, 1), (1, 0)]


def test_completion_resumes_preempted_job_only_on_its_server():
    sc = jobs_on(2, [(0, 60, 5, 10.0)])
    st = SimState(sc)
    st.status[0] = Status.PREEMPTED
    st.server_of[0] = 1
    st.progress[0] = 2
    st.preempted[1].add(0)
    out = RankingPolicy(DeltaDensityComparator()).on_completion(st, [0, 1], 0)
    assert [(d.job, d.server) for d in out] == [(0, 1)]


def test_delta_density_ranking_matches_vdas_on_single_arrivals():
    rng = np.random.default_rng(3)
    for _ in range(500):
        m = int(rng.integers(1, 5))
        specs = []
        for _ in range(m + 1):
            pref = tuple(float(x) for x in rng.uniform(0.5, 1.0, m))
            specs.append((0, 400, int(rng.integers(1, 20)), float(rng.uniform(10, 200)), 0, pref))
        etas = [(float(rng.uniform(0.5, 1.0)),) for _ in range(m)]
        sc = scenario_from_jobs(specs, etas)
        new = m
        busy = [i for i in range(m) if rng.random() < 0.7]
        st = arrival_state(sc, busy + [new])
        for i in busy:
            st.assign(i, i)
        vd = VdasPolicy(VdasParams(mu=0.0, gamma=1.0)).on_arrival(st, [new], 0)
        rk = RankingPolicy(DeltaDensityComparator()).on_arrival(st, [new], 0)
        assert [(d.job, d.server) for d in rk] == [(d.job, d.server) for d in vd]


class Noise:
    def __init__(self, seed):
        self.rng = np.random.default_rng(seed)

    def prefer(self, state, a, b):
        return float(self.rng.random())


@pytest.mark.parametrize("seed", range(30))
def test_any_comparator_yields_a_legal_schedule(seed):
    sc = generate_scenario(small_config(seed))
    pol = RankingPolicy(Noise(seed))
    res = run(sc, pol)
    validate_trace(sc, res.trace)
    assert res.total_value == res.trace.value(sc)
    assert res.total_value <= solve_exact(sc).objective


def test_learned_comparator_runs_legally():
    fs = FeatureSet(small_config(0).num_types)
    net = ComparatorNet(fs.dim, width_cap=16, seed=1)
    net.feature_hash = fs.hash
    for seed in range(10):
        sc = generate_scenario(small_config(seed))
        validate_trace(sc, run(sc, RankingPolicy(NetComparator(net, fs))).trace)


def test_net_comparator_checks_feature_registry():
    fs = FeatureSet(2)
    with pytest.raises(ValueError, match="dimension"):
        NetComparator(ComparatorNet(fs.dim + 1, width_cap=8), fs)
    net = ComparatorNet(fs.dim, width_cap=8)
    net.feature_hash = "deadbeef"
    with pytest.raises(ValueError, match="feature registry"):
        NetComparator(net, fs)

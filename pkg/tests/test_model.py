import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from schedlab.model import (
    Job,
    RandomConfig,
    Server,
    dump_scenario,
    dumps_scenario,
    generate_scenario,
    in_window,
    load_scenario,
    loads_scenario,
    round_half_up,
    server_demand,
    server_value_density,
    small_config,
    tiny_config,
    value_density,
)


def job(p=10, v=100.0, a=0, d=None, jtype=0, pref=(1.0,)):
    return Job(0, a, a + 4 * p if d is None else d, p, v, jtype, pref)


@pytest.mark.parametrize("p,eta,expected", [(10, 0.5, 20), (10, 1.0, 10), (10, 0.6, 17)])
def test_server_demand(p, eta, expected):
    assert server_demand(job(p=p), Server(0, (eta,))) == expected


@pytest.mark.parametrize("v,p,expected", [(100, 20, 5.0), (50, 50, 1.0), (200, 5, 40.0)])
def test_value_density(v, p, expected):
    assert value_density(job(p=p, v=v)) == expected


def test_server_value_density_examples():
    # rho = 5, psi = 0.8, eta = 0.5
    assert server_value_density(job(p=20, v=100, pref=(0.8,)), Server(0, (0.5,))) == pytest.approx(2.0)
    j = job(p=20, v=100)
    assert server_value_density(j, Server(0, (1.0,))) == value_density(j)
    assert server_value_density(job(p=5, v=200, pref=(0.5,)), Server(0, (0.9,))) == pytest.approx(18.0)


def test_in_window_boundaries():
    j = job(p=8, a=0, d=20)
    s = Server(0, (1.0,))
    assert in_window(j, s, 12, mu=1)
    assert not in_window(j, s, 13, mu=1)
    assert in_window(j, s, 20, mu=0)
    assert not in_window(j, s, 21, mu=0)


def test_in_window_server_dependent_demand():
    j = job(p=8, a=0, d=20)
    slow = Server(0, (0.5,))  # demand 16
    assert in_window(j, slow, 4, mu=1)
    assert not in_window(j, slow, 5, mu=1)
    assert in_window(j, slow, 12, mu=1, nominal=True)


def test_deadline_rounding():
    assert round_half_up(2.0 * 10) == 20
    assert round_half_up(2.5) == 3
    assert round_half_up(3.5) == 4
    assert round_half_up(4.4999) == 4


def test_job_invariants_rejected():
    with pytest.raises(ValueError):
        Job(0, 0, 5, 10, 1.0, 0, (1.0,))  # slack < 1
    with pytest.raises(ValueError):
        Job(0, 0, 20, 0, 1.0, 0, (1.0,))
    with pytest.raises(ValueError):
        Job(0, 0, 20, 5, 0.0, 0, (1.0,))
    with pytest.raises(ValueError):
        Job(0, 0, 20, 5, 1.0, 0, (1.2,))
    with pytest.raises(ValueError):
        Server(0, (0.0,))


def test_default_scenario_shape():
    sc = generate_scenario(RandomConfig(seed=3))
    assert sc.num_jobs == 40 and sc.num_servers == 4 and sc.num_types == 3
    for j in sc.jobs:
        assert 5 <= j.proc_time <= 31
        assert 50 <= j.value <= 200
        assert all(0.5 <= p <= 1.0 for p in j.pref)
        assert 1.5 * j.proc_time - 0.5 <= j.deadline - j.arrival <= 4.0 * j.proc_time + 0.5
    for s in sc.servers:
        assert all(0.5 <= e <= 1.0 for e in s.eta)


def test_generation_is_deterministic():
    a = generate_scenario(small_config(11))
    b = generate_scenario(small_config(11))
    assert a == b
    assert dumps_scenario(a) == dumps_scenario(b)
    assert a != generate_scenario(small_config(12))


def test_horizon_too_short():
    with pytest.raises(ValueError, match="horizon too short"):
        generate_scenario(RandomConfig(horizon=100))


def test_generated_jobs_satisfy_invariants_over_many_seeds():
    cfg = RandomConfig(num_jobs=8, num_servers=2)
    for seed in range(10_000):
        sc = generate_scenario(cfg.with_seed(seed))
        for j in sc.jobs:
            assert j.slack >= 1.0 and j.proc_time >= 1 and j.value > 0
            assert sc.t_min <= j.arrival <= j.deadline <= sc.t_max


@settings(max_examples=200, deadline=None)
@given(
    p=st.integers(1, 40),
    eta=st.floats(0.05, 1.0),
    psi=st.floats(0.05, 1.0),
    v=st.floats(1.0, 500.0),
)
def test_derived_quantity_bounds(p, eta, psi, v):
    j = job(p=p, v=v, pref=(psi,))
    s = Server(0, (eta,))
    assert server_demand(j, s) >= p
    if eta == 1.0:
        assert server_demand(j, s) == p
    assert server_value_density(j, s) <= value_density(j) * (1 + 1e-15)
    if psi < 1.0 or eta < 1.0:
        assert server_value_density(j, s) < value_density(j)


@settings(max_examples=100, deadline=None)
@given(a=st.integers(0, 50), d_off=st.integers(0, 50), t=st.integers(-5, 110))
def test_zero_mu_window_is_arrival_to_deadline(a, d_off, t):
    j = Job(0, a, a + d_off + 1, 1, 1.0, 0, (1.0,))
    assert in_window(j, Server(0, (0.7,)), t, 0.0) == (a <= t <= j.deadline)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**63))
def test_serialization_round_trip_is_exact(seed):
    sc = generate_scenario(tiny_config(seed, num_types=2))
    buf = io.StringIO()
    dump_scenario(sc, buf)
    back = load_scenario(io.StringIO(buf.getvalue()))
    assert back == sc
    assert np.array_equal(back.completion_value, sc.completion_value)


def test_load_rejects_wrong_header():
    with pytest.raises(ValueError, match="not a scenario"):
        loads_scenario("schedlab-scenario v2\n")


def test_eta_profile_pins_servers():
    cfg = small_config(0, eta_profile=((0.9, 0.9, 0.9), (0.6, 0.6, 0.6)), fixed_psi=1.0)
    sc = generate_scenario(cfg)
    assert sc.num_servers == 2
    assert sc.servers[1].eta == (0.6, 0.6, 0.6)
    assert all(j.pref == (1.0, 1.0) for j in sc.jobs)
    with pytest.raises(ValueError):
        small_config(0, eta_profile=((0.9, 0.9),))


def test_completion_value_matrix():
    sc = generate_scenario(small_config(2))
    for i, s in enumerate(sc.servers):
        for j in sc.jobs:
            assert sc.completion_value[i, j.id] == j.value * j.pref[i]
            assert sc.demand[i, j.id] == math.ceil(j.proc_time / s.eta[j.jtype])

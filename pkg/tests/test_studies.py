"""Study trends measured with the default trained comparator."""

import math

from schedlab.experiments import ExperimentConfig, run_batch, specialist_profiles, specialization_study, tier_profiles
from schedlab.model import RandomConfig


def study(model, profiles, seeds=100):
    cfg = ExperimentConfig(
        scenario=RandomConfig(), policies=("vdas", "ranking"),
        model_path=str(model.model_path), oracle=False, num_seeds=seeds,
    )
    return specialization_study(cfg, profiles, write=False)


def test_ranking_gains_from_faster_servers(default_model):
    tiers = tier_profiles()
    res = study(default_model, {k: tiers[k] for k in ("tier-0.60", "tier-0.90")})
    assert res.mean("tier-0.90", "ranking") >= res.mean("tier-0.60", "ranking")


def test_ranking_gains_from_specialization(default_model):
    groups = specialist_profiles()
    res = study(default_model, {k: groups[k] for k in ("average-0.70", "specialist-0.70")})
    assert res.mean("specialist-0.70", "ranking") > res.mean("average-0.70", "ranking")


def test_ranking_fraction_at_least_vdas_on_desk_scale(default_model):
    cfg = ExperimentConfig(
        policies=("vdas", "ranking"), model_path=str(default_model.model_path),
        num_seeds=200, seed_offset=3000,
    )
    res = run_batch(cfg, write=False)
    fr = res.summary["ranking"]["fraction"]
    fv = res.summary["vdas"]["fraction"]
    assert fr["n"] == fv["n"] == 200
    assert fr["mean"] >= fv["mean"]
    assert all(0.0 <= r.fraction("ranking") <= 1.0 for r in res.records)
    assert not math.isnan(fr["stddev"])


def test_homogeneous_single_server_learned_ranking_within_noise(default_model):
    cfg = ExperimentConfig(
        scenario=RandomConfig(num_jobs=15, fixed_psi=1.0), policies=("vdas", "ranking"),
        model_path=str(default_model.model_path), oracle=False, num_seeds=100,
    )
    res = specialization_study(cfg, {"unit": ((1.0, 1.0, 1.0),)}, write=False)
    v = res.summaries["unit"]["vdas"]["value"]
    r = res.summaries["unit"]["ranking"]["value"]
    noise = 2 * math.hypot(v["stddev"], r["stddev"]) / math.sqrt(v["n"])
    assert abs(v["mean"] - r["mean"]) <= noise

"""Batch experiments: policy runs against the offline optimum, VDaS grid search,
server-specialization studies and the comparator training pipeline.

Result CSVs hold only quantities that are pure functions of the configuration,
so reruns are byte-identical; wall-clock timings go to a separate sidecar file.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .comparator import ComparatorNet, TrainConfig, train
from .features import FeatureSet
from .model import RandomConfig, Scenario, generate_scenario, small_config
from .offline import solve_exact
from .ranking import (
    DeltaDensityComparator,
    NetComparator,
    RankingPolicy,
    dump_samples,
    extract_samples,
    samples_to_arrays,
)
from .sim import run
from .vdas import VdasParams, VdasPolicy

POLICIES = ("vdas", "ranking", "ranking-density")

# Largest instance solved exactly without an explicit budget; certified solves
# at 24 jobs already take seconds on one core.
ORACLE_JOB_LIMIT = 24

OUTPUT_ENV = "SCHEDLAB_OUTPUT"

MU_GRID = (0.0, 0.5, 1.0, 1.5, 2.0)
GAMMA_GRID = (1.0, 1.2, 1.5, 2.0, 3.0)


class ConfigFault(ValueError):
    """An experiment configuration that cannot be run as given."""


class DominanceViolation(RuntimeError):
    """An online policy beat a certified optimum: a simulator or solver bug."""


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"training pipeline failed at stage {stage!r}: {cause}")
        self.stage = stage
        self.cause = cause


def output_dir(explicit: str | os.PathLike | None = None) -> Path:
    """Explicit path, else ``$SCHEDLAB_OUTPUT``, else ``./schedlab-out``."""
    if explicit:
        return Path(explicit)
    return Path(os.environ.get(OUTPUT_ENV) or "schedlab-out")


def large_config(seed: int = 0, **overrides) -> RandomConfig:
    """Scale-up setting without an oracle: 300 jobs on 30 servers."""
    params = dict(seed=seed, num_jobs=300, num_servers=30, horizon=200)
    params.update(overrides)
    return RandomConfig(**params)


def config_hash(obj) -> str:
    return hashlib.sha256(repr(obj).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# configuration and records


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: RandomConfig = field(default_factory=small_config)
    policies: tuple[str, ...] = ("vdas",)
    vdas: VdasParams = field(default_factory=VdasParams)
    model_path: str | None = None
    num_seeds: int = 10
    seed_offset: int = 0
    oracle: bool = True
    budget_nodes: int = 0
    budget_seconds: float = 0.0
    workers: int = 1
    out_dir: str | None = None

    def __post_init__(self):
        unknown = [p for p in self.policies if p not in POLICIES]
        if unknown:
            raise ConfigFault(f"unknown policies {unknown}; choose from {POLICIES}")
        if len(set(self.policies)) != len(self.policies):
            raise ConfigFault("policies listed twice")
        if self.num_seeds < 0 or self.workers < 1:
            raise ConfigFault("num_seeds must be >= 0 and workers >= 1")
        if "ranking" in self.policies and not self.model_path:
            raise ConfigFault("policy 'ranking' needs a trained model (model_path)")
        budgeted = self.budget_nodes > 0 or self.budget_seconds > 0
        if self.oracle and not budgeted and self.scenario.num_jobs > ORACLE_JOB_LIMIT:
            raise ConfigFault(
                f"oracle on at {self.scenario.num_jobs} jobs exceeds the exact-solve scale "
                f"({ORACLE_JOB_LIMIT}); set a node or time budget or turn the oracle off"
            )

    @property
    def seeds(self) -> list[int]:
        return list(range(self.seed_offset, self.seed_offset + self.num_seeds))


@dataclass
class RunRecord:
    seed: int
    values: dict[str, float] = field(default_factory=dict)
    preemptions: dict[str, int] = field(default_factory=dict)
    optimal: float | None = None
    certified: bool = False
    oracle_nodes: int = 0
    error: str = ""
    seconds: dict[str, float] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.error

    def fraction(self, policy: str) -> float | None:
        if self.optimal is None or policy not in self.values:
            return None
        if self.optimal == 0.0:
            return 1.0
        return self.values[policy] / self.optimal

    def to_row(self, policies: Sequence[str]) -> list[str]:
        row = [
            str(self.seed),
            "error" if self.error else "ok",
            self.error.replace("\n", " "),
            _fmt(self.optimal),
            "1" if self.certified else "0",
            str(self.oracle_nodes),
        ]
        for p in policies:
            row += [_fmt(self.values.get(p)), _fmt(self.fraction(p)), str(self.preemptions.get(p, ""))]
        return row

    @classmethod
    def from_row(cls, row: Mapping[str, str], policies: Sequence[str]) -> "RunRecord":
        rec = cls(
            seed=int(row["seed"]),
            optimal=_parse(row["optimal"]),
            certified=row["certified"] == "1",
            oracle_nodes=int(row["oracle_nodes"]),
            error=row["error"],
        )
        for p in policies:
            v = _parse(row[f"value_{p}"])
            if v is not None:
                rec.values[p] = v
            if row[f"preemptions_{p}"]:
                rec.preemptions[p] = int(row[f"preemptions_{p}"])
        return rec


def _fmt(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def _parse(s: str) -> float | None:
    return None if s == "" else float(s)


def csv_header(policies: Sequence[str]) -> list[str]:
    cols = ["seed", "status", "error", "optimal", "certified", "oracle_nodes"]
    for p in policies:
        cols += [f"value_{p}", f"fraction_{p}", f"preemptions_{p}"]
    return cols


def write_records(records: Iterable[RunRecord], policies: Sequence[str], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(csv_header(policies))
    for rec in records:
        w.writerow(rec.to_row(policies))


def read_records(fh) -> tuple[list[RunRecord], list[str]]:
    reader = csv.DictReader(fh)
    policies = [c[len("value_"):] for c in reader.fieldnames or [] if c.startswith("value_")]
    return [RunRecord.from_row(row, policies) for row in reader], policies


def records_csv(records: Sequence[RunRecord], policies: Sequence[str]) -> str:
    buf = io.StringIO()
    write_records(records, policies, buf)
    return buf.getvalue()


def _stats(xs: Sequence[float]) -> dict[str, float]:
    if not xs:
        return {"n": 0, "mean": math.nan, "median": math.nan, "stddev": math.nan}
    return {
        "n": len(xs),
        "mean": statistics.fmean(xs),
        "median": statistics.median(xs),
        "stddev": statistics.stdev(xs) if len(xs) > 1 else 0.0,
    }


def summarize(records: Sequence[RunRecord], policies: Sequence[str]) -> dict[str, dict[str, dict[str, float]]]:
    """Mean, median and sample stddev of value and fraction-of-optimal per policy.

    Only successful seeds count; fractions only where the optimum is certified.
    """
    out = {}
    for p in policies:
        ok = [r for r in records if r.ok and p in r.values]
        values = [r.values[p] for r in ok]
        fractions = [r.fraction(p) for r in ok if r.certified]
        out[p] = {"value": _stats(values), "fraction": _stats(fractions)}
    return out


def write_summary(summary: Mapping[str, Mapping[str, Mapping[str, float]]], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["policy", "metric", "n", "mean", "median", "stddev"])
    for p, metrics in summary.items():
        for metric, s in metrics.items():
            w.writerow([p, metric, s["n"], repr(s["mean"]), repr(s["median"]), repr(s["stddev"])])


def format_summary(summary: Mapping[str, Mapping[str, Mapping[str, float]]]) -> str:
    lines = [f"{'policy':<16}{'metric':<10}{'n':>6}{'mean':>14}{'median':>14}{'stddev':>14}"]
    for p, metrics in summary.items():
        for metric, s in metrics.items():
            lines.append(f"{p:<16}{metric:<10}{s['n']:>6}{s['mean']:>14.4f}{s['median']:>14.4f}{s['stddev']:>14.4f}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# per-seed work

_MODELS: dict[str, ComparatorNet] = {}


def load_model(path: str) -> ComparatorNet:
    net = _MODELS.get(path)
    if net is None:
        net = _MODELS[path] = ComparatorNet.load_path(path)
    return net


def make_policy(name: str, scenario: Scenario, params: VdasParams, model_path: str | None):
    if name == "vdas":
        return VdasPolicy(params)
    if name == "ranking-density":
        return RankingPolicy(DeltaDensityComparator())
    if name == "ranking":
        return RankingPolicy(NetComparator(load_model(model_path), FeatureSet(scenario.num_types)))
    raise ConfigFault(f"unknown policy {name!r}")


def run_seed(cfg: ExperimentConfig, seed: int) -> RunRecord:
    """All configured policies (and the oracle) on one seed; errors are captured."""
    rec = RunRecord(seed)
    try:
        sc = generate_scenario(cfg.scenario.with_seed(seed))
        if cfg.oracle:
            start = time.perf_counter()
            sol = solve_exact(sc, node_limit=cfg.budget_nodes, time_limit=cfg.budget_seconds)
            rec.seconds["oracle"] = time.perf_counter() - start
            rec.optimal = sol.objective
            rec.certified = sol.certified
            rec.oracle_nodes = sol.nodes
        for name in cfg.policies:
            start = time.perf_counter()
            result = run(sc, make_policy(name, sc, cfg.vdas, cfg.model_path))
            rec.seconds[name] = time.perf_counter() - start
            rec.values[name] = result.total_value
            rec.preemptions[name] = result.preemptions
    except Exception as exc:  # isolate the seed, keep the batch going
        rec.error = f"{type(exc).__name__}: {exc}"
    return rec


def _map_seeds(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map yields in submission order whatever the completion order
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


class _SeedRunner:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg

    def __call__(self, seed: int) -> RunRecord:
        return run_seed(self.cfg, seed)


def check_dominance(records: Iterable[RunRecord]) -> None:
    for rec in records:
        if not (rec.ok and rec.certified):
            continue
        for p, v in rec.values.items():
            if v > rec.optimal:
                raise DominanceViolation(
                    f"seed {rec.seed}: {p} earned {v!r} above the certified optimum {rec.optimal!r}"
                )


@dataclass
class BatchResult:
    records: list[RunRecord]
    summary: dict
    policies: tuple[str, ...]
    paths: dict[str, Path] = field(default_factory=dict)

    @property
    def failures(self) -> list[RunRecord]:
        return [r for r in self.records if not r.ok]


def run_batch(cfg: ExperimentConfig, write: bool = True, tag: str = "results") -> BatchResult:
    """One record per seed in seed order, plus per-policy aggregates.

    Writes ``<tag>.csv``, ``<tag>-summary.csv`` and ``<tag>-timings.csv`` to the
    output directory when ``write`` is set.  Raises DominanceViolation if any
    policy beats a certified optimum.
    """
    records = _map_seeds(_SeedRunner(cfg), cfg.seeds, cfg.workers)
    check_dominance(records)
    summary = summarize(records, cfg.policies)
    result = BatchResult(records, summary, tuple(cfg.policies))
    if write:
        out = output_dir(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        result.paths["results"] = out / f"{tag}.csv"
        result.paths["summary"] = out / f"{tag}-summary.csv"
        result.paths["timings"] = out / f"{tag}-timings.csv"
        with open(result.paths["results"], "w", newline="") as fh:
            write_records(records, cfg.policies, fh)
        with open(result.paths["summary"], "w", newline="") as fh:
            write_summary(summary, fh)
        with open(result.paths["timings"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["seed", "stage", "seconds"])
            for rec in records:
                for stage, secs in rec.seconds.items():
                    w.writerow([rec.seed, stage, f"{secs:.6f}"])
    return result


# ---------------------------------------------------------------------------
# grid search


@dataclass
class GridResult:
    best: tuple[float, float]
    table: list[dict]
    path: Path | None = None


class _GridRunner:
    def __init__(self, cfg: ExperimentConfig, cells: list[tuple[float, float]]):
        self.cfg = cfg
        self.cells = cells

    def __call__(self, seed: int):
        sc = generate_scenario(self.cfg.scenario.with_seed(seed))
        optimal = None
        if self.cfg.oracle:
            sol = solve_exact(sc, node_limit=self.cfg.budget_nodes, time_limit=self.cfg.budget_seconds)
            optimal = sol.objective if sol.certified else None
        base = self.cfg.vdas
        values = [run(sc, VdasPolicy(replace(base, mu=mu, gamma=g))).total_value for mu, g in self.cells]
        return optimal, values


def grid_search_vdas(
    cfg: ExperimentConfig,
    mu_grid: Sequence[float] = MU_GRID,
    gamma_grid: Sequence[float] = GAMMA_GRID,
    write: bool = True,
) -> GridResult:
    """Mean VDaS value of every (mu, gamma) cell over the configured seeds.

    Grids are deduplicated and sorted; the best cell is the argmax of mean
    total value, ties going to the earlier cell.
    """
    mus = sorted({float(x) for x in mu_grid})
    gammas = sorted({float(x) for x in gamma_grid})
    if not mus or not gammas:
        raise ConfigFault("grids must be nonempty")
    cells = [(mu, g) for mu in mus for g in gammas]
    for _, g in cells:
        VdasParams(gamma=g)  # validate before spending compute
    per_seed = _map_seeds(_GridRunner(cfg, cells), cfg.seeds, cfg.workers)
    table = []
    for c, (mu, g) in enumerate(cells):
        values = [vals[c] for _, vals in per_seed]
        fracs = [vals[c] / opt if opt else 1.0 for opt, vals in per_seed if opt is not None]
        table.append(
            {
                "mu": mu,
                "gamma": g,
                "mean_value": statistics.fmean(values) if values else math.nan,
                "mean_fraction": statistics.fmean(fracs) if fracs else math.nan,
            }
        )
    best_row = table[0]
    for row in table[1:]:
        if row["mean_value"] > best_row["mean_value"]:
            best_row = row
    result = GridResult((best_row["mu"], best_row["gamma"]), table)
    if write:
        out = output_dir(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        result.path = out / "grid.csv"
        with open(result.path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["mu", "gamma", "mean_value", "mean_fraction"])
            for row in table:
                w.writerow([repr(row["mu"]), repr(row["gamma"]), repr(row["mean_value"]), repr(row["mean_fraction"])])
    return result


# ---------------------------------------------------------------------------
# specialization studies

TIER_ETAS = (0.60, 0.75, 0.82, 0.90)
SPECIALIST_GROUPS = ((0.7, (0.63, 0.63, 0.9)), (0.8, (0.76, 0.76, 0.9)))


def tier_profiles(num_types: int = 3, capacity: float = 3.6) -> dict[str, tuple[tuple[float, ...], ...]]:
    """Uniform-efficiency groups with ``round(capacity / eta)`` servers each,
    so faster groups are smaller and nominal throughput stays comparable."""
    out = {}
    for eta in TIER_ETAS:
        m = max(1, round(capacity / eta))
        out[f"tier-{eta:.2f}"] = tuple((eta,) * num_types for _ in range(m))
    return out


def specialist_profiles(num_types: int = 3, copies: int = 1) -> dict[str, tuple[tuple[float, ...], ...]]:
    """Average-vs-specialist pairs: every server at the average efficiency,
    against one specialist per type (high on its type, low elsewhere)."""
    out = {}
    for avg, levels in SPECIALIST_GROUPS:
        if len(levels) != num_types:
            raise ConfigFault(f"specialist levels {levels} need {len(levels)} job types, got {num_types}")
        low, high = levels[0], levels[-1]
        m = num_types * copies
        out[f"average-{avg:.2f}"] = tuple((avg,) * num_types for _ in range(m))
        out[f"specialist-{avg:.2f}"] = tuple(
            tuple(high if tau == i % num_types else low for tau in range(num_types)) for i in range(m)
        )
    return out


@dataclass
class StudyResult:
    summaries: dict[str, dict]
    path: Path | None = None
    chart: Path | None = None

    def mean(self, profile: str, policy: str) -> float:
        return self.summaries[profile][policy]["value"]["mean"]


def specialization_study(
    cfg: ExperimentConfig,
    profiles: Mapping[str, Sequence[Sequence[float]]],
    psi: float = 1.0,
    write: bool = True,
) -> StudyResult:
    """Run the configured policies under each efficiency profile with preferences pinned to ``psi``."""
    for name, rows in profiles.items():
        if not rows:
            raise ConfigFault(f"profile {name!r} has no servers")
        bad = [r for r in rows if len(r) != cfg.scenario.num_types]
        if bad:
            raise ConfigFault(
                f"profile {name!r} gives {len(bad[0])} efficiencies per server for {cfg.scenario.num_types} job types"
            )
    summaries = {}
    rows_out = []
    for name, rows in profiles.items():
        sc_cfg = replace(cfg.scenario, eta_profile=tuple(tuple(r) for r in rows), fixed_psi=psi)
        sub = replace(cfg, scenario=sc_cfg, oracle=False, out_dir=cfg.out_dir)
        batch = run_batch(sub, write=False)
        if batch.failures:
            raise RuntimeError(f"profile {name!r}: {len(batch.failures)} seeds failed, first: {batch.failures[0].error}")
        summaries[name] = batch.summary
        for p in cfg.policies:
            s = batch.summary[p]["value"]
            rows_out.append([name, len(rows), p, s["n"], repr(s["mean"]), repr(s["median"]), repr(s["stddev"])])
    result = StudyResult(summaries)
    if write:
        out = output_dir(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        result.path = out / "study.csv"
        with open(result.path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["profile", "servers", "policy", "n", "mean_value", "median_value", "stddev_value"])
            w.writerows(rows_out)
        means = {name: {p: s[p]["value"]["mean"] for p in cfg.policies} for name, s in summaries.items()}
        result.chart = plot_grouped(means, out / "study.png", ylabel="mean total value")
    return result


def format_study(result: StudyResult) -> str:
    policies = list(next(iter(result.summaries.values()))) if result.summaries else []
    lines = [f"{'profile':<20}" + "".join(f"{p:>18}" for p in policies)]
    for name, s in result.summaries.items():
        lines.append(f"{name:<20}" + "".join(f"{s[p]['value']['mean']:>18.2f}" for p in policies))
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# charts


def plot_grouped(groups: Mapping[str, Mapping[str, float]], path: Path, ylabel: str = "") -> Path:
    """Grouped bar chart, one group per key, one bar per inner key."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    names = list(groups)
    series = sorted({k for g in groups.values() for k in g})
    x = np.arange(len(names))
    width = 0.8 / max(len(series), 1)
    fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(names) + 2), 3.5))
    for k, s in enumerate(series):
        ax.bar(x + k * width - 0.4 + width / 2, [groups[n].get(s, math.nan) for n in names], width, label=s)
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=20, ha="right")
    ax.set_ylabel(ylabel)
    ax.legend(frameon=False)
    fig.tight_layout()
    # fixed metadata keeps the file reproducible
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def report(results_csv: str | os.PathLike, out: str | os.PathLike | None = None) -> tuple[str, Path]:
    """Summary table and chart rebuilt from a results CSV."""
    with open(results_csv, newline="") as fh:
        records, policies = read_records(fh)
    summary = summarize(records, policies)
    metric = "fraction" if any(r.certified for r in records) else "value"
    chart_dir = Path(out) if out else Path(results_csv).parent
    chart_dir.mkdir(parents=True, exist_ok=True)
    groups = {p: {"mean": summary[p][metric]["mean"], "median": summary[p][metric]["median"]} for p in policies}
    chart = plot_grouped(groups, chart_dir / (Path(results_csv).stem + ".png"), ylabel=f"{metric} per seed")
    return format_summary(summary), chart


# ---------------------------------------------------------------------------
# training pipeline


@dataclass(frozen=True)
class PipelineConfig:
    scenario: RandomConfig = field(default_factory=small_config)
    num_scenarios: int = 300
    seed_offset: int = 0
    heldout_fraction: float = 0.1
    train: TrainConfig = field(default_factory=TrainConfig)
    width_cap: int | None = 512
    net_seed: int = 0
    budget_nodes: int = 0
    budget_seconds: float = 0.0
    out_dir: str | None = None
    model_name: str = "comparator.model"
    samples_name: str = "samples.tsv"

    def __post_init__(self):
        if self.num_scenarios < 1:
            raise ConfigFault("num_scenarios must be positive")
        if not 0.0 <= self.heldout_fraction < 1.0:
            raise ConfigFault("heldout_fraction must lie in [0, 1)")
        budgeted = self.budget_nodes > 0 or self.budget_seconds > 0
        if self.scenario.num_jobs > ORACLE_JOB_LIMIT and not budgeted:
            raise ConfigFault(f"training scenarios above {ORACLE_JOB_LIMIT} jobs need a solver budget")

    @property
    def seeds(self) -> list[int]:
        return list(range(self.seed_offset, self.seed_offset + self.num_scenarios))


@dataclass
class PipelineResult:
    model_path: Path
    samples_path: Path
    num_samples: int
    num_heldout: int
    heldout_accuracy: float
    skipped: list[int]
    train: object
    net: ComparatorNet


def train_pipeline(cfg: PipelineConfig) -> PipelineResult:
    """Generate, solve exactly, extract samples, train and save a comparator.

    Scenarios whose optimum is not certified within the budget are skipped.
    The last ``heldout_fraction`` of scenarios is kept out of training and
    scores the saved model.
    """
    out = output_dir(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    features = FeatureSet(cfg.scenario.num_types)
    stage = "generate"
    try:
        scenarios = [(s, generate_scenario(cfg.scenario.with_seed(s))) for s in cfg.seeds]
        stage = "solve"
        solved, skipped = [], []
        for s, sc in scenarios:
            sol = solve_exact(sc, node_limit=cfg.budget_nodes, time_limit=cfg.budget_seconds)
            if sol.certified:
                solved.append((s, sc, sol))
            else:
                skipped.append(s)
        stage = "extract"
        n_hold = int(len(solved) * cfg.heldout_fraction)
        fit, hold = [], []
        for k, (s, sc, sol) in enumerate(solved):
            batch = extract_samples(sol.trace, sc, features, scenario_id=s)
            (hold if k >= len(solved) - n_hold else fit).extend(batch)
        if not fit:
            raise ValueError("no training samples extracted")
        samples_path = out / cfg.samples_name
        with open(samples_path, "w") as fh:
            dump_samples(fit + hold, features, fh)
        stage = "train"
        X, Y, L = samples_to_arrays(fit)
        net = ComparatorNet(features.dim, seed=cfg.net_seed, init_scale=cfg.train.init_scale, width_cap=cfg.width_cap)
        result = train(net, X, Y, L, cfg.train)
        heldout = math.nan
        if hold:
            hX, hY, hL = samples_to_arrays(hold)
            heldout = net.accuracy(hX, hY, hL)
        stage = "save"
        net.feature_hash = features.hash
        net.meta = {
            "config_hash": config_hash((replace(cfg.scenario, seed=0), cfg.seeds, cfg.train, cfg.width_cap)),
            "scenario_config": repr(replace(cfg.scenario, seed=0)),
            "seeds": f"{cfg.seeds[0]}..{cfg.seeds[-1]}",
            "skipped": ",".join(map(str, skipped)) or "-",
            "samples": str(len(fit)),
            "heldout_samples": str(len(hold)),
            "heldout_accuracy": repr(heldout),
            "best_epoch": str(result.best_epoch),
            "val_loss_curve": ",".join(f"{h['val_loss']:.6g}" for h in result.history),
            "train_loss_curve": ",".join(f"{h['train_loss']:.6g}" for h in result.history),
            "solver_backend": kernels.BACKEND,
        }
        model_path = out / cfg.model_name
        net.save_path(model_path)
    except Exception as exc:
        raise PipelineError(stage, exc) from exc
    return PipelineResult(model_path, samples_path, len(fit), len(hold), heldout, skipped, result, net)

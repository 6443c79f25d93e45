"""Command-line entry point: ``schedlab <command> [options]``.

Output goes to ``--out``, else ``$SCHEDLAB_OUTPUT``, else ``./schedlab-out``.
Commands that run seeds exit 0 only if every seed succeeded.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import kernels
from .comparator import TrainConfig
from .experiments import (
    GAMMA_GRID,
    MU_GRID,
    POLICIES,
    ConfigFault,
    ExperimentConfig,
    PipelineConfig,
    PipelineError,
    format_study,
    format_summary,
    grid_search_vdas,
    large_config,
    output_dir,
    report,
    run_batch,
    specialist_profiles,
    specialization_study,
    tier_profiles,
    train_pipeline,
)
from .features import FeatureSet
from .model import RandomConfig, dump_scenario, generate_scenario, load_scenario, small_config, tiny_config
from .offline import solve_exact
from .ranking import dump_samples, extract_samples
from .trace import dump_trace, load_trace
from .vdas import VdasParams

SCALES = {
    "tiny": tiny_config,
    "small": small_config,
    "medium": RandomConfig,
    "large": large_config,
}


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _add_scenario_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("scenario")
    g.add_argument("--scale", choices=sorted(SCALES), default="small")
    g.add_argument("--jobs", type=int, help="override the number of jobs")
    g.add_argument("--servers", type=int, help="override the number of servers")
    g.add_argument("--types", type=int, help="override the number of job types")
    g.add_argument("--horizon", type=int, help="override the horizon length")


def _add_seed_args(p: argparse.ArgumentParser, default: int = 10) -> None:
    p.add_argument("--seeds", type=int, default=default, help="number of seeds")
    p.add_argument("--seed-offset", type=int, default=0, help="first seed")


def _add_vdas_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("VDaS")
    g.add_argument("--mu", type=float, default=0.0, help="admission window headroom")
    g.add_argument("--gamma", type=float, default=1.0, help="preemption threshold (>= 1)")
    g.add_argument("--slack-min", type=float, default=None, help="reject jobs with slack below this")


def _add_budget_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("exact solver")
    g.add_argument("--budget-nodes", type=int, default=0, help="search node limit (0 = none)")
    g.add_argument("--budget-seconds", type=float, default=0.0, help="search CPU-time limit (0 = none)")


def _scenario_config(args) -> RandomConfig:
    overrides = {}
    for flag, key in (("jobs", "num_jobs"), ("servers", "num_servers"), ("types", "num_types"), ("horizon", "horizon")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    return SCALES[args.scale](**overrides)


def _vdas_params(args) -> VdasParams:
    return VdasParams(mu=args.mu, gamma=args.gamma, slack_min=args.slack_min)


def _experiment_config(args, policies: tuple[str, ...]) -> ExperimentConfig:
    return ExperimentConfig(
        scenario=_scenario_config(args),
        policies=policies,
        vdas=_vdas_params(args),
        model_path=getattr(args, "model", None),
        num_seeds=args.seeds,
        seed_offset=args.seed_offset,
        oracle=not getattr(args, "no_oracle", False),
        budget_nodes=args.budget_nodes,
        budget_seconds=args.budget_seconds,
        workers=args.workers,
        out_dir=args.out,
    )


# ---------------------------------------------------------------------------
# commands


def cmd_gen(args) -> int:
    cfg = _scenario_config(args)
    out = output_dir(args.out) / "scenarios"
    out.mkdir(parents=True, exist_ok=True)
    for seed in range(args.seed_offset, args.seed_offset + args.seeds):
        path = out / f"seed-{seed:05d}.txt"
        with open(path, "w") as fh:
            dump_scenario(generate_scenario(cfg.with_seed(seed)), fh)
    print(f"wrote {args.seeds} scenarios to {out}")
    return 0


def cmd_run(args) -> int:
    policies = tuple(p.strip() for p in args.policies.split(",") if p.strip())
    cfg = _experiment_config(args, policies)
    result = run_batch(cfg)
    print(format_summary(result.summary))
    for rec in result.failures:
        print(f"seed {rec.seed} failed: {rec.error}", file=sys.stderr)
    print(f"results: {result.paths['results']}")
    return 1 if result.failures else 0


def cmd_grid(args) -> int:
    cfg = _experiment_config(args, ("vdas",))
    result = grid_search_vdas(cfg, _floats(args.mu_grid), _floats(args.gamma_grid))
    print(f"{'mu':>6}{'gamma':>8}{'mean value':>14}{'mean frac':>12}")
    for row in result.table:
        print(f"{row['mu']:>6.2f}{row['gamma']:>8.2f}{row['mean_value']:>14.3f}{row['mean_fraction']:>12.4f}")
    print(f"best mu={result.best[0]} gamma={result.best[1]}  (table: {result.path})")
    return 0


def cmd_solve(args) -> int:
    if args.scenario:
        with open(args.scenario) as fh:
            sc = load_scenario(fh)
        name = Path(args.scenario).stem
    else:
        sc = generate_scenario(_scenario_config(args).with_seed(args.seed_offset))
        name = f"seed-{args.seed_offset:05d}"
    sol = solve_exact(sc, node_limit=args.budget_nodes, time_limit=args.budget_seconds)
    out = output_dir(args.out) / "traces"
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{name}.trace.tsv"
    with open(path, "w") as fh:
        dump_trace(sol.trace, fh)
    status = "certified" if sol.certified else "budget exhausted"
    print(f"objective {sol.objective!r} ({status}, {sol.nodes} nodes, {kernels.BACKEND} kernel)")
    print(f"completed {len(sol.completed)}/{sc.num_jobs} jobs; trace: {path}")
    return 0 if sol.certified else 1


def cmd_extract(args) -> int:
    with open(args.scenario) as fh:
        sc = load_scenario(fh)
    with open(args.trace) as fh:
        trace = load_trace(fh)
    features = FeatureSet(sc.num_types)
    samples = extract_samples(trace, sc, features)
    path = Path(args.output) if args.output else output_dir(args.out) / (Path(args.trace).stem + ".samples.tsv")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        dump_samples(samples, features, fh)
    print(f"{len(samples)} samples -> {path}")
    return 0


def cmd_train(args) -> int:
    tcfg = TrainConfig(
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch_size,
        optimizer=args.optimizer,
        seed=args.train_seed,
        max_seconds=args.max_seconds,
    )
    cfg = PipelineConfig(
        scenario=_scenario_config(args),
        num_scenarios=args.seeds,
        seed_offset=args.seed_offset,
        train=tcfg,
        width_cap=args.width_cap or None,
        budget_nodes=args.budget_nodes,
        budget_seconds=args.budget_seconds,
        out_dir=args.out,
    )
    try:
        result = train_pipeline(cfg)
    except PipelineError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    print(f"{result.num_samples} training samples, {result.num_heldout} held out")
    print(f"held-out accuracy {result.heldout_accuracy:.4f}; model: {result.model_path}")
    return 0


def cmd_study(args) -> int:
    base = _scenario_config(args)
    profiles = {}
    if args.kind in ("tiers", "all"):
        profiles.update(tier_profiles(base.num_types))
    if args.kind in ("specialist", "all"):
        profiles.update(specialist_profiles(base.num_types, copies=args.copies))
    policies = ("vdas", "ranking") if args.model else ("vdas", "ranking-density")
    cfg = _experiment_config(args, policies)
    result = specialization_study(cfg, profiles, psi=args.psi)
    print(format_study(result))
    print(f"table: {result.path}  chart: {result.chart}")
    return 0


def cmd_report(args) -> int:
    table, chart = report(args.results, args.out)
    print(table)
    print(f"chart: {chart}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="schedlab", description=__doc__.splitlines()[0])
    parser.add_argument("--out", help="output directory (default $SCHEDLAB_OUTPUT or ./schedlab-out)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write random scenarios to files")
    _add_scenario_args(p)
    _add_seed_args(p)
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("run", help="run policies over seeds, optionally against the optimum")
    _add_scenario_args(p)
    _add_seed_args(p)
    _add_vdas_args(p)
    _add_budget_args(p)
    p.add_argument("--policies", default="vdas", help=f"comma-separated subset of {','.join(POLICIES)}")
    p.add_argument("--model", help="trained comparator for the 'ranking' policy")
    p.add_argument("--no-oracle", action="store_true", help="skip the exact solver")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("grid", help="grid search over VDaS mu and gamma")
    _add_scenario_args(p)
    _add_seed_args(p, default=50)
    _add_vdas_args(p)
    _add_budget_args(p)
    p.add_argument("--mu-grid", default=",".join(map(str, MU_GRID)))
    p.add_argument("--gamma-grid", default=",".join(map(str, GAMMA_GRID)))
    p.add_argument("--no-oracle", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(fn=cmd_grid)

    p = sub.add_parser("solve", help="solve one scenario exactly and export its trace")
    _add_scenario_args(p)
    _add_budget_args(p)
    p.add_argument("--scenario", help="scenario file (default: generate from --seed-offset)")
    p.add_argument("--seed-offset", type=int, default=0, help="seed to generate when no file is given")
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("extract", help="training samples from a scenario and its optimal trace")
    p.add_argument("--scenario", required=True)
    p.add_argument("--trace", required=True)
    p.add_argument("-o", "--output", help="sample file path")
    p.set_defaults(fn=cmd_extract)

    p = sub.add_parser("train", help="generate, solve, extract and train a comparator")
    _add_scenario_args(p)
    _add_seed_args(p, default=300)
    _add_budget_args(p)
    p.add_argument("--epochs", type=int, default=40)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--optimizer", choices=("momentum", "adam"), default="momentum")
    p.add_argument("--width-cap", type=int, default=512, help="cap on hidden width (0 = uncapped)")
    p.add_argument("--train-seed", type=int, default=0)
    p.add_argument("--max-seconds", type=float, default=None)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("study", help="server efficiency and specialization studies")
    _add_scenario_args(p)
    _add_seed_args(p, default=50)
    _add_vdas_args(p)
    p.add_argument("--kind", choices=("tiers", "specialist", "all"), default="all")
    p.add_argument("--model", help="trained comparator (default: density comparator)")
    p.add_argument("--psi", type=float, default=1.0, help="fixed job preference")
    p.add_argument("--copies", type=int, default=1, help="specialists per job type")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(fn=cmd_study, scale="medium", no_oracle=True, budget_nodes=0, budget_seconds=0.0)

    p = sub.add_parser("report", help="summary table and chart from a results CSV")
    p.add_argument("results")
    p.set_defaults(fn=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigFault, ValueError, FileNotFoundError) as exc:
        print(f"schedlab {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

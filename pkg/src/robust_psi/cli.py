"""Command-line front end.

Subcommands: ``run``, ``sweep``, ``bound``, ``gen`` and ``ingest-check``.
Exit codes are the machine contract; human-readable text goes to stderr
or is prefixed with ``#`` when written to stdout.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .core import (
    DomainError,
    asymptotic_complexity,
    init_samples_n0,
    tau_threshold,
    theoretical_sample_bound,
)
from .config import ConfigError, load_config, render_config
from .environment import IngestionError, load_empirical, random_gaussian_instance, true_medians
from .evaluation import ALGORITHMS, ExperimentReport, evaluate, run_experiment
from .pareto import pareto_front, subopt_gaps
from .rpsi import RpsiConfig, run

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FAIL = 2
EXIT_PARTIAL = 3

SEED_ENV = "ROBUST_PSI_SEED"


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV}={env!r} is not an integer") from None
    return 0


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def _info(args, *lines: str) -> None:
    if not args.quiet:
        for line in lines:
            print(line, file=sys.stderr)


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    env = cfg.build_environment()
    seed = _seed(args)
    predicted, trace = run(RpsiConfig(cfg.params, cfg.max_total_samples), env, seed, record_estimates=False)
    row = evaluate("rpsi", cfg.params.epsilon, seed, predicted, trace.total_samples, trace.terminated_via, env, cfg.params)
    csv_text = ExperimentReport(runs=[row]).runs_csv()
    if args.out:
        Path(args.out).write_text(csv_text)
    else:
        sys.stdout.write(csv_text)
    if not args.quiet:
        front = pareto_front(true_medians(env))
        print(f"# P        = {sorted(predicted)}")
        print(f"# P*       = {front}")
        print(f"# samples  = {trace.total_samples}")
        print(f"# stopped  = {trace.terminated_via}")
        print(f"# result   = {'PASS' if row.success else 'FAIL'}")
    return EXIT_OK if row.success else EXIT_FAIL


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    algorithms = tuple(args.algorithms) if args.algorithms else None
    spec = cfg.sweep_spec(algorithms)
    jobs = args.jobs or os.cpu_count() or 1
    report = run_experiment(spec, jobs=jobs)
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "runs.csv").write_text(report.runs_csv())
    (out_dir / "aggregate.csv").write_text(report.aggregate_csv())
    print(report.table())
    _info(args, f"wrote {out_dir / 'runs.csv'} and {out_dir / 'aggregate.csv'}")
    for err in report.errors:
        print(f"error: {err}", file=sys.stderr)
    return EXIT_PARTIAL if report.errors else EXIT_OK


def cmd_bound(args) -> int:
    cfg = load_config(args.config)
    params = cfg.params
    if args.gaps is not None:
        gaps = [float(g) for g in args.gaps.split(",") if g.strip()]
        k = len(gaps)
        m = args.objectives or cfg.environment.m
    else:
        env = cfg.build_environment()
        gaps = list(subopt_gaps(true_medians(env)))
        k, m = env.n_arms, env.n_objectives
    if not params.alpha > 0:
        raise ConfigError("[params].alpha: the sample bound needs alpha > 0")
    bound = theoretical_sample_bound(params, gaps, k, m)
    tau_a = tau_threshold(params, params.alpha)
    print(f"K                = {k}")
    print(f"M                = {m}")
    print(f"n0               = {init_samples_n0(params, k, m)}")
    print(f"D                = {params.bias!r}")
    print(f"beta             = {params.beta!r}")
    print(f"tau(alpha)       = {tau_a}")
    print(f"gap_free bound   = {bound.gap_free}")
    print(f"gap_dep bound    = {bound.gap_dependent}")
    h = params.h_eps
    print(
        "# asymptotic     = O( 1/(1/2 - h_eps)^2 * K/alpha^2 * log(M K / (alpha delta~)) ) "
        f"with h_eps={h:.6g}, K={k}, M={m}, alpha={params.alpha:g}, delta~={params.delta_tilde:.6g}"
    )
    print(f"# leading term   = {asymptotic_complexity(params, k, m):.6g}")
    assert bound.gap_dependent <= bound.gap_free
    return EXIT_OK


def cmd_gen(args) -> int:
    seed = _seed(args)
    env = random_gaussian_instance(args.arms, args.objectives, args.low, args.high, args.sigma, seed)
    means = [[float(v) for v in row] for row in true_medians(env)]
    doc = {
        "params": {
            "epsilon": 0.0,
            "delta": 0.1,
            "alpha": 0.1,
            "t_bar": 0.49,
            "sigma": args.sigma,
            "adversary_class": "prescient",
        },
        "environment": {"kind": "gaussian", "sigma": args.sigma, "means": means},
        "attack": {"strategy": "offset", "offset_optimal": -1.0, "offset_suboptimal": 1.0},
        "sweep": {
            "epsilons": [0.0, 0.05, 0.1, 0.2, 0.3, 0.4],
            "replications": 10,
            "base_seed": seed,
            "algorithms": list(ALGORITHMS),
        },
    }
    text = f"# K={args.arms} M={args.objectives} means ~ U[{args.low}, {args.high}], seed={seed}\n" + render_config(doc)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_ingest_check(args) -> int:
    env = load_empirical(args.dataset, normalize=args.normalize, delimiter=args.delimiter)
    medians = true_medians(env)
    print(f"arms       = {env.n_arms}")
    print(f"objectives = {env.n_objectives}")
    for i, (label, arm) in enumerate(zip(env.labels, env.arms)):
        med = ", ".join(f"{v:.6g}" for v in medians[i])
        print(f"# arm {i} ({label}): {arm.points.shape[0]} points, medians [{med}]")
    print(f"# Pareto set: {[env.labels[i] for i in pareto_front(medians)]}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_u64, default=None, help=f"unsigned 64-bit seed (fallback: ${SEED_ENV}, then 0)")
    common.add_argument("--out", default=None, help="output file (run, gen) or directory (sweep)")
    common.add_argument("--jobs", type=int, default=None, help="worker processes for sweep (default: all cores)")
    common.add_argument("--quiet", action="store_true", help="suppress human-readable output")

    parser = argparse.ArgumentParser(prog="robust-psi", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="single R-PSI run on the configured instance")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", parents=[common], help="epsilon sweep with replications")
    p.add_argument("config")
    p.add_argument("--algorithms", nargs="+", choices=ALGORITHMS, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bound", parents=[common], help="theoretical sample complexity bounds")
    p.add_argument("config")
    p.add_argument("--gaps", default=None, help="comma-separated suboptimality gaps, one per arm")
    p.add_argument("--objectives", type=int, default=None, help="M to use with --gaps")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("gen", parents=[common], help="emit a random Gaussian instance config")
    p.add_argument("--arms", "-K", type=int, default=10)
    p.add_argument("--objectives", "-M", type=int, default=2)
    p.add_argument("--low", type=float, default=0.0)
    p.add_argument("--high", type=float, default=10.0)
    p.add_argument("--sigma", type=float, default=0.1)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("ingest-check", parents=[common], help="validate a dataset file")
    p.add_argument("dataset")
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--delimiter", default=",")
    p.set_defaults(func=cmd_ingest_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DomainError, IngestionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

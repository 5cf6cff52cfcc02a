"""Command line front end.

Three subcommands share one calling convention::

    longfuse fuse     --config analysis.yaml [--seed N] [--out report.txt]
    longfuse simulate --config study.yaml    [--seed N] [--threads K] [--out ...]
    longfuse pathway  --config scenario.yaml [--seed N] [--out ...]

``fuse`` runs one analysis of a concrete CSV pair, ``simulate`` runs a
repeated-sampling study (or a pathway Monte Carlo), ``pathway`` evaluates
a structural scenario in closed form, optionally checking it by
simulation.  ``--seed`` overrides the config's seed; one of the two must
be present whenever the run draws random numbers.  Reports go to stdout
unless ``--out`` names a file; timing goes to stderr so reports stay
byte-identical across runs.

Exit codes: 0 success, 2 config or schema problem, 3 data problem,
4 estimation failure.
"""

from __future__ import annotations

import argparse
import sys
import time

from . import __version__
from .config import FuseConfig, PathwayConfig, SimulateConfig, parse_config
from .dataset import concatenate, filter_rows, validate_for_fusion
from .effects import resolve_outcome
from .errors import DataError, EstimationError, SchemaError
from .imputation import default_specs, fit
from .io import read_table_csv
from .pathways import analyze_pathway
from .replication import (
    CombiningRule,
    bootstrap,
    combine,
    imputation_estimates,
    jackknife,
    pool,
)
from .report import fuse_report, pathway_report, simulate_report
from .rng import child, seed_sequence
from .simlab import run_study, simulate_pathway

__all__ = ["main"]


def _run_fuse(cfg: FuseConfig, seed: int, threads: int) -> str:
    del threads  # replication of a single analysis runs serially
    outcomes = read_table_csv(cfg.outcomes_path)
    intervention = read_table_csv(cfg.intervention_path)
    data = concatenate(outcomes, intervention, cfg.schema)
    for condition in cfg.filters:
        data = filter_rows(data, condition)
    diagnostics = validate_for_fusion(data)
    outcome = resolve_outcome(data, cfg.outcome)
    specs = cfg.conditionals if cfg.conditionals is not None else default_specs(data)
    root = seed_sequence(seed)

    plan = cfg.methods
    pooled = {}
    rule_reports = []
    if plan.pooled_m:
        model = fit(data, specs)
        ests = imputation_estimates(data, model, plan.pooled_m, child(root, 0), outcome)
        ratio = plan.size_ratio
        if ratio is None:
            ratio = data.n_intervention / data.n_outcomes
        pooled = {p: pool(ests, p) for p in ("intercept", "effect")}
        for rule in CombiningRule:
            for parameter in ("intercept", "effect"):
                rule_reports.append(
                    combine(pooled[parameter], rule, size_ratio=ratio, gamma=cfg.gamma)
                )
    replications = []
    for i, (groups, m) in enumerate(plan.jackknife):
        result = jackknife(data, specs, groups, m, child(root, 1 + i), outcome)
        replications.append((f"jackknife_G{groups}_m{m}", result))
    offset = 1 + len(plan.jackknife)
    for j, (resamples, m) in enumerate(plan.bootstrap):
        result = bootstrap(data, specs, resamples, m, child(root, offset + j), outcome)
        replications.append((f"bootstrap_B{resamples}_m{m}", result))

    return fuse_report(
        version=__version__,
        seed=seed,
        gamma=cfg.gamma,
        data=data,
        outcome=outcome,
        diagnostics=diagnostics,
        rule_reports=rule_reports,
        pooled=pooled,
        replications=replications,
    )


def _run_pathway(cfg: PathwayConfig, seed: int | None, threads: int) -> str:
    del threads
    analysis = analyze_pathway(cfg.params)
    monte_carlo = None
    if cfg.mc_n is not None:
        monte_carlo = simulate_pathway(cfg.params, cfg.mc_n, seed, cfg.treat_prob)
    return pathway_report(
        version=__version__,
        seed=seed,
        params=cfg.params,
        analysis=analysis,
        monte_carlo=monte_carlo,
    )


def _run_simulate(cfg: SimulateConfig, seed: int, threads: int) -> str:
    if cfg.pathway is not None:
        return _run_pathway(cfg.pathway, seed, threads)
    result = run_study(cfg.study, seed, threads=threads)
    print(
        f"{result.scenario}: {cfg.study.replications} replications, "
        f"{result.n_failed} failed, {result.wall_seconds:.1f}s",
        file=sys.stderr,
    )
    return simulate_report(version=__version__, seed=seed, spec=cfg.study, result=result)


_RUNNERS = {"fuse": _run_fuse, "simulate": _run_simulate, "pathway": _run_pathway}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="longfuse",
        description="Long-term treatment effects from fused short- and long-run data.",
    )
    parser.add_argument("--version", action="version", version=f"longfuse {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "fuse": "analyze one intervention/outcomes CSV pair",
        "simulate": "run a repeated-sampling study of a built-in scenario",
        "pathway": "evaluate a structural pathway scenario in closed form",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument(
            "--threads",
            type=int,
            default=1,
            help="worker processes for simulate studies (default 1)",
        )
        p.add_argument("--out", help="write the report here instead of stdout")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config, expected_mode=args.command)
        seed = args.seed if args.seed is not None else cfg.seed
        deterministic = args.command == "pathway" and cfg.mc_n is None
        if seed is None and not deterministic:
            raise SchemaError("a seed is required: set 'seed' in the config or pass --seed")
        if args.threads < 1:
            raise SchemaError("--threads must be at least 1")
        start = time.perf_counter()
        text = _RUNNERS[args.command](cfg, seed, args.threads)
        if args.out:
            try:
                with open(args.out, "w", encoding="utf-8") as handle:
                    handle.write(text)
            except OSError as exc:
                raise DataError(f"cannot write {args.out}: {exc}") from exc
        else:
            sys.stdout.write(text)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except EstimationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    print(f"{args.command} finished in {time.perf_counter() - start:.2f}s", file=sys.stderr)
    return 0

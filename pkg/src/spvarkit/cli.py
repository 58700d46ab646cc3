"""Command-line interface."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .bench import (
    BenchConfig,
    OracleConfig,
    autotune_elite,
    biasrange_trend,
    check_report,
    component_histogram,
    correlation_vs_distance,
    fixedcount_vs_biasrange,
    rows_to_csv,
    run_benchmark,
    sweep_thresholds,
)
from .embedding import (
    EmbeddedParams,
    Embedding,
    HardwareGraph,
    spvar_logical,
    spvar_physical,
    validate_embedding,
)
from .formats import dumps, encode_number, load_problem, problem_to_json, sampleset_to_json, save_problem, sha256_of
from .generators import ProblemSetSpec, biasrange_series, coefficient_set
from .ispvar import IspvarParams, ispvar
from .model import IsingProblem
from .samplers import SamplerConfig, derive_seed, postprocess_local_search, sample_multigauge, solve_by_components
from .spvar import SpvarParams, spvar


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _emit(doc, path: str | None) -> None:
    text = dumps(doc)
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _write(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)


def _sampler_args(
    p: argparse.ArgumentParser,
    reads: int = 2500,
    sweeps: int = 1000,
    beta_range: tuple[float, float] = (0.1, 5.0),
    beta_scale: str = "max-coefficient",
) -> None:
    g = p.add_argument_group("sampler")
    g.add_argument("--sampler", default="simulated-annealing",
                   help="simulated-annealing, tabu-1opt, exact or external-file")
    g.add_argument("--reads", type=int, default=reads)
    g.add_argument("--sweeps", type=int, default=sweeps)
    g.add_argument("--beta-range", type=_floats, default=beta_range)
    g.add_argument("--beta-scale", choices=("max-coefficient", "none"), default=beta_scale,
                   help="divide the beta range by the largest coefficient, or use it as given")
    g.add_argument("--gauges", type=int, default=5)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--sample-file", help="Sample JSON for the external-file sampler")


def _sampler_config(args) -> SamplerConfig:
    return SamplerConfig(
        kind=args.sampler, reads=args.reads, sweeps=args.sweeps, beta_range=tuple(args.beta_range),
        scale_beta=args.beta_scale == "max-coefficient", seed=args.seed, path=args.sample_file,
    )


def _set_args(p: argparse.ArgumentParser, count: int = 10) -> None:
    g = p.add_argument_group("problem set")
    g.add_argument("--problems", help="directory of Problem JSON files")
    g.add_argument("--chimera", type=_ints, default=(4, 4, 4), help="m,n,t")
    g.add_argument("--edges", help="edge-list file instead of a Chimera graph")
    g.add_argument("--couplers", default="U5")
    g.add_argument("--biases", default="U5")
    g.add_argument("--count", type=int, default=count)
    g.add_argument("--set-seed", type=int, default=0, help="base seed of the generated set")
    g.add_argument("--dead-fraction", type=float, default=0.0)


def _set_spec(args) -> ProblemSetSpec:
    return ProblemSetSpec(
        coefficient_set(args.couplers), coefficient_set(args.biases), args.count, args.set_seed,
        None if args.edges else tuple(args.chimera), args.edges, args.dead_fraction,
    )


def _problems(args) -> list[tuple[str, IsingProblem]]:
    if args.problems:
        paths = sorted(p for p in Path(args.problems).glob("*.json") if p.name != "manifest.json")
        return [(p.stem, load_problem(p)) for p in paths]
    spec = _set_spec(args)
    graph = spec.graph()
    return [(f"instance-{i:04d}", spec.instance(i, graph)) for i in range(spec.count)]


def _ispvar_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("iteration")
    g.add_argument("--steps", type=int, default=4)
    g.add_argument("--elite", type=_floats, default=(0.3, 0.2, 0.15, 0.1))
    g.add_argument("--fixing", type=_floats, default=(1.0, 1.0, 1.0, 1.0))
    g.add_argument("--corr-threshold", type=float, default=1.0)
    g.add_argument("--corr-elite", type=float, default=0.4)
    g.add_argument("--preprocess", choices=("on", "off"), default="on")
    g.add_argument("--correlation", choices=("on", "off"), default="on")
    g.add_argument("--zero-bias", choices=("auto", "on", "off"), default="auto")
    g.add_argument("--order", choices=("auto", "spvar-first", "preprocess-first"), default="auto",
                   help="step order; auto runs pre-processing first only for embedded problems")


def _per_step(values: tuple[float, ...], steps: int, name: str) -> tuple[float, ...]:
    if len(values) == 1:
        return values * steps
    if len(values) != steps:
        raise SystemExit(f"--{name} needs 1 or {steps} values")
    return values


def _ispvar_params(args, sample_size: int) -> IspvarParams:
    return IspvarParams(
        num_steps=args.steps,
        sample_size=sample_size,
        num_gauges=args.gauges,
        elite_thresholds=_per_step(args.elite, args.steps, "elite"),
        fixing_thresholds=_per_step(args.fixing, args.steps, "fixing"),
        correlation_threshold=args.corr_threshold,
        correlation_elite_threshold=args.corr_elite,
        enable_preprocess=args.preprocess == "on",
        enable_correlation_fix=args.correlation == "on",
        zero_bias_mode=args.zero_bias,
        preprocess_first=args.order == "preprocess-first"
        or (args.order == "auto" and getattr(args, "embedding", None) is not None),
    )


def _assignment_doc(assignment) -> dict:
    return {
        "values": {str(v): s for v, s in sorted(assignment.values.items())},
        "provenance": {str(v): t for v, t in sorted(assignment.provenance.items())},
        "offset": encode_number(assignment.offset),
    }


def cmd_gen(args) -> int:
    spec = _set_spec(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    graph = spec.graph()
    files = []
    for i in range(spec.count):
        problem = spec.instance(i, graph)
        name = f"instance-{i:04d}.json"
        save_problem(problem, out / name)
        files.append({"file": name, "seed": spec.seed(i), "sha256": sha256_of(problem_to_json(problem))})
    (out / "manifest.json").write_text(dumps({"spec": spec.as_dict(), "instances": files}))
    return 0


def cmd_sample(args) -> int:
    problem = load_problem(args.problem)
    config = _sampler_config(args)
    if args.components:
        drawn = solve_by_components(problem, config, num_gauges=args.gauges)
    else:
        drawn = sample_multigauge(problem, config, args.gauges)
    if args.postprocess:
        drawn = postprocess_local_search(problem, drawn)
    _emit(sampleset_to_json(drawn, problem), args.out)
    return 0


def cmd_spvar(args) -> int:
    problem = load_problem(args.problem)
    params = SpvarParams(args.reads, args.fixing, args.elite, args.gauges)
    out = spvar(problem, _sampler_config(args), params)
    doc = {
        "params": asdict(params),
        "sampler": asdict(_sampler_config(args)),
        "assignment": _assignment_doc(out.assignment),
        "elite_size": out.elite_size,
        "num_fixed": out.num_fixed,
        "reduced": problem_to_json(out.reduced),
    }
    _emit(doc, args.out)
    return 0


def cmd_ispvar(args) -> int:
    problem = load_problem(args.problem)
    config = _sampler_config(args)
    params = _ispvar_params(args, args.reads)
    doc: dict = {"params": asdict(params), "sampler": asdict(config)}
    if args.embedding:
        if not args.hardware:
            raise SystemExit("--embedding needs --hardware")
        hardware = HardwareGraph.from_json(json.loads(Path(args.hardware).read_text()))
        emb = Embedding.from_json(json.loads(Path(args.embedding).read_text()))
        issues = validate_embedding(emb, hardware, problem.J)
        if issues:
            print("\n".join(issues), file=sys.stderr)
            return 1
        embedded = EmbeddedParams(chain_strength=args.chain_strength)
        if args.space == "physical":
            res = spvar_physical(problem, emb, hardware, config, params, embedded)
            doc.update(
                space="physical",
                reports=[r.as_dict() for r in res.reports],
                physical_assignment=_assignment_doc(res.physical_assignment),
                assignment=_assignment_doc(res.logical_assignment),
                reduced=problem_to_json(res.reduced_logical),
            )
            _emit(doc, args.report)
            return 0
        out = spvar_logical(problem, emb, hardware, config, params, embedded)
        doc["space"] = "logical"
    else:
        out = ispvar(problem, config, params)
    doc.update(
        reports=[r.as_dict() for r in out.reports],
        assignment=_assignment_doc(out.assignment),
        num_fixed=out.num_fixed,
        reduced=problem_to_json(out.reduced),
    )
    _emit(doc, args.report)
    return 0


def cmd_bench(args) -> int:
    spec = None if args.problems else _set_spec(args)
    method = None if args.no_method else _ispvar_params(args, args.step_reads)
    config = BenchConfig(
        problems=spec,
        problem_dir=args.problems,
        sampler=_sampler_config(args),
        baseline_gauges=args.gauges,
        method=method,
        final_reads=args.final_reads,
        final_reads_zero_bias=args.final_reads_zero_bias,
        final_gauges=args.gauges,
        oracle=OracleConfig(args.oracle_restarts, args.exact_cap),
        check_fixing=not args.no_fixing_check,
        workers=args.workers,
    )
    report = run_benchmark(config)
    _emit(report.as_dict(), args.out)
    _write(report.to_csv(), args.csv)
    issues = check_report(report, args.reads)
    for msg in issues:
        print(msg, file=sys.stderr)
    return 1 if issues else 0


def _monotone_issues(grid) -> list[str]:
    issues = []
    fixed = np.asarray(grid.mean_fixed)
    by_f = np.argsort(grid.fixing, kind="stable")
    by_e = np.argsort(grid.elite, kind="stable")
    for a in range(fixed.shape[0]):
        if np.any(np.diff(fixed[a, by_f]) > 1e-9):
            issues.append(f"elite row {grid.elite[a]}: fixed count rises with the fixing threshold")
    # along the elite axis the fixed sets nest only when the fixing threshold is 1
    for b in range(fixed.shape[1]):
        if grid.fixing[b] >= 1.0 and np.any(np.diff(fixed[by_e, b]) > 1e-9):
            issues.append(f"fixing column {grid.fixing[b]}: fixed count rises as the elite threshold grows")
    return issues


def cmd_sweep(args) -> int:
    problems = [p for _, p in _problems(args)]
    oracle = OracleConfig(args.oracle_restarts, args.exact_cap) if args.success else None
    grid = sweep_thresholds(problems, _sampler_config(args), args.fixing_list, args.elite_list, args.gauges, oracle=oracle)
    _emit(grid.as_dict(), args.out)
    _write(grid.to_csv(), args.csv)
    issues = _monotone_issues(grid)
    for msg in issues:
        print(msg, file=sys.stderr)
    return 1 if issues else 0


def cmd_autotune(args) -> int:
    problem = load_problem(args.problem)
    res = autotune_elite(problem, _sampler_config(args), tuple(args.band), args.fixing, num_gauges=args.gauges)
    _emit(asdict(res), args.out)
    return 0


def cmd_fig1(args) -> int:
    chimera = tuple(args.chimera)
    series = biasrange_series(args.count, args.n_max, args.set_seed, chimera, coefficient_set(args.couplers))
    params = SpvarParams(args.reads, args.fixing, args.elite, args.gauges)
    rows = fixedcount_vs_biasrange(series, _sampler_config(args), params)
    rho = biasrange_trend(rows) if len(rows) > 1 else None
    _emit({"rows": rows, "spearman": rho}, args.out)
    _write(rows_to_csv(rows, ["n", "mean_fixed", "instances"]), args.csv)
    return 0


def cmd_fig2(args) -> int:
    args.biases = "ZERO"
    config = _sampler_config(args)
    profiles = []
    for k, (name, problem) in enumerate(_problems(args)):
        drawn = sample_multigauge(problem, config.with_seed(derive_seed(args.seed, k)), args.gauges)
        profiles.append(correlation_vs_distance(problem, drawn, absolute=args.absolute))
    merged: dict[int, list[float]] = {}
    for prof in profiles:
        for row in prof:
            merged.setdefault(row["distance"], []).append(row["correlation"])
    rows = [{"distance": d, "correlation": float(np.mean(v)), "instances": len(v)} for d, v in sorted(merged.items())]
    _emit({"rows": rows, "absolute": args.absolute}, args.out)
    _write(rows_to_csv(rows, ["distance", "correlation", "instances"]), args.csv)
    return 0 if rows and rows[0]["correlation"] == 1.0 else 1


def cmd_components(args) -> int:
    problems = [p for _, p in _problems(args)]
    if args.reduce:
        config = _sampler_config(args)
        params = _ispvar_params(args, args.reads)
        problems = [ispvar(p, config.with_seed(derive_seed(args.seed, k)), params).reduced for k, p in enumerate(problems)]
    hist = component_histogram(problems)
    rows = [{"size": s, "count": c} for s, c in hist.items()]
    _emit({"histogram": {str(s): c for s, c in hist.items()}, "free_variables": sum(p.num_variables for p in problems)}, args.out)
    _write(rows_to_csv(rows, ["size", "count"]), args.csv)
    return 0 if sum(s * c for s, c in hist.items()) == sum(p.num_variables for p in problems) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spvarkit", description="Sample-persistence variable reduction")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a random problem set")
    _set_args(p, count=100)
    p.add_argument("--seed", dest="set_seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("sample", help="sample a problem")
    p.add_argument("--problem", required=True)
    _sampler_args(p)
    p.add_argument("--components", action="store_true")
    p.add_argument("--postprocess", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("spvar", help="one round of sample-persistence fixing")
    p.add_argument("--problem", required=True)
    _sampler_args(p)
    p.add_argument("--elite", type=float, default=0.3)
    p.add_argument("--fixing", type=float, default=1.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_spvar)

    p = sub.add_parser("ispvar", help="iterated reduction")
    p.add_argument("--problem", required=True)
    _sampler_args(p)
    _ispvar_args(p)
    p.add_argument("--embedding", help="Embedding JSON; runs the embedded methods")
    p.add_argument("--hardware", help="Hardware graph JSON")
    p.add_argument("--space", choices=("logical", "physical"), default="logical")
    p.add_argument("--chain-strength", type=float, default=1.0)
    p.add_argument("--report", "--out", dest="report")
    p.set_defaults(func=cmd_ispvar)

    p = sub.add_parser("bench", help="baseline versus reduce-then-solve")
    _set_args(p)
    _sampler_args(p, reads=3200, sweeps=200)
    _ispvar_args(p)
    p.add_argument("--step-reads", type=int, default=160)
    p.add_argument("--final-reads", type=int)
    p.add_argument("--final-reads-zero-bias", type=int)
    p.add_argument("--no-method", action="store_true")
    p.add_argument("--no-fixing-check", action="store_true")
    p.add_argument("--oracle-restarts", type=int, default=1000)
    p.add_argument("--exact-cap", type=int, default=22)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sweep", help="fixing/elite threshold grid")
    _set_args(p)
    _sampler_args(p, reads=2500, sweeps=200)
    p.add_argument("--fixing-list", type=_floats, default=(0.9, 0.95, 0.98, 0.99, 1.0))
    p.add_argument("--elite-list", type=_floats, default=(0.1, 0.2, 0.3, 0.5, 1.0))
    p.add_argument("--success", action="store_true", help="also check optimum preservation per cell")
    p.add_argument("--oracle-restarts", type=int, default=1000)
    p.add_argument("--exact-cap", type=int, default=22)
    p.add_argument("--out")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("autotune", help="pick an elite threshold for a target fixed fraction")
    p.add_argument("--problem", required=True)
    _sampler_args(p)
    p.add_argument("--band", type=_floats, default=(0.30, 0.40))
    p.add_argument("--fixing", type=float, default=1.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_autotune)

    p = sub.add_parser("fig1", help="fixed count against bias range")
    # a fixed schedule keeps the final temperature independent of the bias range
    _sampler_args(p, reads=500, sweeps=200, beta_range=(0.01, 5.0), beta_scale="none")
    p.add_argument("--chimera", type=_ints, default=(4, 4, 4))
    p.add_argument("--couplers", default="U5")
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--n-max", type=int, default=10)
    p.add_argument("--set-seed", type=int, default=0)
    p.add_argument("--elite", type=float, default=0.3)
    p.add_argument("--fixing", type=float, default=1.0)
    p.add_argument("--out")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_fig1)

    p = sub.add_parser("fig2", help="correlation against graph distance on zero-bias problems")
    _set_args(p, count=5)
    _sampler_args(p, reads=1000, sweeps=200)
    p.add_argument("--absolute", action="store_true")
    p.add_argument("--out")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_fig2)

    p = sub.add_parser("components", help="component-size histogram of (reduced) problems")
    _set_args(p)
    _sampler_args(p, reads=1000, sweeps=200)
    _ispvar_args(p)
    p.add_argument("--reduce", action="store_true", help="run the iterated reduction first")
    p.add_argument("--out")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_components)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"spvarkit {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Benchmark protocol, fixing-success checks, threshold sweeps, auto-tuning and
the small physical-intuition experiments."""

from __future__ import annotations

import csv
import io
import time
from collections import Counter
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import networkx as nx
import numpy as np
from scipy import stats

from .formats import load_problem
from .generators import ProblemSetSpec
from .ispvar import IspvarParams, ispvar
from .model import FixAssignment, IsingProblem, SampleSet, connected_components, fix_variables
from .samplers import (
    Sampler,
    SamplerConfig,
    derive_seed,
    sample,
    sample_exact,
    sample_multigauge,
    sample_tabu,
    solve_by_components,
)
from .spvar import SpvarParams, elite_size, spvar, spvar_from_sample

__all__ = [
    "OracleConfig",
    "BestKnown",
    "best_known",
    "fixing_success",
    "BenchConfig",
    "InstanceResult",
    "BenchReport",
    "run_benchmark",
    "aggregate",
    "check_report",
    "SweepGrid",
    "sweep_thresholds",
    "AutotuneResult",
    "autotune_elite",
    "component_histogram",
    "fixedcount_vs_biasrange",
    "biasrange_trend",
    "correlation_vs_distance",
    "rows_to_csv",
]

TOL = 1e-9


@dataclass(frozen=True)
class OracleConfig:
    """Reference solver: exhaustive below ``exact_cap`` variables, else multi-start tabu."""

    tabu_restarts: int = 1000
    exact_cap: int = 22
    decompose: bool = True
    seed: int = 0


@dataclass(frozen=True)
class BestKnown:
    energy: float
    witness: dict[int, int]
    proven: bool
    method: str


def _best_single(problem: IsingProblem, oracle: OracleConfig) -> BestKnown:
    if problem.num_variables <= oracle.exact_cap:
        config, e = sample_exact(problem, cap=oracle.exact_cap).first
        return BestKnown(e, config, True, "exact")
    cfg = SamplerConfig(kind="tabu-1opt", reads=oracle.tabu_restarts, seed=oracle.seed)
    config, e = sample_tabu(problem, cfg).first
    return BestKnown(e, config, False, "tabu")


def best_known(problem: IsingProblem, oracle: OracleConfig = OracleConfig()) -> BestKnown:
    """Lowest energy the reference oracle can certify or find, with a witness."""
    if problem.num_variables == 0:
        return BestKnown(float(problem.offset), {}, True, "exact")
    parts = connected_components(problem) if oracle.decompose else [problem]
    if len(parts) == 1:
        return _best_single(problem, oracle)
    witness: dict[int, int] = {}
    total = 0.0
    proven = True
    methods = set()
    for k, part in enumerate(parts):
        sub = replace(oracle, seed=derive_seed(oracle.seed, 0xB0, k)) if k else oracle
        got = _best_single(part, sub)
        witness.update(got.witness)
        total += got.energy
        proven &= got.proven
        methods.add(got.method)
    return BestKnown(total, witness, proven, "+".join(sorted(methods)))


def fixing_success(
    problem: IsingProblem,
    assignment: FixAssignment | dict,
    oracle: OracleConfig = OracleConfig(),
    reference: float | None = None,
) -> bool:
    """Whether the reduced problem still reaches the original optimum.

    Fixing can only raise the minimum, so the original best is taken as the
    lower of its own oracle value, the reduced value and ``reference``.
    """
    values = assignment.values if isinstance(assignment, FixAssignment) else assignment
    if not values:
        return True
    reduced = best_known(fix_variables(problem, values), oracle).energy
    original = best_known(problem, oracle).energy if reference is None else reference
    original = min(original, reduced)
    return reduced <= original + TOL * max(1.0, abs(original))


@dataclass(frozen=True)
class BenchConfig:
    """Protocol settings.

    The baseline draws ``sampler.reads`` solutions over ``baseline_gauges``
    gauges.  The method spends ``method.sample_size`` reads per step (plus one
    prefix draw for zero-bias problems) and ``final_reads`` on the reduced
    problem, solved component by component.
    """

    problems: ProblemSetSpec | None = None
    problem_dir: str | None = None
    sampler: SamplerConfig = SamplerConfig(reads=3200, sweeps=200)
    baseline_gauges: int = 5
    method: IspvarParams | None = IspvarParams(sample_size=160)
    final_reads: int | None = None
    final_reads_zero_bias: int | None = None
    final_gauges: int = 5
    oracle: OracleConfig = OracleConfig()
    check_fixing: bool = True
    workers: int = 1

    def resolved_final_reads(self, zero_bias: bool) -> int:
        steps = self.method.num_steps * self.method.sample_size
        if zero_bias:
            if self.final_reads_zero_bias is not None:
                return self.final_reads_zero_bias
            return 3 * steps
        return self.final_reads if self.final_reads is not None else steps

    def as_dict(self) -> dict:
        return {
            "problems": self.problems.as_dict() if self.problems else None,
            "problem_dir": self.problem_dir,
            "sampler": asdict(self.sampler),
            "baseline_gauges": self.baseline_gauges,
            "method": asdict(self.method) if self.method else None,
            "final_reads": self.final_reads,
            "final_reads_zero_bias": self.final_reads_zero_bias,
            "final_gauges": self.final_gauges,
            "oracle": asdict(self.oracle),
            "check_fixing": self.check_fixing,
        }


@dataclass
class InstanceResult:
    index: int
    name: str
    num_variables: int
    best_known: float | None = None
    proven: bool = False
    baseline_best: float | None = None
    baseline_freq: int = 0
    baseline_reads: int = 0
    method_best: float | None = None
    method_freq: int = 0
    method_reads: int = 0
    steps: list[dict] = field(default_factory=list)
    total_fixed: int = 0
    fixing_success: bool | None = None
    better: bool | None = None
    seeds: dict[str, int] = field(default_factory=dict)
    error: str | None = None
    elapsed: float = 0.0

    def found(self, which: str) -> bool:
        best = getattr(self, f"{which}_best")
        return best is not None and self.best_known is not None and best <= self.best_known + _tol(self.best_known)

    def as_dict(self, timings: bool = False) -> dict:
        d = asdict(self)
        if not timings:
            d.pop("elapsed")
        return d


def _tol(x: float) -> float:
    return TOL * max(1.0, abs(x))


def _count_best(energies: np.ndarray, target: float) -> int:
    return int(np.sum(np.abs(energies - target) <= _tol(target)))


@dataclass
class BenchReport:
    config: dict
    rows: list[InstanceResult]
    aggregates: dict

    def as_dict(self, timings: bool = False) -> dict:
        return {
            "config": self.config,
            "aggregates": self.aggregates,
            "instances": [r.as_dict(timings) for r in self.rows],
        }

    def to_csv(self) -> str:
        columns = [
            "index", "name", "num_variables", "best_known", "proven", "baseline_best", "baseline_freq",
            "method_best", "method_freq", "total_fixed", "fixing_success", "better", "error",
        ]
        return rows_to_csv([{c: getattr(r, c) for c in columns} for r in self.rows], columns)


def _mean(xs) -> float | None:
    xs = list(xs)
    return float(np.mean(xs)) if xs else None


def _percent(flags) -> float | None:
    flags = [bool(f) for f in flags if f is not None]
    return 100.0 * sum(flags) / len(flags) if flags else None


def aggregate(rows: Sequence[InstanceResult], with_method: bool = True) -> dict:
    """Table-style aggregates recomputed from per-instance rows."""
    ok = [r for r in rows if r.error is None]
    out = {"instances": len(rows), "failed": len(rows) - len(ok)}
    which = ("baseline", "method") if with_method else ("baseline",)
    for w in which:
        out[f"{w}_success"] = _percent(r.found(w) for r in ok)
        out[f"{w}_residual"] = _mean(getattr(r, f"{w}_best") - r.best_known for r in ok)
        out[f"{w}_freq"] = _mean(getattr(r, f"{w}_freq") for r in ok if r.found(w))
        out[f"{w}_reads"] = _mean(getattr(r, f"{w}_reads") for r in ok)
    if with_method:
        out["better"] = _percent(r.better for r in ok)
        out["fixing_success"] = _percent(r.fixing_success for r in ok)
        out["mean_fixed"] = _mean(r.total_fixed for r in ok)
    return out


def check_report(report: BenchReport, budget: int) -> list[str]:
    """Invariant violations: aggregate consistency, read accounting, residual sign."""
    issues = []
    with_method = report.config.get("method") is not None
    if aggregate(report.rows, with_method) != report.aggregates:
        issues.append("aggregates differ from recomputation")
    for r in report.rows:
        if r.error is not None:
            continue
        if r.baseline_reads != budget:
            issues.append(f"instance {r.index}: baseline used {r.baseline_reads} reads, budget {budget}")
        if with_method and r.method_reads > budget:
            issues.append(f"instance {r.index}: method used {r.method_reads} reads, budget {budget}")
        for w in ("baseline", "method") if with_method else ("baseline",):
            best = getattr(r, f"{w}_best")
            if best is not None and best < r.best_known - _tol(r.best_known):
                issues.append(f"instance {r.index}: {w} beat the best known energy")
    return issues


def _load_instances(config: BenchConfig) -> list[tuple[str, IsingProblem]]:
    if config.problems is not None:
        graph = config.problems.graph()
        return [(f"instance-{i:04d}", config.problems.instance(i, graph)) for i in range(config.problems.count)]
    if config.problem_dir is not None:
        paths = sorted(p for p in Path(config.problem_dir).glob("*.json") if p.name != "manifest.json")
        return [(p.stem, load_problem(p)) for p in paths]
    raise ValueError("BenchConfig needs problems or problem_dir")


def _run_instance(args) -> InstanceResult:
    config, index, name, problem, sampler = args
    t0 = time.perf_counter()
    row = InstanceResult(index, name, problem.num_variables)
    try:
        seed = config.sampler.seed
        seeds = {k: derive_seed(seed, index, s) for k, s in (("baseline", 1), ("method", 2), ("final", 3), ("oracle", 4))}
        row.seeds = seeds
        base = sample_multigauge(problem, config.sampler.with_seed(seeds["baseline"]), config.baseline_gauges, sampler)
        row.baseline_reads = len(base)
        energies = [float(base.energies[0])]
        final = None
        outcome = None
        if config.method is not None:
            used = [0]

            def draw(p: IsingProblem, reads: int, s: int) -> SampleSet:
                used[0] += reads
                cfg = replace(config.sampler, reads=reads, seed=s)
                return sample_multigauge(p, cfg, config.method.num_gauges, sampler)

            mcfg = config.sampler.with_seed(seeds["method"])
            outcome = ispvar(problem, mcfg, config.method, sampler, draw=draw)
            zero = problem.is_zero_bias and config.method.zero_bias_mode != "off"
            reads = config.resolved_final_reads(zero)
            fcfg = replace(config.sampler, reads=reads, seed=seeds["final"])
            final = solve_by_components(outcome.reduced, fcfg, sampler, config.final_gauges)
            row.method_reads = used[0] + len(final)
            row.steps = [r.as_dict() for r in outcome.reports]
            row.total_fixed = outcome.num_fixed
            energies.append(float(final.energies[0]))
        oracle = replace(config.oracle, seed=seeds["oracle"])
        ref = best_known(problem, oracle)
        row.proven = ref.proven
        row.best_known = min([ref.energy, *energies])
        row.baseline_best = float(base.energies[0])
        row.baseline_freq = _count_best(base.energies, row.best_known)
        if final is not None:
            row.method_best = float(final.energies[0])
            row.method_freq = _count_best(final.energies, row.best_known)
            row.better = row.method_best <= row.baseline_best + _tol(row.baseline_best)
            if config.check_fixing:
                row.fixing_success = fixing_success(problem, outcome.assignment, oracle, row.best_known)
    except Exception as exc:  # recorded per instance, the run goes on
        row.error = f"{type(exc).__name__}: {exc}"
    row.elapsed = time.perf_counter() - t0
    return row


def run_benchmark(config: BenchConfig, sampler: Sampler = sample) -> BenchReport:
    """Baseline versus reduce-then-solve on every instance of the set."""
    instances = _load_instances(config)
    jobs = [(config, i, name, p, sampler) for i, (name, p) in enumerate(instances)]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            rows = list(pool.map(_run_instance, jobs))
    else:
        rows = [_run_instance(job) for job in jobs]
    return BenchReport(config.as_dict(), rows, aggregate(rows, config.method is not None))


@dataclass
class SweepGrid:
    fixing: list[float]
    elite: list[float]
    mean_fixed: list[list[float]]
    success: list[list[float | None]]

    def as_dict(self) -> dict:
        return asdict(self)

    def to_csv(self) -> str:
        rows = []
        for a, e in enumerate(self.elite):
            for b, f in enumerate(self.fixing):
                rows.append({"elite": e, "fixing": f, "mean_fixed": self.mean_fixed[a][b], "success": self.success[a][b]})
        return rows_to_csv(rows, ["elite", "fixing", "mean_fixed", "success"])


def sweep_thresholds(
    problems: Sequence[IsingProblem],
    config: SamplerConfig,
    fixing: Sequence[float],
    elite: Sequence[float],
    num_gauges: int = 5,
    sampler: Sampler = sample,
    oracle: OracleConfig | None = None,
) -> SweepGrid:
    """SPVAR over a grid of thresholds, re-evaluating one sample per instance.

    Rows follow ``elite`` and columns ``fixing``.  With an ``oracle`` every cell
    also reports the percentage of instances whose optimum survived.
    """
    if not fixing or not elite:
        raise ValueError("threshold lists must be nonempty")
    fixed = np.zeros((len(elite), len(fixing)))
    hits = np.zeros((len(elite), len(fixing)))
    for k, problem in enumerate(problems):
        drawn = sample_multigauge(problem, config.with_seed(derive_seed(config.seed, k)), num_gauges, sampler)
        reference = None
        if oracle is not None:
            reference = min(best_known(problem, oracle).energy, float(drawn.energies[0]))
        for a, e in enumerate(elite):
            for b, f in enumerate(fixing):
                out = spvar_from_sample(problem, drawn, f, e)
                fixed[a, b] += out.num_fixed
                if oracle is not None:
                    hits[a, b] += fixing_success(problem, out.assignment, oracle, reference)
    count = max(len(problems), 1)
    success = (100 * hits / count).tolist() if oracle is not None else [[None] * len(fixing) for _ in elite]
    return SweepGrid(list(fixing), list(elite), (fixed / count).tolist(), success)


@dataclass
class AutotuneResult:
    elite_threshold: float
    fraction: float
    in_band: bool
    warning: str | None
    elite_size: int
    trace: list[tuple[float, float]] = field(default_factory=list)


DEFAULT_ELITE_CANDIDATES = (0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)


def autotune_elite(
    problem: IsingProblem,
    config: SamplerConfig,
    band: tuple[float, float] = (0.30, 0.40),
    fixing_threshold: float = 1.0,
    candidates: Sequence[float] = DEFAULT_ELITE_CANDIDATES,
    num_gauges: int = 5,
    min_elite: int = 5,
    sampler: Sampler = sample,
    sampleset: SampleSet | None = None,
) -> AutotuneResult:
    """Raise the elite threshold over one sample until the fixed fraction is in ``band``.

    Candidates are tried in ascending order and those leaving fewer than
    ``min_elite`` solutions are skipped.  When the fraction jumps across the
    band between two candidates, the elite size is bisected between them.
    If nothing lands in the (inclusive) band, the closest threshold tried is
    returned (ties to the larger) together with a warning.
    """
    lo, hi = band
    if not 0 <= lo <= hi <= 1:
        raise ValueError("band must lie inside [0, 1]")
    if problem.num_variables == 0:
        raise ValueError("nothing to tune on an empty problem")
    drawn = sampleset if sampleset is not None else sample_multigauge(problem, config, num_gauges, sampler)
    trace = []
    usable = [e for e in sorted(candidates) if elite_size(len(drawn), e) >= min_elite]
    if not usable:
        raise ValueError(f"sample of {len(drawn)} cannot give an elite of {min_elite}")
    total = len(drawn)

    def fraction(e: float) -> float:
        frac = spvar_from_sample(problem, drawn, fixing_threshold, e).num_fixed / problem.num_variables
        trace.append((e, frac))
        return frac

    prev = None
    for e in usable:
        frac = fraction(e)
        if lo <= frac <= hi:
            return AutotuneResult(e, frac, True, None, elite_size(total, e), trace)
        if frac < lo and prev is not None:
            # bisect on elite size between the last candidate above and this one
            a, b = elite_size(total, prev), elite_size(total, e)
            while b - a > 1:
                mid = (a + b) // 2
                f_mid = fraction(mid / total)
                if lo <= f_mid <= hi:
                    return AutotuneResult(mid / total, f_mid, True, None, mid, trace)
                a, b = (mid, b) if f_mid > hi else (a, mid)
            break
        prev = e if frac > hi else None
    dist = [(max(lo - f, f - hi), -e) for e, f in trace]
    e, frac = trace[dist.index(min(dist))]
    side = "above" if frac > hi else "below"
    warning = f"fixed fraction {frac:.3f} stays {side} the band"
    return AutotuneResult(e, frac, False, warning, elite_size(total, e), trace)


def component_histogram(problems: Sequence[IsingProblem]) -> dict[int, int]:
    """Component size -> number of components, over all given problems."""
    sizes = Counter()
    for p in problems:
        if p.num_variables:
            sizes.update(c.num_variables for c in connected_components(p))
    return dict(sorted(sizes.items()))


def fixedcount_vs_biasrange(
    series: Sequence[ProblemSetSpec],
    config: SamplerConfig,
    params: SpvarParams = SpvarParams(),
    sampler: Sampler = sample,
) -> list[dict]:
    """Mean SPVAR fixed count for each bias range of the series."""
    rows = []
    for spec in series:
        graph = spec.graph()
        counts = []
        for i in range(spec.count):
            problem = spec.instance(i, graph)
            out = spvar(problem, config.with_seed(derive_seed(config.seed, spec.seed(i))), params, sampler)
            counts.append(out.num_fixed)
        n = max(spec.biases.values)
        rows.append({"n": n, "mean_fixed": float(np.mean(counts)) if counts else 0.0, "instances": len(counts)})
    return rows


def biasrange_trend(rows: Sequence[dict]) -> float:
    """Spearman rank correlation between bias range and mean fixed count."""
    rho = stats.spearmanr([r["n"] for r in rows], [r["mean_fixed"] for r in rows]).statistic
    return float(rho)


def correlation_vs_distance(
    problem: IsingProblem,
    sampleset: SampleSet,
    absolute: bool = False,
    references: Sequence[int] | None = None,
) -> list[dict]:
    """Mean spin correlation with a reference variable against graph distance.

    Each solution is flipped so the reference reads +1 (the zero-bias symmetry
    makes this the same as keeping only those solutions).  Mean spins are
    averaged over all variables at the same shortest-path distance, then over
    references.  ``absolute`` averages magnitudes instead of signed values.
    """
    if not problem.is_zero_bias:
        raise ValueError("correlation profile needs a zero-bias problem")
    ss = sampleset.relabel_columns(problem.variables)
    col = problem.index()
    graph = nx.Graph()
    graph.add_nodes_from(problem.variables)
    graph.add_edges_from(problem.J)
    refs = problem.variables if references is None else references
    per_distance: dict[int, list[float]] = {}
    samples = ss.samples.astype(np.float64)
    for r in refs:
        aligned = samples * samples[:, [col[r]]]
        means = aligned.mean(axis=0)
        if absolute:
            means = np.abs(means)
        buckets: dict[int, list[float]] = {}
        for v, d in nx.single_source_shortest_path_length(graph, r).items():
            buckets.setdefault(d, []).append(means[col[v]])
        for d, vals in buckets.items():
            per_distance.setdefault(d, []).append(float(np.mean(vals)))
    return [
        {"distance": d, "correlation": float(np.mean(v)), "references": len(v)} for d, v in sorted(per_distance.items())
    ]


def rows_to_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({c: ("" if r.get(c) is None else r[c]) for c in columns})
    return buf.getvalue()

"""Iterative sample-persistence reduction with persistency pre-processing,
correlation-component fixing, and the zero-bias (Z2-symmetric) pre-step."""

from __future__ import annotations

import time
from collections import deque
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _cc

from .model import FixAssignment, IsingProblem, SampleSet, fix_variables
from .preprocess import PersistencyResult, roof_duality_fix
from .samplers import Sampler, SamplerConfig, derive_seed, sample, sample_multigauge
from .spvar import elite_size, elite_trim, spvar_from_sample

__all__ = [
    "IspvarParams",
    "CorrelationGraph",
    "StepReport",
    "IspvarOutcome",
    "OverlapHistogram",
    "correlation_components",
    "fix_by_correlation",
    "canonicalize_z2",
    "z2_prefix_component",
    "overlap_distribution",
    "ispvar",
]

# Callable producing a sample of the current (reduced) problem.
Draw = Callable[[IsingProblem, int, int], SampleSet]

_STEP_SALT = 0x5173
_Z2_SALT = 0x2202


@dataclass(frozen=True)
class IspvarParams:
    num_steps: int = 4
    sample_size: int = 2500
    num_gauges: int = 5
    elite_thresholds: tuple[float, ...] = (0.3, 0.2, 0.15, 0.1)
    fixing_thresholds: tuple[float, ...] = (1.0, 1.0, 1.0, 1.0)
    correlation_threshold: float = 1.0
    correlation_elite_threshold: float = 0.4
    enable_preprocess: bool = True
    enable_correlation_fix: bool = True
    zero_bias_mode: str = "auto"
    preprocess_first: bool = False
    min_correlation_samples: int = 5

    def __post_init__(self):
        object.__setattr__(self, "elite_thresholds", tuple(float(x) for x in self.elite_thresholds))
        object.__setattr__(self, "fixing_thresholds", tuple(float(x) for x in self.fixing_thresholds))
        if self.num_steps < 1:
            raise ValueError("num_steps must be >= 1")
        if len(self.elite_thresholds) != self.num_steps or len(self.fixing_thresholds) != self.num_steps:
            raise ValueError("need one elite and one fixing threshold per step")
        for x in (*self.elite_thresholds, *self.fixing_thresholds,
                  self.correlation_threshold, self.correlation_elite_threshold):
            if not 0 < x <= 1:
                raise ValueError(f"threshold {x} outside (0, 1]")
        if self.zero_bias_mode not in ("auto", "on", "off"):
            raise ValueError("zero_bias_mode must be auto, on or off")
        if self.sample_size < 1 or self.num_gauges < 1:
            raise ValueError("sample_size and num_gauges must be positive")

    @classmethod
    def constant(cls, num_steps: int, elite: float, fixing: float = 1.0, **kw) -> IspvarParams:
        return cls(num_steps=num_steps, elite_thresholds=(elite,) * num_steps,
                   fixing_thresholds=(fixing,) * num_steps, **kw)


@dataclass(frozen=True)
class CorrelationGraph:
    """Thresholded Pearson-correlation graph over sampled variables."""

    nodes: tuple[int, ...]
    edges: dict[tuple[int, int], float]
    components: list[tuple[int, ...]]

    @property
    def labels(self) -> dict[int, int]:
        return {v: k for k, comp in enumerate(self.components) for v in comp}

    def neighbors(self) -> dict[int, list[tuple[int, float]]]:
        adj: dict[int, list[tuple[int, float]]] = {v: [] for v in self.nodes}
        for (i, j), r in self.edges.items():
            adj[i].append((j, r))
            adj[j].append((i, r))
        return adj

    def restricted(self, keep) -> CorrelationGraph:
        keep = set(keep)
        nodes = tuple(v for v in self.nodes if v in keep)
        edges = {(i, j): r for (i, j), r in self.edges.items() if i in keep and j in keep}
        return CorrelationGraph(nodes, edges, _label(nodes, edges))


def _label(nodes, edges) -> list[tuple[int, ...]]:
    if not nodes:
        return []
    pos = {v: k for k, v in enumerate(nodes)}
    rows = [pos[i] for i, _ in edges]
    cols = [pos[j] for _, j in edges]
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(nodes), len(nodes)))
    _, labels = _cc(graph, directed=False)
    groups: dict[int, list[int]] = {}
    for v, lab in zip(nodes, labels):
        groups.setdefault(int(lab), []).append(v)
    return sorted((tuple(sorted(g)) for g in groups.values()), key=lambda c: c[0])


def _pearson_graph(samples: np.ndarray, variables, threshold: float) -> CorrelationGraph:
    s = samples.astype(np.float64)
    centred = s - s.mean(axis=0)
    var = (centred**2).mean(axis=0)
    active = np.flatnonzero(var > 1e-12)
    edges: dict[tuple[int, int], float] = {}
    if len(active) > 1:
        c = centred[:, active]
        cov = c.T @ c / s.shape[0]
        sd = np.sqrt(var[active])
        r = cov / np.outer(sd, sd)
        ii, jj = np.nonzero(np.triu(np.abs(r) >= threshold - 1e-9, k=1))
        for a, b in zip(ii, jj):
            vi, vj = variables[active[a]], variables[active[b]]
            key = (vi, vj) if vi < vj else (vj, vi)
            edges[key] = float(np.clip(r[a, b], -1.0, 1.0))
    nodes = tuple(sorted(variables))
    return CorrelationGraph(nodes, dict(sorted(edges.items())), _label(nodes, edges))


def correlation_components(
    sampleset: SampleSet, correlation_elite_threshold: float, correlation_threshold: float
) -> CorrelationGraph:
    """Correlation graph of the elite sample; constant variables stay singletons."""
    elite = elite_trim(sampleset, correlation_elite_threshold)
    return _pearson_graph(elite.samples, elite.variables, correlation_threshold)


def _propagate(graph: CorrelationGraph, component, anchors: Mapping[int, int]) -> dict[int, int] | None:
    """Sign-propagate from the anchors; None on a frustrated loop or conflict."""
    adj = graph.neighbors()
    start = next(v for v in component if v in anchors)
    values = {start: anchors[start]}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for w, r in adj[u]:
            want = values[u] if r > 0 else -values[u]
            if w in values:
                if values[w] != want:
                    return None
            else:
                values[w] = want
                queue.append(w)
    if any(values.get(v) != s for v, s in anchors.items() if v in values):
        return None
    return values


def fix_by_correlation(
    graph: CorrelationGraph,
    preproc_fixed: PersistencyResult | Mapping[int, int],
    problem: IsingProblem,
) -> FixAssignment:
    """Extend pre-processor fixes across correlation components.

    ``problem`` is the problem the pre-processor ran on; graph nodes outside
    it (already fixed by other means) are dropped before labelling.  Returns
    only variables that were not already fixed by the pre-processor.
    """
    anchors = dict(preproc_fixed.fixed if isinstance(preproc_fixed, PersistencyResult) else preproc_fixed)
    graph = graph.restricted(set(problem.variables))
    new: dict[int, int] = {}
    for comp in graph.components:
        if len(comp) < 2 or not any(v in anchors for v in comp):
            continue
        values = _propagate(graph, comp, anchors)
        if values is None:
            continue
        new.update({v: s for v, s in values.items() if v not in anchors})
    return FixAssignment.from_values(new, "correlation")


def canonicalize_z2(sampleset: SampleSet, reference: int, problem: IsingProblem) -> SampleSet:
    """Negate every solution with ``reference = -1``; requires all biases zero."""
    if not problem.is_zero_bias:
        raise ValueError("Z2 canonicalisation needs a problem with every bias equal to zero")
    col = sampleset.column(reference)
    flip = np.where(col < 0, -1, 1).astype(np.int8)
    return SampleSet(sampleset.variables, sampleset.samples * flip[:, None], sampleset.energies,
                     dict(sampleset.info, canonical_reference=reference))


def _reference_in(problem: IsingProblem, candidates) -> int:
    return min(candidates, key=lambda v: (-problem.degree(v), v))


def z2_prefix_component(problem: IsingProblem, sampleset: SampleSet, params: IspvarParams) -> FixAssignment:
    """Break the Z2 symmetry by fixing the largest correlation component.

    Correlations are taken over the elite sample joined with its global
    negation, which makes them independent of each solution's orientation.
    The reference is the highest-degree variable of the largest component and
    is fixed to +1; the rest of the component follows the edge signs.
    """
    if not problem.is_zero_bias:
        raise ValueError("zero-bias pre-step needs a problem with every bias equal to zero")
    if problem.num_variables == 0:
        return FixAssignment()
    sampleset = sampleset.relabel_columns(problem.variables)
    elite = elite_trim(sampleset, params.correlation_elite_threshold)
    largest: tuple[int, ...] = ()
    graph = None
    if len(elite) >= params.min_correlation_samples:
        sym = np.concatenate([elite.samples, -elite.samples])
        graph = _pearson_graph(sym, elite.variables, params.correlation_threshold)
        largest = max(graph.components, key=lambda c: (len(c), -c[0]))
    if len(largest) >= 2:
        ref = _reference_in(problem, largest)
        values = _propagate(graph, largest, {ref: 1})
        if values is not None:
            return FixAssignment.from_values(values, "z2-prefix")
        return FixAssignment.from_values({ref: 1}, "z2-prefix")
    return FixAssignment.from_values({_reference_in(problem, problem.variables): 1}, "z2-prefix")


@dataclass(frozen=True)
class OverlapHistogram:
    q: np.ndarray
    counts: np.ndarray
    pairs: int
    bimodality: float

    def as_dict(self) -> dict[float, int]:
        return {float(a): int(b) for a, b in zip(self.q, self.counts)}


def overlap_distribution(sampleset: SampleSet, max_solutions: int = 2000, seed: int = 0) -> OverlapHistogram:
    """Histogram of pairwise overlaps and the sample bimodality coefficient.

    Above ``max_solutions`` a seeded random subset of solutions is used.
    """
    k, n = sampleset.samples.shape
    if k < 2:
        raise ValueError("need at least two solutions")
    s = sampleset.samples.astype(np.int64)
    if k > max_solutions:
        rows = np.sort(np.random.default_rng(seed).choice(k, size=max_solutions, replace=False))
        s = s[rows]
        k = max_solutions
    iu = np.triu_indices(k, 1)
    dots = (s @ s.T)[iu]
    q = dots / max(n, 1)
    values, counts = np.unique(q, return_counts=True)
    bc = float("nan")
    if len(q) > 3 and np.ptp(q) > 0:
        g = stats.skew(q, bias=False)
        kurt = stats.kurtosis(q, bias=False)
        m = len(q)
        bc = float((g**2 + 1) / (kurt + 3 * (m - 1) ** 2 / ((m - 2) * (m - 3))))
    return OverlapHistogram(values, counts, len(q), bc)


@dataclass
class StepReport:
    """Fix counts for one step; ``m`` and ``c`` mirror the usual table split."""

    step: int
    fixed_persistence: int = 0
    fixed_correlation: int = 0
    fixed_z2: int = 0
    fixed_preprocess: int = 0
    remaining: int = 0
    elite_size: int = 0
    elapsed: float = 0.0

    @property
    def m(self) -> int:
        return self.fixed_persistence + self.fixed_correlation + self.fixed_z2

    @property
    def c(self) -> int:
        return self.fixed_preprocess

    @property
    def total(self) -> int:
        return self.m + self.c

    def as_dict(self, timings: bool = False) -> dict:
        d = {
            "step": self.step,
            "m": self.m,
            "c": self.c,
            "persistence": self.fixed_persistence,
            "correlation": self.fixed_correlation,
            "z2_prefix": self.fixed_z2,
            "preprocess": self.fixed_preprocess,
            "remaining": self.remaining,
            "elite_size": self.elite_size,
        }
        if timings:
            d["elapsed"] = self.elapsed
        return d


@dataclass
class IspvarOutcome:
    reduced: IsingProblem
    assignment: FixAssignment
    reports: list[StepReport] = field(default_factory=list)

    def __iter__(self):
        return iter((self.reduced, self.assignment, self.reports))

    @property
    def num_fixed(self) -> int:
        return len(self.assignment)


def _zero_bias(problem: IsingProblem, mode: str) -> bool:
    if mode == "off" or problem.num_variables == 0:
        return False
    if mode == "on":
        if not problem.is_zero_bias:
            raise ValueError("zero_bias_mode='on' needs a problem with every bias equal to zero")
        return True
    return problem.is_zero_bias


def default_draw(config: SamplerConfig, num_gauges: int, sampler: Sampler = sample) -> Draw:
    def draw(problem: IsingProblem, reads: int, seed: int) -> SampleSet:
        return sample_multigauge(problem, replace(config, reads=reads, seed=seed), num_gauges, sampler)

    return draw


class _Tracker:
    def __init__(self, problem: IsingProblem):
        self.problem = problem
        self.assignment = FixAssignment()

    def apply(self, fixes: FixAssignment) -> int:
        if not len(fixes):
            return 0
        reduced = fix_variables(self.problem, fixes)
        fixes = FixAssignment(fixes.values, fixes.provenance, reduced.offset - self.problem.offset)
        self.assignment = self.assignment.merged(fixes)
        self.problem = reduced
        return len(fixes)

    def preprocess(self) -> tuple[int, PersistencyResult]:
        result = roof_duality_fix(self.problem)
        return self.apply(result.as_assignment()), result


def ispvar(
    problem: IsingProblem,
    config: SamplerConfig,
    params: IspvarParams,
    sampler: Sampler = sample,
    draw: Draw | None = None,
) -> IspvarOutcome:
    """Iterated SPVAR.

    An optional step 0 runs the zero-bias pre-fix (when all biases vanish) and
    one roof-duality pass.  Each of the ``num_steps`` steps then runs SPVAR,
    roof duality on the result, and correlation fixing seeded by the
    roof-duality values.  With ``preprocess_first`` each step also starts with
    a roof-duality pass and a final roof-duality-only pass follows the loop.
    Stops early once every variable is fixed.
    """
    draw = draw or default_draw(config, params.num_gauges, sampler)
    track = _Tracker(problem)
    reports: list[StepReport] = []

    zero = _zero_bias(problem, params.zero_bias_mode)
    if zero or params.enable_preprocess:
        t0 = time.perf_counter()
        rep = StepReport(0)
        if zero:
            ss = draw(track.problem, params.sample_size, derive_seed(config.seed, _Z2_SALT))
            rep.fixed_z2 = track.apply(z2_prefix_component(track.problem, ss, params))
        if params.enable_preprocess:
            rep.fixed_preprocess, _ = track.preprocess()
        rep.remaining = track.problem.num_variables
        rep.elapsed = time.perf_counter() - t0
        reports.append(rep)

    for k in range(1, params.num_steps + 1):
        if track.problem.num_variables == 0:
            break
        t0 = time.perf_counter()
        rep = StepReport(k)
        if params.preprocess_first and params.enable_preprocess:
            rep.fixed_preprocess += track.preprocess()[0]
            if track.problem.num_variables == 0:
                rep.elapsed = time.perf_counter() - t0
                reports.append(rep)
                break
        seed = config.seed if k == 1 else derive_seed(config.seed, _STEP_SALT, k)
        ss = draw(track.problem, params.sample_size, seed)
        out = spvar_from_sample(track.problem, ss, params.fixing_thresholds[k - 1], params.elite_thresholds[k - 1])
        rep.elite_size = out.elite_size
        rep.fixed_persistence = track.apply(out.assignment)
        if params.enable_preprocess:
            before = track.problem
            count, rd = track.preprocess()
            rep.fixed_preprocess += count
            if (
                params.enable_correlation_fix
                and rd.fixed
                and elite_size(len(ss), params.correlation_elite_threshold) >= params.min_correlation_samples
            ):
                graph = correlation_components(ss, params.correlation_elite_threshold, params.correlation_threshold)
                rep.fixed_correlation = track.apply(fix_by_correlation(graph, rd, before))
        rep.remaining = track.problem.num_variables
        rep.elapsed = time.perf_counter() - t0
        reports.append(rep)

    if params.preprocess_first and params.enable_preprocess and track.problem.num_variables:
        rep = StepReport(params.num_steps + 1)
        rep.fixed_preprocess, _ = track.preprocess()
        rep.remaining = track.problem.num_variables
        reports.append(rep)

    return IspvarOutcome(track.problem, track.assignment, reports)

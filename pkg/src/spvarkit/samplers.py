"""Classical low-energy samplers standing in for a quantum annealer.

A sampler is any callable ``sampler(problem, config) -> SampleSet``.  The
built-in kinds are looked up by ``config.kind`` through :func:`sample`;
:func:`register_sampler` adds more.
"""

from __future__ import annotations

import json
from collections.abc import Callable
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .model import IsingProblem, SampleSet, apply_gauge, connected_components

__all__ = [
    "SamplerConfig",
    "ExactCapError",
    "derive_seeds",
    "sample",
    "register_sampler",
    "sample_sa",
    "sample_tabu",
    "sample_exact",
    "exact_spectrum",
    "sample_external",
    "sample_multigauge",
    "solve_by_components",
    "postprocess_local_search",
]

Sampler = Callable[[IsingProblem, "SamplerConfig"], SampleSet]


class ExactCapError(ValueError):
    """Problem too large for exhaustive enumeration."""


@dataclass(frozen=True)
class SamplerConfig:
    """Sampler settings.

    ``beta_range`` is divided by the largest coefficient magnitude when
    ``scale_beta`` is set, so the schedule is expressed in units of the
    problem's own scale.  For ``tabu-1opt`` each read is one restart.
    """

    kind: str = "simulated-annealing"
    reads: int = 2500
    sweeps: int = 1000
    beta_range: tuple[float, float] = (0.1, 5.0)
    scale_beta: bool = True
    tenure: int = 10
    budget_factor: int = 20
    exact_cap: int = 26
    seed: int = 0
    path: str | None = None

    def __post_init__(self):
        if self.reads < 1:
            raise ValueError("reads must be >= 1")
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")
        b0, b1 = self.beta_range
        if not 0 < b0 < b1:
            raise ValueError("beta_range must satisfy 0 < initial < final")
        object.__setattr__(self, "beta_range", (float(b0), float(b1)))

    def with_seed(self, seed: int) -> SamplerConfig:
        return replace(self, seed=int(seed))


def derive_seeds(seed: int, count: int, *salt: int) -> np.ndarray:
    """``count`` 32-bit seeds from ``(seed, *salt)``; word k depends only on k."""
    words = np.random.SeedSequence([int(seed), *map(int, salt)]).generate_state(max(count, 1))
    return words[:count].astype(np.int64)


def derive_seed(seed: int, *salt: int) -> int:
    return int(derive_seeds(seed, 1, *salt)[0])


def _empty(problem: IsingProblem, reads: int, info: dict) -> SampleSet:
    return SampleSet.from_array(problem, np.zeros((reads, 0), dtype=np.int8), info)


def sample_sa(problem: IsingProblem, config: SamplerConfig) -> SampleSet:
    """Independent simulated-annealing reads over a geometric beta schedule."""
    info = {"kind": "simulated-annealing", "seed": config.seed, "reads": config.reads}
    if problem.num_variables == 0:
        return _empty(problem, config.reads, info)
    a = problem._arrays
    betas = np.geomspace(*config.beta_range, num=config.sweeps)
    if config.scale_beta:
        peak = float(problem.max_abs_coefficient())
        betas = betas / (peak if peak > 0 else 1.0)
    seeds = derive_seeds(config.seed, config.reads)
    states = _kernels.anneal(a["h"], a["indptr"], a["indices"], a["data"], betas, seeds)
    return SampleSet.from_array(problem, states, info)


def sample_tabu(problem: IsingProblem, config: SamplerConfig) -> SampleSet:
    """Multi-start tabu 1-opt search, one solution per restart."""
    info = {"kind": "tabu-1opt", "seed": config.seed, "reads": config.reads}
    if problem.num_variables == 0:
        return _empty(problem, config.reads, info)
    a = problem._arrays
    seeds = derive_seeds(config.seed, config.reads)
    budget = config.budget_factor * problem.num_variables
    states = _kernels.tabu_search(
        a["h"], a["indptr"], a["indices"], a["data"], config.tenure, budget, seeds
    )
    return SampleSet.from_array(problem, states, info)


def _tolerance(problem: IsingProblem) -> float:
    total = sum(abs(float(x)) for x in problem.coefficients())
    return 1e-9 * max(1.0, total)


def sample_exact(problem: IsingProblem, cap: int = 26, limit: int = 1 << 20) -> SampleSet:
    """All ground states by exhaustive Gray-code enumeration.

    Raises :class:`ExactCapError` above ``cap`` variables, or when more than
    ``limit`` optima would have to be returned.
    """
    n = problem.num_variables
    info = {"kind": "exact", "proven": True}
    if n > cap:
        raise ExactCapError(f"{n} variables exceed the exact-enumeration cap of {cap}")
    if n == 0:
        return _empty(problem, 1, info)
    a = problem._arrays
    args = (a["h"], a["indptr"], a["indices"], a["data"])
    best = _kernels.min_energy_scan(*args)
    # incremental float energies drift; collect generously, then re-evaluate
    slack = 1e-7 * max(1.0, sum(abs(float(x)) for x in problem.coefficients()))
    found, count = _kernels.collect_below(*args, best + slack, limit)
    if count > limit:
        raise ExactCapError(f"{count} near-optimal states exceed the limit of {limit}")
    energies = problem.energies(found)
    keep = energies <= energies.min() + _tolerance(problem)
    return SampleSet.from_array(problem, found[keep], info)


def exact_spectrum(problem: IsingProblem, count: int, cap: int = 22) -> SampleSet:
    """The ``count`` lowest-energy configurations (ties broken by enumeration order)."""
    n = problem.num_variables
    if n > cap:
        raise ExactCapError(f"{n} variables exceed the spectrum cap of {cap}")
    codes = np.arange(1 << n, dtype=np.int64)
    states = np.where((codes[:, None] >> np.arange(n)) & 1, 1, -1).astype(np.int8)
    energies = problem.energies(states)
    order = np.argsort(energies, kind="stable")[:count]
    return SampleSet(problem.variables, states[order], energies[order], {"kind": "exact-spectrum"})


def _sample_exact_reads(problem: IsingProblem, config: SamplerConfig) -> SampleSet:
    # Contract form: cycle the optima to fill exactly ``reads`` rows.
    optima = sample_exact(problem, cap=config.exact_cap)
    rows = np.resize(np.arange(len(optima)), config.reads)
    info = {"kind": "exact", "proven": True, "reads": config.reads, "num_optima": len(optima)}
    return SampleSet(problem.variables, optima.samples[rows], optima.energies[rows], info)


def problem_sha(problem: IsingProblem) -> str:
    from .formats import problem_to_json, sha256_of

    return sha256_of(problem_to_json(problem))


def sample_external(problem: IsingProblem, config: SamplerConfig) -> SampleSet:
    """Replay a Sample JSON file (``config.path``) against ``problem``."""
    if not config.path:
        raise ValueError("external-file sampler needs config.path")
    from .formats import sampleset_from_json

    with open(config.path) as fh:
        doc = json.load(fh)
    sha = doc.get("problem_sha")
    if sha and sha != problem_sha(problem):
        raise ValueError(f"{config.path} was drawn for a different problem")
    return sampleset_from_json(doc, problem)


_REGISTRY: dict[str, Sampler] = {
    "simulated-annealing": sample_sa,
    "sa": sample_sa,
    "tabu-1opt": sample_tabu,
    "tabu": sample_tabu,
    "exact": _sample_exact_reads,
    "external-file": sample_external,
}


def register_sampler(kind: str, fn: Sampler) -> None:
    _REGISTRY[kind] = fn


def sample(problem: IsingProblem, config: SamplerConfig) -> SampleSet:
    """Dispatch on ``config.kind``."""
    try:
        fn = _REGISTRY[config.kind]
    except KeyError:
        raise ValueError(f"unknown sampler kind {config.kind!r}") from None
    return fn(problem, config)


def sample_multigauge(
    problem: IsingProblem,
    config: SamplerConfig,
    num_gauges: int,
    sampler: Sampler = sample,
) -> SampleSet:
    """Split ``config.reads`` over random gauges, un-gauge and merge.

    Gauge 0 is the identity and runs with ``config.seed``, so a single gauge is
    the plain sampler.  The last gauge absorbs any remainder of the division.
    """
    if num_gauges < 1:
        raise ValueError("num_gauges must be >= 1")
    base = config.reads // num_gauges
    shares = [base] * num_gauges
    shares[-1] += config.reads - base * num_gauges
    parts = []
    for g, share in enumerate(shares):
        if share == 0:
            continue
        if g == 0:
            gauge = np.ones(problem.num_variables, dtype=np.int8)
            sub = replace(config, reads=share)
        else:
            rng = np.random.default_rng([config.seed, g, 0x6A])
            gauge = rng.choice(np.array([-1, 1], dtype=np.int8), size=problem.num_variables)
            sub = replace(config, reads=share, seed=derive_seed(config.seed, g))
        gmap = dict(zip(problem.variables, (int(x) for x in gauge)))
        drawn = sampler(apply_gauge(problem, gmap), sub).relabel_columns(problem.variables)
        parts.append(drawn.samples * gauge[None, :])
    states = np.concatenate(parts) if parts else np.zeros((0, problem.num_variables), np.int8)
    info = {"kind": config.kind, "seed": config.seed, "reads": config.reads, "num_gauges": num_gauges}
    return SampleSet.from_array(problem, states, info)


def solve_by_components(
    problem: IsingProblem,
    config: SamplerConfig,
    sampler: Sampler = sample,
    num_gauges: int = 1,
) -> SampleSet:
    """Sample each connected component separately and compose by rank.

    Row ``r`` of the result joins the ``r``-th lowest solution of every
    component, so row 0 is the sum of the component bests.
    """
    parts = connected_components(problem)
    if len(parts) <= 1:
        return sample_multigauge(problem, config, num_gauges, sampler)
    drawn = []
    for k, part in enumerate(parts):
        sub = config if k == 0 else config.with_seed(derive_seed(config.seed, 0xC0, k))
        drawn.append(sample_multigauge(part, sub, num_gauges, sampler))
    rows = min(len(d) for d in drawn)
    columns = {}
    for part, d in zip(parts, drawn):
        for c, v in enumerate(d.variables):
            columns[v] = d.samples[:rows, c]
    states = np.stack([columns[v] for v in problem.variables], axis=1)
    info = {"kind": config.kind, "seed": config.seed, "reads": config.reads, "components": len(parts)}
    return SampleSet.from_array(problem, states, info)


def postprocess_local_search(problem: IsingProblem, sampleset: SampleSet) -> SampleSet:
    """Steepest single-flip descent on every solution."""
    if problem.num_variables == 0 or not len(sampleset):
        return sampleset
    a = problem._arrays
    states = sampleset.relabel_columns(problem.variables).samples
    improved = _kernels.steepest_descent(states, a["h"], a["indptr"], a["indices"], a["data"])
    info = dict(sampleset.info, postprocessed=True)
    return SampleSet.from_array(problem, improved, info)

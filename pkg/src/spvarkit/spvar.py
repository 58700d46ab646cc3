"""Sample-persistence variable reduction (single pass)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .model import FixAssignment, IsingProblem, SampleSet, fix_variables
from .samplers import Sampler, SamplerConfig, sample, sample_multigauge

__all__ = [
    "SpvarParams",
    "SpvarOutcome",
    "elite_trim",
    "variable_means",
    "persistent_values",
    "spvar",
    "spvar_from_sample",
]


@dataclass(frozen=True)
class SpvarParams:
    sample_size: int = 2500
    fixing_threshold: float = 1.0
    elite_threshold: float = 0.3
    num_gauges: int = 5

    def __post_init__(self):
        if self.sample_size < 1:
            raise ValueError("sample_size must be positive")
        for name in ("fixing_threshold", "elite_threshold"):
            x = getattr(self, name)
            if not 0 < x <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {x}")
        if self.num_gauges < 1:
            raise ValueError("num_gauges must be >= 1")


@dataclass(frozen=True)
class SpvarOutcome:
    reduced: IsingProblem
    assignment: FixAssignment
    elite_size: int
    means: dict[int, float] = field(default_factory=dict)
    sampleset: SampleSet | None = None

    @property
    def num_fixed(self) -> int:
        return len(self.assignment)


def elite_size(total: int, elite_threshold: float) -> int:
    # small epsilon keeps 0.3 * 100 at 30 rather than 31
    return max(1, min(total, math.ceil(elite_threshold * total - 1e-9)))


def elite_trim(sampleset: SampleSet, elite_threshold: float) -> SampleSet:
    """Keep the lowest ``ceil(elite_threshold * size)`` solutions (at least one)."""
    if not len(sampleset):
        raise ValueError("cannot trim an empty sample set")
    return sampleset.head(elite_size(len(sampleset), elite_threshold))


def variable_means(sampleset: SampleSet) -> dict[int, float]:
    if not len(sampleset):
        raise ValueError("empty sample set")
    means = sampleset.samples.mean(axis=0, dtype=np.float64)
    return dict(zip(sampleset.variables, (float(m) for m in means)))


def persistent_values(means: dict[int, float], fixing_threshold: float) -> dict[int, int]:
    """Variables whose ``|mean|`` reaches the threshold (inclusive), with their sign."""
    return {v: (1 if m > 0 else -1) for v, m in means.items() if abs(m) >= fixing_threshold - 1e-12}


def spvar_from_sample(
    problem: IsingProblem,
    sampleset: SampleSet,
    fixing_threshold: float,
    elite_threshold: float,
) -> SpvarOutcome:
    """Apply the trim / mean / threshold / fold steps to an existing sample."""
    elite = elite_trim(sampleset, elite_threshold)
    means = variable_means(elite)
    values = persistent_values(means, fixing_threshold)
    reduced = fix_variables(problem, values)
    assignment = FixAssignment.from_values(values, "persistence", reduced.offset - problem.offset)
    return SpvarOutcome(reduced, assignment, len(elite), means, sampleset)


def spvar(
    problem: IsingProblem,
    config: SamplerConfig,
    params: SpvarParams,
    sampler: Sampler = sample,
) -> SpvarOutcome:
    """One round of sample-persistence fixing.

    Draws ``params.sample_size`` reads spread over ``params.num_gauges``
    gauges, merges them, trims once, and fixes every variable whose mean spin
    magnitude reaches ``params.fixing_threshold``.
    """
    drawn = sample_multigauge(problem, replace(config, reads=params.sample_size), params.num_gauges, sampler)
    return spvar_from_sample(problem, drawn, params.fixing_threshold, params.elite_threshold)

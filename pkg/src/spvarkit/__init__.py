"""Sample-persistence variable reduction for Ising and QUBO problems."""

from .ispvar import IspvarOutcome, IspvarParams, ispvar
from .model import (
    FixAssignment,
    IsingProblem,
    QuboProblem,
    SampleSet,
    apply_gauge,
    connected_components,
    energy,
    fix_variables,
    from_qubo,
    scale_to_range,
    to_qubo,
    ungauge,
)
from .preprocess import roof_duality_fix
from .samplers import SamplerConfig, sample, sample_multigauge, solve_by_components
from .spvar import SpvarParams, spvar

__version__ = "0.1.0"

__all__ = [
    "FixAssignment",
    "IsingProblem",
    "IspvarOutcome",
    "IspvarParams",
    "QuboProblem",
    "SampleSet",
    "SamplerConfig",
    "SpvarParams",
    "apply_gauge",
    "connected_components",
    "energy",
    "fix_variables",
    "from_qubo",
    "ispvar",
    "roof_duality_fix",
    "sample",
    "sample_multigauge",
    "scale_to_range",
    "solve_by_components",
    "spvar",
    "to_qubo",
    "ungauge",
]

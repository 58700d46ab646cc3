"""Reproducible random problem sets on Chimera or arbitrary graphs."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embedding import HardwareGraph, chimera_graph
from .model import IsingProblem

__all__ = [
    "CoefficientSet",
    "ProblemSetSpec",
    "NAMED_SETS",
    "coefficient_set",
    "random_ising",
    "biasrange_series",
]


@dataclass(frozen=True)
class CoefficientSet:
    """Integers a coefficient is drawn from, uniformly."""

    values: tuple[int, ...]
    kind: str = "explicit-list"
    zero_excluded: bool = False
    name: str = ""

    def __post_init__(self):
        values = tuple(sorted(set(int(v) for v in self.values)))
        if not values:
            raise ValueError("coefficient set is empty")
        if self.kind not in ("uniform-range", "explicit-list"):
            raise ValueError(f"unknown kind {self.kind!r}")
        object.__setattr__(self, "values", values)

    @classmethod
    def uniform(cls, n: int, name: str = "") -> CoefficientSet:
        """The range ``{-n, ..., n}``."""
        if n < 0:
            raise ValueError("n must be >= 0")
        return cls(tuple(range(-n, n + 1)), "uniform-range", name=name or f"U{n}")

    @property
    def drawable(self) -> tuple[int, ...]:
        return tuple(v for v in self.values if v != 0) if self.zero_excluded else self.values

    def without_zero(self) -> CoefficientSet:
        return CoefficientSet(self.values, self.kind, True, self.name)

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        pool = self.drawable
        if not pool:
            raise ValueError(f"coefficient set {self.name or self.values} has nothing to draw")
        return np.asarray(pool, dtype=np.int64)[rng.integers(0, len(pool), size=size)]


NAMED_SETS: dict[str, CoefficientSet] = {
    "U2": CoefficientSet.uniform(2),
    "U5": CoefficientSet.uniform(5),
    "U10": CoefficientSet.uniform(10),
    "U100": CoefficientSet.uniform(100),
    "S28": CoefficientSet((-28, -19, -13, -8, 8, 13, 19, 28), name="S28"),
    "ZERO": CoefficientSet((0,), name="ZERO"),
}


def coefficient_set(spec: str | CoefficientSet) -> CoefficientSet:
    """Named set (``U5``, ``S28``, ``ZERO``), ``U<n>``, or a comma list such as ``-3,-1,1,3``."""
    if isinstance(spec, CoefficientSet):
        return spec
    key = spec.strip().upper()
    if key in NAMED_SETS:
        return NAMED_SETS[key]
    if key.startswith("U") and key[1:].isdigit():
        return CoefficientSet.uniform(int(key[1:]))
    try:
        return CoefficientSet(tuple(int(x) for x in spec.split(",")), name=spec)
    except ValueError:
        raise ValueError(f"cannot parse coefficient set {spec!r}") from None


def random_ising(
    graph: HardwareGraph,
    coupler_set: CoefficientSet,
    bias_set: CoefficientSet,
    seed: int,
) -> IsingProblem:
    """Independent uniform draws: one coupler per edge (never zero), one bias per vertex."""
    rng = np.random.default_rng(seed)
    vertices = sorted(graph.vertices)
    edges = sorted(graph.edges)
    couplers = coupler_set.without_zero().draw(rng, len(edges))
    biases = bias_set.draw(rng, len(vertices))
    h = {v: int(b) for v, b in zip(vertices, biases)}
    J = {e: int(c) for e, c in zip(edges, couplers)}
    return IsingProblem(h, J, 0, tuple(vertices))


@dataclass(frozen=True)
class ProblemSetSpec:
    couplers: CoefficientSet
    biases: CoefficientSet
    count: int
    base_seed: int = 0
    chimera: tuple[int, int, int] | None = (4, 4, 4)
    edge_file: str | None = None
    dead_fraction: float = 0.0

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("count must be >= 0")
        if (self.chimera is None) == (self.edge_file is None):
            raise ValueError("give exactly one of chimera or edge_file")

    def graph(self) -> HardwareGraph:
        if self.chimera is not None:
            m, n, t = self.chimera
            return chimera_graph(m, n, t, self.dead_fraction, self.base_seed)
        edges = []
        vertices = set()
        for line in Path(self.edge_file).read_text().splitlines():
            parts = line.split("#")[0].split()
            if len(parts) >= 2:
                a, b = int(parts[0]), int(parts[1])
                edges.append((a, b))
                vertices.update((a, b))
            elif len(parts) == 1:
                vertices.add(int(parts[0]))
        return HardwareGraph(frozenset(vertices), frozenset(edges))

    def seed(self, index: int) -> int:
        return self.base_seed + index

    def instance(self, index: int, graph: HardwareGraph | None = None) -> IsingProblem:
        return random_ising(graph or self.graph(), self.couplers, self.biases, self.seed(index))

    def instances(self) -> list[IsingProblem]:
        graph = self.graph()
        return [self.instance(i, graph) for i in range(self.count)]

    def as_dict(self) -> dict:
        return {
            "couplers": list(self.couplers.values),
            "couplers_name": self.couplers.name,
            "biases": list(self.biases.values),
            "biases_name": self.biases.name,
            "count": self.count,
            "base_seed": self.base_seed,
            "chimera": list(self.chimera) if self.chimera else None,
            "edge_file": self.edge_file,
            "dead_fraction": self.dead_fraction,
        }


def biasrange_series(
    count: int,
    n_max: int = 10,
    base_seed: int = 0,
    chimera: tuple[int, int, int] = (4, 4, 4),
    couplers: CoefficientSet = NAMED_SETS["U5"],
) -> list[ProblemSetSpec]:
    """One set per ``n = 1..n_max`` with biases in ``{-n..n}`` and fixed couplers."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    return [
        ProblemSetSpec(couplers, CoefficientSet.uniform(n), count, base_seed, chimera)
        for n in range(1, n_max + 1)
    ]

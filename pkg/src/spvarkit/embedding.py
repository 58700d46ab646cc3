"""Hardware graphs, minor embeddings, chain repair, and reduction of embedded
problems in logical or physical space."""

from __future__ import annotations

import math
import time
from collections.abc import Mapping
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any

import networkx as nx
import numpy as np

from .ispvar import (
    IspvarOutcome,
    IspvarParams,
    StepReport,
    correlation_components,
    fix_by_correlation,
    ispvar,
)
from .model import FixAssignment, IsingProblem, SampleSet, _div, fix_variables, scale_to_range
from .preprocess import roof_duality_fix
from .samplers import Sampler, SamplerConfig, derive_seed, sample, sample_multigauge
from .spvar import elite_size, elite_trim, variable_means

__all__ = [
    "HardwareGraph",
    "Embedding",
    "EmbeddedParams",
    "EmbeddingError",
    "chimera_graph",
    "chimera_index",
    "clique_embedding",
    "validate_embedding",
    "embed_problem",
    "unembed_majority",
    "unembed_energy_min",
    "unembed_sampleset",
    "spvar_logical",
    "spvar_physical",
    "PhysicalOutcome",
]


class EmbeddingError(ValueError):
    pass


@dataclass(frozen=True)
class HardwareGraph:
    vertices: frozenset[int]
    edges: frozenset[tuple[int, int]]
    shape: tuple[int, int, int] | None = None
    dead: frozenset[int] = frozenset()

    def __post_init__(self):
        edges = frozenset((min(a, b), max(a, b)) for a, b in self.edges)
        if any(a not in self.vertices or b not in self.vertices for a, b in edges):
            raise ValueError("edge references a missing vertex")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "vertices", frozenset(self.vertices))

    def has_edge(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.edges

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(sorted(self.vertices))
        g.add_edges_from(sorted(self.edges))
        return g

    def to_json(self) -> dict:
        if self.shape is not None:
            m, n, t = self.shape
            return {"m": m, "n": n, "t": t, "dead": sorted(self.dead)}
        return {"vertices": sorted(self.vertices), "edges": [list(e) for e in sorted(self.edges)]}

    @classmethod
    def from_json(cls, doc: dict) -> HardwareGraph:
        if "m" in doc:
            full = chimera_graph(doc["m"], doc.get("n"), doc.get("t", 4))
            return full.without(doc.get("dead", ()))
        return cls(frozenset(doc["vertices"]), frozenset(tuple(e) for e in doc["edges"]))

    def without(self, dead) -> HardwareGraph:
        dead = frozenset(int(v) for v in dead)
        if not dead:
            return self
        return HardwareGraph(
            self.vertices - dead,
            frozenset(e for e in self.edges if e[0] not in dead and e[1] not in dead),
            self.shape,
            self.dead | dead,
        )


def chimera_index(i: int, j: int, u: int, k: int, n: int, t: int) -> int:
    """Linear label of qubit ``k`` on shore ``u`` (0 vertical, 1 horizontal) of cell ``(i, j)``."""
    return ((i * n + j) * 2 + u) * t + k


def chimera_graph(m: int, n: int | None = None, t: int = 4, dead_fraction: float = 0.0, seed: int = 0) -> HardwareGraph:
    """Chimera ``C(m, n, t)`` with an optional uniformly random dead-vertex mask."""
    n = m if n is None else n
    if min(m, n, t) < 1:
        raise ValueError("m, n and t must be positive")
    if not 0 <= dead_fraction < 1:
        raise ValueError("dead_fraction must lie in [0, 1)")
    edges = set()
    for i in range(m):
        for j in range(n):
            for a in range(t):
                for b in range(t):
                    edges.add((chimera_index(i, j, 0, a, n, t), chimera_index(i, j, 1, b, n, t)))
                if i + 1 < m:
                    edges.add((chimera_index(i, j, 0, a, n, t), chimera_index(i + 1, j, 0, a, n, t)))
                if j + 1 < n:
                    edges.add((chimera_index(i, j, 1, a, n, t), chimera_index(i, j + 1, 1, a, n, t)))
    graph = HardwareGraph(frozenset(range(2 * t * m * n)), frozenset(edges), (m, n, t))
    if dead_fraction > 0:
        rng = np.random.default_rng(seed)
        count = int(round(dead_fraction * len(graph.vertices)))
        dead = rng.choice(len(graph.vertices), size=count, replace=False)
        graph = graph.without(int(v) for v in dead)
    return graph


@dataclass(frozen=True)
class Embedding:
    chains: dict[int, tuple[int, ...]]

    def __post_init__(self):
        object.__setattr__(
            self, "chains", {int(v): tuple(int(q) for q in c) for v, c in sorted(self.chains.items())}
        )

    @classmethod
    def identity(cls, variables) -> Embedding:
        return cls({v: (v,) for v in variables})

    @property
    def owner(self) -> dict[int, int]:
        return {q: v for v, chain in self.chains.items() for q in chain}

    def restricted(self, variables) -> Embedding:
        return Embedding({v: self.chains[v] for v in variables})

    def intra_edges(self, hardware: HardwareGraph, v: int) -> list[tuple[int, int]]:
        chain = self.chains[v]
        return [(a, b) for x, a in enumerate(chain) for b in chain[x + 1:] if hardware.has_edge(a, b)]

    def inter_edges(self, hardware: HardwareGraph, u: int, v: int) -> list[tuple[int, int]]:
        return [(a, b) for a in self.chains[u] for b in self.chains[v] if hardware.has_edge(a, b)]

    def to_json(self) -> dict:
        return {"chains": {str(v): list(c) for v, c in self.chains.items()}}

    @classmethod
    def from_json(cls, doc: dict) -> Embedding:
        return cls({int(v): tuple(c) for v, c in doc["chains"].items()})


def validate_embedding(embedding: Embedding, hardware: HardwareGraph, logical_edges=()) -> list[str]:
    """Problems with the embedding; an empty list means it is valid."""
    issues = []
    seen: dict[int, int] = {}
    for v, chain in embedding.chains.items():
        if not chain:
            issues.append(f"chain {v} is empty")
            continue
        for q in chain:
            if q not in hardware.vertices:
                issues.append(f"chain {v} uses missing vertex {q}")
            if q in seen:
                issues.append(f"vertex {q} shared by chains {seen[q]} and {v}")
            seen[q] = v
        sub = nx.Graph()
        sub.add_nodes_from(chain)
        sub.add_edges_from(embedding.intra_edges(hardware, v))
        if not nx.is_connected(sub):
            issues.append(f"chain {v} is not connected")
    for u, v in logical_edges:
        if u in embedding.chains and v in embedding.chains and not embedding.inter_edges(hardware, u, v):
            issues.append(f"no hardware edge between chains {u} and {v}")
    return issues


def clique_embedding(k: int, hardware: HardwareGraph) -> Embedding:
    """Deterministic native clique embedding on a defect-free Chimera graph.

    Variable ``p*t + q`` gets the horizontal qubits ``q`` of row ``p`` in
    columns ``0..p`` followed by the vertical qubits ``q`` of column ``p`` in
    rows ``p..M-1``, where ``M = ceil(k/t)``.  Every chain has ``M + 1``
    qubits (a lone variable gets one).
    """
    if hardware.shape is None or hardware.dead:
        raise EmbeddingError("clique embedding needs a full Chimera graph")
    m, n, t = hardware.shape
    if k < 1:
        raise EmbeddingError("clique size must be positive")
    size = math.ceil(k / t)
    if size > min(m, n):
        raise EmbeddingError(f"K_{k} needs at least C({size},{size},{t}); hardware is C({m},{n},{t})")
    if k == 1:
        return Embedding({0: (chimera_index(0, 0, 0, 0, n, t),)})
    chains = {}
    for v in range(k):
        p, q = divmod(v, t)
        horizontal = [chimera_index(p, j, 1, q, n, t) for j in range(p + 1)]
        vertical = [chimera_index(i, p, 0, q, n, t) for i in range(p, size)]
        chains[v] = tuple(horizontal + vertical)
    return Embedding(chains)


def embed_problem(
    logical: IsingProblem,
    embedding: Embedding,
    hardware: HardwareGraph,
    chain_strength: Any = 1,
) -> IsingProblem:
    """Physical problem: biases and couplers split equally, chains bound by ``-chain_strength``."""
    missing = [v for v in logical.variables if v not in embedding.chains]
    if missing:
        raise EmbeddingError(f"no chain for logical variables {missing[:10]}")
    h: dict[int, Any] = {}
    J: dict[tuple[int, int], Any] = {}
    for v in logical.variables:
        chain = embedding.chains[v]
        share = _div(logical.h[v], len(chain))
        for q in chain:
            h[q] = share
        for a, b in embedding.intra_edges(hardware, v):
            J[(a, b)] = -chain_strength
    for (u, v), c in logical.J.items():
        links = embedding.inter_edges(hardware, u, v)
        if not links:
            raise EmbeddingError(f"no hardware edge between chains {u} and {v}")
        share = _div(c, len(links))
        for a, b in links:
            J[(a, b)] = share
    return IsingProblem(h, J, logical.offset)


def intra_chain_edge_count(embedding: Embedding, hardware: HardwareGraph, variables=None) -> int:
    variables = embedding.chains if variables is None else variables
    return sum(len(embedding.intra_edges(hardware, v)) for v in variables)


def unembed_majority(physical: Mapping[int, int], embedding: Embedding) -> dict[int, int]:
    """Majority vote per chain; an exact tie goes to +1."""
    return {v: (1 if sum(physical[q] for q in chain) >= 0 else -1) for v, chain in embedding.chains.items()}


def unembed_energy_min(physical: Mapping[int, int], embedding: Embedding, logical: IsingProblem) -> dict[int, int]:
    """Greedy effective-field repair of broken chains.

    Unbroken chains are decided first.  Then, repeatedly, the undecided
    variable with the strongest field from its bias and decided neighbours is
    set against that field; a zero field falls back to the chain majority.
    """
    values: dict[int, int] = {}
    broken = []
    for v in logical.variables:
        spins = {physical[q] for q in embedding.chains[v]}
        if len(spins) == 1:
            values[v] = spins.pop()
        else:
            broken.append(v)
    adj = logical.adjacency
    fields = {v: logical.h[v] + sum(c * values[u] for u, c in adj[v].items() if u in values) for v in broken}
    while fields:
        v = max(fields, key=lambda x: (abs(fields[x]), -x))
        f = fields.pop(v)
        if f == 0:
            values[v] = 1 if sum(physical[q] for q in embedding.chains[v]) >= 0 else -1
        else:
            values[v] = -1 if f > 0 else 1
        for u, c in adj[v].items():
            if u in fields:
                fields[u] += c * values[v]
    return values


def unembed_sampleset(
    physical_samples: SampleSet, embedding: Embedding, logical: IsingProblem, method: str = "energy"
) -> SampleSet:
    """Map every physical solution to logical space and re-evaluate energies there."""
    cols = {q: k for k, q in enumerate(physical_samples.variables)}
    states = physical_samples.samples
    out = np.empty((states.shape[0], logical.num_variables), dtype=np.int8)
    broken_rows = np.zeros(states.shape[0], dtype=bool)
    for c, v in enumerate(logical.variables):
        idx = [cols[q] for q in embedding.chains[v]]
        total = states[:, idx].sum(axis=1, dtype=np.int64)
        out[:, c] = np.where(total >= 0, 1, -1)
        broken_rows |= np.abs(total) != len(idx)
    if method == "energy":
        for r in np.flatnonzero(broken_rows):
            config = dict(zip(physical_samples.variables, (int(s) for s in states[r])))
            fixed = unembed_energy_min(config, embedding, logical)
            out[r] = [fixed[v] for v in logical.variables]
    elif method != "majority":
        raise ValueError("method must be 'energy' or 'majority'")
    info = dict(physical_samples.info, unembedded=method, broken=int(broken_rows.sum()))
    return SampleSet.from_array(logical, out, info)


@dataclass(frozen=True)
class EmbeddedParams:
    """Settings for embedded problems.

    ``relaxed_feeds_majority`` selects the alternative reading in which
    relaxed-threshold candidates on incomplete chains still count toward the
    majority rule.
    """

    chain_strength: Any = 1
    majority_length_threshold: float = 0.51
    chain_fixing_threshold: float = 0.95
    absolute_min_length: int = 3
    chain_elite_threshold: float | None = None
    scale_bound: Any = Fraction(1, 2)
    relaxed_feeds_majority: bool = False

    def __post_init__(self):
        if self.chain_strength <= 0:
            raise ValueError("chain_strength must be positive")
        if not 0.5 < self.majority_length_threshold <= 1:
            raise ValueError("majority_length_threshold must lie in (0.5, 1]")
        if not 0 < self.chain_fixing_threshold <= 1:
            raise ValueError("chain_fixing_threshold must lie in (0, 1]")
        if self.absolute_min_length < 1:
            raise ValueError("absolute_min_length must be >= 1")


def _scaled(problem: IsingProblem, bound) -> IsingProblem:
    if bound is None or problem.max_abs_coefficient() == 0:
        return problem
    return scale_to_range(problem, bound)[0]


def spvar_logical(
    logical: IsingProblem,
    embedding: Embedding,
    hardware: HardwareGraph,
    config: SamplerConfig,
    params: IspvarParams,
    embedded: EmbeddedParams = EmbeddedParams(),
    sampler: Sampler = sample,
) -> IspvarOutcome:
    """ISPVAR in logical space.

    Every step embeds the current logical problem (scaled to
    ``embedded.scale_bound``), samples the physical problem, repairs broken
    chains by effective-field minimisation, and hands the logical sample to the
    usual step logic.
    """

    def draw(problem: IsingProblem, reads: int, seed: int) -> SampleSet:
        sub = embedding.restricted(problem.variables)
        physical = embed_problem(_scaled(problem, embedded.scale_bound), sub, hardware, embedded.chain_strength)
        drawn = sample_multigauge(physical, replace(config, reads=reads, seed=seed), params.num_gauges, sampler)
        return unembed_sampleset(drawn, sub, problem)

    return ispvar(logical, config, params, sampler, draw=draw)


@dataclass
class PhysicalOutcome:
    physical: IsingProblem
    reduced_physical: IsingProblem
    physical_assignment: FixAssignment
    logical_assignment: FixAssignment
    reduced_logical: IsingProblem
    reports: list[StepReport] = field(default_factory=list)


def _chain_rules(
    embedding: Embedding,
    fixed: Mapping[int, int],
    strict: Mapping[int, int],
    relaxed: Mapping[int, int],
    embedded: EmbeddedParams,
) -> tuple[dict[int, int], dict[int, int]]:
    """Relaxed whole-chain fixes and majority completions for one step."""
    known = {**fixed, **strict}
    relaxed_fix: dict[int, int] = {}
    for chain in embedding.chains.values():
        if len(chain) <= embedded.absolute_min_length:
            continue
        free = [q for q in chain if q not in known]
        if free and all(q in relaxed for q in free):
            relaxed_fix.update({q: relaxed[q] for q in free})
    known.update(relaxed_fix)
    tally_source = {**relaxed, **known} if embedded.relaxed_feeds_majority else known
    majority: dict[int, int] = {}
    for chain in embedding.chains.values():
        free = [q for q in chain if q not in known]
        if not free:
            continue
        for sign in (1, -1):
            agree = sum(1 for q in chain if tally_source.get(q) == sign)
            if agree / len(chain) > embedded.majority_length_threshold:
                majority.update({q: sign for q in free})
                break
    return relaxed_fix, majority


def spvar_physical(
    logical: IsingProblem,
    embedding: Embedding,
    hardware: HardwareGraph,
    config: SamplerConfig,
    params: IspvarParams,
    embedded: EmbeddedParams = EmbeddedParams(),
    sampler: Sampler = sample,
) -> PhysicalOutcome:
    """ISPVAR on physical qubits with the chain-majority and relaxed whole-chain rules.

    A logical variable is fixed once its whole chain is fixed, to the chain's
    majority value.
    """
    embedding = embedding.restricted(logical.variables)
    physical = embed_problem(_scaled(logical, embedded.scale_bound), embedding, hardware, embedded.chain_strength)
    current = physical
    phys_fix = FixAssignment()
    reports: list[StepReport] = []

    def apply(fixes: dict[int, int], tag: str) -> int:
        nonlocal current, phys_fix
        fixes = {q: s for q, s in fixes.items() if q in current}
        if not fixes:
            return 0
        reduced = fix_variables(current, fixes)
        phys_fix = phys_fix.merged(FixAssignment.from_values(fixes, tag, reduced.offset - current.offset))
        current = reduced
        return len(fixes)

    for k in range(1, params.num_steps + 1):
        if current.num_variables == 0:
            break
        t0 = time.perf_counter()
        rep = StepReport(k)
        if params.preprocess_first and params.enable_preprocess:
            rep.fixed_preprocess += apply(roof_duality_fix(current).fixed, "preprocess")
        seed = config.seed if k == 1 else derive_seed(config.seed, 0x5173, k)
        ss = sample_multigauge(current, replace(config, reads=params.sample_size, seed=seed), params.num_gauges, sampler)
        elite = elite_trim(ss, params.elite_thresholds[k - 1])
        rep.elite_size = len(elite)
        threshold = params.fixing_thresholds[k - 1]
        strict = {q: (1 if m > 0 else -1) for q, m in variable_means(elite).items() if abs(m) >= threshold - 1e-12}
        chain_elite = elite_trim(ss, embedded.chain_elite_threshold or params.elite_thresholds[k - 1])
        relaxed = {
            q: (1 if m > 0 else -1)
            for q, m in variable_means(chain_elite).items()
            if abs(m) >= embedded.chain_fixing_threshold - 1e-12 and q not in strict
        }
        relaxed_fix, majority = _chain_rules(embedding, phys_fix.values, strict, relaxed, embedded)
        rep.fixed_persistence = apply(strict, "persistence")
        rep.fixed_persistence += apply(relaxed_fix, "chain-relaxed")
        rep.fixed_persistence += apply(majority, "chain-majority")
        if params.enable_preprocess:
            before = current
            rd = roof_duality_fix(current)
            rep.fixed_preprocess += apply(rd.fixed, "preprocess")
            if (
                params.enable_correlation_fix
                and rd.fixed
                and elite_size(len(ss), params.correlation_elite_threshold) >= params.min_correlation_samples
            ):
                graph = correlation_components(ss, params.correlation_elite_threshold, params.correlation_threshold)
                rep.fixed_correlation = apply(fix_by_correlation(graph, rd, before).values, "correlation")
        rep.remaining = current.num_variables
        rep.elapsed = time.perf_counter() - t0
        reports.append(rep)

    logical_values = {}
    for v, chain in embedding.chains.items():
        if all(q in phys_fix.values for q in chain):
            total = sum(phys_fix.values[q] for q in chain)
            logical_values[v] = 1 if total >= 0 else -1
    reduced_logical = fix_variables(logical, logical_values)
    logical_fix = FixAssignment.from_values(logical_values, "chain-majority", reduced_logical.offset - logical.offset)
    return PhysicalOutcome(physical, current, phys_fix, logical_fix, reduced_logical, reports)

"""Ising/QUBO data model.

Problems are immutable mappings of biases and couplers over dense integer
variable ids.  Coefficients keep their input type: integers and
:class:`fractions.Fraction` stay exact through every transform here, floats
stay floats.  Vectorised float views for the samplers are built lazily.
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from numbers import Rational
from typing import Any

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _cc

__all__ = [
    "DomainMismatchError",
    "IsingProblem",
    "QuboProblem",
    "SampleSet",
    "FixAssignment",
    "PROVENANCE_TAGS",
    "energy",
    "fix_variables",
    "to_qubo",
    "from_qubo",
    "apply_gauge",
    "ungauge",
    "connected_components",
    "scale_to_range",
]

PROVENANCE_TAGS = (
    "persistence",
    "correlation",
    "preprocess",
    "chain-majority",
    "chain-relaxed",
    "z2-prefix",
)


class DomainMismatchError(ValueError):
    """A configuration or gauge does not cover the problem's variables."""


def _is_rational(x) -> bool:
    return isinstance(x, Rational) and not isinstance(x, bool)


def _exact(x):
    # Collapse integral Fractions back to int so round trips compare equal.
    if isinstance(x, Fraction) and x.denominator == 1:
        return int(x)
    return x


def _div(a, b):
    if _is_rational(a) and _is_rational(b):
        return _exact(Fraction(a) / Fraction(b))
    return a / b


def _canonical_pair(i: int, j: int) -> tuple[int, int]:
    if i == j:
        raise ValueError(f"self-coupler on variable {i} is not allowed")
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True, eq=True)
class IsingProblem:
    """Ising Hamiltonian ``offset + sum h_i s_i + sum J_ij s_i s_j``.

    ``h`` always holds an entry for every variable (zeros are kept), ``J`` is
    keyed by ``(i, j)`` with ``i < j`` and never stores a zero coupler.
    Treat both dicts as read-only.
    """

    h: dict[int, Any] = field(default_factory=dict)
    J: dict[tuple[int, int], Any] = field(default_factory=dict)
    offset: Any = 0
    variables: tuple[int, ...] = ()

    def __post_init__(self):
        couplers: dict[tuple[int, int], Any] = {}
        for (i, j), value in dict(self.J).items():
            key = _canonical_pair(int(i), int(j))
            couplers[key] = couplers.get(key, 0) + value
        names = {int(v) for v in self.variables}
        names.update(int(v) for v in self.h)
        for i, j in couplers:
            names.update((i, j))
        couplers = {k: v for k, v in couplers.items() if v != 0}
        if any(v < 0 for v in names):
            raise ValueError("variable ids must be non-negative integers")
        h = {v: 0 for v in sorted(names)}
        h.update({int(v): b for v, b in dict(self.h).items()})

        object.__setattr__(self, "variables", tuple(sorted(names)))
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "J", dict(sorted(couplers.items())))

    __hash__ = None  # type: ignore[assignment]

    @property
    def num_variables(self) -> int:
        return len(self.variables)

    def __len__(self) -> int:
        return len(self.variables)

    def __contains__(self, v) -> bool:
        return v in self.h

    @cached_property
    def adjacency(self) -> dict[int, dict[int, Any]]:
        adj: dict[int, dict[int, Any]] = {v: {} for v in self.variables}
        for (i, j), value in self.J.items():
            adj[i][j] = value
            adj[j][i] = value
        return adj

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    @property
    def is_zero_bias(self) -> bool:
        return all(b == 0 for b in self.h.values())

    @property
    def is_exact(self) -> bool:
        """True when every coefficient is an integer or a Fraction."""
        return all(_is_rational(x) for x in self.coefficients()) and _is_rational(self.offset)

    def coefficients(self) -> Iterator[Any]:
        yield from self.h.values()
        yield from self.J.values()

    def max_abs_coefficient(self) -> float:
        return max((abs(x) for x in self.coefficients()), default=0)

    def index(self) -> dict[int, int]:
        return self._arrays["index"]

    @cached_property
    def _arrays(self) -> dict[str, Any]:
        index = {v: k for k, v in enumerate(self.variables)}
        n = len(index)
        h = np.array([float(self.h[v]) for v in self.variables], dtype=np.float64)
        if self.J:
            ei = np.array([index[i] for i, _ in self.J], dtype=np.int64)
            ej = np.array([index[j] for _, j in self.J], dtype=np.int64)
            jv = np.array([float(x) for x in self.J.values()], dtype=np.float64)
        else:
            ei = ej = np.zeros(0, dtype=np.int64)
            jv = np.zeros(0, dtype=np.float64)
        # symmetric CSR adjacency for the kernels
        rows = np.concatenate([ei, ej])
        cols = np.concatenate([ej, ei])
        vals = np.concatenate([jv, jv])
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, rows + 1, 1)
        indptr = np.cumsum(indptr)
        return {
            "index": index,
            "h": h,
            "ei": ei,
            "ej": ej,
            "jv": jv,
            "indptr": indptr,
            "indices": cols.astype(np.int64),
            "data": vals,
            "offset": float(self.offset),
        }

    def energies(self, samples: np.ndarray) -> np.ndarray:
        """Float energies of a ``(k, n)`` spin array ordered like ``variables``."""
        a = self._arrays
        s = np.asarray(samples, dtype=np.float64)
        if s.ndim != 2 or s.shape[1] != len(self.variables):
            raise DomainMismatchError(
                f"expected samples of width {len(self.variables)}, got shape {s.shape}"
            )
        e = np.full(s.shape[0], a["offset"])
        if len(self.variables):
            e += s @ a["h"]
        if len(a["jv"]):
            e += (s[:, a["ei"]] * s[:, a["ej"]]) @ a["jv"]
        return e


@dataclass(frozen=True, eq=True)
class QuboProblem:
    """QUBO ``offset + sum_{i<=j} Q_ij x_i x_j`` over ``x in {0, 1}``.

    Diagonal entries are keyed ``(i, i)``; off-diagonal entries are folded into
    ``(i, j)`` with ``i < j``.
    """

    Q: dict[tuple[int, int], Any] = field(default_factory=dict)
    offset: Any = 0
    variables: tuple[int, ...] = ()

    def __post_init__(self):
        q: dict[tuple[int, int], Any] = {}
        names = {int(v) for v in self.variables}
        for (i, j), value in dict(self.Q).items():
            i, j = int(i), int(j)
            key = (i, j) if i <= j else (j, i)
            q[key] = q.get(key, 0) + value
            names.update((i, j))
        q = {k: v for k, v in q.items() if v != 0 or k[0] == k[1]}
        object.__setattr__(self, "variables", tuple(sorted(names)))
        object.__setattr__(self, "Q", dict(sorted(q.items())))

    __hash__ = None  # type: ignore[assignment]

    def energy(self, x: Mapping[int, int]) -> Any:
        try:
            return self.offset + sum(v * x[i] * x[j] for (i, j), v in self.Q.items())
        except KeyError as exc:
            raise DomainMismatchError(f"assignment is missing variable {exc.args[0]}") from None


def energy(problem: IsingProblem, config: Mapping[int, int]) -> Any:
    """Exact energy of a spin configuration (arithmetic in the coefficient type)."""
    try:
        spins = {v: config[v] for v in problem.variables}
    except KeyError as exc:
        raise DomainMismatchError(f"configuration is missing variable {exc.args[0]}") from None
    total = problem.offset
    for v, b in problem.h.items():
        total += b * spins[v]
    for (i, j), c in problem.J.items():
        total += c * spins[i] * spins[j]
    return total


@dataclass(frozen=True)
class FixAssignment:
    """Accumulated variable fixes with a provenance tag per variable.

    ``offset`` is the energy moved into the reduced problem's constant by the
    fixes, when known.
    """

    values: dict[int, int] = field(default_factory=dict)
    provenance: dict[int, str] = field(default_factory=dict)
    offset: Any = 0

    def __post_init__(self):
        for v, s in self.values.items():
            if s not in (-1, 1):
                raise ValueError(f"variable {v} fixed to {s!r}; spins must be +/-1")
        missing = set(self.values) - set(self.provenance)
        if missing:
            raise ValueError(f"no provenance for {sorted(missing)}")
        bad = set(self.provenance.values()) - set(PROVENANCE_TAGS)
        if bad:
            raise ValueError(f"unknown provenance tags {sorted(bad)}")

    @classmethod
    def from_values(cls, values: Mapping[int, int], tag: str, offset=0) -> FixAssignment:
        values = {int(v): int(s) for v, s in values.items()}
        return cls(values, {v: tag for v in values}, offset)

    def __len__(self) -> int:
        return len(self.values)

    def __contains__(self, v) -> bool:
        return v in self.values

    def __iter__(self):
        return iter(self.values)

    def count(self, *tags: str) -> int:
        return sum(1 for t in self.provenance.values() if t in tags)

    def merged(self, other: FixAssignment) -> FixAssignment:
        overlap = set(self.values) & set(other.values)
        if overlap:
            raise ValueError(f"variables fixed twice: {sorted(overlap)}")
        return FixAssignment(
            {**self.values, **other.values},
            {**self.provenance, **other.provenance},
            self.offset + other.offset,
        )


def fix_variables(problem: IsingProblem, assignment: FixAssignment | Mapping[int, int]) -> IsingProblem:
    """Fix some spins and fold their contributions into biases and the offset."""
    values = assignment.values if isinstance(assignment, FixAssignment) else dict(assignment)
    if not values:
        return problem
    unknown = [v for v in values if v not in problem.h]
    if unknown:
        raise ValueError(f"assignment references unknown variables {sorted(unknown)}")

    h = {v: b for v, b in problem.h.items() if v not in values}
    J = {}
    offset = problem.offset
    for v, s in values.items():
        offset += problem.h[v] * s
    for (i, j), c in problem.J.items():
        fi, fj = i in values, j in values
        if fi and fj:
            offset += c * values[i] * values[j]
        elif fi:
            h[j] += c * values[i]
        elif fj:
            h[i] += c * values[j]
        else:
            J[(i, j)] = c
    return IsingProblem(h, J, offset)


def to_qubo(problem: IsingProblem) -> QuboProblem:
    """Map spins to bits with ``s = 2x - 1``."""
    Q: dict[tuple[int, int], Any] = {(v, v): 2 * b for v, b in problem.h.items()}
    offset = problem.offset - sum(problem.h.values(), 0)
    for (i, j), c in problem.J.items():
        Q[(i, j)] = 4 * c
        Q[(i, i)] -= 2 * c
        Q[(j, j)] -= 2 * c
        offset += c
    return QuboProblem(Q, offset, problem.variables)


def from_qubo(qubo: QuboProblem) -> IsingProblem:
    """Inverse of :func:`to_qubo` via ``x = (s + 1) / 2``."""
    h: dict[int, Any] = {v: 0 for v in qubo.variables}
    J: dict[tuple[int, int], Any] = {}
    offset = qubo.offset
    for (i, j), q in qubo.Q.items():
        if i == j:
            half = _div(q, 2)
            h[i] += half
            offset += half
        else:
            quarter = _div(q, 4)
            J[(i, j)] = quarter
            h[i] += quarter
            h[j] += quarter
            offset += quarter
    return IsingProblem({v: _exact(b) for v, b in h.items()}, J, _exact(offset), qubo.variables)


def _check_gauge(variables: Iterable[int], gauge: Mapping[int, int]) -> None:
    missing = [v for v in variables if v not in gauge]
    if missing:
        raise DomainMismatchError(f"gauge does not cover variables {missing[:10]}")


def apply_gauge(problem: IsingProblem, gauge: Mapping[int, int]) -> IsingProblem:
    """Spin-reversal transform ``h_i -> g_i h_i``, ``J_ij -> g_i g_j J_ij``."""
    _check_gauge(problem.variables, gauge)
    h = {v: gauge[v] * b for v, b in problem.h.items()}
    J = {(i, j): gauge[i] * gauge[j] * c for (i, j), c in problem.J.items()}
    return IsingProblem(h, J, problem.offset, problem.variables)


def ungauge(config: Mapping[int, int], gauge: Mapping[int, int]) -> dict[int, int]:
    _check_gauge(config, gauge)
    return {v: gauge[v] * s for v, s in config.items()}


def connected_components(problem: IsingProblem) -> list[IsingProblem]:
    """Split into coupler-connected components, ordered by smallest variable.

    The offset rides on the first component only.
    """
    n = problem.num_variables
    if n == 0:
        return [problem]
    a = problem._arrays
    graph = coo_matrix((np.ones(len(a["ei"])), (a["ei"], a["ej"])), shape=(n, n))
    _, labels = _cc(graph, directed=False)
    groups: dict[int, list[int]] = {}
    for v, lab in zip(problem.variables, labels):
        groups.setdefault(int(lab), []).append(v)
    parts = sorted(groups.values(), key=lambda vs: vs[0])
    owner = {v: k for k, vs in enumerate(parts) for v in vs}
    couplers: list[dict] = [{} for _ in parts]
    for (i, j), c in problem.J.items():
        couplers[owner[i]][(i, j)] = c
    return [
        IsingProblem({v: problem.h[v] for v in vs}, couplers[k], problem.offset if k == 0 else 0)
        for k, vs in enumerate(parts)
    ]


def scale_to_range(problem: IsingProblem, bound) -> tuple[IsingProblem, Any]:
    """Divide every coefficient (and the offset) so the largest magnitude is ``bound``.

    Returns the scaled problem and the divisor.  Rational coefficients with a
    rational ``bound`` are scaled exactly.
    """
    if bound <= 0:
        raise ValueError("bound must be positive")
    peak = problem.max_abs_coefficient()
    if peak == 0:
        return problem, 1
    factor = _div(peak, bound)
    if factor == 1:
        return problem, 1
    h = {v: _div(b, factor) for v, b in problem.h.items()}
    J = {k: _div(c, factor) for k, c in problem.J.items()}
    return IsingProblem(h, J, _div(problem.offset, factor), problem.variables), factor


@dataclass(frozen=True)
class SampleSet:
    """Energy-sorted spin samples.

    ``samples`` is a ``(k, n)`` int8 array whose columns follow ``variables``.
    Sorting is stable, so equal energies keep their draw order.
    """

    variables: tuple[int, ...]
    samples: np.ndarray
    energies: np.ndarray
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        energies = np.asarray(self.energies, dtype=np.float64).reshape(-1)
        samples = np.asarray(self.samples, dtype=np.int8)
        if samples.size != energies.shape[0] * len(self.variables):
            raise ValueError("samples and energies differ in length")
        samples = samples.reshape(energies.shape[0], len(self.variables))
        order = np.argsort(energies, kind="stable")
        object.__setattr__(self, "variables", tuple(int(v) for v in self.variables))
        object.__setattr__(self, "samples", samples[order])
        object.__setattr__(self, "energies", energies[order])

    @classmethod
    def from_array(cls, problem: IsingProblem, samples, info: dict | None = None) -> SampleSet:
        samples = np.asarray(samples, dtype=np.int8)
        if samples.ndim != 2:
            raise ValueError("samples must be a 2-D array")
        return cls(problem.variables, samples, problem.energies(samples), dict(info or {}))

    @classmethod
    def from_configs(
        cls, problem: IsingProblem, configs: Iterable[Mapping[int, int]], info: dict | None = None
    ) -> SampleSet:
        rows = []
        configs = list(configs)
        for c in configs:
            try:
                rows.append([c[v] for v in problem.variables])
            except KeyError as exc:
                raise DomainMismatchError(f"configuration is missing variable {exc.args[0]}") from None
        array = np.array(rows, dtype=np.int8).reshape(len(configs), problem.num_variables)
        return cls.from_array(problem, array, info)

    def __len__(self) -> int:
        return self.samples.shape[0]

    def __iter__(self) -> Iterator[tuple[dict[int, int], float]]:
        for row, e in zip(self.samples, self.energies):
            yield dict(zip(self.variables, (int(s) for s in row))), float(e)

    @property
    def first(self) -> tuple[dict[int, int], float]:
        if not len(self):
            raise ValueError("empty sample set")
        return dict(zip(self.variables, (int(s) for s in self.samples[0]))), float(self.energies[0])

    def column(self, v: int) -> np.ndarray:
        return self.samples[:, self.variables.index(v)]

    def head(self, k: int) -> SampleSet:
        return SampleSet(self.variables, self.samples[:k], self.energies[:k], dict(self.info))

    def relabel_columns(self, variables: tuple[int, ...]) -> SampleSet:
        """Reorder columns to ``variables`` (must be a permutation)."""
        if variables == self.variables:
            return self
        pos = {v: k for k, v in enumerate(self.variables)}
        cols = [pos[v] for v in variables]
        return SampleSet(variables, self.samples[:, cols], self.energies, dict(self.info))

    @staticmethod
    def concatenate(sets: list[SampleSet], info: dict | None = None) -> SampleSet:
        if not sets:
            raise ValueError("nothing to concatenate")
        variables = sets[0].variables
        sets = [s.relabel_columns(variables) for s in sets]
        return SampleSet(
            variables,
            np.concatenate([s.samples for s in sets]),
            np.concatenate([s.energies for s in sets]),
            dict(info or {}),
        )

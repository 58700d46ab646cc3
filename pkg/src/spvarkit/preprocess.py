"""Classical persistency fixing: roof duality on the implication network.

The Ising problem is written as a QUBO posiform over literals ``x_i`` and
``~x_i``.  Each quadratic term ``a*u*v`` becomes the arc pair ``u -> ~v``,
``v -> ~u`` and each linear term ``a*u`` the pair ``x0 -> ~u``, ``u -> ~x0``,
with ``x0`` the source and ``~x0`` the sink.  After a maximum flow, any set of
literals that is closed under residual arcs and free of complementary pairs
can be set to true without raising the optimum.  Literals reachable from the
source are strongly persistent; further strongly connected components are
added greedily in reverse topological order (weak persistency).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import networkx as nx

from .model import FixAssignment, IsingProblem, fix_variables, to_qubo

__all__ = ["PersistencyResult", "roof_duality_fix", "field_dominance_fix"]

SOURCE, SINK = 0, 1


@dataclass(frozen=True)
class PersistencyResult:
    fixed: dict[int, int] = field(default_factory=dict)
    strong: frozenset = frozenset()
    lower_bound: Any = None
    residual_variables: int = 0

    @property
    def method(self) -> str:
        return "strong" if set(self.fixed) <= self.strong else "weak"

    def as_assignment(self) -> FixAssignment:
        return FixAssignment.from_values(self.fixed, "preprocess")


def _literal(k: int, positive: bool) -> int:
    return 2 + 2 * k + (0 if positive else 1)


def _integral_scale(values) -> int | None:
    """Common multiplier that makes every rational coefficient an integer."""
    den = 1
    for x in values:
        if isinstance(x, bool) or not isinstance(x, (int, Fraction)):
            return None
        if isinstance(x, Fraction):
            den = den * x.denominator // math.gcd(den, x.denominator)
    return den


def _network(problem: IsingProblem):
    qubo = to_qubo(problem)
    index = {v: k for k, v in enumerate(problem.variables)}
    scale = _integral_scale(list(qubo.Q.values()) + [qubo.offset])
    if scale is None:
        conv = float
        scale = 1
    else:
        conv = int
    linear = {v: 0 for v in problem.variables}
    quad = []
    for (i, j), a in qubo.Q.items():
        a = conv(a * scale)
        if i == j:
            linear[i] += a
        else:
            quad.append((i, j, a))
    const = conv(qubo.offset * scale)

    caps: dict[tuple[int, int], Any] = {}

    def arc(u, v, c):
        caps[(u, v)] = caps.get((u, v), 0) + c

    for i, j, a in quad:
        if a > 0:
            u, v = _literal(index[i], True), _literal(index[j], True)
        else:
            # a*xi*xj = a*xi + |a|*xi*~xj
            linear[i] += a
            u, v = _literal(index[i], True), _literal(index[j], False)
            a = -a
        arc(u, v ^ 1, a)
        arc(v, u ^ 1, a)
    for i, a in linear.items():
        if a == 0:
            continue
        if a > 0:
            u = _literal(index[i], True)
        else:
            const += a
            u = _literal(index[i], False)
            a = -a
        arc(SOURCE, u ^ 1, a)
        arc(u, SINK, a)
    return caps, const, scale, index


def roof_duality_fix(problem: IsingProblem) -> PersistencyResult:
    """Variables whose value is persistent under roof duality.

    Capacities are doubled rather than halved so integral inputs keep an
    integral flow.  The returned ``lower_bound`` is the roof-dual bound on the
    minimum energy.
    """
    n = problem.num_variables
    if n == 0:
        return PersistencyResult(lower_bound=problem.offset)
    caps, const, scale, index = _network(problem)
    exact = isinstance(const, int)

    graph = nx.DiGraph()
    graph.add_nodes_from(range(2 * n + 2))
    for (u, v), c in caps.items():
        graph.add_edge(u, v, capacity=c)
    value, flow = nx.maximum_flow(graph, SOURCE, SINK)

    def phi(u, v):
        return flow[u].get(v, 0) if (u, v) in caps else 0

    eps = 0 if exact else 1e-9 * max(1.0, sum(abs(c) for c in caps.values()))
    residual: dict[int, set[int]] = {u: set() for u in range(2 * n + 2)}
    # symmetrised flow: (phi(u,v) + phi(~v,~u)) / 2, everything kept doubled
    pairs = set(caps) | {(v, u) for (u, v) in caps}
    for u, v in pairs:
        c2 = 2 * caps.get((u, v), 0)
        forward = phi(u, v) + phi(v ^ 1, u ^ 1)
        backward = phi(v, u) + phi(u ^ 1, v ^ 1)
        if c2 - forward + backward > eps:
            residual[u].add(v)

    reach = {SOURCE}
    stack = [SOURCE]
    while stack:
        u = stack.pop()
        for w in residual[u]:
            if w not in reach:
                reach.add(w)
                stack.append(w)
    if SINK in reach:  # pragma: no cover - impossible after a maximum flow
        raise RuntimeError("sink reachable in residual network")

    truth: dict[int, bool] = {}
    for u in reach - {SOURCE}:
        truth[u] = True
        truth[u ^ 1] = False
    strong_nodes = set(truth)

    rest = [u for u in range(2, 2 * n + 2) if u not in truth]
    sub = nx.DiGraph()
    sub.add_nodes_from(rest)
    sub.add_edges_from((u, v) for u in rest for v in residual[u] if v > SINK and v not in truth)
    cond = nx.condensation(sub)
    members = cond.graph["mapping"]
    comp_nodes = {c: cond.nodes[c]["members"] for c in cond.nodes}
    state: dict[int, str] = {}  # component -> "true" | "false" | "blocked"
    for c in reversed(list(nx.topological_sort(cond))):
        if state.get(c) == "false":
            continue
        nodes = comp_nodes[c]
        mate = members[next(iter(nodes)) ^ 1]
        if mate == c or any(state.get(d) != "true" for d in cond.successors(c)):
            state.setdefault(c, "blocked")
            continue
        state[c] = "true"
        state[mate] = "false"
        for u in nodes:
            truth[u] = True
            truth[u ^ 1] = False

    variables = problem.variables
    fixed: dict[int, int] = {}
    strong = set()
    for k, v in enumerate(variables):
        pos = _literal(k, True)
        if pos in truth:
            fixed[v] = 1 if truth[pos] else -1
            if pos in strong_nodes:
                strong.add(v)
    bound = const + value / 2 if not exact else Fraction(2 * const + value, 2)
    bound = bound / scale
    if isinstance(bound, Fraction) and bound.denominator == 1:
        bound = int(bound)
    return PersistencyResult(fixed, frozenset(strong), bound, n - len(fixed))


def field_dominance_fix(problem: IsingProblem) -> PersistencyResult:
    """``s_i = -sign(h_i)`` wherever ``|h_i|`` strictly exceeds ``sum_j |J_ij|``."""
    fixed = {}
    for v, b in problem.h.items():
        total = sum(abs(c) for c in problem.adjacency[v].values())
        if abs(b) > total:
            fixed[v] = -1 if b > 0 else 1
    return PersistencyResult(fixed, frozenset(fixed), None, problem.num_variables - len(fixed))


def apply_persistency(problem: IsingProblem, result: PersistencyResult) -> IsingProblem:
    return fix_variables(problem, result.fixed)

"""Shared oracles and instance factories.

The brute-force helpers here are deliberately naive (itertools, exact Python
arithmetic) so they share no code with the library's kernels.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
import pytest

from spvarkit.model import IsingProblem

SETS = {
    "U2": [-2, -1, 0, 1, 2],
    "U5": list(range(-5, 6)),
    "U10": list(range(-10, 11)),
    "S28": [-28, -19, -13, -8, 8, 13, 19, 28],
}


def random_problem(rng, n, density=0.4, values=SETS["U5"], biases=None, offset=0) -> IsingProblem:
    couplers = [v for v in values if v != 0]
    biases = values if biases is None else biases
    h = {i: int(rng.choice(biases)) for i in range(n)}
    J = {}
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < density:
                J[(i, j)] = int(rng.choice(couplers))
    return IsingProblem(h, J, offset, tuple(range(n)))


def brute_energy(problem: IsingProblem, config) -> object:
    total = problem.offset
    for v, b in problem.h.items():
        total += b * config[v]
    for (i, j), c in problem.J.items():
        total += c * config[i] * config[j]
    return total


def brute_spectrum(problem: IsingProblem) -> list[tuple[dict, object]]:
    vs = problem.variables
    out = []
    for spins in itertools.product((-1, 1), repeat=len(vs)):
        config = dict(zip(vs, spins))
        out.append((config, brute_energy(problem, config)))
    return out


def brute_min(problem: IsingProblem):
    """Minimum energy and the list of all minimising configurations."""
    spectrum = brute_spectrum(problem)
    best = min(e for _, e in spectrum)
    return best, [c for c, e in spectrum if e == best]


def recursive_min(problem: IsingProblem):
    """Second enumerator: depth-first with exact arithmetic; returns (min, count)."""
    vs = list(problem.variables)
    best = [None, 0]

    def go(k, config):
        if k == len(vs):
            e = brute_energy(problem, config)
            if best[0] is None or e < best[0]:
                best[0], best[1] = e, 1
            elif e == best[0]:
                best[1] += 1
            return
        for s in (-1, 1):
            config[vs[k]] = s
            go(k + 1, config)
        del config[vs[k]]

    go(0, {})
    return best[0], best[1]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_problem():
    # 6 variables, hand-picked so the optimum is unique
    h = {0: 1, 1: -2, 2: 0, 3: 3, 4: -1, 5: 2}
    J = {(0, 1): -2, (1, 2): 1, (2, 3): -3, (3, 4): 2, (4, 5): -1, (0, 5): 4, (1, 4): -1}
    return IsingProblem(h, J)


@pytest.fixture
def fraction_problem():
    return IsingProblem({0: Fraction(1, 3), 1: Fraction(-2, 7)}, {(0, 1): Fraction(5, 6)}, Fraction(1, 2))


def enumerate_energies(problem: IsingProblem) -> np.ndarray:
    """Energies of all 2^n states (bit k of the row index is variable k), term by term."""
    vs = problem.variables
    n = len(vs)
    codes = np.arange(1 << n, dtype=np.int64)
    spins = {v: np.where((codes >> k) & 1, 1, -1) for k, v in enumerate(vs)}
    total = np.full(1 << n, float(problem.offset))
    for v, b in problem.h.items():
        total += float(b) * spins[v]
    for (i, j), c in problem.J.items():
        total += float(c) * spins[i] * spins[j]
    return total


def chimera_cell_problem(rng, values=SETS["U5"]) -> IsingProblem:
    """Two K_{4,4} cells joined by four inter-cell couplers: 16 variables."""
    couplers = [v for v in values if v != 0]
    J = {}
    for a in range(4):
        for b in range(4, 8):
            J[(a, b)] = int(rng.choice(couplers))
    for a in range(8, 12):
        for b in range(12, 16):
            J[(a, b)] = int(rng.choice(couplers))
    for k in range(4):
        J[(k, 8 + k)] = int(rng.choice(couplers))
    h = {i: int(rng.choice(values)) for i in range(16)}
    return IsingProblem(h, J)
